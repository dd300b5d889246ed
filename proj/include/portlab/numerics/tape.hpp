#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "portlab/numerics/linalg.hpp"

namespace portlab::ad {

class Tape;

/// Handle into a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

/// Records matrix-valued primitives so the chain rule can be replayed in
/// reverse. Nodes are appended after their inputs, so reverse tape order is a
/// valid topological order. One tape per training step; never shared across
/// threads.
class Tape {
public:
    Var constant(Matrix v) { return push(std::move(v), {}); }

    Var param(Matrix v) { return push(std::move(v), {}); }

    const Matrix& value(Var x) const { return nodes_[static_cast<size_t>(x.id)].value; }

    const Matrix& grad(Var x) const { return nodes_[static_cast<size_t>(x.id)].grad; }

    /// Accumulates d(loss)/d(node) for every node. `loss` must be 1x1.
    void backward(Var loss) {
        auto& ln = nodes_[static_cast<size_t>(loss.id)];
        if (ln.value.rows() != 1 || ln.value.cols() != 1)
            throw ShapeError("tape backward: loss must be a 1x1 scalar");
        for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
        ln.grad(0, 0) = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<size_t>(i)];
            if (n.backward) n.backward(*this);
        }
    }

    int next_id() const { return static_cast<int>(nodes_.size()); }
    size_t size() const { return nodes_.size(); }

    Matrix& grad_mut(int id) { return nodes_[static_cast<size_t>(id)].grad; }
    const Matrix& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }

    Var push(Matrix v, std::function<void(Tape&)> back) {
        require_finite(v, "tape node");
        nodes_.push_back(Node{std::move(v), Matrix(), std::move(back)});
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> backward;
    };
    std::vector<Node> nodes_;
};

namespace detail {
inline Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr)
        throw ArgumentError("tape op: operands from different tapes");
    return *a.tape;
}
inline void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives. Each records a closure pulling from its own grad and pushing
// into its inputs' grads. Output id is known before push (next_id).
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    if (t.value(a).cols() != t.value(b).rows())
        throw ShapeError("ad::matmul: inner dimensions differ");
    const int ai = a.id, bi = b.id, oi = t.next_id();
    return t.push(t.value(a) * t.value(b), [ai, bi, oi](Tape& tp) {
        const Matrix& g = tp.grad_mut(oi);
        tp.grad_mut(ai) += g * tp.val(bi).transpose();
        tp.grad_mut(bi) += tp.val(ai).transpose() * g;
    });
}

inline Var transpose(Var a) {
    Tape& t = *a.tape;
    const int ai = a.id, oi = t.next_id();
    return t.push(t.value(a).transpose(),
                  [ai, oi](Tape& tp) { tp.grad_mut(ai) += tp.grad_mut(oi).transpose(); });
}

inline Var add(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::check_same_shape(t.value(a), t.value(b), "ad::add");
    const int ai = a.id, bi = b.id, oi = t.next_id();
    return t.push(t.value(a) + t.value(b), [ai, bi, oi](Tape& tp) {
        tp.grad_mut(ai) += tp.grad_mut(oi);
        tp.grad_mut(bi) += tp.grad_mut(oi);
    });
}

inline Var sub(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::check_same_shape(t.value(a), t.value(b), "ad::sub");
    const int ai = a.id, bi = b.id, oi = t.next_id();
    return t.push(t.value(a) - t.value(b), [ai, bi, oi](Tape& tp) {
        tp.grad_mut(ai) += tp.grad_mut(oi);
        tp.grad_mut(bi) -= tp.grad_mut(oi);
    });
}

inline Var neg(Var a) {
    Tape& t = *a.tape;
    const int ai = a.id, oi = t.next_id();
    return t.push(-t.value(a), [ai, oi](Tape& tp) { tp.grad_mut(ai) -= tp.grad_mut(oi); });
}

inline Var scale(Var a, double c) {
    Tape& t = *a.tape;
    const int ai = a.id, oi = t.next_id();
    return t.push(c * t.value(a),
                  [ai, oi, c](Tape& tp) { tp.grad_mut(ai) += c * tp.grad_mut(oi); });
}

inline Var add_scalar(Var a, double c) {
    Tape& t = *a.tape;
    const int ai = a.id, oi = t.next_id();
    return t.push((t.value(a).array() + c).matrix(),
                  [ai, oi](Tape& tp) { tp.grad_mut(ai) += tp.grad_mut(oi); });
}

inline Var hadamard(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::check_same_shape(t.value(a), t.value(b), "ad::hadamard");
    const int ai = a.id, bi = b.id, oi = t.next_id();
    return t.push(t.value(a).cwiseProduct(t.value(b)), [ai, bi, oi](Tape& tp) {
        tp.grad_mut(ai) += tp.grad_mut(oi).cwiseProduct(tp.val(bi));
        tp.grad_mut(bi) += tp.grad_mut(oi).cwiseProduct(tp.val(ai));
    });
}

inline Var square(Var a) { return hadamard(a, a); }

/// a + r broadcast over rows; r is 1 x cols (bias add).
inline Var add_rowvec(Var a, Var r) {
    Tape& t = detail::same_tape(a, r);
    const Matrix& av = t.value(a);
    const Matrix& rv = t.value(r);
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw ShapeError("ad::add_rowvec: need 1 x cols");
    Matrix out = av.rowwise() + rv.row(0);
    const int ai = a.id, ri = r.id, oi = t.next_id();
    return t.push(std::move(out), [ai, ri, oi](Tape& tp) {
        tp.grad_mut(ai) += tp.grad_mut(oi);
        tp.grad_mut(ri) += tp.grad_mut(oi).colwise().sum();
    });
}

/// a .* r broadcast over rows; r is 1 x cols.
inline Var mul_rowvec(Var a, Var r) {
    Tape& t = detail::same_tape(a, r);
    const Matrix& av = t.value(a);
    const Matrix& rv = t.value(r);
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw ShapeError("ad::mul_rowvec: need 1 x cols");
    Matrix out = (av.array().rowwise() * rv.row(0).array()).matrix();
    const int ai = a.id, ri = r.id, oi = t.next_id();
    return t.push(std::move(out), [ai, ri, oi](Tape& tp) {
        const Matrix& g = tp.grad_mut(oi);
        tp.grad_mut(ai) += (g.array().rowwise() * tp.val(ri).row(0).array()).matrix();
        tp.grad_mut(ri) += g.cwiseProduct(tp.val(ai)).colwise().sum();
    });
}

/// Rows of a divided by the column vector c (r x 1), entrywise per row.
inline Var div_colvec(Var a, Var c) {
    Tape& t = detail::same_tape(a, c);
    const Matrix& av = t.value(a);
    const Matrix& cv = t.value(c);
    if (cv.cols() != 1 || cv.rows() != av.rows()) throw ShapeError("ad::div_colvec: need rows x 1");
    Matrix out = (av.array().colwise() / cv.col(0).array()).matrix();
    const int ai = a.id, ci = c.id, oi = t.next_id();
    return t.push(std::move(out), [ai, ci, oi](Tape& tp) {
        const Matrix& g = tp.grad_mut(oi);
        const auto& cva = tp.val(ci).col(0).array();
        tp.grad_mut(ai) += (g.array().colwise() / cva).matrix();
        tp.grad_mut(ci) -=
            (g.cwiseProduct(tp.val(ai)).rowwise().sum().array() / (cva * cva)).matrix();
    });
}

inline Var tanh(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).array().tanh().matrix();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        const Matrix& y = tp.val(oi);
        tp.grad_mut(ai).array() += tp.grad_mut(oi).array() * (1.0 - y.array() * y.array());
    });
}

inline Var relu(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).cwiseMax(0.0);
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).array() +=
            tp.grad_mut(oi).array() * (tp.val(ai).array() > 0.0).cast<double>();
    });
}

inline Var exp(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).array().exp().matrix();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).array() += tp.grad_mut(oi).array() * tp.val(oi).array();
    });
}

inline Var log(Var a) {
    Tape& t = *a.tape;
    if ((t.value(a).array() <= 0.0).any()) throw NumericError("ad::log: non-positive input");
    Matrix out = t.value(a).array().log().matrix();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).array() += tp.grad_mut(oi).array() / tp.val(ai).array();
    });
}

inline Var sqrt(Var a) {
    Tape& t = *a.tape;
    if ((t.value(a).array() < 0.0).any()) throw NumericError("ad::sqrt: negative input");
    Matrix out = t.value(a).array().sqrt().matrix();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).array() += tp.grad_mut(oi).array() * 0.5 / tp.val(oi).array();
    });
}

/// Row-wise softmax. Backward: dX_r = y_r .* (dY_r - <dY_r, y_r>).
inline Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double m = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        const Matrix& y = tp.val(oi);
        const Matrix& g = tp.grad_mut(oi);
        Matrix& ga = tp.grad_mut(ai);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double dot = g.row(r).dot(y.row(r));
            ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
        }
    });
}

inline Var rowwise_sum(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).rowwise().sum();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).colwise() += tp.grad_mut(oi).col(0);
    });
}

inline Var colwise_sum(Var a) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).colwise().sum();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).rowwise() += tp.grad_mut(oi).row(0);
    });
}

inline Var sum_all(Var a) {
    Tape& t = *a.tape;
    Matrix out(1, 1);
    out(0, 0) = t.value(a).sum();
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi](Tape& tp) {
        tp.grad_mut(ai).array() += tp.grad_mut(oi)(0, 0);
    });
}

inline Var mean_all(Var a) {
    Tape& t = *a.tape;
    const double n = static_cast<double>(t.value(a).size());
    Matrix out(1, 1);
    out(0, 0) = t.value(a).sum() / n;
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi, n](Tape& tp) {
        tp.grad_mut(ai).array() += tp.grad_mut(oi)(0, 0) / n;
    });
}

/// Broadcast-add a 1x1 scalar var to every entry.
inline Var add_bcast(Var a, Var s) {
    Tape& t = detail::same_tape(a, s);
    if (t.value(s).rows() != 1 || t.value(s).cols() != 1)
        throw ShapeError("ad::add_bcast: scalar operand must be 1x1");
    Matrix out = (t.value(a).array() + t.value(s)(0, 0)).matrix();
    const int ai = a.id, si = s.id, oi = t.next_id();
    return t.push(std::move(out), [ai, si, oi](Tape& tp) {
        tp.grad_mut(ai) += tp.grad_mut(oi);
        tp.grad_mut(si)(0, 0) += tp.grad_mut(oi).sum();
    });
}

inline Var slice_cols(Var a, int start, int count) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    if (start < 0 || count < 0 || start + count > av.cols())
        throw ShapeError("ad::slice_cols: range out of bounds");
    Matrix out = av.middleCols(start, count);
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi, start, count](Tape& tp) {
        tp.grad_mut(ai).middleCols(start, count) += tp.grad_mut(oi);
    });
}

inline Var slice_rows(Var a, int start, int count) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    if (start < 0 || count < 0 || start + count > av.rows())
        throw ShapeError("ad::slice_rows: range out of bounds");
    Matrix out = av.middleRows(start, count);
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi, start, count](Tape& tp) {
        tp.grad_mut(ai).middleRows(start, count) += tp.grad_mut(oi);
    });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ArgumentError("ad::concat_cols: no inputs");
    Tape& t = *parts.front().tape;
    Eigen::Index rows = t.value(parts.front()).rows();
    Eigen::Index cols = 0;
    std::vector<int> ids;
    std::vector<int> widths;
    for (const Var& p : parts) {
        detail::same_tape(parts.front(), p);
        if (t.value(p).rows() != rows) throw ShapeError("ad::concat_cols: row counts differ");
        ids.push_back(p.id);
        widths.push_back(static_cast<int>(t.value(p).cols()));
        cols += t.value(p).cols();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, t.value(p).cols()) = t.value(p);
        at += t.value(p).cols();
    }
    const int oi = t.next_id();
    return t.push(std::move(out), [ids, widths, oi](Tape& tp) {
        int at = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            tp.grad_mut(ids[k]) += tp.grad_mut(oi).middleCols(at, widths[k]);
            at += widths[k];
        }
    });
}

/// Row-major reshape (documented flattening order for parameter packing).
inline Var reshape(Var a, int rows, int cols) {
    Tape& t = *a.tape;
    const Matrix& av = t.value(a);
    if (static_cast<Eigen::Index>(rows) * cols != av.size())
        throw ShapeError("ad::reshape: element count differs");
    Matrix out(rows, cols);
    {
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < av.rows(); ++r)
            for (Eigen::Index c = 0; c < av.cols(); ++c, ++k) out(k / cols, k % cols) = av(r, c);
    }
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi, cols](Tape& tp) {
        const Matrix& g = tp.grad_mut(oi);
        Matrix& ga = tp.grad_mut(ai);
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < ga.rows(); ++r)
            for (Eigen::Index c = 0; c < ga.cols(); ++c, ++k) ga(r, c) += g(k / cols, k % cols);
    });
}

/// Clamp with zero gradient outside [lo, hi].
inline Var clip(Var a, double lo, double hi) {
    Tape& t = *a.tape;
    Matrix out = t.value(a).cwiseMax(lo).cwiseMin(hi);
    const int ai = a.id, oi = t.next_id();
    return t.push(std::move(out), [ai, oi, lo, hi](Tape& tp) {
        const Matrix& x = tp.val(ai);
        tp.grad_mut(ai).array() +=
            tp.grad_mut(oi).array() *
            ((x.array() >= lo).cast<double>() * (x.array() <= hi).cast<double>());
    });
}

/// Elementwise min; subgradient goes to the smaller operand (ties -> a).
inline Var min_elem(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::check_same_shape(t.value(a), t.value(b), "ad::min_elem");
    Matrix out = t.value(a).cwiseMin(t.value(b));
    const int ai = a.id, bi = b.id, oi = t.next_id();
    return t.push(std::move(out), [ai, bi, oi](Tape& tp) {
        const Matrix& av = tp.val(ai);
        const Matrix& bv = tp.val(bi);
        const Matrix& g = tp.grad_mut(oi);
        Eigen::ArrayXXd take_a = (av.array() <= bv.array()).cast<double>();
        tp.grad_mut(ai).array() += g.array() * take_a;
        tp.grad_mut(bi).array() += g.array() * (1.0 - take_a);
    });
}

/// Per-row layer normalization with learnable gain/bias (1 x cols each).
/// Population variance over the row; documented epsilon inside the sqrt.
inline Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5) {
    Tape& t = detail::same_tape(x, gain);
    detail::same_tape(x, bias);
    const Matrix& xv = t.value(x);
    const Eigen::Index d = xv.cols();
    if (t.value(gain).rows() != 1 || t.value(gain).cols() != d || t.value(bias).rows() != 1 ||
        t.value(bias).cols() != d)
        throw ShapeError("ad::layer_norm_rows: gain/bias must be 1 x cols");

    Matrix xhat(xv.rows(), d);
    Vector inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mu = xv.row(r).mean();
        const double var = (xv.row(r).array() - mu).square().mean();
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
    }
    Matrix out = ((xhat.array().rowwise() * t.value(gain).row(0).array()).rowwise() +
                  t.value(bias).row(0).array())
                     .matrix();
    const int xi = x.id, gi = gain.id, bi = bias.id, oi = t.next_id();
    return t.push(std::move(out), [xi, gi, bi, oi, xhat, inv_std](Tape& tp) {
        using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
        const Matrix& g = tp.grad_mut(oi);
        const RowArray gainrow = tp.val(gi).row(0).array();
        const double d = static_cast<double>(xhat.cols());
        tp.grad_mut(gi) += g.cwiseProduct(xhat).colwise().sum();
        tp.grad_mut(bi) += g.colwise().sum();
        Matrix& gx = tp.grad_mut(xi);
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
            const RowArray xr = xhat.row(r).array();
            const RowArray dxhat = g.row(r).array() * gainrow;
            const double s1 = dxhat.sum();
            const double s2 = (dxhat * xr).sum();
            gx.row(r).array() += inv_std[r] * (dxhat - s1 / d - xr * (s2 / d));
        }
    });
}

}  // namespace portlab::ad
