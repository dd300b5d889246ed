#pragma once

#include <utility>
#include <vector>

#include "portlab/numerics/grad_check.hpp"
#include "portlab/numerics/rng.hpp"
#include "portlab/numerics/tape.hpp"

namespace portlab {

/// Ordered view over a model's parameter matrices. Flattening is row-major
/// per matrix, matrices in registration order; this is also the container
/// serialization order.
class ParamPack {
public:
    void add(Matrix* m) { mats_.push_back(m); }

    int size() const {
        int n = 0;
        for (const Matrix* m : mats_) n += static_cast<int>(m->size());
        return n;
    }

    Vector flatten() const {
        Vector v(size());
        int at = 0;
        for (const Matrix* m : mats_)
            for (Eigen::Index r = 0; r < m->rows(); ++r)
                for (Eigen::Index c = 0; c < m->cols(); ++c) v[at++] = (*m)(r, c);
        return v;
    }

    void assign(const Vector& v) {
        if (v.size() != size()) throw ShapeError("ParamPack::assign: size mismatch");
        int at = 0;
        for (Matrix* m : mats_)
            for (Eigen::Index r = 0; r < m->rows(); ++r)
                for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = v[at++];
    }

    std::vector<std::pair<int, int>> shapes() const {
        std::vector<std::pair<int, int>> s;
        s.reserve(mats_.size());
        for (const Matrix* m : mats_)
            s.emplace_back(static_cast<int>(m->rows()), static_cast<int>(m->cols()));
        return s;
    }

    /// Tape views of every matrix, sliced from one flat 1 x P param var.
    std::vector<ad::Var> tape_views(ad::Tape& tape, ad::Var flat) const {
        return unpack_params(tape, flat, shapes());
    }

private:
    std::vector<Matrix*> mats_;
};

enum class Activation { Tanh, Linear, Relu };

/// Plain multi-layer perceptron over row-batches: X is batch x in.
/// Hidden layers use `act`; the output layer is linear.
struct Mlp {
    std::vector<Matrix> w;  // in_i x out_i
    std::vector<Matrix> b;  // 1 x out_i
    Activation act = Activation::Tanh;

    static Mlp make(const std::vector<int>& sizes, Activation act, Pcg32& rng) {
        Mlp net;
        net.act = act;
        for (size_t i = 0; i + 1 < sizes.size(); ++i) {
            Matrix wi(sizes[i], sizes[i + 1]);
            const double s = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
            for (Eigen::Index r = 0; r < wi.rows(); ++r)
                for (Eigen::Index c = 0; c < wi.cols(); ++c) wi(r, c) = s * rng.normal();
            net.w.push_back(std::move(wi));
            net.b.push_back(Matrix::Zero(1, sizes[i + 1]));
        }
        return net;
    }

    static Mlp zeros(const std::vector<int>& sizes, Activation act) {
        Mlp net;
        net.act = act;
        for (size_t i = 0; i + 1 < sizes.size(); ++i) {
            net.w.push_back(Matrix::Zero(sizes[i], sizes[i + 1]));
            net.b.push_back(Matrix::Zero(1, sizes[i + 1]));
        }
        return net;
    }

    int layers() const { return static_cast<int>(w.size()); }

    Matrix forward(const Matrix& x) const {
        Matrix h = x;
        for (int i = 0; i < layers(); ++i) {
            h = ((h * w[i]).rowwise() + b[i].row(0)).eval();
            if (i + 1 < layers()) h = activate(h);
        }
        return h;
    }

    /// Taped forward; `vars` must hold the views for this net in pack order
    /// (w0, b0, w1, b1, ...) starting at `offset`.
    ad::Var forward(ad::Tape& tape, ad::Var x, const std::vector<ad::Var>& vars,
                    size_t offset = 0) const {
        ad::Var h = x;
        for (int i = 0; i < layers(); ++i) {
            h = ad::add_rowvec(ad::matmul(h, vars[offset + 2 * i]), vars[offset + 2 * i + 1]);
            if (i + 1 < layers()) h = activate(tape, h);
        }
        return h;
    }

    void register_params(ParamPack& pack) {
        for (int i = 0; i < layers(); ++i) {
            pack.add(&w[i]);
            pack.add(&b[i]);
        }
    }

private:
    Matrix activate(const Matrix& h) const {
        switch (act) {
            case Activation::Tanh: return h.array().tanh().matrix();
            case Activation::Relu: return h.cwiseMax(0.0);
            case Activation::Linear: return h;
        }
        return h;
    }
    ad::Var activate(ad::Tape&, ad::Var h) const {
        switch (act) {
            case Activation::Tanh: return ad::tanh(h);
            case Activation::Relu: return ad::relu(h);
            case Activation::Linear: return h;
        }
        return h;
    }
};

}  // namespace portlab
