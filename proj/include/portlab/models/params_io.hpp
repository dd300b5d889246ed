#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "portlab/data/features.hpp"
#include "portlab/numerics/linalg.hpp"

namespace portlab {

/// Shared on-disk model container: JSON with a layer-size header, named
/// tensors in row-major order, the input scaler, and model-specific scalar
/// config. Keys serialize sorted, so identical training runs produce
/// byte-identical files.
struct ParamContainer {
    std::string model;                   // "ae" | "gnn" | "tf" | "drl" | "ae_drl"
    std::vector<int> layer_sizes;
    std::map<std::string, Matrix> tensors;
    std::map<std::string, double> config;
    Scaler scaler;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = data;
    return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError("param container: tensor size mismatch");
    Matrix m(rows, cols);
    size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    std::vector<double> data(v.data(), v.data() + v.size());
    return nlohmann::json(data);
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace detail

inline void save_params(const std::string& path, const ParamContainer& c) {
    nlohmann::json j;
    j["format"] = "portlab-params-v1";
    j["model"] = c.model;
    j["layer_sizes"] = c.layer_sizes;
    j["config"] = c.config;
    nlohmann::json tensors;
    for (const auto& [name, m] : c.tensors) tensors[name] = detail::matrix_to_json(m);
    j["tensors"] = tensors;
    nlohmann::json sc;
    sc["columns"] = c.scaler.columns;
    sc["mean"] = detail::vector_to_json(c.scaler.mean);
    sc["std"] = detail::vector_to_json(c.scaler.stddev);
    sc["dropped"] = c.scaler.dropped;
    sc["kept_indices"] = c.scaler.kept_indices;
    j["scaler"] = sc;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write param container: " + path);
    out << j.dump(1) << '\n';
}

inline ParamContainer load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open param container: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("param container " + path + ": " + e.what());
    }
    if (j.value("format", "") != "portlab-params-v1")
        throw ParseError("param container " + path + ": unknown format");
    ParamContainer c;
    c.model = j.at("model").get<std::string>();
    c.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.config = j.at("config").get<std::map<std::string, double>>();
    for (const auto& [name, tj] : j.at("tensors").items())
        c.tensors[name] = detail::matrix_from_json(tj);
    const auto& sc = j.at("scaler");
    c.scaler.columns = sc.at("columns").get<std::vector<std::string>>();
    c.scaler.mean = detail::vector_from_json(sc.at("mean"));
    c.scaler.stddev = detail::vector_from_json(sc.at("std"));
    c.scaler.dropped = sc.at("dropped").get<std::vector<std::string>>();
    c.scaler.kept_indices = sc.at("kept_indices").get<std::vector<int>>();
    return c;
}

}  // namespace portlab
