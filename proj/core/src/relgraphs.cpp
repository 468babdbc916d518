#include "odesig/relgraphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "odesig/errors.hpp"

namespace odesig {

RoiAtlas load_atlas_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open atlas file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("atlas " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ParseError("atlas " + path + ": expected a JSON array");
    RoiAtlas atlas;
    for (const auto& e : j) {
        RoiAtlas::Entry entry;
        entry.label = e.at("label").get<std::string>();
        entry.x = e.at("x").get<double>();
        entry.y = e.at("y").get<double>();
        entry.z = e.at("z").get<double>();
        if (!std::isfinite(entry.x) || !std::isfinite(entry.y) || !std::isfinite(entry.z))
            throw ParseError("atlas " + path + ": non-finite coordinate for " + entry.label);
        atlas.entries.push_back(std::move(entry));
    }
    return atlas;
}

void save_atlas_json(const std::string& path, const RoiAtlas& atlas) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : atlas.entries)
        j.push_back({{"label", e.label}, {"x", e.x}, {"y", e.y}, {"z", e.z}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write atlas file: " + path);
    out << j.dump(2) << "\n";
}

Array2 build_temporal_graph(const Array2& h) {
    for (int i = 0; i < h.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < h.cols; ++j) s += h.at(i, j) * h.at(i, j);
        if (s == 0.0)
            throw ContractError("build_temporal_graph: degenerate (zero-norm) embedding for ROI " +
                                std::to_string(i));
    }
    Array2 a = row_cosine(h);
    for (double& v : a.data) v = v > 0.0 ? v : 0.0;
    return a;
}

Var build_temporal_graph(Tape& t, Var h) {
    const Array2& hv = t.value(h);
    for (int i = 0; i < hv.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < hv.cols; ++j) s += hv.at(i, j) * hv.at(i, j);
        if (s == 0.0)
            throw ContractError("build_temporal_graph: degenerate (zero-norm) embedding for ROI " +
                                std::to_string(i));
    }
    return relu(t.row_cosine(h));
}

Array2 build_spatial_graph(const RoiAtlas& atlas, double r) {
    if (r <= 0.0) throw ConfigError("build_spatial_graph: threshold must be positive");
    const int n = atlas.size();
    if (n < 2) throw ConfigError("build_spatial_graph: need at least 2 ROIs");
    Array2 a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const auto& p = atlas.entries[i];
            const auto& q = atlas.entries[j];
            const double d = std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                       (p.z - q.z) * (p.z - q.z));
            if (d <= r) {
                a.at(i, j) = 1.0;
                a.at(j, i) = 1.0;
            }
        }
    }
    return a;
}

double default_spatial_threshold(const RoiAtlas& atlas) {
    const int n = atlas.size();
    if (n < 2) throw ConfigError("default_spatial_threshold: need at least 2 ROIs");
    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto& p = atlas.entries[i];
            const auto& q = atlas.entries[j];
            dists.push_back(std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                      (p.z - q.z) * (p.z - q.z)));
        }
    std::sort(dists.begin(), dists.end());
    const size_t idx = static_cast<size_t>(0.2 * (dists.size() - 1));
    return dists[idx];
}

namespace {

void check_adjacency(const Array2& a) {
    if (a.rows != a.cols)
        throw DimensionError("gcn_layer: adjacency must be square, got " + a.shape_str());
    for (double v : a.data)
        if (v < 0.0) throw ContractError("gcn_layer: adjacency has negative entries");
}

} // namespace

Var gcn_layer(Tape& t, Var h, Var a, Var w) {
    const Array2& av = t.value(a);
    check_adjacency(av);
    if (t.value(h).rows != av.rows)
        throw DimensionError("gcn_layer: features " + t.value(h).shape_str() +
                             " vs adjacency " + av.shape_str());
    const int n = av.rows;
    Var a_hat = a + t.constant(Array2::eye(n));
    Var deg = matmul(a_hat, t.constant(Array2(n, 1, 1.0)));
    Var dinv = t.pow_scalar(deg, -0.5);
    Var norm = mul(a_hat, matmul(dinv, transpose(dinv)));
    return relu(matmul(matmul(norm, h), w));
}

Array2 gcn_layer(const Array2& h, const Array2& a, const Array2& w) {
    Tape t;
    return t.value(gcn_layer(t, t.constant(h), t.constant(a), t.constant(w)));
}

Var fuse(Tape& t, Var h_temporal, Var h_spatial, Var w_fuse, Var b_fuse) {
    Var cat = t.concat_cols({h_temporal, h_spatial});
    if (t.value(cat).cols != t.value(w_fuse).rows)
        throw DimensionError("fuse: concat " + t.value(cat).shape_str() + " vs weight " +
                             t.value(w_fuse).shape_str());
    return t.add_rowvec(matmul(cat, w_fuse), b_fuse);
}

Array2 fuse(const Array2& h_temporal, const Array2& h_spatial, const GcnParams& p) {
    Tape t;
    return t.value(fuse(t, t.constant(h_temporal), t.constant(h_spatial), t.constant(p.w_fuse),
                        t.constant(p.b_fuse)));
}

Var zero_diagonal(Tape& t, Var a) {
    const int n = t.value(a).rows;
    Array2 mask(n, n, 1.0);
    for (int i = 0; i < n; ++i) mask.at(i, i) = 0.0;
    return mul(a, t.constant(mask));
}

} // namespace odesig
