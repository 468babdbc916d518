#include "odesig/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "odesig/errors.hpp"

namespace odesig {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

json dims_json(const Dims& d) {
    return json{{"filters", d.filters}, {"d_k", d.d_k}, {"d_g", d.d_g},   {"d_u", d.d_u},
                {"d_z", d.d_z},         {"d_h", d.d_h}, {"kernel", d.kernel}};
}

Dims dims_from(const json& j) {
    Dims d;
    d.filters = j.at("filters").get<int>();
    d.d_k = j.at("d_k").get<int>();
    d.d_g = j.at("d_g").get<int>();
    d.d_u = j.at("d_u").get<int>();
    d.d_z = j.at("d_z").get<int>();
    d.d_h = j.at("d_h").get<int>();
    d.kernel = j.at("kernel").get<int>();
    return d;
}

json ablations_json(const Ablations& a) {
    return json{{"no_positional_encoder", a.no_positional_encoder},
                {"no_temporal_graph", a.no_temporal_graph},
                {"no_spatial_graph", a.no_spatial_graph}};
}

Ablations ablations_from(const json& j) {
    Ablations a;
    a.no_positional_encoder = j.at("no_positional_encoder").get<bool>();
    a.no_temporal_graph = j.at("no_temporal_graph").get<bool>();
    a.no_spatial_graph = j.at("no_spatial_graph").get<bool>();
    return a;
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const TrainConfig& cfg,
                     const CheckpointMeta& meta) {
    json j;
    j["format"] = "odesig-checkpoint";
    j["version"] = 1;
    j["provenance"] = {{"config_hash", meta.config_hash}, {"seed", meta.seed}};
    j["config"] = {{"learning_rate", cfg.learning_rate},
                   {"epochs", cfg.epochs},
                   {"kl_weight", cfg.kl_weight},
                   {"batch_size", cfg.batch_size},
                   {"seed", cfg.seed},
                   {"substeps", cfg.substeps},
                   {"spatial_threshold", cfg.spatial_threshold},
                   {"dims", dims_json(cfg.dims)},
                   {"ablations", ablations_json(cfg.ablations)}};
    json tensors = json::object();
    params.for_each_tensor([&](const std::string& name, const Array2& t) {
        tensors[name] = {{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
    });
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    if (j.value("format", "") != "odesig-checkpoint")
        throw ParseError("checkpoint " + path + ": unrecognized format");

    Checkpoint ck;
    const json& cj = j.at("config");
    ck.config.learning_rate = cj.at("learning_rate").get<double>();
    ck.config.epochs = cj.at("epochs").get<int>();
    ck.config.kl_weight = cj.at("kl_weight").get<double>();
    ck.config.batch_size = cj.at("batch_size").get<int>();
    ck.config.seed = cj.at("seed").get<uint64_t>();
    ck.config.substeps = cj.at("substeps").get<int>();
    ck.config.spatial_threshold = cj.at("spatial_threshold").get<double>();
    ck.config.dims = dims_from(cj.at("dims"));
    ck.config.ablations = ablations_from(cj.at("ablations"));
    ck.meta.config_hash = j.at("provenance").at("config_hash").get<std::string>();
    ck.meta.seed = j.at("provenance").at("seed").get<uint64_t>();

    ck.params = ModelParams::init(ck.config.dims, ck.config.ablations, ck.config.seed);
    const json& tensors = j.at("tensors");
    ck.params.for_each_tensor([&](const std::string& name, Array2& t) {
        const json& tj = tensors.at(name);
        if (tj.at("rows").get<int>() != t.rows || tj.at("cols").get<int>() != t.cols)
            throw ParseError("checkpoint " + path + ": tensor " + name + " has shape " +
                             std::to_string(tj.at("rows").get<int>()) + "x" +
                             std::to_string(tj.at("cols").get<int>()) + ", expected " +
                             t.shape_str());
        t.data = tj.at("data").get<std::vector<double>>();
    });
    return ck;
}

} // namespace odesig
