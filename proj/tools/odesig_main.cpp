// odesig: continuous reconstruction of irregular multivariate signals.
// Subcommands: generate, train, reconstruct, evaluate, runtime. Every command
// is driven by a JSON config file; a few common knobs are exposed as flags
// that override the file. Exit codes: 0 success, 1 runtime failure, 2 usage.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "odesig/checkpoint.hpp"
#include "odesig/datagen.hpp"
#include "odesig/errors.hpp"
#include "odesig/evalnet.hpp"
#include "odesig/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace odesig;

namespace {

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> epochs;
    std::optional<int> samples;
    std::optional<std::string> kind;
    std::optional<int> steps;
    std::optional<int> seeds;
    std::optional<int> repetitions;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    return j;
}

uint64_t master_seed(const json& cfg, const CliOverrides& ov) {
    if (ov.seed) return *ov.seed;
    if (!cfg.contains("seed"))
        throw ConfigError("config needs a top-level \"seed\" (or pass --seed)");
    return cfg.at("seed").get<uint64_t>();
}

void ensure_out_dir(const std::string& dir) {
    fs::path p(dir);
    if (fs::exists(p)) return;
    if (!p.parent_path().empty() && !fs::exists(p.parent_path()))
        throw IoError("parent of output directory does not exist: " + dir);
    std::error_code ec;
    fs::create_directory(p, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

Dims parse_dims(const json& j) {
    Dims d;
    d.filters = j.value("filters", d.filters);
    d.d_k = j.value("d_k", d.d_k);
    d.d_g = j.value("d_g", d.d_g);
    d.d_u = j.value("d_u", d.d_u);
    d.d_z = j.value("d_z", d.d_z);
    d.d_h = j.value("d_h", d.d_h);
    d.kernel = j.value("kernel", d.kernel);
    return d;
}

Ablations parse_ablations(const json& j) {
    Ablations a;
    a.no_positional_encoder = j.value("no_positional_encoder", false);
    a.no_temporal_graph = j.value("no_temporal_graph", false);
    a.no_spatial_graph = j.value("no_spatial_graph", false);
    return a;
}

TrainConfig parse_train_config(const json& j, uint64_t seed) {
    TrainConfig t;
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.epochs = j.value("epochs", t.epochs);
    t.kl_weight = j.value("kl_weight", t.kl_weight);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.substeps = j.value("substeps", t.substeps);
    t.spatial_threshold = j.value("spatial_threshold", t.spatial_threshold);
    t.threads = j.value("threads", t.threads);
    if (j.contains("dims")) t.dims = parse_dims(j.at("dims"));
    if (j.contains("ablations")) t.ablations = parse_ablations(j.at("ablations"));
    t.seed = seed;
    return t;
}

GeneratorSpec parse_generator(const json& j, uint64_t seed) {
    GeneratorSpec g;
    g.samples = j.value("samples", g.samples);
    g.rois = j.value("rois", g.rois);
    g.duration = j.value("duration", g.duration);
    g.min_components = j.value("min_components", g.min_components);
    g.max_components = j.value("max_components", g.max_components);
    g.amp_lo = j.value("amp_lo", g.amp_lo);
    g.amp_hi = j.value("amp_hi", g.amp_hi);
    g.omega_lo = j.value("omega_lo", g.omega_lo);
    g.omega_hi = j.value("omega_hi", g.omega_hi);
    g.shared_pool_size = j.value("shared_pool_size", g.shared_pool_size);
    g.shared_fraction = j.value("shared_fraction", g.shared_fraction);
    g.coord_extent = j.value("coord_extent", g.coord_extent);
    g.cluster_spread = j.value("cluster_spread", g.cluster_spread);
    g.seed = seed;
    return g;
}

// ---------------------------------------------------------------------------

int cmd_generate(const json& cfg, const CliOverrides& ov, const std::string& hash) {
    const uint64_t seed = master_seed(cfg, ov);
    if (!cfg.contains("generate")) throw ConfigError("config lacks a \"generate\" section");
    const json& gj = cfg.at("generate");
    GeneratorSpec spec = parse_generator(gj, seed);
    if (ov.samples) spec.samples = *ov.samples;
    std::string out_dir = gj.value("out_dir", std::string("."));
    if (ov.out) out_dir = *ov.out;
    ensure_out_dir(out_dir);

    Dataset ds = generate(spec);
    if (gj.contains("corrupt")) {
        const json& cj = gj.at("corrupt");
        const std::string kind = cj.at("kind").get<std::string>();
        if (kind == "missing-interp" || kind == "missing-extrap") {
            const int steps = ov.steps ? *ov.steps : cj.value("steps", 3);
            const MissingMode mode = kind == "missing-interp" ? MissingMode::Interpolation
                                                              : MissingMode::Extrapolation;
            for (SignalSample& s : ds.samples) s = corrupt_missing(s, mode, steps, seed);
        } else if (kind == "offset") {
            for (SignalSample& s : ds.samples)
                s = corrupt_offset(s, cj.value("offset", 0.1));
        } else if (kind == "frequency") {
            const Rational p = parse_rational(cj.value("period", std::string("1/2")));
            for (SignalSample& s : ds.samples) s = corrupt_frequency(s, p);
        } else if (kind == "rq1-mixed") {
            Rq1Config rq1;
            rq1.missing_fraction = cj.value("missing_fraction", rq1.missing_fraction);
            rq1.misaligned_fraction = cj.value("misaligned_fraction", rq1.misaligned_fraction);
            rq1.jitter = cj.value("jitter", rq1.jitter);
            apply_rq1_corruption(ds, rq1, seed);
        } else {
            throw ConfigError("unknown corruption kind '" + kind +
                              "' (valid: missing-interp, missing-extrap, offset, frequency, "
                              "rq1-mixed)");
        }
    }

    std::optional<SplitIndices> sp;
    if (gj.value("split", true)) sp = split(static_cast<int>(ds.samples.size()), seed);

    const fs::path dir(out_dir);
    write_signals_csv((dir / "signals.csv").string(), ds.samples, hash, seed);
    write_manifest_json((dir / "manifest.json").string(), ds, sp ? &*sp : nullptr, hash);
    save_atlas_json((dir / "atlas.json").string(), ds.atlas);
    std::cout << "wrote " << (dir / "signals.csv").string() << " ("
              << ds.samples.size() << " samples, " << ds.spec.rois << " ROIs)\n";
    return 0;
}

int cmd_train(const json& cfg, const CliOverrides& ov, const std::string& hash) {
    const uint64_t seed = master_seed(cfg, ov);
    if (!cfg.contains("train")) throw ConfigError("config lacks a \"train\" section");
    const json& tj = cfg.at("train");

    Dataset ds;
    ds.samples = read_signals_csv(tj.at("signals").get<std::string>());
    SplitIndices sp;
    bool have_split = false;
    if (tj.contains("manifest")) {
        apply_manifest_json(tj.at("manifest").get<std::string>(), ds, &sp);
        have_split = !sp.train.empty();
    }
    if (!have_split) sp = split(static_cast<int>(ds.samples.size()), seed);
    const RoiAtlas atlas = load_atlas_json(tj.at("atlas").get<std::string>());

    TrainConfig tc = parse_train_config(tj, seed);
    if (ov.epochs) tc.epochs = *ov.epochs;

    std::vector<SignalSample> train_set, val_set;
    for (int i : sp.train) train_set.push_back(ds.samples[i]);
    for (int i : sp.val) val_set.push_back(ds.samples[i]);

    const TrainResult r = train(train_set, val_set, atlas, tc);

    std::string ck_path = tj.value("checkpoint", std::string("checkpoint.json"));
    if (ov.out) ck_path = *ov.out;
    save_checkpoint(ck_path, r.params, tc, {hash, seed});

    if (tj.contains("loss_trace")) {
        std::ofstream out(tj.at("loss_trace").get<std::string>());
        if (!out) throw IoError("cannot write loss trace");
        out << "# odesig-loss-trace config_hash=" << hash << " seed=" << seed << "\n";
        out << "epoch,train_loss,val_rmse\n";
        char buf[96];
        for (size_t e = 0; e < r.train_loss.size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g\n", e, r.train_loss[e],
                          r.val_rmse[e]);
            out << buf;
        }
    }
    std::cout << "trained " << tc.epochs << " epochs, best validation RMSE "
              << (r.best_epoch >= 0 ? r.val_rmse[r.best_epoch] : 0.0) << " at epoch "
              << r.best_epoch << "; checkpoint " << ck_path << "\n";
    return 0;
}

int cmd_reconstruct(const json& cfg, const CliOverrides& ov, const std::string& hash) {
    const uint64_t seed = master_seed(cfg, ov);
    if (!cfg.contains("reconstruct")) throw ConfigError("config lacks a \"reconstruct\" section");
    const json& rj = cfg.at("reconstruct");

    const Checkpoint ck = load_checkpoint(rj.at("checkpoint").get<std::string>());
    Dataset ds;
    ds.samples = read_signals_csv(rj.at("signals").get<std::string>());
    if (rj.contains("manifest")) apply_manifest_json(rj.at("manifest").get<std::string>(), ds, nullptr);
    const RoiAtlas atlas = load_atlas_json(rj.at("atlas").get<std::string>());
    for (const SignalSample& s : ds.samples)
        if (s.rois() != atlas.size())
            throw ConfigError("checkpoint/data compatibility: sample " + std::to_string(s.id) +
                              " has " + std::to_string(s.rois()) + " ROIs, atlas has " +
                              std::to_string(atlas.size()));

    std::vector<double> grid;
    if (rj.contains("grid") && rj.at("grid").contains("times")) {
        grid = rj.at("grid").at("times").get<std::vector<double>>();
    } else {
        const json& gj = rj.at("grid");
        const double start = gj.value("start", 0.0);
        const double step = gj.value("step", 1.0);
        const int count = gj.at("count").get<int>();
        for (int k = 0; k < count; ++k) grid.push_back(start + step * k);
    }

    std::string out_path = rj.value("out", std::string("reconstructed.csv"));
    if (ov.out) out_path = *ov.out;
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write output: " + out_path);
    out << "# odesig-reconstruction config_hash=" << hash << " seed=" << seed << "\n";
    out << "sample_id,roi,timestamp,value\n";
    char buf[96];
    for (const SignalSample& s : ds.samples) {
        const Array2 rec = reconstruct(s, ck.params, atlas, grid, ck.config.substeps,
                                       ck.config.spatial_threshold);
        for (int r = 0; r < rec.rows; ++r)
            for (int j = 0; j < rec.cols; ++j) {
                std::snprintf(buf, sizeof(buf), "%d,%d,%.9f,%.9f\n", s.id, r, grid[j],
                              rec.at(r, j));
                out << buf;
            }
    }
    std::cout << "wrote " << out_path << " (" << ds.samples.size() << " samples x "
              << atlas.size() << " ROIs x " << grid.size() << " time points)\n";
    return 0;
}

int cmd_evaluate(const json& cfg, const CliOverrides& ov, const std::string& hash) {
    const uint64_t seed = master_seed(cfg, ov);
    if (!cfg.contains("evaluate")) throw ConfigError("config lacks an \"evaluate\" section");
    const json& ej = cfg.at("evaluate");

    ExperimentConfig ec;
    const std::string kind = ov.kind ? *ov.kind : ej.at("kind").get<std::string>();
    ec.kind = parse_experiment_kind(kind);
    ec.steps = ov.steps ? *ov.steps : ej.value("steps", ec.steps);
    ec.seeds = ov.seeds ? *ov.seeds : ej.value("seeds", ec.seeds);
    ec.master_seed = seed;
    if (ej.contains("offsets")) ec.offsets = ej.at("offsets").get<std::vector<double>>();
    if (ej.contains("periods"))
        for (const auto& p : ej.at("periods"))
            ec.periods.push_back(parse_rational(p.get<std::string>()));
    if (ej.contains("rq1")) {
        const json& q = ej.at("rq1");
        ec.rq1.missing_fraction = q.value("missing_fraction", ec.rq1.missing_fraction);
        ec.rq1.misaligned_fraction = q.value("misaligned_fraction", ec.rq1.misaligned_fraction);
        ec.rq1.jitter = q.value("jitter", ec.rq1.jitter);
    }
    if (ej.contains("generator")) ec.generator = parse_generator(ej.at("generator"), seed);
    if (ej.contains("train")) ec.train = parse_train_config(ej.at("train"), seed);
    ec.poly_degree_min = ej.value("poly_degree_min", ec.poly_degree_min);
    ec.poly_degree_max = ej.value("poly_degree_max", ec.poly_degree_max);

    EvalReport report = run_experiment(ec);
    report.config_hash = hash;
    std::cout << format_report_table(report);
    if (ej.contains("out_json")) write_report_json(ej.at("out_json").get<std::string>(), report);
    if (ej.contains("out_csv")) write_report_csv(ej.at("out_csv").get<std::string>(), report);
    return 0;
}

int cmd_runtime(const json& cfg, const CliOverrides& ov, const std::string& hash) {
    const uint64_t seed = master_seed(cfg, ov);
    if (!cfg.contains("runtime")) throw ConfigError("config lacks a \"runtime\" section");
    const json& rj = cfg.at("runtime");
    const int reps = ov.repetitions ? *ov.repetitions : rj.value("repetitions", 5);

    GeneratorSpec spec = parse_generator(rj.contains("generator") ? rj.at("generator") : json::object(), seed);
    const Dataset ds = generate(spec);
    const Dims dims = rj.contains("dims") ? parse_dims(rj.at("dims")) : Dims{};
    const ModelParams params = ModelParams::init(dims, Ablations{}, seed);
    const int grid_count = rj.value("grid_count", static_cast<int>(spec.duration) + 1);
    const int substeps = rj.value("substeps", 4);
    std::vector<double> grid;
    for (int k = 0; k < grid_count; ++k) grid.push_back(static_cast<double>(k));

    // inference pass only: reconstruct every sample on the requested grid
    const TimingResult t = measure_runtime(
        [&] {
            for (const SignalSample& s : ds.samples)
                reconstruct(s, params, ds.atlas, grid, substeps);
        },
        reps);
    std::printf("reconstruction of %d samples x %d ROIs on %d points: %.4f +/- %.4f s (%d reps)\n",
                spec.samples, spec.rois, grid_count, t.mean_seconds, t.std_seconds, reps);
    if (rj.contains("out_json")) {
        json out = {{"mean_seconds", t.mean_seconds},
                    {"std_seconds", t.std_seconds},
                    {"repetitions", reps},
                    {"samples", spec.samples},
                    {"rois", spec.rois},
                    {"grid_count", grid_count},
                    {"config_hash", hash},
                    {"seed", seed}};
        std::ofstream f(rj.at("out_json").get<std::string>());
        if (!f) throw IoError("cannot write runtime report");
        f << out.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous signal reconstruction with latent ODE dynamics"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides ov;
    uint64_t seed_flag = 0;
    std::string out_flag, kind_flag;
    int epochs_flag = 0, samples_flag = 0, steps_flag = -1, seeds_flag = 0, reps_flag = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed_flag, "override the master seed");
        sub->add_option("--out", out_flag, "override the primary output path");
    };
    CLI::App* generate = app.add_subcommand("generate", "emit a synthetic dataset");
    add_common(generate);
    generate->add_option("--samples", samples_flag, "override subject count");
    CLI::App* train_cmd = app.add_subcommand("train", "fit a model to a dataset");
    add_common(train_cmd);
    train_cmd->add_option("--epochs", epochs_flag, "override the epoch count");
    CLI::App* reconstruct_cmd =
        app.add_subcommand("reconstruct", "decode signals on a regular grid");
    add_common(reconstruct_cmd);
    CLI::App* evaluate = app.add_subcommand("evaluate", "run a corruption protocol end to end");
    add_common(evaluate);
    evaluate->add_option("--kind", kind_flag, "experiment kind");
    evaluate->add_option("--steps", steps_flag, "missing-value step count");
    evaluate->add_option("--seeds", seeds_flag, "number of random runs");
    CLI::App* runtime = app.add_subcommand("runtime", "time the reconstruction pass");
    add_common(runtime);
    runtime->add_option("--repetitions", reps_flag, "timing repetitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.count_all() && seed_flag) ov.seed = seed_flag;
    if (!out_flag.empty()) ov.out = out_flag;
    if (epochs_flag > 0) ov.epochs = epochs_flag;
    if (samples_flag > 0) ov.samples = samples_flag;
    if (!kind_flag.empty()) ov.kind = kind_flag;
    if (steps_flag >= 0) ov.steps = steps_flag;
    if (seeds_flag > 0) ov.seeds = seeds_flag;
    if (reps_flag > 0) ov.repetitions = reps_flag;

    try {
        const json cfg = load_config(config_path);
        const std::string hash = fnv1a_hex(cfg.dump());
        if (generate->parsed()) return cmd_generate(cfg, ov, hash);
        if (train_cmd->parsed()) return cmd_train(cfg, ov, hash);
        if (reconstruct_cmd->parsed()) return cmd_reconstruct(cfg, ov, hash);
        if (evaluate->parsed()) return cmd_evaluate(cfg, ov, hash);
        if (runtime->parsed()) return cmd_runtime(cfg, ov, hash);
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
