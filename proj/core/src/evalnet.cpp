#include "odesig/evalnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "odesig/errors.hpp"
#include "odesig/parallel.hpp"
#include "odesig/rng.hpp"

namespace odesig {

using nlohmann::json;

double rmse(const std::vector<double>& predicted, const std::vector<double>& truth) {
    if (predicted.empty() || predicted.size() != truth.size())
        throw ContractError("rmse: need equal nonzero-length lists, got " +
                            std::to_string(predicted.size()) + " and " +
                            std::to_string(truth.size()));
    double sse = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - truth[i];
        sse += d * d;
    }
    return std::sqrt(sse / predicted.size());
}

// ---------------------------------------------------------------------------
// polynomial baseline

namespace {

struct PolyFit {
    std::vector<double> coeffs; // in the scaled variable x = (t - center) / half
    double center = 0.0;
    double half = 1.0;
    int degree = 0;

    double eval(double t) const {
        const double x = (t - center) / half;
        double acc = 0.0;
        for (int i = static_cast<int>(coeffs.size()) - 1; i >= 0; --i) acc = acc * x + coeffs[i];
        return acc;
    }
};

// Least squares via normal equations with partial-pivot elimination. Returns
// false on a (near-)singular system so the caller can retry at lower degree.
bool solve_normal_equations(const std::vector<double>& x, const std::vector<double>& v,
                            int degree, std::vector<double>* coeffs) {
    const int m = degree + 1;
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (size_t p = 0; p < x.size(); ++p) {
        std::vector<double> pw(2 * m - 1, 1.0);
        for (int i = 1; i < 2 * m - 1; ++i) pw[i] = pw[i - 1] * x[p];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) a[i][j] += pw[i + j];
            a[i][m] += pw[i] * v[p];
        }
    }
    for (int col = 0; col < m; ++col) {
        int pivot = col;
        for (int r = col + 1; r < m; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-12) return false;
        std::swap(a[col], a[pivot]);
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
        }
    }
    coeffs->resize(m);
    for (int i = 0; i < m; ++i) (*coeffs)[i] = a[i][m] / a[i][i];
    return true;
}

PolyFit fit_poly_roi(const std::vector<Observation>& obs, int degree, bool* degraded) {
    std::vector<double> t, v;
    for (const Observation& o : obs)
        if (o.observed) {
            t.push_back(o.t);
            v.push_back(o.value);
        }
    if (t.empty()) throw ContractError("poly_baseline: ROI has no observed points");

    PolyFit fit;
    const auto [mn, mx] = std::minmax_element(t.begin(), t.end());
    fit.center = 0.5 * (*mn + *mx);
    fit.half = std::max(0.5 * (*mx - *mn), 1e-9);
    std::vector<double> x(t.size());
    for (size_t i = 0; i < t.size(); ++i) x[i] = (t[i] - fit.center) / fit.half;

    int d = std::min(degree, static_cast<int>(t.size()) - 1);
    if (d < degree) *degraded = true;
    while (d > 0 && !solve_normal_equations(x, v, d, &fit.coeffs)) {
        --d;
        *degraded = true;
    }
    if (d == 0) {
        double mean = 0.0;
        for (double vi : v) mean += vi;
        fit.coeffs = {mean / v.size()};
    }
    fit.degree = d;
    return fit;
}

} // namespace

PolyPrediction poly_baseline(const SignalSample& s, int degree,
                             const std::vector<double>& targets) {
    if (degree < 0) throw ConfigError("poly_baseline: negative degree");
    if (targets.empty()) throw ContractError("poly_baseline: empty target list");
    PolyPrediction out;
    out.values = Array2(s.rois(), static_cast<int>(targets.size()));
    out.effective_degree = degree;
    for (int i = 0; i < s.rois(); ++i) {
        bool degraded = false;
        const PolyFit fit = fit_poly_roi(s.roi_obs[i], degree, &degraded);
        out.degraded = out.degraded || degraded;
        out.effective_degree = std::min(out.effective_degree, fit.degree);
        for (size_t j = 0; j < targets.size(); ++j)
            out.values.at(i, static_cast<int>(j)) = fit.eval(targets[j]);
    }
    return out;
}

Array2 pearson_network(const Array2& signals, std::vector<int>* warn_rois) {
    if (signals.cols < 2)
        throw ContractError("pearson_network: need at least 2 time points, got " +
                            std::to_string(signals.cols));
    const int n = signals.rows;
    const int T = signals.cols;
    std::vector<double> mean(n, 0.0), sd(n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < T; ++j) mean[i] += signals.at(i, j);
        mean[i] /= T;
        for (int j = 0; j < T; ++j) {
            const double d = signals.at(i, j) - mean[i];
            sd[i] += d * d;
        }
        sd[i] = std::sqrt(sd[i]);
        if (sd[i] == 0.0 && warn_rois) warn_rois->push_back(i);
    }
    Array2 corr(n, n);
    for (int i = 0; i < n; ++i) {
        corr.at(i, i) = sd[i] > 0.0 ? 1.0 : 0.0;
        for (int j = i + 1; j < n; ++j) {
            double v = 0.0;
            if (sd[i] > 0.0 && sd[j] > 0.0) {
                double cov = 0.0;
                for (int k = 0; k < T; ++k)
                    cov += (signals.at(i, k) - mean[i]) * (signals.at(j, k) - mean[j]);
                v = cov / (sd[i] * sd[j]);
            }
            corr.at(i, j) = v;
            corr.at(j, i) = v;
        }
    }
    return corr;
}

// ---------------------------------------------------------------------------
// experiments

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "missing-interp") return ExperimentKind::MissingInterp;
    if (name == "missing-extrap") return ExperimentKind::MissingExtrap;
    if (name == "offset") return ExperimentKind::Offset;
    if (name == "frequency") return ExperimentKind::Frequency;
    if (name == "rq1-mixed") return ExperimentKind::Rq1Mixed;
    throw ConfigError("unknown experiment kind '" + name +
                      "' (valid: missing-interp, missing-extrap, offset, frequency, rq1-mixed)");
}

std::string experiment_kind_name(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::MissingInterp: return "missing-interp";
    case ExperimentKind::MissingExtrap: return "missing-extrap";
    case ExperimentKind::Offset: return "offset";
    case ExperimentKind::Frequency: return "frequency";
    case ExperimentKind::Rq1Mixed: return "rq1-mixed";
    }
    return "?";
}

namespace {

struct SeedRun {
    bool diverged = false;
    double model_rmse = 0.0;
    std::vector<double> poly_rmse; // per degree
    bool empty_targets = false;
};

double pooled_model_rmse(const std::vector<SignalSample>& test, const ModelParams& params,
                         const Array2& a_spa, int substeps, bool* empty) {
    double sse = 0.0;
    int cnt = 0;
    for (const SignalSample& s : test)
        reconstruction_error(s, params, a_spa, substeps, &sse, &cnt, /*targets_only=*/true);
    *empty = cnt == 0;
    return cnt == 0 ? 0.0 : std::sqrt(sse / cnt);
}

double pooled_poly_rmse(const std::vector<SignalSample>& test, int degree) {
    double sse = 0.0;
    long cnt = 0;
    for (const SignalSample& s : test) {
        for (int i = 0; i < s.rois(); ++i) {
            if (s.targets[i].empty()) continue;
            bool degraded = false;
            const PolyFit fit = fit_poly_roi(s.roi_obs[i], degree, &degraded);
            for (const Observation& o : s.targets[i]) {
                const double d = fit.eval(o.t) - o.value;
                sse += d * d;
                ++cnt;
            }
        }
    }
    return cnt == 0 ? 0.0 : std::sqrt(sse / cnt);
}

void mean_std(const std::vector<double>& xs, double* mean, double* sd) {
    *mean = 0.0;
    *sd = 0.0;
    if (xs.empty()) return;
    for (double x : xs) *mean += x;
    *mean /= xs.size();
    for (double x : xs) *sd += (x - *mean) * (x - *mean);
    *sd = std::sqrt(*sd / xs.size());
}

SettingResult summarize(const std::string& setting, const std::string& param,
                        const std::vector<SeedRun>& runs, int degree_min, int degree_max) {
    SettingResult r;
    r.setting = setting;
    r.param = param;
    bool any = false;
    for (const SeedRun& run : runs) {
        if (run.diverged) {
            ++r.diverged;
            continue;
        }
        if (run.empty_targets) {
            r.vacuous = true;
            continue;
        }
        any = true;
        r.model_per_seed.push_back(run.model_rmse);
        r.poly_per_degree_per_seed.push_back(run.poly_rmse);
    }
    if (!any) {
        r.vacuous = true;
        return r;
    }
    mean_std(r.model_per_seed, &r.model_mean, &r.model_std);
    // best degree by mean RMSE across seeds
    const int n_deg = degree_max - degree_min + 1;
    double best_mean = 0.0;
    for (int d = 0; d < n_deg; ++d) {
        double m = 0.0;
        for (const auto& per_seed : r.poly_per_degree_per_seed) m += per_seed[d];
        m /= r.poly_per_degree_per_seed.size();
        if (d == 0 || m < best_mean) {
            best_mean = m;
            r.poly_best_degree = degree_min + d;
        }
    }
    for (const auto& per_seed : r.poly_per_degree_per_seed)
        r.poly_per_seed.push_back(per_seed[r.poly_best_degree - degree_min]);
    mean_std(r.poly_per_seed, &r.poly_mean, &r.poly_std);
    return r;
}

std::string format_param(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

EvalReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.seeds < 1) throw ConfigError("run_experiment: need at least one seed");
    const auto t_start = std::chrono::steady_clock::now();

    ExperimentConfig c = cfg;
    if (c.offsets.empty()) c.offsets = {0.1, 0.2, 0.3};
    if (c.periods.empty()) c.periods = {{2, 3}, {1, 2}, {1, 3}};

    EvalReport report;
    report.kind = experiment_kind_name(c.kind);
    report.seeds = c.seeds;
    report.master_seed = c.master_seed;

    const bool sweep = c.kind == ExperimentKind::Offset || c.kind == ExperimentKind::Frequency;
    const size_t n_settings =
        c.kind == ExperimentKind::Offset
            ? c.offsets.size()
            : (c.kind == ExperimentKind::Frequency ? c.periods.size() : 1);
    std::vector<std::vector<SeedRun>> runs(n_settings, std::vector<SeedRun>(c.seeds));

    // seed runs are independent; parallelize across them and keep each run
    // single-threaded so results cannot depend on the worker count
    const int workers = resolve_threads(c.train.threads);
    parallel_for(c.seeds, workers, [&](int si) {
        const uint64_t seed = Rng::derive(c.master_seed, 0x5eedull + static_cast<uint64_t>(si));
        GeneratorSpec gen = c.generator;
        gen.seed = seed;
        Dataset ds = generate(gen);

        // corruption of the whole dataset (missing / mixed protocols)
        if (c.kind == ExperimentKind::MissingInterp || c.kind == ExperimentKind::MissingExtrap) {
            const MissingMode mode = c.kind == ExperimentKind::MissingInterp
                                         ? MissingMode::Interpolation
                                         : MissingMode::Extrapolation;
            for (SignalSample& s : ds.samples) s = corrupt_missing(s, mode, c.steps, seed);
        } else if (c.kind == ExperimentKind::Rq1Mixed) {
            apply_rq1_corruption(ds, c.rq1, seed);
        }

        const SplitIndices sp = split(static_cast<int>(ds.samples.size()), seed);
        std::vector<SignalSample> train_set, val_set, test_set;
        for (int i : sp.train) train_set.push_back(ds.samples[i]);
        for (int i : sp.val) val_set.push_back(ds.samples[i]);
        for (int i : sp.test) test_set.push_back(ds.samples[i]);

        TrainConfig tc = c.train;
        tc.seed = seed;
        tc.threads = 1;
        TrainResult tr;
        try {
            tr = train(train_set, val_set, ds.atlas, tc);
        } catch (const DivergenceError&) {
            for (auto& setting_runs : runs) setting_runs[si].diverged = true;
            return;
        }
        const double r = tc.spatial_threshold > 0.0 ? tc.spatial_threshold
                                                    : default_spatial_threshold(ds.atlas);
        const Array2 a_spa = build_spatial_graph(ds.atlas, r);

        auto score = [&](const std::vector<SignalSample>& test, SeedRun* run) {
            run->model_rmse =
                pooled_model_rmse(test, tr.params, a_spa, tc.substeps, &run->empty_targets);
            for (int d = c.poly_degree_min; d <= c.poly_degree_max; ++d)
                run->poly_rmse.push_back(pooled_poly_rmse(test, d));
        };

        if (!sweep) {
            score(test_set, &runs[0][si]);
        } else if (c.kind == ExperimentKind::Offset) {
            for (size_t oi = 0; oi < c.offsets.size(); ++oi) {
                std::vector<SignalSample> corrupted;
                for (const SignalSample& s : test_set)
                    corrupted.push_back(corrupt_offset(s, c.offsets[oi]));
                score(corrupted, &runs[oi][si]);
            }
        } else {
            for (size_t pi = 0; pi < c.periods.size(); ++pi) {
                std::vector<SignalSample> corrupted;
                for (const SignalSample& s : test_set)
                    corrupted.push_back(corrupt_frequency(s, c.periods[pi]));
                score(corrupted, &runs[pi][si]);
            }
        }
    });

    for (size_t i = 0; i < n_settings; ++i) {
        std::string param;
        switch (c.kind) {
        case ExperimentKind::MissingInterp:
        case ExperimentKind::MissingExtrap: param = std::to_string(c.steps); break;
        case ExperimentKind::Offset: param = format_param(c.offsets[i]); break;
        case ExperimentKind::Frequency:
            param = std::to_string(c.periods[i].num) + "/" + std::to_string(c.periods[i].den);
            break;
        case ExperimentKind::Rq1Mixed: param = "mixed"; break;
        }
        report.settings.push_back(
            summarize(report.kind, param, runs[i], c.poly_degree_min, c.poly_degree_max));
    }

    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

void run_misalignment_sweeps(const ExperimentConfig& cfg, EvalReport* offset_report,
                             EvalReport* frequency_report) {
    if (cfg.seeds < 1) throw ConfigError("run_misalignment_sweeps: need at least one seed");
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentConfig c = cfg;
    if (c.offsets.empty()) c.offsets = {0.1, 0.2, 0.3};
    if (c.periods.empty()) c.periods = {{2, 3}, {1, 2}, {1, 3}};

    std::vector<std::vector<SeedRun>> off_runs(c.offsets.size(), std::vector<SeedRun>(c.seeds));
    std::vector<std::vector<SeedRun>> freq_runs(c.periods.size(), std::vector<SeedRun>(c.seeds));

    const int workers = resolve_threads(c.train.threads);
    parallel_for(c.seeds, workers, [&](int si) {
        const uint64_t seed = Rng::derive(c.master_seed, 0x5eedull + static_cast<uint64_t>(si));
        GeneratorSpec gen = c.generator;
        gen.seed = seed;
        Dataset ds = generate(gen);
        const SplitIndices sp = split(static_cast<int>(ds.samples.size()), seed);
        std::vector<SignalSample> train_set, val_set, test_set;
        for (int i : sp.train) train_set.push_back(ds.samples[i]);
        for (int i : sp.val) val_set.push_back(ds.samples[i]);
        for (int i : sp.test) test_set.push_back(ds.samples[i]);

        TrainConfig tc = c.train;
        tc.seed = seed;
        tc.threads = 1;
        TrainResult tr;
        try {
            tr = train(train_set, val_set, ds.atlas, tc);
        } catch (const DivergenceError&) {
            for (auto& sr : off_runs) sr[si].diverged = true;
            for (auto& sr : freq_runs) sr[si].diverged = true;
            return;
        }
        const double r = tc.spatial_threshold > 0.0 ? tc.spatial_threshold
                                                    : default_spatial_threshold(ds.atlas);
        const Array2 a_spa = build_spatial_graph(ds.atlas, r);
        auto score = [&](const std::vector<SignalSample>& test, SeedRun* run) {
            run->model_rmse =
                pooled_model_rmse(test, tr.params, a_spa, tc.substeps, &run->empty_targets);
            for (int d = c.poly_degree_min; d <= c.poly_degree_max; ++d)
                run->poly_rmse.push_back(pooled_poly_rmse(test, d));
        };
        for (size_t oi = 0; oi < c.offsets.size(); ++oi) {
            std::vector<SignalSample> corrupted;
            for (const SignalSample& s : test_set)
                corrupted.push_back(corrupt_offset(s, c.offsets[oi]));
            score(corrupted, &off_runs[oi][si]);
        }
        for (size_t pi = 0; pi < c.periods.size(); ++pi) {
            std::vector<SignalSample> corrupted;
            for (const SignalSample& s : test_set)
                corrupted.push_back(corrupt_frequency(s, c.periods[pi]));
            score(corrupted, &freq_runs[pi][si]);
        }
    });

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    offset_report->kind = "offset";
    frequency_report->kind = "frequency";
    for (EvalReport* rep : {offset_report, frequency_report}) {
        rep->seeds = c.seeds;
        rep->master_seed = c.master_seed;
        rep->runtime_seconds = wall;
        rep->settings.clear();
    }
    for (size_t i = 0; i < c.offsets.size(); ++i)
        offset_report->settings.push_back(summarize("offset", format_param(c.offsets[i]),
                                                    off_runs[i], c.poly_degree_min,
                                                    c.poly_degree_max));
    for (size_t i = 0; i < c.periods.size(); ++i)
        frequency_report->settings.push_back(
            summarize("frequency",
                      std::to_string(c.periods[i].num) + "/" + std::to_string(c.periods[i].den),
                      freq_runs[i], c.poly_degree_min, c.poly_degree_max));
}

// ---------------------------------------------------------------------------
// report output

void write_report_json(const std::string& path, const EvalReport& report) {
    json j;
    j["kind"] = report.kind;
    j["seeds"] = report.seeds;
    j["master_seed"] = report.master_seed;
    j["runtime_seconds"] = report.runtime_seconds;
    j["config_hash"] = report.config_hash;
    json settings = json::array();
    for (const SettingResult& s : report.settings) {
        json sj;
        sj["setting"] = s.setting;
        sj["param"] = s.param;
        sj["vacuous"] = s.vacuous;
        sj["diverged_seeds"] = s.diverged;
        if (!s.vacuous) {
            sj["model"] = {{"rmse_mean", s.model_mean},
                           {"rmse_std", s.model_std},
                           {"per_seed", s.model_per_seed}};
            sj["poly"] = {{"rmse_mean", s.poly_mean},
                          {"rmse_std", s.poly_std},
                          {"best_degree", s.poly_best_degree},
                          {"per_seed", s.poly_per_seed}};
        }
        settings.push_back(std::move(sj));
    }
    j["settings"] = std::move(settings);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << "# odesig-report config_hash=" << report.config_hash
        << " seed=" << report.master_seed << "\n";
    out << "setting,param,model,rmse_mean,rmse_std\n";
    char buf[128];
    for (const SettingResult& s : report.settings) {
        if (s.vacuous) continue;
        std::snprintf(buf, sizeof(buf), "%s,%s,ours,%.6f,%.6f\n", s.setting.c_str(),
                      s.param.c_str(), s.model_mean, s.model_std);
        out << buf;
        std::snprintf(buf, sizeof(buf), "%s,%s,poly,%.6f,%.6f\n", s.setting.c_str(),
                      s.param.c_str(), s.poly_mean, s.poly_std);
        out << buf;
    }
}

std::string format_report_table(const EvalReport& report) {
    std::ostringstream os;
    os << "experiment " << report.kind << " (" << report.seeds << " seeds, master seed "
       << report.master_seed << ")\n";
    os << "  setting            param   ours (mean+/-std)    poly best-deg (mean+/-std)\n";
    char buf[160];
    for (const SettingResult& s : report.settings) {
        if (s.vacuous) {
            std::snprintf(buf, sizeof(buf), "  %-18s %-7s [no targets: RMSE omitted]\n",
                          s.setting.c_str(), s.param.c_str());
            os << buf;
            continue;
        }
        std::snprintf(buf, sizeof(buf), "  %-18s %-7s %.4f +/- %.4f     d=%d  %.4f +/- %.4f%s\n",
                      s.setting.c_str(), s.param.c_str(), s.model_mean, s.model_std,
                      s.poly_best_degree, s.poly_mean, s.poly_std,
                      s.diverged ? "  [diverged seeds excluded]" : "");
        os << buf;
    }
    return os.str();
}

TimingResult measure_runtime(const std::function<void()>& task, int repetitions) {
    if (repetitions < 1) throw ConfigError("measure_runtime: repetitions must be >= 1");
    task(); // warm-up, excluded
    std::vector<double> secs(repetitions);
    for (int i = 0; i < repetitions; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        task();
        secs[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    TimingResult r;
    r.repetitions = repetitions;
    mean_std(secs, &r.mean_seconds, &r.std_seconds);
    return r;
}

} // namespace odesig
