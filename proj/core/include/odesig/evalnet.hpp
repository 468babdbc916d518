#pragma once

#include <functional>
#include <string>
#include <vector>

#include "odesig/training.hpp"

namespace odesig {

// Root mean squared error between two equal-length value lists.
double rmse(const std::vector<double>& predicted, const std::vector<double>& truth);

struct PolyPrediction {
    Array2 values;            // N x targets
    bool degraded = false;    // some ROI used a lower degree than requested
    int effective_degree = 0; // smallest degree actually used
};

// Per-ROI least-squares polynomial over the observed points, evaluated at the
// target times. Timestamps are centered and scaled to [-1, 1] before the
// normal equations are formed.
PolyPrediction poly_baseline(const SignalSample& s, int degree,
                             const std::vector<double>& targets);

// Pairwise Pearson correlations between the rows of a regular-grid signal
// matrix. A zero-variance series correlates 0 with everything (flagged via
// warn_rois) so downstream consumers always get finite matrices.
Array2 pearson_network(const Array2& signals, std::vector<int>* warn_rois = nullptr);

enum class ExperimentKind { MissingInterp, MissingExtrap, Offset, Frequency, Rq1Mixed };

ExperimentKind parse_experiment_kind(const std::string& name); // throws ConfigError, lists kinds
std::string experiment_kind_name(ExperimentKind kind);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::MissingInterp;
    int steps = 3;                       // missing-value protocols
    std::vector<double> offsets;         // offset protocol (default 0.1/0.2/0.3)
    std::vector<Rational> periods;       // frequency protocol (default 2/3, 1/2, 1/3)
    Rq1Config rq1;                       // mixed protocol
    int seeds = 5;
    uint64_t master_seed = 0;
    GeneratorSpec generator;
    TrainConfig train;
    int poly_degree_min = 1;
    int poly_degree_max = 5;
};

struct SettingResult {
    std::string setting;  // e.g. "missing-interp"
    std::string param;    // e.g. "3" or "0.1" or "2/3"
    bool vacuous = false; // empty target set; RMSE omitted
    double model_mean = 0.0, model_std = 0.0;
    double poly_mean = 0.0, poly_std = 0.0;
    int poly_best_degree = 0;
    std::vector<double> model_per_seed;
    std::vector<double> poly_per_seed; // at the best degree
    std::vector<std::vector<double>> poly_per_degree_per_seed;
    int diverged = 0; // seeds excluded from the aggregate
};

struct EvalReport {
    std::string kind;
    int seeds = 0;
    uint64_t master_seed = 0;
    double runtime_seconds = 0.0;
    std::vector<SettingResult> settings;
    std::string config_hash;
};

// Full protocol: per seed, generate -> corrupt -> split -> train ->
// reconstruct -> score model and polynomial baseline; aggregates mean/std
// over the seeds that converged.
EvalReport run_experiment(const ExperimentConfig& cfg);

// Offset and frequency protocols share their training data (regular
// sampling), so one model per seed serves both sweeps.
void run_misalignment_sweeps(const ExperimentConfig& cfg, EvalReport* offset_report,
                             EvalReport* frequency_report);

void write_report_json(const std::string& path, const EvalReport& report);
// plot-ready rows: setting,param,model,rmse_mean,rmse_std
void write_report_csv(const std::string& path, const EvalReport& report);
std::string format_report_table(const EvalReport& report);

struct TimingResult {
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
    int repetitions = 0;
};

// Wall-clock timing of `task`; one untimed warm-up run first.
TimingResult measure_runtime(const std::function<void()>& task, int repetitions);

} // namespace odesig
