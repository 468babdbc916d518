#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odesig/relgraphs.hpp"

namespace odesig {

struct SineComponent {
    double amplitude = 0.0;
    double omega = 0.0; // rad/s
    double phase = 0.0;
};

struct Observation {
    double t = 0.0;
    double value = 0.0;
    bool observed = true;
};

// Exact period for misaligned resampling; timestamps are computed as
// (k * num) / den so grids like {0, 2/3, 4/3, 2, ...} carry no accumulated
// floating-point drift.
struct Rational {
    long long num = 1;
    long long den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational parse_rational(const std::string& text); // "2/3" or "0.5"

// One subject: per-ROI observation lists plus, for synthetic data, the
// closed-form ground truth and any held-out evaluation targets.
struct SignalSample {
    int id = 0;
    double duration = 0.0;
    std::vector<std::vector<Observation>> roi_obs;
    std::vector<std::vector<SineComponent>> truth;  // empty when unknown
    std::vector<std::vector<Observation>> targets;  // held-out (t, true value)
    std::string corruption = "none";

    int rois() const { return static_cast<int>(roi_obs.size()); }
    bool has_truth() const { return !truth.empty(); }
    double truth_at(int roi, double t) const;
    void validate() const;
};

struct GeneratorSpec {
    int samples = 20;
    int rois = 8;
    double duration = 50.0; // seconds; base raster t = 0, 1, ..., floor(duration)
    int min_components = 2;
    int max_components = 4;
    double amp_lo = 0.5;
    double amp_hi = 1.5;
    double omega_lo = 0.3141592653589793; // 2*pi/20
    double omega_hi = 1.5707963267948966; // 2*pi/4
    int shared_pool_size = 3;
    double shared_fraction = 0.5;
    double coord_extent = 100.0;  // atlas bounding box edge
    double cluster_spread = 18.0; // ROI scatter around its pool cluster center
    uint64_t seed = 0;
};

struct Dataset {
    GeneratorSpec spec;
    RoiAtlas atlas;
    std::vector<SignalSample> samples;
};

// Sum-of-sinusoids signals sampled once per second. Each ROI mixes private
// components with components from a small per-sample shared pool, and ROIs
// sharing a pool component sit near each other in the atlas, so both the
// temporal and the spatial relation structure are non-trivial.
Dataset generate(const GeneratorSpec& spec);

std::vector<double> regular_grid(double duration);

enum class MissingMode { Interpolation, Extrapolation };

// Hides time steps: a contiguous interior block (interpolation) or the final
// `steps` points (extrapolation). Removed (t, truth) pairs become targets.
SignalSample corrupt_missing(const SignalSample& s, MissingMode mode, int steps, uint64_t seed);

// Test observations resampled from ground truth at t = offset, 1+offset, ...;
// targets are the regular grid.
SignalSample corrupt_offset(const SignalSample& s, double offset);

// Observations resampled at t = 0, p, 2p, ... for period p; targets are the
// regular grid.
SignalSample corrupt_frequency(const SignalSample& s, Rational period);

struct Rq1Config {
    double missing_fraction = 0.2;
    double misaligned_fraction = 0.2;
    double jitter = 0.05;           // seconds, uniform timestamp noise
    double missing_point_rate = 0.2; // fraction of interior steps hidden per missing sample
};

// Random per-seed assignment of samples to corruption classes; samples not
// assigned to a class keep their raster up to timestamp jitter.
void apply_rq1_corruption(Dataset& ds, const Rq1Config& cfg, uint64_t seed);

struct SplitIndices {
    std::vector<int> train, val, test;
};

// Deterministic 6:2:2 partition.
SplitIndices split(int n, uint64_t seed);

// --- file formats ---

// Header `sample_id,roi,timestamp,value,observed`, one row per observation,
// timestamps with 9 decimal digits. A leading '#' comment line carries the
// config hash and master seed; readers skip '#' lines.
void write_signals_csv(const std::string& path, const std::vector<SignalSample>& samples,
                       const std::string& config_hash, uint64_t seed);
std::vector<SignalSample> read_signals_csv(const std::string& path);

void write_manifest_json(const std::string& path, const Dataset& ds, const SplitIndices* split,
                         const std::string& config_hash);
// Restores durations, truth components and targets onto CSV-loaded samples.
void apply_manifest_json(const std::string& path, Dataset& ds, SplitIndices* split_out);

} // namespace odesig
