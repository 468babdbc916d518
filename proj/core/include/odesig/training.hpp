#pragma once

#include <cstdint>
#include <vector>

#include "odesig/model.hpp"

namespace odesig {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 50;
    double kl_weight = 0.1;
    int batch_size = 16;
    uint64_t seed = 0;
    int substeps = 4;              // RK4 substeps between grid points
    double spatial_threshold = 0.0; // <= 0 picks the 20th-percentile default
    int threads = 0;                // 0 = auto
    Dims dims;
    Ablations ablations;

    void validate() const;
};

// KL-regularized masked reconstruction loss over a batch: mean over all
// observed points of the squared error plus kl_weight times the mean
// per-ROI KL to the standard normal. One eps draw per sample.
double batch_loss(const std::vector<PreparedSample>& batch, const ModelParams& params,
                  const Array2& a_spa, const std::vector<Array2>& eps, double kl_weight,
                  int substeps);

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

// Standard Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with bias correction.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr);

struct TrainResult {
    ModelParams params; // parameters at the best validation epoch
    std::vector<double> train_loss;
    std::vector<double> val_rmse;
    int best_epoch = -1;
};

TrainResult train(const std::vector<SignalSample>& train_samples,
                  const std::vector<SignalSample>& val_samples, const RoiAtlas& atlas,
                  const TrainConfig& cfg);

// Deterministic inference: posterior mean (eps = 0), decoded on the requested
// strictly increasing grid, denormalized back to signal units. N x T'.
Array2 reconstruct(const SignalSample& s, const ModelParams& params, const RoiAtlas& atlas,
                   const std::vector<double>& grid, int substeps,
                   double spatial_threshold = 0.0);

// Pooled squared error of reconstruction at a sample's held-out targets; with
// targets_only = false, samples without targets fall back to their observed
// points (the validation metric). Predictions in signal units.
void reconstruction_error(const SignalSample& s, const ModelParams& params, const Array2& a_spa,
                          int substeps, double* sse, int* count, bool targets_only = false);

} // namespace odesig
