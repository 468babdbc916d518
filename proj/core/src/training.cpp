#include "odesig/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "odesig/errors.hpp"
#include "odesig/parallel.hpp"
#include "odesig/rng.hpp"

namespace odesig {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (kl_weight < 0.0) throw ConfigError("train: kl weight must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (substeps < 1) throw ConfigError("train: substeps must be >= 1");
    dims.validate();
}

namespace {

struct SampleGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Per-sample forward (and optionally backward) with the pooled-batch weights
// fixed up front, so per-sample results can be reduced in index order.
SampleGrad sample_pass(const PreparedSample& ps, const ModelParams& params, const Array2& a_spa,
                       const Array2* eps, double w_mse, double w_kl, int substeps,
                       bool want_grad) {
    Tape t;
    ModelLeaves L = make_leaves(t, params);
    LatentForward f = forward_latent(t, ps, L, a_spa, params.ablations, eps, substeps);
    LossTerms terms = attach_loss(t, f, ps, w_mse, w_kl);
    SampleGrad out;
    out.loss = t.value(terms.loss).at(0, 0);
    if (want_grad) {
        t.backward(terms.loss);
        out.grad.reserve(params.count());
        for (const Var& leaf : L.ordered) {
            const Array2& g = t.grad(leaf);
            out.grad.insert(out.grad.end(), g.data.begin(), g.data.end());
        }
    }
    return out;
}

int total_observations(const std::vector<PreparedSample>& batch) {
    int total = 0;
    for (const PreparedSample& ps : batch) total += ps.obs_count;
    return total;
}

} // namespace

double batch_loss(const std::vector<PreparedSample>& batch, const ModelParams& params,
                  const Array2& a_spa, const std::vector<Array2>& eps, double kl_weight,
                  int substeps) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    if (!eps.empty() && eps.size() != batch.size())
        throw DimensionError("batch_loss: eps draws do not match batch size");
    const int total = total_observations(batch);
    const double w_mse = 1.0 / total;
    const int n_roi = batch[0].target.rows;
    const double w_kl = kl_weight / (static_cast<double>(batch.size()) * n_roi);
    double loss = 0.0;
    for (size_t i = 0; i < batch.size(); ++i)
        loss += sample_pass(batch[i], params, a_spa, eps.empty() ? nullptr : &eps[i], w_mse,
                            w_kl, substeps, false)
                    .loss;
    return loss;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr) {
    if (grad.size() != params.size())
        throw DimensionError("adam_step: gradient size " + std::to_string(grad.size()) +
                             " vs parameters " + std::to_string(params.size()));
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw DimensionError("adam_step: stale optimizer state");
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

TrainResult train(const std::vector<SignalSample>& train_samples,
                  const std::vector<SignalSample>& val_samples, const RoiAtlas& atlas,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_samples.empty()) throw ContractError("train: empty training set");

    const double r =
        cfg.spatial_threshold > 0.0 ? cfg.spatial_threshold : default_spatial_threshold(atlas);
    const Array2 a_spa = build_spatial_graph(atlas, r);

    std::vector<PreparedSample> prepared;
    prepared.reserve(train_samples.size());
    for (const SignalSample& s : train_samples) prepared.push_back(prepare_sample(s));
    const int n_roi = prepared[0].target.rows;
    const int d_z = cfg.dims.d_z;

    ModelParams params = ModelParams::init(cfg.dims, cfg.ablations, cfg.seed);
    std::vector<double> flat = params.flatten();
    AdamState adam;
    const int threads = resolve_threads(cfg.threads);

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_flat = flat;

    const int n = static_cast<int>(prepared.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng(Rng::derive(cfg.seed, 0xe90c4ull + static_cast<uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[erng.uniform_int(0, i)]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            // eps draws in fixed order, before any parallel work
            std::vector<Array2> eps(bsz);
            for (int b = 0; b < bsz; ++b) {
                eps[b] = Array2(n_roi, d_z);
                for (double& v : eps[b].data) v = erng.normal();
            }
            int total = 0;
            for (int b = 0; b < bsz; ++b) total += prepared[order[start + b]].obs_count;
            const double w_mse = 1.0 / total;
            const double w_kl = cfg.kl_weight / (static_cast<double>(bsz) * n_roi);

            std::vector<SampleGrad> results(bsz);
            parallel_for(bsz, threads, [&](int b) {
                results[b] = sample_pass(prepared[order[start + b]], params, a_spa, &eps[b],
                                         w_mse, w_kl, cfg.substeps, true);
            });

            double batch_loss_val = 0.0;
            std::vector<double> grad(flat.size(), 0.0);
            for (int b = 0; b < bsz; ++b) { // fixed reduction order
                batch_loss_val += results[b].loss;
                for (size_t i = 0; i < grad.size(); ++i) grad[i] += results[b].grad[i];
            }
            if (!std::isfinite(batch_loss_val))
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch));

            adam_step(flat, grad, adam, cfg.learning_rate);
            params.unflatten(flat);
            epoch_loss += batch_loss_val;
            ++batches;
        }
        result.train_loss.push_back(epoch_loss / batches);

        std::vector<double> val_sse(val_samples.size(), 0.0);
        std::vector<int> val_cnt(val_samples.size(), 0);
        parallel_for(static_cast<int>(val_samples.size()), threads, [&](int i) {
            reconstruction_error(val_samples[i], params, a_spa, cfg.substeps, &val_sse[i],
                                 &val_cnt[i]);
        });
        double sse = 0.0;
        int cnt = 0;
        for (size_t i = 0; i < val_samples.size(); ++i) {
            sse += val_sse[i];
            cnt += val_cnt[i];
        }
        const double val = cnt > 0 ? std::sqrt(sse / cnt) : result.train_loss.back();
        result.val_rmse.push_back(val);
        if (val < best) {
            best = val;
            best_flat = flat;
            result.best_epoch = epoch;
        }
    }

    params.unflatten(best_flat);
    result.params = params;
    return result;
}

namespace {

std::vector<double> anchored_grid(const std::vector<double>& grid, int* offset) {
    if (grid.empty()) throw GridError("reconstruct: empty target grid");
    for (size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw GridError("reconstruct: target grid not strictly increasing at index " +
                            std::to_string(i));
    if (grid[0] < 0.0) throw GridError("reconstruct: target times must be >= 0");
    std::vector<double> full = grid;
    *offset = 0;
    if (full[0] > 0.0) { // integrate from the t=0 anchor
        full.insert(full.begin(), 0.0);
        *offset = 1;
    }
    return full;
}

Array2 reconstruct_prepared(PreparedSample ps, const ModelParams& params, const Array2& a_spa,
                            const std::vector<double>& grid, int substeps) {
    int offset = 0;
    const std::vector<double> anchored = anchored_grid(grid, &offset);
    std::vector<int> where;
    ps.grid = pad_grid(anchored, &where);
    Tape t;
    ModelLeaves L = make_leaves(t, params);
    LatentForward f = forward_latent(t, ps, L, a_spa, params.ablations, nullptr, substeps);
    const Array2& dec = t.value(f.decoded);
    const int n = dec.rows;
    Array2 out(n, static_cast<int>(grid.size()));
    for (int i = 0; i < n; ++i)
        for (size_t j = 0; j < grid.size(); ++j)
            out.at(i, static_cast<int>(j)) =
                dec.at(i, where[j + offset]) * ps.roi_std[i] + ps.roi_mean[i];
    return out;
}

} // namespace

Array2 reconstruct(const SignalSample& s, const ModelParams& params, const RoiAtlas& atlas,
                   const std::vector<double>& grid, int substeps, double spatial_threshold) {
    const double r =
        spatial_threshold > 0.0 ? spatial_threshold : default_spatial_threshold(atlas);
    return reconstruct_prepared(prepare_sample(s), params, build_spatial_graph(atlas, r), grid,
                                substeps);
}

void reconstruction_error(const SignalSample& s, const ModelParams& params, const Array2& a_spa,
                          int substeps, double* sse, int* count, bool targets_only) {
    // evaluation points: held-out targets when present, observed points otherwise
    bool has_targets = false;
    for (const auto& roi : s.targets)
        if (!roi.empty()) has_targets = true;
    if (targets_only && !has_targets) return;

    std::vector<double> times;
    for (int i = 0; i < s.rois(); ++i) {
        if (has_targets) {
            for (const Observation& o : s.targets[i]) times.push_back(o.t);
        } else {
            for (const Observation& o : s.roi_obs[i])
                if (o.observed) times.push_back(o.t);
        }
    }
    if (times.empty()) return;
    std::sort(times.begin(), times.end());
    std::vector<double> grid;
    for (double t : times)
        if (grid.empty() || t - grid.back() > 1e-9) grid.push_back(t);

    const Array2 pred = reconstruct_prepared(prepare_sample(s), params, a_spa, grid, substeps);

    auto grid_index = [&](double t) {
        const auto it = std::lower_bound(grid.begin(), grid.end(), t - 1e-9);
        return static_cast<int>(it - grid.begin());
    };
    for (int i = 0; i < s.rois(); ++i) {
        if (has_targets) {
            for (const Observation& o : s.targets[i]) {
                const double d = pred.at(i, grid_index(o.t)) - o.value;
                *sse += d * d;
                ++*count;
            }
        } else {
            for (const Observation& o : s.roi_obs[i]) {
                if (!o.observed) continue;
                const double d = pred.at(i, grid_index(o.t)) - o.value;
                *sse += d * d;
                ++*count;
            }
        }
    }
}

} // namespace odesig
