#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "odesig/datagen.hpp"
#include "odesig/encoder.hpp"
#include "odesig/latentode.hpp"
#include "odesig/relgraphs.hpp"

namespace odesig {

struct Dims {
    int filters = 16;    // F, also the positional-encoding width
    int d_k = 16;        // attention value width = latent initial value width
    int d_g = 16;        // GCN output width
    int d_u = 16;        // fused representation width
    int d_z = 15;        // ODE state width (3 dims per oscillator block)
    int d_h = 48;        // ODE MLP hidden width
    int kernel = 4;      // conv kernel size

    // Frequency band covered by the vector-field initialization. The MLP
    // starts as a bank of frequency-modulated oscillator blocks whose base
    // rates are log-spaced over [omega_lo, omega_hi] rad/s; without this
    // structure, gradient descent almost never discovers multi-cycle
    // oscillations through the unrolled solver.
    double init_omega_lo = 0.3141592653589793; // 2*pi/20
    double init_omega_hi = 1.5707963267948966; // 2*pi/4

    void validate() const;
};

struct Ablations {
    bool no_positional_encoder = false;
    bool no_temporal_graph = false;
    bool no_spatial_graph = false;
};

// All learnable tensors, visited in a fixed order so flatten/unflatten,
// checkpoints and gradient extraction agree bit-for-bit.
struct ModelParams {
    Dims dims;
    Ablations ablations;
    EncoderParams enc;
    GcnParams gcn;
    PosteriorHead post;
    OdeFuncParams ode;
    DecoderParams dec;

    static ModelParams init(const Dims& dims, const Ablations& abl, uint64_t seed);

    void for_each_tensor(const std::function<void(const std::string&, Array2&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Array2&)>& fn) const;

    size_t count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

// Instrumentation for the ablation switches: each counter ticks when its code
// path actually runs.
struct ForwardCounters {
    std::atomic<long> positional_encodings{0};
    std::atomic<long> temporal_gcn_calls{0};
    std::atomic<long> spatial_gcn_calls{0};
    void reset() {
        positional_encodings = 0;
        temporal_gcn_calls = 0;
        spatial_gcn_calls = 0;
    }
};
ForwardCounters& forward_counters();

struct ModelLeaves {
    EncoderLeaves enc;
    GcnLeaves gcn;
    PosteriorLeaves post;
    OdeFuncLeaves ode;
    DecoderLeaves dec;
    std::vector<Var> ordered; // flatten order, for gradient extraction
};

ModelLeaves make_leaves(Tape& t, const ModelParams& p);

// One sample rasterized for the model: per-ROI encoder channels (values
// z-scored over observed points), the union time grid anchored at zero, and
// the normalized regression targets aligned to that grid.
struct PreparedSample {
    int id = 0;
    std::vector<EncoderInput> enc;
    std::vector<double> roi_mean, roi_std;
    std::vector<double> grid;
    Array2 target; // N x G, z-scored, zero where unobserved
    Array2 mask;   // N x G in {0,1}
    int obs_count = 0;
};

PreparedSample prepare_sample(const SignalSample& s);

// Splits any gap wider than the 1 s base sampling step into uniform pieces so
// the RK4 step stays bounded on sparse grids (held-out blocks, extrapolation
// tails). When index_of_original is given it receives the position of each
// input point inside the padded grid.
std::vector<double> pad_grid(const std::vector<double>& grid,
                             std::vector<int>* index_of_original);

struct LatentForward {
    Var mu, logvar, z0;
    std::vector<Var> states; // per grid point
    Var decoded;             // N x G (normalized space)
};

// Full differentiable pipeline: encode, relation graphs, posterior, sample,
// integrate, decode. Pass eps = nullptr for posterior-mean (deterministic)
// inference.
LatentForward forward_latent(Tape& t, const PreparedSample& ps, const ModelLeaves& L,
                             const Array2& a_spa, const Ablations& abl, const Array2* eps,
                             int substeps);

struct LossTerms {
    Var loss;   // w_mse * sq_sum + w_kl * kl_sum
    Var sq_sum; // sum of masked squared errors
    Var kl_sum; // sum over ROIs of KL(N(mu,sigma) || N(0,1))
};

LossTerms attach_loss(Tape& t, const LatentForward& f, const PreparedSample& ps, double w_mse,
                      double w_kl);

} // namespace odesig
