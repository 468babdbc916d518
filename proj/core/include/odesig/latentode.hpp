#pragma once

#include <vector>

#include "odesig/array2.hpp"
#include "odesig/odeint.hpp"
#include "odesig/tape.hpp"

namespace odesig {

// Gaussian posterior over the per-ROI initial latent states.
struct PosteriorParams {
    Array2 mu;     // N x d_z
    Array2 logvar; // N x d_z
};

// Affine heads mapping fused representations to posterior mean/log-variance.
struct PosteriorHead {
    Array2 w_mu, b_mu;         // d_u x d_z, 1 x d_z
    Array2 w_logvar, b_logvar; // d_u x d_z, 1 x d_z
};

struct PosteriorLeaves {
    Var w_mu, b_mu, w_logvar, b_logvar;
};

// Two-layer perceptron d_z -> d_h -> d_z with tanh hidden activation, shared
// across ROIs; the latent vector field.
struct OdeFuncParams {
    Array2 w1, b1; // d_z x d_h, 1 x d_h
    Array2 w2, b2; // d_h x d_z, 1 x d_z
};

struct OdeFuncLeaves {
    Var w1, b1, w2, b2;
};

// Affine readout d_z -> 1 with unit observation variance, so the negative
// log-likelihood of an observation reduces to squared error.
struct DecoderParams {
    Array2 w; // d_z x 1
    Array2 b; // 1 x 1
};

struct DecoderLeaves {
    Var w, b;
};

// Latent path and decoded values on a requested grid.
struct Trajectory {
    std::vector<double> grid;
    std::vector<Array2> states; // per grid point, N x d_z
    Array2 decoded;             // N x grid.size()
};

PosteriorParams infer_posterior(const Array2& u, const PosteriorHead& head);
std::pair<Var, Var> infer_posterior(Tape& t, Var u, const PosteriorLeaves& head);

// z0 = mu + exp(logvar/2) .* eps. Gradients flow to mu and logvar only.
Array2 reparameterize(const PosteriorParams& p, const Array2& eps);
Var reparameterize(Tape& t, Var mu, Var logvar, const Array2& eps);

Array2 ode_field(const Array2& z, const OdeFuncParams& p);
Var ode_field(Tape& t, Var z, const OdeFuncLeaves& p);

Array2 decode(const Array2& z, const DecoderParams& p);
Var decode(Tape& t, Var z, const DecoderLeaves& p);

} // namespace odesig
