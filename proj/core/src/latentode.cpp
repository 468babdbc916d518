#include "odesig/latentode.hpp"

#include <cmath>

#include "odesig/errors.hpp"

namespace odesig {

PosteriorParams infer_posterior(const Array2& u, const PosteriorHead& head) {
    if (!u.all_finite()) throw ContractError("infer_posterior: non-finite input");
    PosteriorParams p;
    p.mu = matmul(u, head.w_mu);
    p.logvar = matmul(u, head.w_logvar);
    for (int i = 0; i < p.mu.rows; ++i)
        for (int j = 0; j < p.mu.cols; ++j) {
            p.mu.at(i, j) += head.b_mu.at(0, j);
            p.logvar.at(i, j) += head.b_logvar.at(0, j);
        }
    return p;
}

std::pair<Var, Var> infer_posterior(Tape& t, Var u, const PosteriorLeaves& head) {
    Var mu = t.add_rowvec(matmul(u, head.w_mu), head.b_mu);
    Var logvar = t.add_rowvec(matmul(u, head.w_logvar), head.b_logvar);
    return {mu, logvar};
}

Array2 reparameterize(const PosteriorParams& p, const Array2& eps) {
    require_same_shape(p.mu, eps, "reparameterize");
    Array2 z = p.mu;
    for (size_t i = 0; i < z.data.size(); ++i)
        z.data[i] += std::exp(0.5 * p.logvar.data[i]) * eps.data[i];
    return z;
}

Var reparameterize(Tape& t, Var mu, Var logvar, const Array2& eps) {
    require_same_shape(t.value(mu), eps, "reparameterize");
    Var sigma = t.exp(0.5 * logvar);
    return mu + mul(sigma, t.constant(eps));
}

Array2 ode_field(const Array2& z, const OdeFuncParams& p) {
    Array2 hct = matmul(z, p.w1);
    for (int i = 0; i < hct.rows; ++i)
        for (int j = 0; j < hct.cols; ++j) hct.at(i, j) = std::tanh(hct.at(i, j) + p.b1.at(0, j));
    Array2 out = matmul(hct, p.w2);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += p.b2.at(0, j);
    return out;
}

Var ode_field(Tape& t, Var z, const OdeFuncLeaves& p) {
    Var hidden = tanh(t.add_rowvec(matmul(z, p.w1), p.b1));
    return t.add_rowvec(matmul(hidden, p.w2), p.b2);
}

Array2 decode(const Array2& z, const DecoderParams& p) {
    if (!z.all_finite()) throw ContractError("decode: non-finite latent state");
    Array2 out = matmul(z, p.w);
    for (double& v : out.data) v += p.b.at(0, 0);
    return out;
}

Var decode(Tape& t, Var z, const DecoderLeaves& p) {
    return t.add_scalar(matmul(z, p.w), p.b);
}

} // namespace odesig
