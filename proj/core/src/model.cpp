#include "odesig/model.hpp"

#include <algorithm>
#include <cmath>

#include "odesig/errors.hpp"
#include "odesig/odeint.hpp"
#include "odesig/rng.hpp"

namespace odesig {

void Dims::validate() const {
    if (filters < 2 || filters % 2 != 0)
        throw ConfigError("dims: filters must be even and >= 2 (positional encoding width)");
    if (d_k < 1 || d_g < 1 || d_u < 1 || d_z < 1 || d_h < 1 || kernel < 1)
        throw ConfigError("dims: all widths must be positive");
    if (init_omega_lo <= 0.0 || init_omega_hi < init_omega_lo)
        throw ConfigError("dims: invalid vector-field frequency band");
}

ForwardCounters& forward_counters() {
    static ForwardCounters counters;
    return counters;
}

namespace {

double glorot(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

} // namespace

ModelParams ModelParams::init(const Dims& dims, const Ablations& abl, uint64_t seed) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    p.ablations = abl;
    Rng rng(Rng::derive(seed, 0x1417ull));

    const int F = dims.filters;
    const int k = dims.kernel;
    p.enc.conv_w.resize(F);
    p.enc.conv_b.reserve(F);
    const double conv_scale = glorot(3 * k, 1);
    for (int f = 0; f < F; ++f) {
        p.enc.conv_w[f][0] = random_uniform(1, k, conv_scale, rng);
        p.enc.conv_w[f][1] = random_uniform(1, k, conv_scale, rng);
        // strong weights on the normalized-time channel turn half the filters
        // into time-gated detectors, so the pooled features carry phase
        // information from the very first step
        p.enc.conv_w[f][2] = random_uniform(1, k, 4.0, rng);
        Array2 bias(1, 1);
        bias.at(0, 0) = rng.uniform(-2.0, 2.0);
        p.enc.conv_b.push_back(bias);
    }
    const double proj_scale = glorot(F, dims.d_k);
    p.enc.wq = random_uniform(F, dims.d_k, proj_scale, rng);
    p.enc.wk = random_uniform(F, dims.d_k, proj_scale, rng);
    p.enc.wv = random_uniform(F, dims.d_k, proj_scale, rng);

    const double gcn_scale = glorot(dims.d_k, dims.d_g);
    p.gcn.w_temporal = random_uniform(dims.d_k, dims.d_g, gcn_scale, rng);
    p.gcn.w_spatial = random_uniform(dims.d_k, dims.d_g, gcn_scale, rng);
    const int dt = abl.no_temporal_graph ? dims.d_k : dims.d_g;
    const int ds = abl.no_spatial_graph ? dims.d_k : dims.d_g;
    p.gcn.w_fuse = random_uniform(dt + ds, dims.d_u, glorot(dt + ds, dims.d_u), rng);
    p.gcn.b_fuse = Array2(1, dims.d_u);

    const double head_scale = glorot(dims.d_u, dims.d_z);
    p.post.w_mu = random_uniform(dims.d_u, dims.d_z, head_scale, rng);
    p.post.b_mu = Array2(1, dims.d_z);
    p.post.w_logvar = random_uniform(dims.d_u, dims.d_z, head_scale, rng);
    // start with a tight posterior so early epochs are not noise-dominated
    p.post.b_logvar = Array2(1, dims.d_z, -3.0);

    // Frequency-modulated oscillator initialization. Each block owns state
    // dims (x, y, s) and four hidden units tanh(c(y+s)), tanh(c(y-s)),
    // tanh(c(x+s)), tanh(c(x-s)); combining the first two with weight
    // -omega/(2c) gives xdot = -omega (1 - c^2 s^2) y to third order, and
    // likewise ydot. So each trajectory rotates at a rate set by its own
    // constant s dim (sdot = 0), and the initial state can carry amplitude,
    // phase, and frequency per ROI. Base rates are log-spaced over the
    // configured band; leftover dims stay small random.
    {
        const double c = 0.7;
        const int blocks = std::min(dims.d_z / 3, dims.d_h / 4);
        p.ode.w1 = random_uniform(dims.d_z, dims.d_h, 0.05, rng);
        p.ode.w2 = random_uniform(dims.d_h, dims.d_z, 0.05, rng);
        for (int b = 0; b < blocks; ++b) {
            const double frac = blocks > 1 ? static_cast<double>(b) / (blocks - 1) : 0.5;
            const double omega =
                dims.init_omega_lo * std::pow(dims.init_omega_hi / dims.init_omega_lo, frac);
            const int x = 3 * b, y = 3 * b + 1, s = 3 * b + 2;
            const int h = 4 * b;
            p.ode.w1.at(y, h + 0) = c;
            p.ode.w1.at(s, h + 0) = c;
            p.ode.w1.at(y, h + 1) = c;
            p.ode.w1.at(s, h + 1) = -c;
            p.ode.w1.at(x, h + 2) = c;
            p.ode.w1.at(s, h + 2) = c;
            p.ode.w1.at(x, h + 3) = c;
            p.ode.w1.at(s, h + 3) = -c;
            p.ode.w2.at(h + 0, x) = -omega / (2.0 * c);
            p.ode.w2.at(h + 1, x) = -omega / (2.0 * c);
            p.ode.w2.at(h + 2, y) = omega / (2.0 * c);
            p.ode.w2.at(h + 3, y) = omega / (2.0 * c);
        }
        p.ode.b1 = Array2(1, dims.d_h);
        p.ode.b2 = Array2(1, dims.d_z);
    }

    p.dec.w = random_uniform(dims.d_z, 1, glorot(dims.d_z, 1), rng);
    p.dec.b = Array2(1, 1);
    return p;
}

void ModelParams::for_each_tensor(const std::function<void(const std::string&, Array2&)>& fn) {
    for (size_t f = 0; f < enc.conv_w.size(); ++f) {
        for (int c = 0; c < 3; ++c)
            fn("enc.conv_w." + std::to_string(f) + "." + std::to_string(c), enc.conv_w[f][c]);
        fn("enc.conv_b." + std::to_string(f), enc.conv_b[f]);
    }
    fn("enc.wq", enc.wq);
    fn("enc.wk", enc.wk);
    fn("enc.wv", enc.wv);
    fn("gcn.w_temporal", gcn.w_temporal);
    fn("gcn.w_spatial", gcn.w_spatial);
    fn("gcn.w_fuse", gcn.w_fuse);
    fn("gcn.b_fuse", gcn.b_fuse);
    fn("post.w_mu", post.w_mu);
    fn("post.b_mu", post.b_mu);
    fn("post.w_logvar", post.w_logvar);
    fn("post.b_logvar", post.b_logvar);
    fn("ode.w1", ode.w1);
    fn("ode.b1", ode.b1);
    fn("ode.w2", ode.w2);
    fn("ode.b2", ode.b2);
    fn("dec.w", dec.w);
    fn("dec.b", dec.b);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const Array2&)>& fn) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](const std::string& name, Array2& t) { fn(name, t); });
}

size_t ModelParams::count() const {
    size_t n = 0;
    for_each_tensor([&](const std::string&, const Array2& t) { n += t.size(); });
    return n;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for_each_tensor([&](const std::string&, const Array2& t) {
        flat.insert(flat.end(), t.data.begin(), t.data.end());
    });
    return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
    size_t off = 0;
    for_each_tensor([&](const std::string& name, Array2& t) {
        if (off + t.size() > flat.size())
            throw DimensionError("unflatten: vector too short at " + name);
        std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data.begin());
        off += t.size();
    });
    if (off != flat.size())
        throw DimensionError("unflatten: vector has " + std::to_string(flat.size()) +
                             " entries, model needs " + std::to_string(off));
}

ModelLeaves make_leaves(Tape& t, const ModelParams& p) {
    ModelLeaves L;
    const int F = p.enc.filters();
    L.enc.conv_w.resize(F);
    L.enc.conv_b.reserve(F);
    // must mirror for_each_tensor order
    for (int f = 0; f < F; ++f) {
        for (int c = 0; c < 3; ++c) {
            L.enc.conv_w[f][c] = t.leaf(p.enc.conv_w[f][c]);
            L.ordered.push_back(L.enc.conv_w[f][c]);
        }
        L.enc.conv_b.push_back(t.leaf(p.enc.conv_b[f]));
        L.ordered.push_back(L.enc.conv_b[f]);
    }
    auto reg = [&](const Array2& v) {
        Var leaf = t.leaf(v);
        L.ordered.push_back(leaf);
        return leaf;
    };
    L.enc.wq = reg(p.enc.wq);
    L.enc.wk = reg(p.enc.wk);
    L.enc.wv = reg(p.enc.wv);
    L.gcn.w_temporal = reg(p.gcn.w_temporal);
    L.gcn.w_spatial = reg(p.gcn.w_spatial);
    L.gcn.w_fuse = reg(p.gcn.w_fuse);
    L.gcn.b_fuse = reg(p.gcn.b_fuse);
    L.post.w_mu = reg(p.post.w_mu);
    L.post.b_mu = reg(p.post.b_mu);
    L.post.w_logvar = reg(p.post.w_logvar);
    L.post.b_logvar = reg(p.post.b_logvar);
    L.ode.w1 = reg(p.ode.w1);
    L.ode.b1 = reg(p.ode.b1);
    L.ode.w2 = reg(p.ode.w2);
    L.ode.b2 = reg(p.ode.b2);
    L.dec.w = reg(p.dec.w);
    L.dec.b = reg(p.dec.b);
    return L;
}

std::vector<double> pad_grid(const std::vector<double>& grid,
                             std::vector<int>* index_of_original) {
    constexpr double kMaxGap = 1.0;
    std::vector<double> out;
    if (index_of_original) index_of_original->clear();
    for (size_t i = 0; i < grid.size(); ++i) {
        if (i > 0) {
            const double gap = grid[i] - grid[i - 1];
            const int pieces = static_cast<int>(std::ceil(gap / kMaxGap - 1e-9));
            for (int p = 1; p < pieces; ++p)
                out.push_back(grid[i - 1] + gap * p / pieces);
        }
        if (index_of_original) index_of_original->push_back(static_cast<int>(out.size()));
        out.push_back(grid[i]);
    }
    return out;
}

PreparedSample prepare_sample(const SignalSample& s) {
    s.validate();
    PreparedSample ps;
    ps.id = s.id;
    const int N = s.rois();
    double max_t = 0.0;
    for (int i = 0; i < N; ++i)
        for (const Observation& o : s.roi_obs[i]) max_t = std::max(max_t, o.t);
    const double span = std::max({s.duration, max_t, 1e-9});

    // The encoder sees a nominal raster at the 1 s base rate whatever the
    // observation density: each slot pools its nearest observations (mean
    // value and mean actual timestamp). Oversampled or offset test inputs
    // then look like jittered regular series instead of out-of-distribution
    // sequence lengths; the loss and the solver still use exact times.
    const int t_nom = static_cast<int>(std::floor(span + 1e-9)) + 1;
    ps.roi_mean.resize(N);
    ps.roi_std.resize(N);
    ps.enc.resize(N);
    for (int i = 0; i < N; ++i) {
        double mean = 0.0, var = 0.0;
        int n_obs = 0;
        for (const Observation& o : s.roi_obs[i])
            if (o.observed) {
                mean += o.value;
                ++n_obs;
            }
        mean /= n_obs;
        for (const Observation& o : s.roi_obs[i])
            if (o.observed) var += (o.value - mean) * (o.value - mean);
        double sd = std::sqrt(var / n_obs);
        if (sd < 1e-12) sd = 1.0;
        ps.roi_mean[i] = mean;
        ps.roi_std[i] = sd;

        std::vector<int> slot_count(t_nom, 0);
        std::vector<double> slot_value(t_nom, 0.0), slot_time(t_nom, 0.0);
        for (const Observation& o : s.roi_obs[i]) {
            if (!o.observed) continue;
            int k = static_cast<int>(std::lround(o.t));
            k = std::min(std::max(k, 0), t_nom - 1);
            ++slot_count[k];
            slot_value[k] += o.value;
            slot_time[k] += o.t;
        }
        EncoderInput& e = ps.enc[i];
        for (int k = 0; k < t_nom; ++k) {
            if (slot_count[k] > 0) {
                e.values.push_back((slot_value[k] / slot_count[k] - mean) / sd);
                e.mask.push_back(1.0);
                e.tnorm.push_back(slot_time[k] / slot_count[k] / span);
            } else {
                e.values.push_back(0.0);
                e.mask.push_back(0.0);
                e.tnorm.push_back(static_cast<double>(k) / span);
            }
        }
    }

    // union grid over all observed times, anchored at t = 0
    std::vector<double> times;
    for (int i = 0; i < N; ++i)
        for (const Observation& o : s.roi_obs[i])
            if (o.observed) times.push_back(o.t);
    times.push_back(0.0);
    std::sort(times.begin(), times.end());
    std::vector<double> uniq;
    for (double t : times)
        if (uniq.empty() || t - uniq.back() > 1e-9) uniq.push_back(t);
    ps.grid = pad_grid(uniq, nullptr);

    const int G = static_cast<int>(ps.grid.size());
    ps.target = Array2(N, G);
    ps.mask = Array2(N, G);
    for (int i = 0; i < N; ++i) {
        for (const Observation& o : s.roi_obs[i]) {
            if (!o.observed) continue;
            const auto it = std::lower_bound(ps.grid.begin(), ps.grid.end(), o.t - 1e-9);
            const int g = static_cast<int>(it - ps.grid.begin());
            ps.target.at(i, g) = (o.value - ps.roi_mean[i]) / ps.roi_std[i];
            ps.mask.at(i, g) = 1.0;
            ++ps.obs_count;
        }
    }
    return ps;
}

LatentForward forward_latent(Tape& t, const PreparedSample& ps, const ModelLeaves& L,
                             const Array2& a_spa, const Ablations& abl, const Array2* eps,
                             int substeps) {
    const int N = static_cast<int>(ps.enc.size());
    std::vector<Var> hs;
    hs.reserve(N);
    for (int i = 0; i < N; ++i) {
        Var f = short_term_encode(t, ps.enc[i], L.enc);
        hs.push_back(long_term_encode(t, f, L.enc, !abl.no_positional_encoder));
    }
    Var H = t.stack_rows(hs);

    Var branch_t = H;
    Var branch_s = H;
    if (!abl.no_temporal_graph) {
        Var a = build_temporal_graph(t, H);
        branch_t = gcn_layer(t, H, zero_diagonal(t, a), L.gcn.w_temporal);
        forward_counters().temporal_gcn_calls.fetch_add(1, std::memory_order_relaxed);
    }
    if (!abl.no_spatial_graph) {
        branch_s = gcn_layer(t, H, t.constant(a_spa), L.gcn.w_spatial);
        forward_counters().spatial_gcn_calls.fetch_add(1, std::memory_order_relaxed);
    }
    Var u = fuse(t, branch_t, branch_s, L.gcn.w_fuse, L.gcn.b_fuse);

    LatentForward out;
    auto post = infer_posterior(t, u, L.post);
    out.mu = post.first;
    out.logvar = post.second;
    out.z0 = eps ? reparameterize(t, out.mu, out.logvar, *eps) : out.mu;

    auto field = [&](Var z) { return ode_field(t, z, L.ode); };
    out.states = rk4_solve(field, out.z0, ps.grid, substeps);

    std::vector<Var> cols;
    cols.reserve(out.states.size());
    for (const Var& z : out.states) cols.push_back(decode(t, z, L.dec));
    out.decoded = t.concat_cols(cols);
    return out;
}

LossTerms attach_loss(Tape& t, const LatentForward& f, const PreparedSample& ps, double w_mse,
                      double w_kl) {
    if (ps.obs_count == 0) throw ContractError("attach_loss: sample has no observed points");
    LossTerms out;
    Var err = mul(f.decoded - t.constant(ps.target), t.constant(ps.mask));
    out.sq_sum = sum_all(mul(err, err));

    const Array2& mu_v = t.value(f.mu);
    Var ones = t.constant(Array2(mu_v.rows, mu_v.cols, 1.0));
    Var kl_in = (t.exp(f.logvar) + mul(f.mu, f.mu)) - ones - f.logvar;
    out.kl_sum = 0.5 * sum_all(kl_in);

    out.loss = w_mse * out.sq_sum + w_kl * out.kl_sum;
    return out;
}

} // namespace odesig
