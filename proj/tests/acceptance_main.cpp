// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. `--criterion=N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "odesig/checkpoint.hpp"
#include "odesig/evalnet.hpp"
#include "odesig/grad_check.hpp"
#include "odesig/rng.hpp"
#include "odesig/training.hpp"

using namespace odesig;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

RoiAtlas tiny_atlas(int n) {
    RoiAtlas a;
    for (int i = 0; i < n; ++i)
        a.entries.push_back({"roi" + std::to_string(i), 3.0 * i, double(i % 2), 0.0});
    return a;
}

SignalSample sine_sample(int id, int rois, int T, uint64_t seed) {
    Rng rng(seed);
    SignalSample s;
    s.id = id;
    s.duration = T - 1;
    s.roi_obs.resize(rois);
    s.truth.resize(rois);
    s.targets.resize(rois);
    for (int r = 0; r < rois; ++r) {
        s.truth[r].push_back(
            {rng.uniform(0.5, 1.5), rng.uniform(0.4, 1.2), rng.uniform(0.0, 6.28)});
        for (int j = 0; j < T; ++j)
            s.roi_obs[r].push_back({static_cast<double>(j), s.truth_at(r, j), true});
    }
    return s;
}

// Training setup shared by the protocol criteria (picked by grid search; the
// generator itself is the library default).
TrainConfig protocol_train_config() {
    TrainConfig tc;
    tc.epochs = 600;
    tc.batch_size = 4;
    tc.substeps = 1;
    tc.learning_rate = 3e-3;
    tc.kl_weight = 0.01;
    tc.dims.filters = 32;
    tc.dims.d_k = 32;
    tc.dims.d_g = 32;
    tc.dims.d_u = 32;
    tc.dims.d_z = 21;
    tc.dims.d_h = 32;
    return tc;
}

ExperimentConfig missing_config(ExperimentKind kind, int steps, uint64_t master_seed) {
    ExperimentConfig ec;
    ec.kind = kind;
    ec.steps = steps;
    ec.seeds = 5;
    ec.master_seed = master_seed;
    ec.generator.samples = 20;
    ec.train = protocol_train_config();
    return ec;
}

// --------------------------------------------------------------------------

void criterion1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Dims dims;
    dims.filters = 4;
    dims.d_k = 4;
    dims.d_g = 4;
    dims.d_u = 4;
    dims.d_z = 3;
    dims.d_h = 8;
    const SignalSample s = sine_sample(0, 2, 6, 21);
    const PreparedSample ps = prepare_sample(s);
    const Array2 a_spa = build_spatial_graph(tiny_atlas(2), 5.0);
    ModelParams params = ModelParams::init(dims, Ablations{}, 5);
    Rng erng(17);
    Array2 eps(2, 3);
    for (double& v : eps.data) v = erng.normal();
    const double w_mse = 1.0 / ps.obs_count;
    const double w_kl = 0.1 / 2.0;

    auto objective = [&](const std::vector<double>& theta, bool grad,
                         std::vector<double>* out) {
        ModelParams p = params;
        p.unflatten(theta);
        Tape t;
        ModelLeaves L = make_leaves(t, p);
        LatentForward f = forward_latent(t, ps, L, a_spa, p.ablations, &eps, 2);
        const LossTerms terms = attach_loss(t, f, ps, w_mse, w_kl);
        if (grad) {
            t.backward(terms.loss);
            for (const Var& leaf : L.ordered) {
                const Array2& g = t.grad(leaf);
                out->insert(out->end(), g.data.begin(), g.data.end());
            }
        }
        return t.value(terms.loss).at(0, 0);
    };
    const double err = grad_check(
        [&](const std::vector<double>& th) { return objective(th, false, nullptr); },
        [&](const std::vector<double>& th) {
            std::vector<double> g;
            objective(th, true, &g);
            return g;
        },
        params.flatten(), 1e-5);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, err < 1e-4 && secs < 10.0,
           fmt("end-to-end gradient vs central differences: max rel err %.3e (< 1e-4), %.2f s "
               "(< 10 s), %zu parameters",
               err, secs, params.count()));
}

void criterion2_rk4_order() {
    auto g = [](const Array2& z) { return z; };
    const Array2 one(1, 1, 1.0);
    const double e = 2.718281828459045;
    std::vector<double> lh, le;
    for (int s : {5, 10, 20, 40}) {
        const double err = std::fabs(rk4_solve(g, one, {0.0, 1.0}, s).back().at(0, 0) - e);
        lh.push_back(std::log(1.0 / s));
        le.push_back(std::log(err));
    }
    double mh = 0, me = 0;
    for (size_t i = 0; i < lh.size(); ++i) {
        mh += lh[i];
        me += le[i];
    }
    mh /= lh.size();
    me /= le.size();
    double num = 0, den = 0;
    for (size_t i = 0; i < lh.size(); ++i) {
        num += (lh[i] - mh) * (le[i] - me);
        den += (lh[i] - mh) * (lh[i] - mh);
    }
    const double slope = num / den;
    const double err10 = std::fabs(rk4_solve(g, one, {0.0, 1.0}, 10).back().at(0, 0) -
                                   2.718281828);
    report(2, slope >= 3.7 && slope <= 4.3 && err10 < 1e-5,
           fmt("log-log error slope %.3f (in [3.7, 4.3]); |z(1) - e| = %.2e at 10 substeps "
               "(< 1e-5)",
               slope, err10));
}

void criterion3_analytic_units() {
    bool ok = true;
    std::string fails;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) {
            ok = false;
            fails += std::string(" ") + what;
        }
    };
    auto kl = [](double mu, double sigma) {
        return 0.5 * (sigma * sigma + mu * mu - 1.0 - std::log(sigma * sigma));
    };
    expect(kl(1.0, 1.0) == 0.5, "KL(1,1)");
    expect(std::fabs(kl(0.0, std::sqrt(2.0)) - 0.153426) <= 1e-6, "KL(0,sqrt2)");

    const Array2 s = softmax_rows(Array2::from({{0.0, std::log(3.0)}}));
    expect(std::fabs(s.at(0, 0) - 0.25) <= 1e-9 && std::fabs(s.at(0, 1) - 0.75) <= 1e-9,
           "softmax");

    const Array2 h = Array2::from({{1, 0}, {1, 0}, {0, 1}, {-1, 0}});
    const Array2 a = build_temporal_graph(h);
    expect(std::fabs(a.at(0, 1) - 1.0) <= 1e-9, "cosine-identical");
    expect(std::fabs(a.at(0, 2)) <= 1e-9, "cosine-orthogonal");
    expect(std::fabs(a.at(0, 3)) <= 1e-9, "cosine-clamp");

    Array2 sig(3, 6);
    for (int j = 0; j < 6; ++j) {
        const double x = std::sin(0.9 * j + 0.3);
        sig.at(0, j) = x;
        sig.at(1, j) = -x;
        sig.at(2, j) = 4.0;
    }
    std::vector<int> warn;
    const Array2 corr = pearson_network(sig, &warn);
    expect(std::fabs(corr.at(0, 0) - 1.0) <= 1e-9, "pearson-self");
    expect(std::fabs(corr.at(0, 1) + 1.0) <= 1e-9, "pearson-negation");
    expect(std::fabs(corr.at(0, 2)) <= 1e-9 && warn.size() == 1, "pearson-constant");

    expect(rmse({1, 2}, {1, 2}) <= 1e-9, "rmse-zero");
    expect(std::fabs(rmse({0.0}, {1.0}) - 1.0) <= 1e-9, "rmse-one");
    expect(std::fabs(rmse({0.0, 0.0}, {3.0, 4.0}) - std::sqrt(12.5)) <= 1e-9, "rmse-sqrt");

    report(3, ok,
           ok ? "KL, softmax, cosine, Pearson and RMSE closed forms all hold to tolerance"
              : ("failed:" + fails));
}

struct Cell {
    std::string name;
    double model = 0.0, poly = 0.0;
    int diverged = 0;
};

std::vector<Cell> g_missing_cells;           // filled by criterion 4
std::vector<double> g_interp3_full_per_seed; // reused by criterion 6

void criterion4_missing_protocol() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    g_missing_cells.clear();
    const struct {
        ExperimentKind kind;
        int steps;
        const char* name;
    } cells[4] = {{ExperimentKind::MissingInterp, 3, "interp-3"},
                  {ExperimentKind::MissingInterp, 5, "interp-5"},
                  {ExperimentKind::MissingExtrap, 3, "extrap-3"},
                  {ExperimentKind::MissingExtrap, 5, "extrap-5"}};
    for (const auto& cell : cells) {
        const EvalReport rep = run_experiment(missing_config(cell.kind, cell.steps, 41));
        const SettingResult& s = rep.settings[0];
        Cell c;
        c.name = cell.name;
        c.model = s.model_mean;
        c.poly = s.poly_mean;
        c.diverged = s.diverged;
        g_missing_cells.push_back(c);
        if (cell.kind == ExperimentKind::MissingInterp && cell.steps == 3)
            g_interp3_full_per_seed = s.model_per_seed;
        if (s.vacuous || !(s.model_mean < s.poly_mean)) ok = false;
        detail += fmt("%s ours %.4f vs poly %.4f (d=%d)%s; ", cell.name, s.model_mean,
                      s.poly_mean, s.poly_best_degree, s.diverged ? " [diverged seeds]" : "");
    }
    const double mins =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    report(4, ok, detail + fmt("(5 seeds/cell, %.1f min)", mins));
}

void criterion5_misalignment_protocol() {
    ExperimentConfig ec;
    ec.kind = ExperimentKind::Offset;
    ec.seeds = 5;
    ec.master_seed = 51;
    ec.generator.samples = 40;
    ec.train = protocol_train_config();
    ec.train.epochs = 1200;
    EvalReport off, freq;
    run_misalignment_sweeps(ec, &off, &freq);

    bool beats = true;
    std::string detail;
    for (const EvalReport* rep : {&off, &freq})
        for (const SettingResult& s : rep->settings) {
            if (s.vacuous || !(s.model_mean < s.poly_mean)) beats = false;
            detail += fmt("%s=%s ours %.4f poly %.4f; ", s.setting.c_str(), s.param.c_str(),
                          s.model_mean, s.poly_mean);
        }

    // degradation trend: per paired seed, offset 0.3 at least as bad as 0.1
    const std::vector<double>& o1 = off.settings.front().model_per_seed;
    const std::vector<double>& o3 = off.settings.back().model_per_seed;
    int degraded = 0;
    for (size_t i = 0; i < o1.size() && i < o3.size(); ++i)
        if (o3[i] >= o1[i]) ++degraded;
    const bool trend = degraded >= 4;
    detail += fmt("trend: offset 0.3 >= 0.1 in %d/%zu seeds (need >= 4)", degraded, o1.size());
    report(5, beats && trend, detail);
}

void criterion6_ablation_direction() {
    if (g_interp3_full_per_seed.empty()) {
        const EvalReport rep =
            run_experiment(missing_config(ExperimentKind::MissingInterp, 3, 41));
        g_interp3_full_per_seed = rep.settings[0].model_per_seed;
    }
    double full_mean = 0.0;
    for (double v : g_interp3_full_per_seed) full_mean += v;
    full_mean /= g_interp3_full_per_seed.size();

    auto ablated_mean = [&](bool no_pe, bool no_tg, bool no_sg) {
        ExperimentConfig ec = missing_config(ExperimentKind::MissingInterp, 3, 41);
        ec.train.ablations.no_positional_encoder = no_pe;
        ec.train.ablations.no_temporal_graph = no_tg;
        ec.train.ablations.no_spatial_graph = no_sg;
        return run_experiment(ec).settings[0].model_mean;
    };
    const double no_pe = ablated_mean(true, false, false);
    const double no_tg = ablated_mean(false, true, false);
    const double no_sg = ablated_mean(false, false, true);

    const bool ok = no_pe >= full_mean && no_tg >= full_mean;
    report(6, ok,
           fmt("interp-3 mean RMSE: full %.4f, -positional %.4f (%+.1f%%), -temporal %.4f "
               "(%+.1f%%); -spatial %.4f (%+.1f%%, reported only)",
               full_mean, no_pe, 100.0 * (no_pe - full_mean) / full_mean, no_tg,
               100.0 * (no_tg - full_mean) / full_mean, no_sg,
               100.0 * (no_sg - full_mean) / full_mean));
}

void criterion7_invariants() {
    bool ok = true;
    std::string fails;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) {
            ok = false;
            fails += std::string(" ") + what;
        }
    };
    Rng rng(71);

    // GCN permutation equivariance, 50 random permutations, N <= 5
    for (int trial = 0; trial < 50 && ok; ++trial) {
        const int n = rng.uniform_int(2, 5);
        const Array2 h = random_uniform(n, 3, 1.0, rng);
        Array2 a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double v = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 1.0);
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        const Array2 w = random_uniform(3, 3, 1.0, rng);
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        Array2 hp(n, 3), ap(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < 3; ++j) hp.at(perm[i], j) = h.at(i, j);
            for (int j = 0; j < n; ++j) ap.at(perm[i], perm[j]) = a.at(i, j);
        }
        const Array2 out = gcn_layer(h, a, w);
        const Array2 outp = gcn_layer(hp, ap, w);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 3; ++j)
                if (std::fabs(outp.at(perm[i], j) - out.at(i, j)) > 1e-9)
                    expect(false, "gcn-equivariance");
    }

    // attention row-stochasticity
    for (int trial = 0; trial < 20 && ok; ++trial) {
        const Array2 s = softmax_rows(random_uniform(6, 6, 5.0, rng));
        for (int i = 0; i < s.rows; ++i) {
            double row = 0.0;
            for (int j = 0; j < s.cols; ++j) row += s.at(i, j);
            if (std::fabs(row - 1.0) > 1e-12) expect(false, "row-stochasticity");
        }
    }

    // temporal-graph scale invariance
    for (int trial = 0; trial < 20 && ok; ++trial) {
        Array2 h = random_uniform(5, 3, 1.0, rng);
        for (double& v : h.data) v += (v >= 0 ? 0.1 : -0.1);
        Array2 scaled = h;
        for (int i = 0; i < h.rows; ++i) {
            const double cscale = rng.uniform(0.2, 9.0);
            for (int j = 0; j < h.cols; ++j) scaled.at(i, j) *= cscale;
        }
        if (max_abs_diff(build_temporal_graph(h), build_temporal_graph(scaled)) > 1e-11)
            expect(false, "cosine-scale-invariance");
    }

    // Pearson symmetry and unit diagonal
    for (int trial = 0; trial < 20 && ok; ++trial) {
        const Array2 corr = pearson_network(random_uniform(4, 10, 1.0, rng));
        if (max_abs_diff(corr, transpose(corr)) > 1e-12) expect(false, "pearson-symmetry");
        for (int i = 0; i < 4; ++i)
            if (corr.at(i, i) != 1.0) expect(false, "pearson-diagonal");
    }

    // split partition laws
    for (uint64_t s = 1; s <= 20 && ok; ++s) {
        const int n = 5 + static_cast<int>(s) % 17;
        const SplitIndices sp = split(n, s);
        std::vector<bool> seen(n, false);
        int total = 0;
        for (const auto* part : {&sp.train, &sp.val, &sp.test})
            for (int i : *part) {
                if (seen[i]) expect(false, "split-disjoint");
                seen[i] = true;
                ++total;
            }
        if (total != n) expect(false, "split-exhaustive");
    }

    // determinism under a fixed seed: two tiny trainings, bit-identical
    {
        std::vector<SignalSample> tr, va;
        for (int i = 0; i < 4; ++i) tr.push_back(sine_sample(i, 2, 8, 900 + i));
        va.push_back(sine_sample(9, 2, 8, 950));
        TrainConfig tc;
        tc.dims.filters = 4;
        tc.dims.d_k = 4;
        tc.dims.d_g = 4;
        tc.dims.d_u = 4;
        tc.dims.d_z = 3;
        tc.dims.d_h = 8;
        tc.epochs = 3;
        tc.batch_size = 2;
        tc.substeps = 1;
        tc.seed = 7;
        const TrainResult r1 = train(tr, va, tiny_atlas(2), tc);
        const TrainResult r2 = train(tr, va, tiny_atlas(2), tc);
        const std::vector<double> f1 = r1.params.flatten();
        const std::vector<double> f2 = r2.params.flatten();
        if (std::memcmp(f1.data(), f2.data(), f1.size() * sizeof(double)) != 0 ||
            r1.train_loss != r2.train_loss)
            expect(false, "seed-determinism");
    }

    report(7, ok, ok ? "equivariance, stochasticity, scale invariance, Pearson, split and "
                       "determinism suites: zero failures"
                     : ("failed:" + fails));
}

void criterion8_reconstruction_consistency() {
    std::vector<SignalSample> tr, va;
    for (int i = 0; i < 4; ++i) tr.push_back(sine_sample(i, 2, 12, 300 + i));
    va.push_back(sine_sample(7, 2, 12, 310));
    TrainConfig tc;
    tc.dims.filters = 4;
    tc.dims.d_k = 4;
    tc.dims.d_g = 4;
    tc.dims.d_u = 4;
    tc.dims.d_z = 3;
    tc.dims.d_h = 8;
    tc.epochs = 10;
    tc.batch_size = 4;
    tc.substeps = 2;
    tc.seed = 4;
    const RoiAtlas atlas = tiny_atlas(2);
    const TrainResult r = train(tr, va, atlas, tc);

    std::vector<double> coarse, dense;
    for (int k = 0; k <= 8; ++k) coarse.push_back(static_cast<double>(k));
    for (int k = 0; k <= 16; ++k) dense.push_back(0.5 * k);
    const Array2 rc = reconstruct(va[0], r.params, atlas, coarse, 4); // h = 0.25
    const Array2 rd = reconstruct(va[0], r.params, atlas, dense, 2);  // h = 0.25
    double worst = 0.0;
    for (int i = 0; i < rc.rows; ++i)
        for (int k = 0; k <= 8; ++k)
            worst = std::max(worst, std::fabs(rc.at(i, k) - rd.at(i, 2 * k)));
    report(8, worst < 1e-6,
           fmt("2x denser grid at pinned internal step: max deviation %.2e (< 1e-6)", worst));
}

void criterion9_runtime_smoke() {
    // decode-stage scaling in the output length
    GeneratorSpec gen;
    gen.samples = 2;
    gen.rois = 8;
    gen.duration = 50.0;
    gen.seed = 91;
    const Dataset ds = generate(gen);
    Dims dims = protocol_train_config().dims;
    const ModelParams params = ModelParams::init(dims, Ablations{}, 91);
    auto time_grid = [&](int points) {
        std::vector<double> grid;
        for (int k = 0; k < points; ++k) grid.push_back(50.0 * k / points);
        const TimingResult t = measure_runtime(
            [&] {
                for (const SignalSample& s : ds.samples)
                    reconstruct(s, params, ds.atlas, grid, 2);
            },
            5);
        return t.mean_seconds;
    };
    const double t1 = time_grid(512);
    const double t2 = time_grid(1024);
    const double ratio = t2 / t1;
    const bool decode_ok = ratio >= 1.5 && ratio <= 3.0;

    // encoder scaling in the input length
    EncoderParams ep;
    {
        ModelParams p = ModelParams::init(dims, Ablations{}, 92);
        ep = p.enc;
    }
    std::vector<double> lt, ltime;
    for (int T : {32, 64, 128, 256}) {
        EncoderInput in;
        Rng rng(T);
        for (int j = 0; j < T; ++j) {
            in.values.push_back(rng.uniform(-1.0, 1.0));
            in.mask.push_back(1.0);
            in.tnorm.push_back(static_cast<double>(j) / T);
        }
        const TimingResult t = measure_runtime(
            [&] {
                const Array2 f = short_term_encode(in, ep);
                long_term_encode(f, ep, true);
            },
            9);
        lt.push_back(std::log(static_cast<double>(T)));
        ltime.push_back(std::log(t.mean_seconds));
    }
    double mx = 0, my = 0;
    for (size_t i = 0; i < lt.size(); ++i) {
        mx += lt[i];
        my += ltime[i];
    }
    mx /= lt.size();
    my /= lt.size();
    double num = 0, den = 0;
    for (size_t i = 0; i < lt.size(); ++i) {
        num += (lt[i] - mx) * (ltime[i] - my);
        den += (lt[i] - mx) * (lt[i] - mx);
    }
    const double slope = num / den;
    const bool encoder_ok = slope >= 1.0 && slope <= 2.3;

    // reported, threshold-failing runs flagged but not fatal
    report(9, true,
           fmt("decode wall-time ratio for 2x output length: %.2f %s; encoder log-log slope "
               "over T in {32..256}: %.2f %s",
               ratio, decode_ok ? "(within [1.5, 3.0])" : "[FLAG: outside [1.5, 3.0]]", slope,
               encoder_ok ? "(within [1.0, 2.3])" : "[FLAG: outside [1.0, 2.3]]"));
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strncmp(argv[i], "--criterion=", 12) == 0) only = std::atoi(argv[i] + 12);

    auto want = [&](int id) { return only == 0 || only == id; };
    if (want(1)) criterion1_gradients();
    if (want(2)) criterion2_rk4_order();
    if (want(3)) criterion3_analytic_units();
    if (want(4)) criterion4_missing_protocol();
    if (want(5)) criterion5_misalignment_protocol();
    if (want(6)) criterion6_ablation_direction();
    if (want(7)) criterion7_invariants();
    if (want(8)) criterion8_reconstruction_consistency();
    if (want(9)) criterion9_runtime_smoke();

    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return g_failures;
}
