#include <benchmark/benchmark.h>

#include "odesig/datagen.hpp"
#include "odesig/model.hpp"
#include "odesig/rng.hpp"
#include "odesig/training.hpp"

using namespace odesig;

namespace {

Dims bench_dims() {
    Dims d;
    d.filters = 32;
    d.d_k = 32;
    d.d_g = 32;
    d.d_u = 32;
    d.d_z = 21;
    d.d_h = 32;
    return d;
}

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    const Array2 a = random_uniform(n, n, 1.0, rng);
    const Array2 b = random_uniform(n, n, 1.0, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(128);

void BM_tape_backward(benchmark::State& state) {
    Rng rng(2);
    const Array2 av = random_uniform(64, 64, 1.0, rng);
    const Array2 bv = random_uniform(64, 64, 1.0, rng);
    for (auto _ : state) {
        Tape t;
        Var a = t.leaf(av);
        Var b = t.leaf(bv);
        Var loss = sum_all(tanh(matmul(a, b)));
        t.backward(loss);
        benchmark::DoNotOptimize(t.grad(a));
    }
}
BENCHMARK(BM_tape_backward);

void BM_encoder_forward(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    ModelParams p = ModelParams::init(bench_dims(), Ablations{}, 3);
    EncoderInput in;
    Rng rng(4);
    for (int j = 0; j < T; ++j) {
        in.values.push_back(rng.uniform(-1.0, 1.0));
        in.mask.push_back(1.0);
        in.tnorm.push_back(static_cast<double>(j) / T);
    }
    for (auto _ : state) {
        const Array2 f = short_term_encode(in, p.enc);
        benchmark::DoNotOptimize(long_term_encode(f, p.enc, true));
    }
}
BENCHMARK(BM_encoder_forward)->Arg(64)->Arg(256);

void BM_rk4_field(benchmark::State& state) {
    ModelParams p = ModelParams::init(bench_dims(), Ablations{}, 5);
    Rng rng(6);
    const Array2 z0 = random_uniform(8, 21, 0.5, rng);
    std::vector<double> grid;
    for (int k = 0; k <= 50; ++k) grid.push_back(static_cast<double>(k));
    auto field = [&](const Array2& z) { return ode_field(z, p.ode); };
    for (auto _ : state) benchmark::DoNotOptimize(rk4_solve(field, z0, grid, 2));
}
BENCHMARK(BM_rk4_field);

void BM_reconstruct(benchmark::State& state) {
    GeneratorSpec gen;
    gen.samples = 1;
    gen.rois = 8;
    gen.duration = 50.0;
    gen.seed = 7;
    const Dataset ds = generate(gen);
    const ModelParams params = ModelParams::init(bench_dims(), Ablations{}, 7);
    std::vector<double> grid;
    for (int k = 0; k <= 50; ++k) grid.push_back(static_cast<double>(k));
    for (auto _ : state)
        benchmark::DoNotOptimize(reconstruct(ds.samples[0], params, ds.atlas, grid, 2));
}
BENCHMARK(BM_reconstruct);

} // namespace

BENCHMARK_MAIN();
