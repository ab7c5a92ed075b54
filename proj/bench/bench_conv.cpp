// Convolution throughput: OpenMP im2col+GEMM kernels against the serial reference loops.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "adapto/config.hpp"
#include "adapto/kernels.hpp"
#include "adapto/model.hpp"
#include "adapto/reference.hpp"

namespace {

using adapto::kernels::ConvGeometry;

struct Buffers {
  std::vector<double> x, w, b, y;
};

ConvGeometry geometry(const benchmark::State& state) {
  ConvGeometry g;
  g.batch = 4;
  g.in_channels = static_cast<std::size_t>(state.range(0));
  g.out_channels = g.in_channels;
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(1));
  g.kernel = static_cast<std::size_t>(state.range(2));
  g.padding = g.kernel / 2;
  return g;
}

Buffers buffers(const ConvGeometry& g, bool depthwise) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Buffers b;
  b.x.resize(g.batch * g.in_channels * g.in_h * g.in_w);
  b.w.resize(g.out_channels * (depthwise ? 1 : g.in_channels) * g.kernel * g.kernel);
  b.b.resize(g.out_channels);
  b.y.resize(g.batch * g.out_channels * g.out_h() * g.out_w());
  for (auto* v : {&b.x, &b.w, &b.b})
    for (double& e : *v) e = nd(rng);
  return b;
}

void set_macs(benchmark::State& state, const ConvGeometry& g, bool depthwise) {
  const double macs = static_cast<double>(g.batch * g.out_channels * g.out_h() * g.out_w() * g.kernel * g.kernel *
                                          (depthwise ? 1 : g.in_channels));
  state.counters["MAC/s"] = benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvKernel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(3)));
  const ConvGeometry g = geometry(state);
  Buffers b = buffers(g, false);
  for (auto _ : state) {
    adapto::kernels::conv2d_forward(g, b.x, b.w, b.b, b.y);
    benchmark::DoNotOptimize(b.y.data());
  }
  set_macs(state, g, false);
}

void BM_ConvReference(benchmark::State& state) {
  const ConvGeometry g = geometry(state);
  Buffers b = buffers(g, false);
  for (auto _ : state) {
    adapto::reference::conv2d_naive(g, b.x, b.w, b.b, b.y);
    benchmark::DoNotOptimize(b.y.data());
  }
  set_macs(state, g, false);
}

void BM_DepthwiseKernel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(3)));
  const ConvGeometry g = geometry(state);
  Buffers b = buffers(g, true);
  for (auto _ : state) {
    adapto::kernels::depthwise_forward(g, b.x, b.w, b.b, b.y);
    benchmark::DoNotOptimize(b.y.data());
  }
  set_macs(state, g, true);
}

void BM_DepthwiseReference(benchmark::State& state) {
  const ConvGeometry g = geometry(state);
  Buffers b = buffers(g, true);
  for (auto _ : state) {
    adapto::reference::depthwise_naive(g, b.x, b.w, b.b, b.y);
    benchmark::DoNotOptimize(b.y.data());
  }
  set_macs(state, g, true);
}

void BM_MiniForward(benchmark::State& state) {
  const bool reference = state.range(0) != 0;
  adapto::Model model = adapto::build_model(adapto::preset("mini"));
  std::vector<double> v(16 * 3 * 16 * 16, 0.5);
  const adapto::Tensor x({16, 3, 16, 16}, v);
  for (auto _ : state) {
    if (reference) {
      adapto::reference::ReferenceScope scope;
      benchmark::DoNotOptimize(adapto::forward(model, x, adapto::Mode::eval));
    } else {
      benchmark::DoNotOptimize(adapto::forward(model, x, adapto::Mode::eval));
    }
  }
  state.SetLabel(reference ? "reference" : "openmp");
}

void conv_args(benchmark::internal::Benchmark* b, bool threads) {
  const int max_threads = omp_get_max_threads();
  for (int c : {16, 64})
    for (int k : {3, 5, 7}) {
      if (!threads) {
        b->Args({c, 32, k, 1});
        continue;
      }
      b->Args({c, 32, k, 1});
      if (max_threads > 1) b->Args({c, 32, k, max_threads});
    }
  b->ArgNames({"c", "hw", "k", "threads"})->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_ConvKernel)->Apply([](auto* b) { conv_args(b, true); });
BENCHMARK(BM_ConvReference)->Apply([](auto* b) { conv_args(b, false); });
BENCHMARK(BM_DepthwiseKernel)->Apply([](auto* b) { conv_args(b, true); });
BENCHMARK(BM_DepthwiseReference)->Apply([](auto* b) { conv_args(b, false); });
BENCHMARK(BM_MiniForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
