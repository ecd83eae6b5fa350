// Serial reference loops against the OpenMP kernels, plus one full wave
// integration each way. Sizes are n x n Q1 grids.

#include <benchmark/benchmark.h>

#include <vector>

#include "homwave/fem.hpp"
#include "homwave/kernels.hpp"
#include "homwave/wave.hpp"

using namespace homwave;

namespace {

struct Fixture {
  explicit Fixture(int n) : grid(Grid::on(Domain::rectangle(1, 1), {n, n})) {
    a = constant_tensor_field(grid, {{{1.0, 0.2}, {0.2, 0.7}}});
    k = assemble_stiffness(a);
    x.resize(grid.node_count());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 / (1.0 + static_cast<double>(i % 97));
    y.assign(x.size(), 0.0);
  }
  Grid grid;
  TensorField a;
  CsrMatrix k;
  std::vector<double> x, y;
};

template <bool Parallel>
void BM_spmv(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    if constexpr (Parallel) kernels::parallel::spmv(f.k.view(), f.x, f.y);
    else kernels::serial::spmv(f.k.view(), f.x, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.k.nonzeros()));
}

template <bool Parallel>
void BM_dot(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    double s = Parallel ? kernels::parallel::dot(f.x, f.x) : kernels::serial::dot(f.x, f.x);
    benchmark::DoNotOptimize(s);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.x.size()));
}

template <bool Parallel>
void BM_kick_drift(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  std::vector<double> v(f.x.size(), 0.0);
  for (auto _ : st) {
    if constexpr (Parallel) kernels::parallel::kick_drift(1e-9, f.x, v, f.y);
    else kernels::serial::kick_drift(1e-9, f.x, v, f.y);
    benchmark::DoNotOptimize(f.y.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.x.size()));
}

template <bool Parallel>
void BM_wave(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  WaveState s{0.0, std::vector<double>(f.grid.node_count(), 0.0), std::vector<double>(f.grid.node_count(), 0.0)};
  for (std::size_t i = 0; i < s.u.size(); ++i)
    if (!f.grid.is_boundary(i)) s.u[i] = f.x[i];
  WaveOptions o;
  o.T = 0.05;
  o.serial = !Parallel;
  o.record_boundary_gradients = false;
  std::size_t steps = 0;
  for (auto _ : st) {
    const auto tr = integrate(f.a, s, o);
    steps = tr.steps;
    benchmark::DoNotOptimize(tr.final_state.u.data());
  }
  st.counters["steps"] = static_cast<double>(steps);
}

}  // namespace

BENCHMARK(BM_spmv<false>)->Name("spmv/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_spmv<true>)->Name("spmv/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_dot<false>)->Name("dot/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_dot<true>)->Name("dot/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_kick_drift<false>)->Name("kick_drift/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_kick_drift<true>)->Name("kick_drift/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_wave<false>)->Name("wave/serial")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_wave<true>)->Name("wave/parallel")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
