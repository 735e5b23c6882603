// Serial reference kernels against the OpenMP ones. Set OMP_NUM_THREADS to vary
// the thread count of the parallel rows.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "spectv/kernels.hpp"
#include "spectv/tv_prox.hpp"

namespace k = spectv::kernels;

namespace {

struct Buffers {
  spectv::Grid g;
  std::vector<double> u, u_prev, f, qx, qy, qx_prev, qy_prev, out;
  explicit Buffers(int n) : g{n, n} {
    const std::size_t size = static_cast<std::size_t>(n) * n;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (auto* v : {&u, &u_prev, &f, &qx, &qy, &qx_prev, &qy_prev, &out}) {
      v->resize(size);
      for (double& x : *v) x = d(rng);
    }
  }
};

template <bool Parallel>
void BM_grad(benchmark::State& state) {
  Buffers b(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::grad(b.g, b.u, b.qx, b.qy);
    else k::serial::grad(b.g, b.u, b.qx, b.qy);
    benchmark::DoNotOptimize(b.qx.data());
  }
  state.SetItemsProcessed(state.iterations() * b.u.size());
}

template <bool Parallel>
void BM_div(benchmark::State& state) {
  Buffers b(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::div(b.g, b.qx, b.qy, b.out);
    else k::serial::div(b.g, b.qx, b.qy, b.out);
    benchmark::DoNotOptimize(b.out.data());
  }
  state.SetItemsProcessed(state.iterations() * b.u.size());
}

template <bool Parallel>
void BM_tv(benchmark::State& state) {
  Buffers b(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double v;
    if constexpr (Parallel) v = k::tv(b.g, b.u);
    else v = k::serial::tv(b.g, b.u);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * b.u.size());
}

// One PDHG iteration: primal step, dual step, residuals.
template <bool Parallel>
void BM_pdhg_iteration(benchmark::State& state) {
  Buffers b(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::pdhg_primal(b.g, b.u, b.u_prev, b.qx, b.qy, b.f, 2.0, 1.0);
      k::pdhg_dual(b.g, b.u, b.u_prev, b.qx, b.qy, b.qx_prev, b.qy_prev, 1.0);
      benchmark::DoNotOptimize(k::pdhg_residuals(b.g, b.u, b.u_prev, b.qx, b.qy, b.qx_prev, b.qy_prev, 1.0, 1.0));
    } else {
      k::serial::pdhg_primal(b.g, b.u, b.u_prev, b.qx, b.qy, b.f, 2.0, 1.0);
      k::serial::pdhg_dual(b.g, b.u, b.u_prev, b.qx, b.qy, b.qx_prev, b.qy_prev, 1.0);
      benchmark::DoNotOptimize(
          k::serial::pdhg_residuals(b.g, b.u, b.u_prev, b.qx, b.qy, b.qx_prev, b.qy_prev, 1.0, 1.0));
    }
  }
  state.SetItemsProcessed(state.iterations() * b.u.size());
}

// A whole Bregman subproblem at a fixed iteration budget (uses the parallel kernels).
void BM_subproblem(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  spectv::Image f(n, n, 1);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (double& v : f.data()) v = d(rng);
  spectv::SolverOptions o;
  o.tol = 0.0;
  o.max_iter = 200;
  for (auto _ : state) {
    auto r = spectv::solve_bregman_subproblem(f, spectv::Subgradient::zero(f), 1.0, o);
    benchmark::DoNotOptimize(r.u.data().data());
  }
}

}  // namespace

BENCHMARK(BM_grad<false>)->Name("grad/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_grad<true>)->Name("grad/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_div<false>)->Name("div/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_div<true>)->Name("div/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_tv<false>)->Name("tv/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_tv<true>)->Name("tv/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_pdhg_iteration<false>)->Name("pdhg_iteration/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_pdhg_iteration<true>)->Name("pdhg_iteration/openmp")->Arg(256)->Arg(1024);
BENCHMARK(BM_subproblem)->Name("subproblem_200_iterations")->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
