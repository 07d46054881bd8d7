// Serial reference kernel vs the OpenMP kernel on a square padded grid.

#include <benchmark/benchmark.h>

#include <vector>

#include "fwi/wave_kernels.hpp"

namespace {

fwi::kernels::StencilPlan make_plan(int n) {
  fwi::kernels::StencilPlan p;
  p.nx = n;
  p.nz = n;
  p.inv_dx2 = 1.0 / 100.0;
  p.inv_dz2 = 1.0 / 100.0;
  const auto cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  p.a1.assign(cells, 2.0);
  p.a2.assign(cells, 1.0);
  p.a3.assign(cells, 1e-2);
  return p;
}

template <void (*Step)(const fwi::kernels::StencilPlan&, const double*, const double*, double*)>
void BM_Step(benchmark::State& state) {
  const auto plan = make_plan(static_cast<int>(state.range(0)));
  std::vector<double> a(plan.field_size(), 0.0);
  std::vector<double> b(plan.field_size(), 0.0);
  std::vector<double> c(plan.field_size(), 0.0);
  b[plan.at(plan.nx / 2, plan.nz / 2)] = 1.0;
  for (auto _ : state) {
    Step(plan, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
    std::swap(a, b);
    std::swap(b, c);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(plan.nx) * plan.nz);
}

}  // namespace

BENCHMARK(BM_Step<fwi::kernels::step_serial>)->Name("step_serial")->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK(BM_Step<fwi::kernels::step_omp>)->Name("step_omp")->Arg(128)->Arg(512)->Arg(1024);

BENCHMARK_MAIN();
