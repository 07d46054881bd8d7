#include "fwi/wave_kernels.hpp"

namespace fwi::kernels {

namespace {

// Second-derivative weights for offsets 0, 1, 2.
struct Weights {
  double c0, c1, c2;
};

Weights weights(int order) {
  if (order == 2) return {-2.0, 1.0, 0.0};
  return {-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0};
}

inline void step_column(const StencilPlan& plan, const Weights& w, int ix, const double* prev, const double* cur,
                        double* next) {
  const int ld = plan.ld();
  const std::size_t base = plan.at(ix, 0);
  const std::size_t cbase = static_cast<std::size_t>(ix) * static_cast<std::size_t>(plan.nz);
  const double* c = cur + base;
  const double* cxm1 = c - ld;
  const double* cxp1 = c + ld;
  const double* cxm2 = c - 2 * ld;
  const double* cxp2 = c + 2 * ld;
  const double* p = prev + base;
  double* n = next + base;
  const double* a1 = plan.a1.data() + cbase;
  const double* a2 = plan.a2.data() + cbase;
  const double* a3 = plan.a3.data() + cbase;
  const double idx2 = plan.inv_dx2;
  const double idz2 = plan.inv_dz2;
#pragma omp simd
  for (int k = 0; k < plan.nz; ++k) {
    const double lz = w.c0 * c[k] + w.c1 * (c[k + 1] + c[k - 1]) + w.c2 * (c[k + 2] + c[k - 2]);
    const double lx = w.c0 * c[k] + w.c1 * (cxp1[k] + cxm1[k]) + w.c2 * (cxp2[k] + cxm2[k]);
    n[k] = a1[k] * c[k] - a2[k] * p[k] + a3[k] * (lz * idz2 + lx * idx2);
  }
}

inline void correlate_range(std::size_t lo, std::size_t hi, double weight, const double* adj, const double* u_prev,
                            const double* u, const double* u_next, double* grad) {
#pragma omp simd
  for (std::size_t c = lo; c < hi; ++c) grad[c] += weight * adj[c] * (u_next[c] - 2.0 * u[c] + u_prev[c]);
}

}  // namespace

void fill_top_mirror(const StencilPlan& plan, double* field) {
  for (int ix = 0; ix < plan.nx; ++ix) {
    const std::size_t b = plan.at(ix, 0);
    field[b - 1] = field[b];
    field[b - 2] = field[b + 1];
  }
}

void step_serial(const StencilPlan& plan, const double* prev, const double* cur, double* next) {
  const Weights w = weights(plan.order);
  for (int ix = 0; ix < plan.nx; ++ix) step_column(plan, w, ix, prev, cur, next);
}

void step_omp(const StencilPlan& plan, const double* prev, const double* cur, double* next) {
  const Weights w = weights(plan.order);
#pragma omp parallel for schedule(static)
  for (int ix = 0; ix < plan.nx; ++ix) step_column(plan, w, ix, prev, cur, next);
}

void laplacian(const StencilPlan& plan, const double* u, double* out) {
  const Weights w = weights(plan.order);
  const int ld = plan.ld();
  for (int ix = 0; ix < plan.nx; ++ix) {
    const std::size_t base = plan.at(ix, 0);
    const double* c = u + base;
    for (int k = 0; k < plan.nz; ++k) {
      const double lz = w.c0 * c[k] + w.c1 * (c[k + 1] + c[k - 1]) + w.c2 * (c[k + 2] + c[k - 2]);
      const double lx = w.c0 * c[k] + w.c1 * (c[k + ld] + c[k - ld]) + w.c2 * (c[k + 2 * ld] + c[k - 2 * ld]);
      out[base + k] = lz * plan.inv_dz2 + lx * plan.inv_dx2;
    }
  }
}

void correlate_serial(std::size_t n, double weight, const double* adj, const double* u_prev, const double* u,
                      const double* u_next, double* grad) {
  correlate_range(0, n, weight, adj, u_prev, u, u_next, grad);
}

void correlate_omp(std::size_t n, double weight, const double* adj, const double* u_prev, const double* u,
                   const double* u_next, double* grad) {
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < chunks; ++b) {
    const std::size_t lo = b * kChunk;
    const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
    correlate_range(lo, hi, weight, adj, u_prev, u, u_next, grad);
  }
}

}  // namespace fwi::kernels
