#pragma once

// Leapfrog update kernels for the damped acoustic wave equation.
//
// Fields live on a padded computational grid surrounded by a two-cell halo
// (enough for the fourth-order stencil). Layout is x-major with z fastest:
// field[(ix + 2) * ld + (iz + 2)], ld = nz + 4.
//
// One step computes, for every interior cell,
//   next = a1 * cur - a2 * prev + a3 * (lap(cur) + src)
// where src is added by the caller after the kernel. The same kernel drives
// the forward and the adjoint recursion; the Laplacian is symmetric, so the
// adjoint is the forward update run backwards in time.
//
// step_serial is the reference; step_omp must produce bit-identical output.

#include <cstddef>
#include <vector>

namespace fwi::kernels {

constexpr int kHalo = 2;

struct StencilPlan {
  int nx = 0;  // padded cells along x (no halo)
  int nz = 0;  // padded cells along z (no halo)
  int order = 4;
  double inv_dx2 = 0.0;
  double inv_dz2 = 0.0;
  // Per-cell update coefficients, size nx * nz (z fastest, no halo).
  std::vector<double> a1;
  std::vector<double> a2;
  std::vector<double> a3;

  int ld() const { return nz + 2 * kHalo; }
  std::size_t field_size() const {
    return static_cast<std::size_t>(nx + 2 * kHalo) * static_cast<std::size_t>(ld());
  }
  std::size_t at(int ix, int iz) const {
    return static_cast<std::size_t>(ix + kHalo) * static_cast<std::size_t>(ld()) +
           static_cast<std::size_t>(iz + kHalo);
  }
};

// Neumann condition on the top edge via a half-sample mirror:
// ghost(-1) = u(0), ghost(-2) = u(1). Keeps the discrete Laplacian symmetric.
// The other halo cells stay zero (homogeneous Dirichlet behind the sponge).
void fill_top_mirror(const StencilPlan& plan, double* field);

void step_serial(const StencilPlan& plan, const double* prev, const double* cur, double* next);
void step_omp(const StencilPlan& plan, const double* prev, const double* cur, double* next);

// lap(u) only, written to out (interior cells, halo untouched). Used by tests.
void laplacian(const StencilPlan& plan, const double* u, double* out);

// grad[c] += weight * adj[c] * (u_next[c] - 2 u[c] + u_prev[c]) for c in [0, n).
void correlate_serial(std::size_t n, double weight, const double* adj, const double* u_prev, const double* u,
                      const double* u_next, double* grad);
void correlate_omp(std::size_t n, double weight, const double* adj, const double* u_prev, const double* u,
                   const double* u_next, double* grad);

}  // namespace fwi::kernels
