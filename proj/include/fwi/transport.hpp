#pragma once

// One-dimensional quadratic Wasserstein misfit between signed traces.
//
// A trace is turned into a probability density by a pointwise scaling
// sigma, an additive constant c and a mass renormalization:
//   f~ = (sigma(f) + c) / S,   S = sum_j (sigma(f_j) + c) dt.
// Densities are taken piecewise constant on cells centred at t_i = i dt, so
// the CDFs are piecewise linear and W2 between two densities is integrated
// exactly over the merged CDF breakpoints.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fwi/grid.hpp"

namespace fwi {

enum class Scaling { kLinear, kExponential, kSoftplus, kSquare };

Scaling parse_scaling(std::string_view name);
std::string_view scaling_name(Scaling s);

struct NormalizationScheme {
  Scaling kind = Scaling::kLinear;
  // Linear: additive shift before c (sigma(f) = f + b).
  // Exponential and softplus: rate, sigma(f) = exp(b f) or log(1 + exp(b f)).
  double b = 0.0;
  double c = 0.0;
  // Average the misfit of (f, g) and (-f, -g).
  bool both_sides = false;
};

// Recommended band for |b| * max|f| with exponential and softplus scaling.
constexpr double kRecommendedBfMin = 0.2;
constexpr double kRecommendedBfMax = 6.0;

struct NormalizedDensity {
  std::vector<double> samples;
  double dt = 0.0;
  double denominator = 0.0;  // S
  double bf_inf = 0.0;       // |b| * max|f| (0 for linear and square)

  double mass() const;
  // True for linear and square, and for exponential/softplus inside the recommended band.
  bool bf_in_range(Scaling kind) const;
};

// Throws NormalizationError on a negative linear density, a zero total mass or
// a non-finite result (exponential overflow).
NormalizedDensity normalize(std::span<const double> f, double dt, const NormalizationScheme& scheme);
NormalizedDensity normalize(const Trace& f, const NormalizationScheme& scheme);

// sigma'(f) per sample.
std::vector<double> scaling_derivative(std::span<const double> f, const NormalizationScheme& scheme);

struct TransportPlan1D {
  std::vector<double> F;  // CDF of f~ at cell right edges; F.back() == 1
  std::vector<double> G;  // CDF of g~ at cell right edges
  std::vector<double> T;  // optimal map at cell centres, seconds
  double dt = 0.0;
};

// Exact W2^2 between the piecewise-constant densities. Throws GridMismatch
// on differing axes.
double w2_squared(const NormalizedDensity& f, const NormalizedDensity& g);

// Cell-centre rule sum_i (t_i - T(t_i))^2 f~_i dt. A cross-check that agrees
// with w2_squared up to O(dt^2); it is not symmetric in its arguments.
double w2_squared_quantile(const NormalizedDensity& f, const NormalizedDensity& g);

// T = G^-1(F(t)) at cell centres. Flat stretches of G map to their left end.
TransportPlan1D optimal_map(const NormalizedDensity& f, const NormalizedDensity& g);

struct TraceMisfit {
  double value = 0.0;
  std::vector<double> adjoint;  // derivative per unit time: dJ = sum adjoint * df * dt
};

// W2^2(P f, P g) and its derivative with respect to f. Honours both_sides.
TraceMisfit w2_trace(std::span<const double> f, std::span<const double> g, double dt,
                     const NormalizationScheme& scheme);

// Derivative of W2^2(P f, P g) with respect to f.
Trace w2_frechet(const Trace& f, const Trace& g, const NormalizationScheme& scheme);

// 1/2 sum (f - g)^2 dt and f - g.
TraceMisfit l2_trace(std::span<const double> f, std::span<const double> g, double dt);

// W2(P f, P g), the metric itself.
double w_sigma(const Trace& f, const Trace& g, const NormalizationScheme& scheme);

}  // namespace fwi
