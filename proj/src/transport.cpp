#include "fwi/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fwi {

namespace {

double softplus(double x) {
  if (x > 30.0) return x + std::exp(-x);
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double max_abs(std::span<const double> f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

// Piecewise-linear CDF with knots at cell edges e_i = (i - 1/2) dt.
struct Cdf {
  std::vector<double> P;     // n + 1 knots, P[0] = 0, P[n] = 1
  std::vector<double> mass;  // P[i + 1] - P[i] before rounding, unit total
  double dt = 0.0;

  explicit Cdf(const NormalizedDensity& d) : P(d.samples.size() + 1, 0.0), mass(d.samples.size()), dt(d.dt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      mass[i] = d.samples[i] * d.dt;
      acc += mass[i];
      P[i + 1] = acc;
    }
    const double inv = 1.0 / acc;
    for (double& p : P) p *= inv;
    for (double& m : mass) m *= inv;
    P.back() = 1.0;
  }

  std::size_t n() const { return mass.size(); }
  double edge(std::size_t i) const { return (static_cast<double>(i) - 0.5) * dt; }
  // Quantile within cell i, which must carry mass.
  double quantile_in(std::size_t i, double y) const {
    return edge(i) + (y - P[i]) / (P[i + 1] - P[i]) * dt;
  }
  // Generalized inverse; a level hit exactly by a knot maps to the leftmost such knot.
  double quantile(double y) const {
    const auto it = std::lower_bound(P.begin(), P.end(), y);
    const auto a = static_cast<std::size_t>(it - P.begin());
    if (a < P.size() && P[a] == y) return edge(a);
    return quantile_in(a - 1, y);
  }
};

void check_axes(const NormalizedDensity& f, const NormalizedDensity& g) {
  if (f.samples.size() != g.samples.size() || std::abs(f.dt - g.dt) > 1e-12 * f.dt) {
    throw GridMismatch("densities are on different time axes");
  }
}

// Exact W2^2 over merged breakpoints. When h is non-null it receives
// dW/dp_k for the masses p of f (unit total assumed).
double w2_exact(const Cdf& F, const Cdf& G, std::vector<double>* h) {
  const std::size_t n = F.n();
  std::vector<double> A;
  std::vector<double> B;
  std::vector<double> C;
  if (h != nullptr) {
    A.assign(n, 0.0);
    B.assign(n, 0.0);
    C.assign(n, 0.0);
  }
  double w = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  double y = 0.0;
  while (i < n && j < n) {
    if (F.P[i + 1] <= y) {
      ++i;
      continue;
    }
    if (G.P[j + 1] <= y) {
      ++j;
      continue;
    }
    const double yb = std::min(F.P[i + 1], G.P[j + 1]);
    const double da = F.quantile_in(i, y) - G.quantile_in(j, y);
    const double db = F.quantile_in(i, yb) - G.quantile_in(j, yb);
    const double len = yb - y;
    const double seg = len * (da * da + da * db + db * db) / 3.0;
    w += seg;
    if (h != nullptr) {
      const double gdens = (G.P[j + 1] - G.P[j]) / G.dt;
      const double pm = F.P[i + 1] - F.P[i];
      const double sa = (y - F.P[i]) / pm;
      const double sb = (yb - F.P[i]) / pm;
      A[i] += seg;
      B[i] -= len * 0.5 * (da + db) / gdens;
      C[i] -= len / 6.0 * (2.0 * sa * da + sa * db + sb * da + 2.0 * sb * db) / gdens;
    }
    y = yb;
  }
  if (h != nullptr) {
    h->assign(n, 0.0);
    double tail = 0.0;  // sum of B over cells to the right
    for (std::size_t k = n; k-- > 0;) {
      const double pm = F.P[k + 1] - F.P[k];
      double own;
      if (pm > 0.0) {
        own = A[k] / pm;
      } else {
        const double t = G.quantile(F.P[k]);
        const double a = F.edge(k) - t;
        const double b = a + F.dt;
        own = (a * a + a * b + b * b) / 3.0;
      }
      (*h)[k] = own + 2.0 * C[k] + 2.0 * tail;
      tail += B[k];
    }
  }
  return w;
}

TraceMisfit w2_one_side(std::span<const double> f, std::span<const double> g, double dt,
                        const NormalizationScheme& scheme) {
  const NormalizedDensity fn = normalize(f, dt, scheme);
  const NormalizedDensity gn = normalize(g, dt, scheme);
  const Cdf F(fn);
  const Cdf G(gn);
  std::vector<double> h;
  TraceMisfit out;
  out.value = w2_exact(F, G, &h);
  double mean = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) mean += h[k] * F.mass[k];
  const std::vector<double> ds = scaling_derivative(f, scheme);
  out.adjoint.resize(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out.adjoint[k] = ds[k] * (h[k] - mean) / fn.denominator;
  return out;
}

}  // namespace

Scaling parse_scaling(std::string_view name) {
  if (name == "linear") return Scaling::kLinear;
  if (name == "exponential") return Scaling::kExponential;
  if (name == "softplus") return Scaling::kSoftplus;
  if (name == "square") return Scaling::kSquare;
  throw ConfigError("unknown scaling '" + std::string(name) + "'");
}

std::string_view scaling_name(Scaling s) {
  switch (s) {
    case Scaling::kLinear:
      return "linear";
    case Scaling::kExponential:
      return "exponential";
    case Scaling::kSoftplus:
      return "softplus";
    case Scaling::kSquare:
      return "square";
  }
  return "linear";
}

double NormalizedDensity::mass() const {
  double s = 0.0;
  for (double v : samples) s += v * dt;
  return s;
}

bool NormalizedDensity::bf_in_range(Scaling kind) const {
  if (kind != Scaling::kExponential && kind != Scaling::kSoftplus) return true;
  return bf_inf >= kRecommendedBfMin && bf_inf <= kRecommendedBfMax;
}

NormalizedDensity normalize(std::span<const double> f, double dt, const NormalizationScheme& scheme) {
  if (!(dt > 0.0)) throw InvalidArgument("normalize: dt must be positive");
  if (f.empty()) throw InvalidArgument("normalize: empty trace");
  if (!(scheme.c >= 0.0)) throw NormalizationError("normalize: c must be non-negative");
  NormalizedDensity d;
  d.dt = dt;
  d.samples.resize(f.size());
  const double b = scheme.b;
  switch (scheme.kind) {
    case Scaling::kLinear:
      for (std::size_t i = 0; i < f.size(); ++i) d.samples[i] = f[i] + b + scheme.c;
      break;
    case Scaling::kExponential:
      for (std::size_t i = 0; i < f.size(); ++i) d.samples[i] = std::exp(b * f[i]) + scheme.c;
      d.bf_inf = std::abs(b) * max_abs(f);
      break;
    case Scaling::kSoftplus:
      for (std::size_t i = 0; i < f.size(); ++i) d.samples[i] = softplus(b * f[i]) + scheme.c;
      d.bf_inf = std::abs(b) * max_abs(f);
      break;
    case Scaling::kSquare:
      for (std::size_t i = 0; i < f.size(); ++i) d.samples[i] = f[i] * f[i] + scheme.c;
      break;
  }
  double total = 0.0;
  for (double v : d.samples) {
    if (!std::isfinite(v)) {
      throw NormalizationError("normalization overflowed; reduce b (|b f| = " + std::to_string(d.bf_inf) + ")");
    }
    if (v < 0.0) {
      throw NormalizationError("linear scaling produced a negative density; increase b or c");
    }
    total += v;
  }
  total *= dt;
  if (!(total > 0.0) || !std::isfinite(total)) throw NormalizationError("normalized trace has zero mass");
  d.denominator = total;
  const double inv = 1.0 / total;
  for (double& v : d.samples) v *= inv;
  return d;
}

NormalizedDensity normalize(const Trace& f, const NormalizationScheme& scheme) {
  return normalize(f.samples, f.dt, scheme);
}

std::vector<double> scaling_derivative(std::span<const double> f, const NormalizationScheme& scheme) {
  std::vector<double> out(f.size());
  const double b = scheme.b;
  for (std::size_t i = 0; i < f.size(); ++i) {
    switch (scheme.kind) {
      case Scaling::kLinear:
        out[i] = 1.0;
        break;
      case Scaling::kExponential:
        out[i] = b * std::exp(b * f[i]);
        break;
      case Scaling::kSoftplus:
        out[i] = b * sigmoid(b * f[i]);
        break;
      case Scaling::kSquare:
        out[i] = 2.0 * f[i];
        break;
    }
  }
  return out;
}

double w2_squared(const NormalizedDensity& f, const NormalizedDensity& g) {
  check_axes(f, g);
  return w2_exact(Cdf(f), Cdf(g), nullptr);
}

double w2_squared_quantile(const NormalizedDensity& f, const NormalizedDensity& g) {
  const TransportPlan1D plan = optimal_map(f, g);
  double w = 0.0;
  for (std::size_t i = 0; i < plan.T.size(); ++i) {
    const double d = static_cast<double>(i) * plan.dt - plan.T[i];
    w += d * d * f.samples[i] * f.dt;
  }
  return w;
}

TransportPlan1D optimal_map(const NormalizedDensity& f, const NormalizedDensity& g) {
  check_axes(f, g);
  const Cdf F(f);
  const Cdf G(g);
  const std::size_t n = F.n();
  TransportPlan1D plan;
  plan.dt = f.dt;
  plan.F.assign(F.P.begin() + 1, F.P.end());
  plan.G.assign(G.P.begin() + 1, G.P.end());
  plan.T.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double level = 0.5 * (F.P[i] + F.P[i + 1]);
    plan.T[i] = G.quantile(level);
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (plan.F[i] < plan.F[i - 1] || plan.G[i] < plan.G[i - 1] || plan.T[i] < plan.T[i - 1]) {
      throw NormalizationError("non-monotone CDF or map");
    }
  }
  return plan;
}

TraceMisfit w2_trace(std::span<const double> f, std::span<const double> g, double dt,
                     const NormalizationScheme& scheme) {
  if (f.size() != g.size()) throw GridMismatch("traces have different lengths");
  TraceMisfit pos = w2_one_side(f, g, dt, scheme);
  if (!scheme.both_sides) return pos;
  std::vector<double> nf(f.size());
  std::vector<double> ng(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    nf[i] = -f[i];
    ng[i] = -g[i];
  }
  const TraceMisfit neg = w2_one_side(nf, ng, dt, scheme);
  pos.value = 0.5 * (pos.value + neg.value);
  for (std::size_t i = 0; i < f.size(); ++i) pos.adjoint[i] = 0.5 * (pos.adjoint[i] - neg.adjoint[i]);
  return pos;
}

Trace w2_frechet(const Trace& f, const Trace& g, const NormalizationScheme& scheme) {
  if (std::abs(f.dt - g.dt) > 1e-12 * f.dt) throw GridMismatch("traces have different dt");
  return Trace(w2_trace(f.samples, g.samples, f.dt, scheme).adjoint, f.dt);
}

TraceMisfit l2_trace(std::span<const double> f, std::span<const double> g, double dt) {
  if (f.size() != g.size()) throw GridMismatch("traces have different lengths");
  TraceMisfit out;
  out.adjoint.resize(f.size());
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f[i] - g[i];
    out.adjoint[i] = r;
    s += r * r;
  }
  out.value = 0.5 * s * dt;
  return out;
}

double w_sigma(const Trace& f, const Trace& g, const NormalizationScheme& scheme) {
  if (std::abs(f.dt - g.dt) > 1e-12 * f.dt) throw GridMismatch("traces have different dt");
  if (!scheme.both_sides) return std::sqrt(w2_squared(normalize(f, scheme), normalize(g, scheme)));
  return std::sqrt(w2_trace(f.samples, g.samples, f.dt, scheme).value);
}

}  // namespace fwi
