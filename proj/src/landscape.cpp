#include "fwi/landscape.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace fwi {

namespace {

// Keys cubic convolution kernel, a = -1/2.
double cubic_weight(double x) {
  x = std::abs(x);
  if (x < 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

double sample_at(std::span<const double> g, double pos) {
  const auto n = static_cast<long>(g.size());
  const auto i0 = static_cast<long>(std::floor(pos));
  double acc = 0.0;
  for (long k = i0 - 1; k <= i0 + 2; ++k) {
    if (k < 0 || k >= n) continue;
    acc += g[static_cast<std::size_t>(k)] * cubic_weight(pos - static_cast<double>(k));
  }
  return acc;
}

void check_axis(const ScanAxis& a) {
  if (a.values.empty()) throw InvalidArgument("scan axis '" + a.name + "' is empty");
  for (std::size_t i = 1; i < a.values.size(); ++i) {
    if (!(a.values[i] > a.values[i - 1])) throw InvalidArgument("scan axis '" + a.name + "' is not increasing");
  }
}

double fit_slope_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void ScanGrid::validate() const {
  check_axis(axis1);
  if (axis2) check_axis(*axis2);
  if (values.size() != n1() * n2()) throw InvalidArgument("scan values do not match the axes");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("scan contains a non-finite value");
  }
}

double trace_misfit(std::span<const double> f, std::span<const double> g, double dt, const MisfitKind& kind) {
  if (kind.type == MisfitKind::Type::kL2) return 2.0 * l2_trace(f, g, dt).value;
  return w2_trace(f, g, dt, kind.scheme).value;
}

std::vector<double> transform_trace(const Trace& g, double s, double lambda, double centre) {
  if (!(lambda > 0.0)) throw InvalidArgument("dilation must be positive");
  const bool nonnegative = std::ranges::all_of(g.samples, [](double v) { return v >= 0.0; });
  std::vector<double> out(g.nt());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = g.time(i);
    const double src = centre + (t - centre - s) / lambda;
    out[i] = sample_at(g.samples, src / g.dt) / lambda;
    // The cubic kernel undershoots near steep tails; a density stays a density.
    if (nonnegative) out[i] = std::max(out[i], 0.0);
  }
  return out;
}

ScanGrid shift_dilate_scan(const Trace& g, const std::vector<double>& s_values,
                           const std::vector<double>& lambda_values, const MisfitKind& metric,
                           const ScanOptions& opts) {
  ScanGrid grid;
  grid.axis1 = {"s", s_values};
  if (lambda_values.size() != 1) grid.axis2 = ScanAxis{"lambda", lambda_values};
  check_axis(grid.axis1);
  if (grid.axis2) check_axis(*grid.axis2);
  if (lambda_values.empty()) throw InvalidArgument("no dilation values");
  const double centre = std::isnan(opts.centre) ? 0.5 * (g.time(0) + g.time(g.nt() - 1)) : opts.centre;

  const std::size_t n1 = s_values.size();
  const std::size_t n2 = lambda_values.size();
  grid.values.assign(n1 * n2, 0.0);
  grid.overflow.assign(n1 * n2, 0.0);

  double abs_mass = 0.0;
  for (double v : g.samples) abs_mass += std::abs(v);
  const double lo = g.time(0) - 0.5 * g.dt;
  const double hi = g.time(g.nt() - 1) + 0.5 * g.dt;

  std::vector<std::exception_ptr> errors(n1 * n2);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t cell = 0; cell < n1 * n2; ++cell) {
    const double s = s_values[cell / n2];
    const double lambda = lambda_values[cell % n2];
    double lost = 0.0;
    for (std::size_t i = 0; i < g.nt(); ++i) {
      const double image = centre + lambda * (g.time(i) - centre) + s;
      if (image < lo || image > hi) lost += std::abs(g.samples[i]);
    }
    grid.overflow[cell] = abs_mass > 0.0 ? lost / abs_mass : 0.0;
    try {
      const std::vector<double> f = transform_trace(g, s, lambda, centre);
      grid.values[cell] = trace_misfit(f, g.samples, g.dt, metric);
    } catch (...) {
      errors[cell] = std::current_exception();
    }
  }
  for (std::size_t cell = 0; cell < n1 * n2; ++cell) {
    if (grid.overflow[cell] > opts.overflow_tol) {
      throw InvalidArgument("transformed signal leaves the window at s = " + std::to_string(s_values[cell / n2]) +
                            ", lambda = " + std::to_string(lambda_values[cell % n2]));
    }
    if (errors[cell]) std::rethrow_exception(errors[cell]);
  }

  if (opts.analytic) {
    const NormalizedDensity p = normalize(g, metric.scheme);
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      const double x = g.time(i) - centre;
      m1 += x * p.samples[i] * p.dt;
      m2 += x * x * p.samples[i] * p.dt;
    }
    grid.analytic.resize(n1 * n2);
    for (std::size_t cell = 0; cell < n1 * n2; ++cell) {
      const double s = s_values[cell / n2];
      const double d = lambda_values[cell % n2] - 1.0;
      grid.analytic[cell] = d * d * m2 + 2.0 * s * d * m1 + s * s;
    }
  }
  return grid;
}

ConvexityReport convexity_check(const ScanGrid& grid) {
  if (!grid.axis2) throw InvalidArgument("convexity check needs a 2D scan");
  const std::size_t n1 = grid.n1();
  const std::size_t n2 = grid.n2();
  if (n1 < 3 || n2 < 3) throw InvalidArgument("convexity check needs at least 3 points per axis");
  const auto& x = grid.axis1.values;
  const auto& y = grid.axis2->values;
  auto v = [&](std::size_t i, std::size_t j) { return grid.at(i, j); };

  std::vector<std::pair<double, double>> eig;
  double scale = 0.0;
  for (std::size_t i = 1; i + 1 < n1; ++i) {
    for (std::size_t j = 1; j + 1 < n2; ++j) {
      const double h1 = x[i] - x[i - 1];
      const double h2 = x[i + 1] - x[i];
      const double k1 = y[j] - y[j - 1];
      const double k2 = y[j + 1] - y[j];
      const double a = 2.0 * ((v(i + 1, j) - v(i, j)) / h2 - (v(i, j) - v(i - 1, j)) / h1) / (h1 + h2);
      const double d = 2.0 * ((v(i, j + 1) - v(i, j)) / k2 - (v(i, j) - v(i, j - 1)) / k1) / (k1 + k2);
      const double b =
          (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / ((h1 + h2) * (k1 + k2));
      const double mid = 0.5 * (a + d);
      const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
      eig.emplace_back(mid - rad, mid + rad);
      scale = std::max({scale, std::abs(mid - rad), std::abs(mid + rad)});
    }
  }
  ConvexityReport rep;
  const double tau = 1e-10 * scale;
  std::size_t pd = 0;
  for (const auto& [lo, hi] : eig) pd += (lo > tau && hi > tau) ? 1 : 0;
  rep.pd_fraction = static_cast<double>(pd) / static_cast<double>(eig.size());

  const auto best = static_cast<std::size_t>(std::ranges::min_element(grid.values) - grid.values.begin());
  const std::size_t bi = best / n2;
  const std::size_t bj = best % n2;
  double vmax = 0.0;
  for (double val : grid.values) vmax = std::max(vmax, std::abs(val));
  const double tol = 1e-12 * vmax;
  // Non-increasing while walking toward index `target` from both ends.
  auto monotone = [&](auto get, std::size_t n, std::size_t target) {
    for (std::size_t k = 0; k < target; ++k) {
      if (get(k + 1) > get(k) + tol) return false;
    }
    for (std::size_t k = n - 1; k > target; --k) {
      if (get(k - 1) > get(k) + tol) return false;
    }
    return true;
  };
  for (std::size_t j = 0; j < n2; ++j) {
    if (!monotone([&](std::size_t i) { return v(i, j); }, n1, bi)) ++rep.nonmonotone_axis1_slices;
  }
  for (std::size_t i = 0; i < n1; ++i) {
    if (!monotone([&](std::size_t j) { return v(i, j); }, n2, bj)) ++rep.nonmonotone_axis2_slices;
  }
  rep.monotone_to_min = rep.nonmonotone_axis1_slices == 0 && rep.nonmonotone_axis2_slices == 0;
  return rep;
}

int count_local_minima(const std::vector<double>& y) {
  int n = 0;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] < y[i - 1] && y[i] < y[i + 1]) ++n;
  }
  return n;
}

double support_width(const Trace& f, double rel_tol) {
  double fmax = 0.0;
  for (double v : f.samples) fmax = std::max(fmax, std::abs(v));
  std::size_t first = f.nt();
  std::size_t last = 0;
  for (std::size_t i = 0; i < f.nt(); ++i) {
    if (std::abs(f.samples[i]) > rel_tol * fmax) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first > last) return 0.0;
  return static_cast<double>(last - first + 1) * f.dt;
}

double curvature_onset(const std::vector<double>& s, const std::vector<double>& y, double rel_tol) {
  if (s.size() != y.size() || s.size() < 4) throw InvalidArgument("curvature_onset needs matching curves of 4+ points");
  std::vector<double> d2(s.size(), 0.0);
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double h1 = s[i] - s[i - 1];
    const double h2 = s[i + 1] - s[i];
    d2[i] = 2.0 * ((y[i + 1] - y[i]) / h2 - (y[i] - y[i - 1]) / h1) / (h1 + h2);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(d2.begin() + 1, d2.end() - 1) - d2.begin());
  for (std::size_t i = peak; i + 1 < s.size(); ++i) {
    if (d2[i] < rel_tol * d2[peak]) return s[i];
  }
  return s.back();
}

HuberReport huber_scan(const Trace& f, const std::vector<double>& s_values, const std::vector<double>& c_values,
                       const NormalizationScheme& base) {
  check_axis({"s", s_values});
  double mass = 0.0;
  for (double v : f.samples) {
    if (v < 0.0) throw InvalidArgument("huber_scan expects a nonnegative density");
    mass += v * f.dt;
  }
  if (!(mass > 0.0)) throw InvalidArgument("huber_scan expects a density with positive mass");
  Trace unit = f;
  for (double& v : unit.samples) v /= mass;

  HuberReport rep;
  rep.s_values = s_values;
  rep.support_width = support_width(unit);
  const double centre = 0.5 * (unit.time(0) + unit.time(unit.nt() - 1));
  std::vector<std::vector<double>> shifted(s_values.size());
  for (std::size_t i = 0; i < s_values.size(); ++i) shifted[i] = transform_trace(unit, s_values[i], 1.0, centre);

  for (double c : c_values) {
    HuberCurve curve;
    curve.c = c;
    curve.threshold = 1.0 / c + rep.support_width;
    curve.w2.resize(s_values.size());
    NormalizationScheme scheme = base;
    scheme.kind = Scaling::kLinear;
    scheme.c = c;
    const MisfitKind kind = MisfitKind::w2(scheme);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < s_values.size(); ++i) {
      curve.w2[i] = trace_misfit(shifted[i], unit.samples, unit.dt, kind);
    }
    curve.crossover = curvature_onset(s_values, curve.w2);
    rep.curves.push_back(std::move(curve));
  }
  return rep;
}

NoiseReport noise_scan(const Trace& g, const std::vector<double>& eta_values, const std::vector<int>& n_values,
                       int trials, std::uint64_t seed) {
  if (n_values.empty() || eta_values.empty() || trials < 1) throw InvalidArgument("empty noise scan");
  const int n_max = *std::ranges::max_element(n_values);
  for (int n : n_values) {
    if (n < 1 || n_max % n != 0 || ((n_max / n) & (n_max / n - 1)) != 0) {
      throw InvalidArgument("noise levels must be the finest level divided by powers of two");
    }
  }
  for (double eta : eta_values) {
    if (eta < 0.0) throw InvalidArgument("noise variance must be nonnegative");
  }
  if (static_cast<std::size_t>(n_max) > g.nt()) throw InvalidArgument("more noise intervals than samples");
  const double mass = std::accumulate(g.samples.begin(), g.samples.end(), 0.0) * g.dt;
  std::vector<double> density = g.samples;
  for (double& v : density) {
    v /= mass;
    if (!(v > 0.0)) throw InvalidArgument("noise_scan expects a positive density");
  }
  const MisfitKind w2 = MisfitKind::w2({Scaling::kLinear, 0.0, 0.0, false});

  const std::size_t nt = g.nt();
  const std::size_t ne = eta_values.size();
  const std::size_t nn = n_values.size();
  // [trial][eta][N] -> (w2, l2)
  std::vector<double> w2v(static_cast<std::size_t>(trials) * ne * nn);
  std::vector<double> l2v(w2v.size());
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));

#pragma omp parallel for schedule(dynamic)
  for (int trial = 0; trial < trials; ++trial) {
    try {
      std::seed_seq seq{seed, static_cast<std::uint64_t>(trial)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> finest(static_cast<std::size_t>(n_max));
      for (double& z : finest) z = normal(rng);
      for (std::size_t in = 0; in < nn; ++in) {
        const int n = n_values[in];
        std::vector<double> level = finest;
        while (static_cast<int>(level.size()) > n) {
          std::vector<double> coarse(level.size() / 2);
          for (std::size_t k = 0; k < coarse.size(); ++k) {
            coarse[k] = (level[2 * k] + level[2 * k + 1]) / std::numbers::sqrt2;
          }
          level = std::move(coarse);
        }
        const std::size_t width = nt / static_cast<std::size_t>(n);
        std::vector<double> z(nt);
        for (std::size_t i = 0; i < nt; ++i) z[i] = level[std::min(i / width, static_cast<std::size_t>(n - 1))];
        const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(nt);
        for (double& v : z) v -= mean;
        for (std::size_t ie = 0; ie < ne; ++ie) {
          const double amp = std::sqrt(eta_values[ie]);
          std::vector<double> f(nt);
          double l2 = 0.0;
          for (std::size_t i = 0; i < nt; ++i) {
            f[i] = density[i] + amp * z[i];
            l2 += amp * amp * z[i] * z[i] * g.dt;
          }
          const std::size_t slot = (static_cast<std::size_t>(trial) * ne + ie) * nn + in;
          w2v[slot] = amp == 0.0 ? 0.0 : trace_misfit(f, density, g.dt, w2);
          l2v[slot] = l2;
        }
      }
    } catch (...) {
      errors[static_cast<std::size_t>(trial)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  NoiseReport rep;
  std::vector<double> xw;
  std::vector<double> yw;
  std::vector<double> xl;
  std::vector<double> yl;
  for (std::size_t ie = 0; ie < ne; ++ie) {
    for (std::size_t in = 0; in < nn; ++in) {
      NoiseCell cell{eta_values[ie], n_values[in], 0.0, 0.0};
      for (int t = 0; t < trials; ++t) {
        const std::size_t slot = (static_cast<std::size_t>(t) * ne + ie) * nn + in;
        cell.mean_w2 += w2v[slot];
        cell.mean_l2 += l2v[slot];
      }
      cell.mean_w2 /= trials;
      cell.mean_l2 /= trials;
      xw.push_back(cell.eta / cell.n);
      yw.push_back(cell.mean_w2);
      xl.push_back(cell.eta);
      yl.push_back(cell.mean_l2);
      rep.cells.push_back(cell);
    }
  }
  rep.w2_slope = fit_slope_through_origin(xw, yw);
  rep.l2_slope = fit_slope_through_origin(xl, yl);
  return rep;
}

Spectrum residual_spectrum(const ShotGather& residual, const SpectrumOptions& opts) {
  const std::size_t n = residual.nt();
  if (n == 0) throw InvalidArgument("empty residual traces");
  const std::size_t nf = n / 2 + 1;
  Spectrum sp;
  sp.freq.resize(nf);
  for (std::size_t k = 0; k < nf; ++k) sp.freq[k] = static_cast<double>(k) / (static_cast<double>(n) * residual.dt());
  sp.magnitude.assign(nf, 0.0);
  sp.power.assign(nf, 0.0);
  if (residual.nrec() == 0) return sp;

  std::vector<double> window(n, 1.0);
  if (opts.hann && n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(nf);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  for (std::size_t r = 0; r < residual.nrec(); ++r) {
    const auto tr = residual.trace(r);
    for (std::size_t i = 0; i < n; ++i) in[i] = tr[i] * window[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < nf; ++k) {
      const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      sp.magnitude[k] += std::sqrt(mag2);
      sp.power[k] += (edge ? 1.0 : 2.0) * mag2 / static_cast<double>(n);
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  fftw_free(in);
  const double inv = 1.0 / static_cast<double>(residual.nrec());
  for (std::size_t k = 0; k < nf; ++k) {
    sp.magnitude[k] *= inv;
    sp.power[k] *= inv;
  }
  return sp;
}

double band_energy(const Spectrum& s, double f_lo, double f_hi) {
  double e = 0.0;
  for (std::size_t k = 0; k < s.freq.size(); ++k) {
    if (s.freq[k] >= f_lo && s.freq[k] < f_hi) e += s.power[k];
  }
  return e;
}

BandSplit bandpass_split(const Grid2D& grid, std::span<const double> field, int k_cut) {
  if (field.size() != grid.size()) throw GridMismatch("field size does not match grid");
  if (k_cut < 0) throw InvalidArgument("k_cut must be nonnegative");
  const std::size_t n = grid.size();
  auto* buf = fftw_alloc_complex(n);
  fftw_plan fwd = fftw_plan_dft_2d(grid.nx, grid.nz, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_2d(grid.nx, grid.nz, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = field[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(fwd);
  auto mode = [](int i, int len) { return i <= len / 2 ? i : i - len; };
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iz = 0; iz < grid.nz; ++iz) {
      if (std::max(std::abs(mode(ix, grid.nx)), std::abs(mode(iz, grid.nz))) > k_cut) {
        const std::size_t c = grid.index(ix, iz);
        buf[c][0] = 0.0;
        buf[c][1] = 0.0;
      }
    }
  }
  fftw_execute(inv);
  BandSplit out{grid, std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.low[i] = buf[i][0] / static_cast<double>(n);
    out.high[i] = field[i] - out.low[i];
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);
  fftw_free(buf);
  return out;
}

BandSplit bandpass_split(const VelocityModel& model, int k_cut) {
  const std::vector<double> v = model.velocity();
  return bandpass_split(model.grid(), v, k_cut);
}

void write_scan_csv(const ScanGrid& grid, const std::filesystem::path& path) {
  auto out = open_out(path);
  out.precision(17);
  out << grid.axis1.name;
  if (grid.axis2) {
    for (double v : grid.axis2->values) out << ',' << grid.axis2->name << '=' << v;
  } else {
    out << ",value";
  }
  out << '\n';
  for (std::size_t i = 0; i < grid.n1(); ++i) {
    out << grid.axis1.values[i];
    for (std::size_t j = 0; j < grid.n2(); ++j) out << ',' << grid.at(i, j);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_scan_pgm(const ScanGrid& grid, const std::filesystem::path& path) {
  const auto [lo, hi] = std::ranges::minmax(grid.values);
  const double span = hi > lo ? hi - lo : 1.0;
  auto out = open_out(path, true);
  out << "P5\n" << grid.n2() << ' ' << grid.n1() << "\n255\n";
  for (std::size_t i = 0; i < grid.n1(); ++i) {
    for (std::size_t j = 0; j < grid.n2(); ++j) {
      const double t = (grid.at(i, j) - lo) / span;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_curve_csv(const std::vector<double>& x, const std::vector<double>& y, const std::string& x_name,
                     const std::string& y_name, const std::filesystem::path& path) {
  if (x.size() != y.size()) throw InvalidArgument("curve axes differ in length");
  auto out = open_out(path);
  out.precision(17);
  out << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) out << x[i] << ',' << y[i] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fwi
