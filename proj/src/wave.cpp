#include "fwi/wave.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "fwi/wave_kernels.hpp"

namespace fwi {

namespace {

double stability_limit(int order) { return order == 2 ? 1.0 : std::sqrt(3.0) / 2.0; }

bool use_parallel(KernelKind kind) {
  switch (kind) {
    case KernelKind::kSerial:
      return false;
    case KernelKind::kOpenMP:
      return true;
    case KernelKind::kAuto:
      break;
  }
  return omp_in_parallel() == 0;
}

void validate_config(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("sim dt must be positive");
  if (cfg.nt < 2) throw InvalidArgument("sim nt must be at least 2");
  if (cfg.stencil_order != 2 && cfg.stencil_order != 4) throw InvalidArgument("stencil_order must be 2 or 4");
  if (cfg.sponge_width < 0) throw InvalidArgument("sponge_width must be non-negative");
  if (!(cfg.sponge_reflection > 0.0 && cfg.sponge_reflection < 1.0)) {
    throw InvalidArgument("sponge_reflection must lie in (0, 1)");
  }
  if (cfg.store_stride < 1) throw InvalidArgument("store_stride must be at least 1");
  if (cfg.check_every < 1) throw InvalidArgument("check_every must be at least 1");
}

// Owns the padded coefficient arrays for one model and runs the leapfrog
// recursion. The caller supplies per-step source injection and observation.
class Propagator {
 public:
  using Inject = std::function<void(std::size_t step, double* next)>;
  using Observe = std::function<void(std::size_t step, const double* field)>;

  Propagator(const VelocityModel& model, const SimConfig& cfg) : cfg_(cfg), grid_(model.grid()) {
    validate_config(cfg);
    const CflReport cfl = check_cfl(model, cfg);
    if (!cfl.stable) {
      throw InstabilityError("CFL number " + std::to_string(cfl.cfl_number) + " exceeds 0.9 of the limit " +
                             std::to_string(cfl.stability_limit) + "; max stable dt is " +
                             std::to_string(cfl.max_stable_dt));
    }
    build(model);
  }

  std::size_t cell(int ix, int iz) const { return plan_.at(ix + w_, iz); }
  double a3(int ix, int iz) const { return plan_.a3[coef(ix + w_, iz)]; }

  void extract(const double* field, std::span<double> out) const {
    const int nz = grid_.nz;
    for (int ix = 0; ix < grid_.nx; ++ix) {
      const double* col = field + cell(ix, 0);
      std::copy(col, col + nz, out.begin() + static_cast<std::ptrdiff_t>(grid_.index(ix, 0)));
    }
  }

  void run(const Inject& inject, const Observe& observe) const {
    const std::size_t sz = plan_.field_size();
    std::vector<double> prev(sz, 0.0);
    std::vector<double> cur(sz, 0.0);
    std::vector<double> next(sz, 0.0);
    const bool par = use_parallel(cfg_.kernel);
    for (std::size_t n = 0; n < cfg_.nt; ++n) {
      observe(n, cur.data());
      if (n + 1 == cfg_.nt) break;
      kernels::fill_top_mirror(plan_, cur.data());
      if (par) {
        kernels::step_omp(plan_, prev.data(), cur.data(), next.data());
      } else {
        kernels::step_serial(plan_, prev.data(), cur.data(), next.data());
      }
      inject(n, next.data());
      if ((n + 1) % static_cast<std::size_t>(cfg_.check_every) == 0 || n + 2 == cfg_.nt) {
        check_finite(next, n + 1);
      }
      std::swap(prev, cur);
      std::swap(cur, next);
    }
  }

 private:
  std::size_t coef(int ixp, int izp) const {
    return static_cast<std::size_t>(ixp) * static_cast<std::size_t>(plan_.nz) + static_cast<std::size_t>(izp);
  }

  void build(const VelocityModel& model) {
    w_ = cfg_.sponge_width;
    const int nx = grid_.nx;
    const int nz = grid_.nz;
    plan_.nx = nx + 2 * w_;
    plan_.nz = nz + w_;
    plan_.order = cfg_.stencil_order;
    plan_.inv_dx2 = 1.0 / (grid_.dx * grid_.dx);
    plan_.inv_dz2 = 1.0 / (grid_.dz * grid_.dz);
    const std::size_t ncoef = static_cast<std::size_t>(plan_.nx) * static_cast<std::size_t>(plan_.nz);
    plan_.a1.resize(ncoef);
    plan_.a2.resize(ncoef);
    plan_.a3.resize(ncoef);

    double eta_max = 0.0;
    if (w_ > 0) {
      const double v = cfg_.sponge_velocity > 0.0 ? cfg_.sponge_velocity : model.max_velocity();
      const double thickness = w_ * std::max(grid_.dx, grid_.dz);
      eta_max = 3.0 * v * std::log(1.0 / cfg_.sponge_reflection) / (2.0 * thickness);
    }
    const double dt = cfg_.dt;
    const double inv_dt2 = 1.0 / (dt * dt);
    for (int ixp = 0; ixp < plan_.nx; ++ixp) {
      const int ix = std::clamp(ixp - w_, 0, nx - 1);
      const int dxc = std::max({0, w_ - ixp, ixp - (nx - 1 + w_)});
      for (int izp = 0; izp < plan_.nz; ++izp) {
        const int iz = std::min(izp, nz - 1);
        const int dzc = std::max(0, izp - (nz - 1));
        const int d = std::max(dxc, dzc);
        const double r = w_ > 0 ? static_cast<double>(d) / w_ : 0.0;
        const double eta = eta_max * r * r;
        const double m = model.m(ix, iz);
        const double a = m * (inv_dt2 + 0.5 * eta / dt);
        const double c = m * (inv_dt2 - 0.5 * eta / dt);
        const std::size_t k = coef(ixp, izp);
        plan_.a1[k] = 2.0 * m * inv_dt2 / a;
        plan_.a2[k] = c / a;
        plan_.a3[k] = 1.0 / a;
      }
    }
  }

  static void check_finite(const std::vector<double>& f, std::size_t step) {
    for (double v : f) {
      if (!std::isfinite(v)) throw InstabilityError("non-finite wavefield at step " + std::to_string(step));
    }
  }

  SimConfig cfg_;
  Grid2D grid_;
  int w_ = 0;
  kernels::StencilPlan plan_;
};

struct Node {
  int ix, iz;
};

std::vector<Node> snap_all(const Grid2D& grid, const std::vector<Position>& ps) {
  std::vector<Node> out;
  out.reserve(ps.size());
  for (const auto& p : ps) {
    const GridNode g = snap_to_grid(grid, p);
    out.push_back({g.ix, g.iz});
  }
  return out;
}

void check_record_length(const Acquisition& acq, const SimConfig& cfg) {
  const std::size_t need = steps_for(acq, cfg.dt);
  if (cfg.nt < need) {
    throw InvalidArgument("sim nt " + std::to_string(cfg.nt) + " shorter than the record (" + std::to_string(need) +
                          " steps)");
  }
}

}  // namespace

CflReport check_cfl(const VelocityModel& model, const SimConfig& cfg) {
  const Grid2D& g = model.grid();
  const double v_max = model.max_velocity();
  const double geom = std::sqrt(1.0 / (g.dx * g.dx) + 1.0 / (g.dz * g.dz));
  CflReport r;
  r.stability_limit = stability_limit(cfg.stencil_order);
  r.cfl_number = v_max * cfg.dt * geom;
  r.max_stable_dt = 0.9 * r.stability_limit / (v_max * geom);
  r.stable = r.cfl_number <= 0.9 * r.stability_limit;
  if (cfg.peak_freq > 0.0) {
    r.points_per_wavelength = model.min_velocity() / (cfg.peak_freq * std::max(g.dx, g.dz));
    r.dispersion_ok = r.points_per_wavelength >= 5.0;
  } else {
    r.points_per_wavelength = std::numeric_limits<double>::infinity();
  }
  return r;
}

std::size_t steps_for(const Acquisition& acq, double dt) {
  const int kr = static_cast<int>(std::lround(acq.dt_record / dt));
  const std::size_t nrt = acq.record_samples();
  if (nrt == 0) return 1;
  return (nrt - 1) * static_cast<std::size_t>(std::max(kr, 1)) + 1;
}

WavefieldHistory::WavefieldHistory(Grid2D grid, std::size_t nt, int store_stride, double dt)
    : grid_(grid), nt_(nt), stride_(store_stride), dt_(dt) {
  if (store_stride < 1) throw InvalidArgument("store_stride must be at least 1");
  n_stored_ = nt == 0 ? 0 : (nt - 1) / static_cast<std::size_t>(store_stride) + 1;
  data_.assign(n_stored_ * grid.size(), 0.0);
}

double WavefieldHistory::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

ForwardResult simulate_forward(const VelocityModel& model, const Acquisition& acq, const Wavelet& src,
                               int source_index, const SimConfig& cfg, bool keep_history) {
  const Grid2D& grid = model.grid();
  const int kr = acq.validate(grid, cfg.dt);
  if (source_index < 0 || static_cast<std::size_t>(source_index) >= acq.sources.size()) {
    throw InvalidArgument("source index out of range");
  }
  if (std::abs(src.dt - cfg.dt) > 1e-9 * cfg.dt) throw InvalidArgument("wavelet dt differs from sim dt");
  check_record_length(acq, cfg);

  const Propagator prop(model, cfg);
  const GridNode s = snap_to_grid(grid, acq.sources[static_cast<std::size_t>(source_index)]);
  const std::vector<Node> recs = snap_all(grid, acq.receivers);
  const std::size_t src_cell = prop.cell(s.ix, s.iz);
  const double src_scale = prop.a3(s.ix, s.iz) / (grid.dx * grid.dz);

  const std::size_t nrt = acq.record_samples();
  ForwardResult out{ShotGather(recs.size(), nrt, acq.dt_record, source_index), WavefieldHistory()};
  if (keep_history) out.history = WavefieldHistory(grid, cfg.nt, cfg.store_stride, cfg.dt);
  const auto stride = static_cast<std::size_t>(cfg.store_stride);
  const auto ukr = static_cast<std::size_t>(kr);

  prop.run(
      [&](std::size_t n, double* next) {
        if (n < src.samples.size()) next[src_cell] += src_scale * src.samples[n];
      },
      [&](std::size_t n, const double* field) {
        if (n % ukr == 0 && n / ukr < nrt) {
          const std::size_t j = n / ukr;
          for (std::size_t r = 0; r < recs.size(); ++r) out.gather.at(r, j) = field[prop.cell(recs[r].ix, recs[r].iz)];
        }
        if (keep_history && n % stride == 0) prop.extract(field, out.history.snapshot(n / stride));
      });
  return out;
}

namespace {

// Backward solve; calls on_field(n, field) with the padded field at every
// time index n = nt-1 down to 0.
template <typename OnField>
void run_adjoint(const VelocityModel& model, const ShotGather& adjoint_gather, const Acquisition& acq,
                 const SimConfig& cfg, const Propagator& prop, OnField&& on_field) {
  const Grid2D& grid = model.grid();
  const int kr = acq.validate(grid, cfg.dt);
  const std::size_t nrt = acq.record_samples();
  if (adjoint_gather.nrec() != acq.receivers.size() || adjoint_gather.nt() != nrt ||
      std::abs(adjoint_gather.dt() - acq.dt_record) > 1e-9 * acq.dt_record) {
    throw GridMismatch("adjoint gather does not match the acquisition time axis");
  }
  check_record_length(acq, cfg);

  const std::vector<Node> recs = snap_all(grid, acq.receivers);
  std::vector<std::size_t> cells(recs.size());
  std::vector<double> scale(recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) {
    cells[r] = prop.cell(recs[r].ix, recs[r].iz);
    // Per-unit-time adjoint data becomes a per-step source; the negative
    // sign is the backpropagation convention.
    scale[r] = -static_cast<double>(kr) * prop.a3(recs[r].ix, recs[r].iz);
  }
  const std::size_t nt = cfg.nt;
  const auto ukr = static_cast<std::size_t>(kr);

  // Step j of the recursion produces the field at time index nt - 2 - j.
  prop.run(
      [&](std::size_t j, double* next) {
        const std::size_t k = nt - 1 - j;
        if (k % ukr != 0 || k / ukr >= nrt) return;
        const std::size_t i = k / ukr;
        for (std::size_t r = 0; r < cells.size(); ++r) next[cells[r]] += scale[r] * adjoint_gather.at(r, i);
      },
      [&](std::size_t j, const double* field) { on_field(nt - 1 - j, field); });
}

void check_histories(const Grid2D& grid, const WavefieldHistory& fwd, const WavefieldHistory* adj,
                     const SimConfig& cfg) {
  if (!(fwd.grid() == grid) || (adj && !(adj->grid() == grid))) {
    throw GridMismatch("history grid differs from model grid");
  }
  if (adj && (fwd.store_stride() != adj->store_stride() || fwd.nt() != adj->nt() ||
              fwd.n_stored() != adj->n_stored())) {
    throw GridMismatch("forward and adjoint histories have different time sampling");
  }
  if (fwd.nt() != cfg.nt || fwd.store_stride() != cfg.store_stride) {
    throw GridMismatch("history time sampling differs from the simulation config");
  }
  if (std::abs(fwd.dt() - cfg.dt) > 1e-9 * cfg.dt) throw GridMismatch("history dt differs from sim dt");
}

// Adds (1/h) lam (u[j+1] - 2 u[j] + u[j-1]) for stored index j, with zero
// before t = 0 and a one-sided difference at the last snapshot.
class Correlator {
 public:
  Correlator(const WavefieldHistory& fwd, const SimConfig& cfg, std::vector<double>& out)
      : fwd_(fwd),
        n_(fwd.grid().size()),
        weight_(1.0 / (cfg.dt * fwd.store_stride())),
        par_(use_parallel(cfg.kernel)),
        zeros_(n_, 0.0),
        out_(out) {}

  void add(std::size_t j, const double* lam) const {
    const std::size_t ns = fwd_.n_stored();
    if (ns < 3) return;
    const double* a = nullptr;
    const double* b = nullptr;
    const double* c = nullptr;
    if (j == 0) {
      a = zeros_.data();
      b = fwd_.snapshot(0).data();
      c = fwd_.snapshot(1).data();
    } else if (j + 1 < ns) {
      a = fwd_.snapshot(j - 1).data();
      b = fwd_.snapshot(j).data();
      c = fwd_.snapshot(j + 1).data();
    } else {
      a = fwd_.snapshot(ns - 3).data();
      b = fwd_.snapshot(ns - 2).data();
      c = fwd_.snapshot(ns - 1).data();
    }
    if (par_) {
      kernels::correlate_omp(n_, weight_, lam, a, b, c, out_.data());
    } else {
      kernels::correlate_serial(n_, weight_, lam, a, b, c, out_.data());
    }
  }

 private:
  const WavefieldHistory& fwd_;
  std::size_t n_;
  double weight_;
  bool par_;
  std::vector<double> zeros_;
  std::vector<double>& out_;
};

}  // namespace

WavefieldHistory simulate_adjoint(const VelocityModel& model, const ShotGather& adjoint_gather,
                                  const Acquisition& acq, const SimConfig& cfg) {
  const Propagator prop(model, cfg);
  WavefieldHistory hist(model.grid(), cfg.nt, cfg.store_stride, cfg.dt);
  const auto stride = static_cast<std::size_t>(cfg.store_stride);
  run_adjoint(model, adjoint_gather, acq, cfg, prop, [&](std::size_t n, const double* field) {
    if (n % stride == 0) prop.extract(field, hist.snapshot(n / stride));
  });
  return hist;
}

GradientField adjoint_gradient(const VelocityModel& model, const ShotGather& adjoint_gather, const Acquisition& acq,
                               const WavefieldHistory& fwd, const SimConfig& cfg) {
  const Grid2D& grid = model.grid();
  check_histories(grid, fwd, nullptr, cfg);
  GradientField g{grid, std::vector<double>(grid.size(), 0.0)};
  const Propagator prop(model, cfg);
  const Correlator corr(fwd, cfg, g.values);
  std::vector<double> lam(grid.size());
  const auto stride = static_cast<std::size_t>(cfg.store_stride);
  run_adjoint(model, adjoint_gather, acq, cfg, prop, [&](std::size_t n, const double* field) {
    if (n % stride != 0) return;
    prop.extract(field, lam);
    corr.add(n / stride, lam.data());
  });
  return g;
}

GradientField compute_gradient(const VelocityModel& model, const WavefieldHistory& fwd, const WavefieldHistory& adj,
                               const SimConfig& cfg) {
  const Grid2D& grid = model.grid();
  check_histories(grid, fwd, &adj, cfg);
  GradientField g{grid, std::vector<double>(grid.size(), 0.0)};
  const Correlator corr(fwd, cfg, g.values);
  for (std::size_t j = 0; j < fwd.n_stored(); ++j) corr.add(j, adj.snapshot(j).data());
  return g;
}

void mask_sources(GradientField& grad, const Acquisition& acq, const SimConfig& cfg) {
  const int r = cfg.source_mask_radius;
  if (r < 0) return;
  const Grid2D& grid = grad.grid;
  for (const auto& p : acq.sources) {
    const GridNode s = snap_to_grid(grid, p);
    for (int ix = std::max(0, s.ix - r); ix <= std::min(grid.nx - 1, s.ix + r); ++ix) {
      for (int iz = std::max(0, s.iz - r); iz <= std::min(grid.nz - 1, s.iz + r); ++iz) {
        const int dx = ix - s.ix;
        const int dz = iz - s.iz;
        if (dx * dx + dz * dz <= r * r) grad.values[grid.index(ix, iz)] = 0.0;
      }
    }
  }
}

namespace {

std::vector<double> apply_operator(const VelocityModel& model, const SimConfig& cfg, std::span<const double> source,
                                   bool adjoint) {
  const Grid2D& grid = model.grid();
  const std::size_t n = grid.size();
  const std::size_t nt = cfg.nt;
  if (source.size() != nt * n) throw InvalidArgument("space-time source has the wrong size");
  const Propagator prop(model, cfg);
  std::vector<std::size_t> cells(n);
  std::vector<double> a3(n);
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iz = 0; iz < grid.nz; ++iz) {
      cells[grid.index(ix, iz)] = prop.cell(ix, iz);
      a3[grid.index(ix, iz)] = prop.a3(ix, iz);
    }
  }
  std::vector<double> out(nt * n, 0.0);
  auto time_of = [&](std::size_t j) { return adjoint ? nt - 1 - j : j; };
  prop.run(
      [&](std::size_t j, double* next) {
        const double* s = source.data() + time_of(j) * n;
        for (std::size_t c = 0; c < n; ++c) next[cells[c]] += a3[c] * s[c];
      },
      [&](std::size_t j, const double* field) {
        prop.extract(field, std::span<double>(out.data() + time_of(j) * n, n));
      });
  return out;
}

}  // namespace

std::vector<double> apply_forward_operator(const VelocityModel& model, const SimConfig& cfg,
                                           std::span<const double> source) {
  return apply_operator(model, cfg, source, false);
}

std::vector<double> apply_adjoint_operator(const VelocityModel& model, const SimConfig& cfg,
                                           std::span<const double> source) {
  return apply_operator(model, cfg, source, true);
}

}  // namespace fwi
