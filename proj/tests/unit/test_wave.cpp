#include <cmath>
#include <random>

#include "doctest.h"
#include "fwi/wave.hpp"
#include "fwi/wave_kernels.hpp"

using namespace fwi;

namespace {

struct Setup {
  VelocityModel model;
  Acquisition acq;
  Wavelet src;
  SimConfig cfg;
};

Setup homogeneous(int n, double h, double v, int nt, double dt) {
  Setup s;
  const Grid2D g = Grid2D::make(n, n, h, h);
  s.model = VelocityModel::constant_velocity(g, v);
  const double mid = (n / 2) * h;
  s.acq.sources = {{mid, 2 * h}};
  s.acq.receivers = {{mid - 8 * h, 2 * h}, {mid + 10 * h, 2 * h}, {mid, mid}};
  s.acq.dt_record = dt;
  s.acq.record_time = nt * dt;
  s.src = ricker(15.0, 0.08, static_cast<std::size_t>(nt), dt);
  s.cfg.dt = dt;
  s.cfg.nt = static_cast<std::size_t>(nt);
  s.cfg.sponge_width = 10;
  s.cfg.sponge_velocity = v;
  return s;
}

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("check_cfl formula values") {
  const Grid2D g = Grid2D::make(10, 10, 10.0, 10.0);
  SimConfig cfg;
  cfg.dt = 1e-3;
  const auto r = check_cfl(VelocityModel::constant_velocity(g, 2000.0), cfg);
  CHECK(r.cfl_number == doctest::Approx(2000.0 * 1e-3 * std::sqrt(0.02)));
  CHECK(r.stable);
  cfg.dt = 0.0;
  const auto z = check_cfl(VelocityModel::constant_velocity(g, 2000.0), cfg);
  CHECK(z.cfl_number == 0.0);
  CHECK(z.stable);
  cfg.dt = 1e-3;
  cfg.peak_freq = 10.0;
  const auto p = check_cfl(VelocityModel::constant_velocity(Grid2D::make(10, 10, 20.0, 20.0), 4000.0), cfg);
  CHECK(p.points_per_wavelength == doctest::Approx(20.0));
  CHECK(p.dispersion_ok);
  cfg.dt = 1.01 * p.max_stable_dt;
  CHECK_FALSE(check_cfl(VelocityModel::constant_velocity(Grid2D::make(10, 10, 20.0, 20.0), 4000.0), cfg).stable);
}

TEST_CASE("fourth-order laplacian is exact on cubics away from the boundary") {
  kernels::StencilPlan plan;
  plan.nx = 12;
  plan.nz = 10;
  plan.inv_dx2 = 1.0 / (2.0 * 2.0);
  plan.inv_dz2 = 1.0 / (0.5 * 0.5);
  std::vector<double> u(plan.field_size(), 0.0);
  std::vector<double> out(plan.field_size(), 0.0);
  auto f = [](double x, double z) { return x * x * x - 2.0 * z * z + x * z; };
  for (int ix = -2; ix < plan.nx + 2; ++ix) {
    for (int iz = -2; iz < plan.nz + 2; ++iz) {
      u[static_cast<std::size_t>(ix + 2) * plan.ld() + static_cast<std::size_t>(iz + 2)] = f(2.0 * ix, 0.5 * iz);
    }
  }
  kernels::laplacian(plan, u.data(), out.data());
  for (int ix = 0; ix < plan.nx; ++ix) {
    for (int iz = 0; iz < plan.nz; ++iz) {
      CHECK(out[plan.at(ix, iz)] == doctest::Approx(6.0 * 2.0 * ix - 4.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("serial and OpenMP kernels agree bitwise") {
  Setup s = homogeneous(40, 10.0, 2000.0, 300, 1e-3);
  s.cfg.kernel = KernelKind::kSerial;
  const auto a = simulate_forward(s.model, s.acq, s.src, 0, s.cfg);
  s.cfg.kernel = KernelKind::kOpenMP;
  const auto b = simulate_forward(s.model, s.acq, s.src, 0, s.cfg);
  const auto da = a.history.data();
  const auto db = b.history.data();
  REQUIRE(da.size() == db.size());
  CHECK(std::equal(da.begin(), da.end(), db.begin()));
}

TEST_CASE("zero source gives zero gather and history") {
  Setup s = homogeneous(30, 10.0, 2000.0, 200, 1e-3);
  s.src = s.src.scaled(0.0);
  const auto r = simulate_forward(s.model, s.acq, s.src, 0, s.cfg);
  for (double v : r.gather.data()) CHECK(v == 0.0);
  CHECK(r.history.max_abs() == 0.0);
  CHECK(r.history.n_stored() == 200);
}

TEST_CASE("forward solve is linear in the source") {
  Setup s = homogeneous(40, 10.0, 2000.0, 300, 1e-3);
  const auto base = simulate_forward(s.model, s.acq, s.src, 0, s.cfg, false);
  const auto scaled = simulate_forward(s.model, s.acq, s.src.scaled(-3.5), 0, s.cfg, false);
  std::vector<double> minus(base.gather.data().size());
  for (std::size_t i = 0; i < minus.size(); ++i) minus[i] = -3.5 * base.gather.data()[i];
  CHECK(rel_diff(scaled.gather.data(), minus) < 1e-14);
  Wavelet other = ricker(9.0, 0.12, 300, 1e-3);
  const auto o = simulate_forward(s.model, s.acq, other, 0, s.cfg, false);
  Wavelet mix = s.src;
  for (std::size_t k = 0; k < mix.samples.size(); ++k) mix.samples[k] = 2.0 * s.src.samples[k] - 0.7 * other.samples[k];
  const auto m = simulate_forward(s.model, s.acq, mix, 0, s.cfg, false);
  std::vector<double> expect(m.gather.data().size());
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = 2.0 * base.gather.data()[i] - 0.7 * o.gather.data()[i];
  CHECK(rel_diff(m.gather.data(), expect) < 1e-10);
}

TEST_CASE("first break matches the straight-ray travel time") {
  const double h = 10.0;
  const double v = 2000.0;
  const double dt = 1e-3;
  Setup s = homogeneous(120, h, v, 500, dt);
  s.cfg.sponge_width = 20;
  const double sx = 20 * h;
  s.acq.sources = {{sx, 60 * h}};
  s.acq.receivers = {{sx + 40 * h, 60 * h}, {sx + 80 * h, 60 * h}};
  const auto r = simulate_forward(s.model, s.acq, s.src, 0, s.cfg, false);
  // Onset at a fixed fraction of the peak, relative to the wavelet's own onset.
  auto onset = [](std::span<const double> x, double dt_) {
    double peak = 0.0;
    for (double a : x) peak = std::max(peak, std::abs(a));
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (std::abs(x[k]) >= 0.05 * peak) return static_cast<double>(k) * dt_;
    }
    return -1.0;
  };
  const double t_src = onset(s.src.samples, dt);
  for (std::size_t rec = 0; rec < 2; ++rec) {
    const double d = (rec == 0 ? 40 : 80) * h;
    const double t = onset(r.gather.trace(rec), dt) - t_src;
    CHECK(std::abs(t - d / v) <= 2.0 * h / v);
  }
}

TEST_CASE("source-receiver reciprocity") {
  Setup s = homogeneous(40, 10.0, 2000.0, 400, 1e-3);
  const Position a{80.0, 30.0};
  const Position b{290.0, 170.0};
  Acquisition ab = s.acq;
  ab.sources = {a};
  ab.receivers = {b};
  Acquisition ba = s.acq;
  ba.sources = {b};
  ba.receivers = {a};
  const auto x = simulate_forward(s.model, ab, s.src, 0, s.cfg, false);
  const auto y = simulate_forward(s.model, ba, s.src, 0, s.cfg, false);
  CHECK(rel_diff(x.gather.trace(0), y.gather.trace(0)) < 1e-8);
}

TEST_CASE("discrete adjoint dot-product identity on a 30x30 grid") {
  const Grid2D g = Grid2D::make(30, 30, 10.0, 10.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uv(1800.0, 3000.0);
  std::vector<double> vel(g.size());
  for (double& x : vel) x = uv(rng);
  const VelocityModel model = VelocityModel::from_velocity(g, vel);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.nt = 150;
  cfg.sponge_width = 8;
  for (int order : {2, 4}) {
    cfg.stencil_order = order;
    std::normal_distribution<double> nd;
    std::vector<double> s(cfg.nt * g.size());
    std::vector<double> r(cfg.nt * g.size());
    for (double& x : s) x = nd(rng);
    for (double& x : r) x = nd(rng);
    const auto u = apply_forward_operator(model, cfg, s);
    const auto lam = apply_adjoint_operator(model, cfg, r);
    const double lhs = dot(u, r);
    const double rhs = dot(s, lam);
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-8);
  }
}

TEST_CASE("adjoint of a receiver delta is the time-reversed forward field") {
  Setup s = homogeneous(40, 10.0, 2000.0, 250, 1e-3);
  s.acq.receivers = {{150.0, 40.0}};
  ShotGather adj(1, 250, 1e-3, 0);
  adj.at(0, 180) = 1.0;
  const auto lam = simulate_adjoint(s.model, adj, s.acq, s.cfg);

  Acquisition fwd_acq = s.acq;
  fwd_acq.sources = s.acq.receivers;
  Wavelet w = s.src;
  for (std::size_t j = 0; j < w.samples.size(); ++j) {
    w.samples[j] = -s.model.grid().dx * s.model.grid().dz * adj.at(0, 250 - 1 - j);
  }
  const auto u = simulate_forward(s.model, fwd_acq, w, 0, s.cfg);
  double worst = 0.0;
  double scale = u.history.max_abs();
  for (std::size_t n = 0; n < 250; ++n) {
    const auto a = lam.snapshot(n);
    const auto b = u.history.snapshot(250 - 1 - n);
    for (std::size_t c = 0; c < a.size(); ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
  }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-10 * scale);

  SUBCASE("zero adjoint source gives a zero field") {
    const auto z = simulate_adjoint(s.model, ShotGather(1, 250, 1e-3, 0), s.acq, s.cfg);
    CHECK(z.max_abs() == 0.0);
  }
}

namespace {

// Half squared residual summed over receivers and record samples.
struct L2Problem {
  Acquisition acq;
  Wavelet src;
  SimConfig cfg;
  ShotGather observed;

  double misfit(const VelocityModel& m) const {
    const auto r = simulate_forward(m, acq, src, 0, cfg, false);
    double j = 0.0;
    for (std::size_t i = 0; i < r.gather.data().size(); ++i) {
      const double d = r.gather.data()[i] - observed.data()[i];
      j += 0.5 * d * d * acq.dt_record;
    }
    return j;
  }

  GradientField gradient(const VelocityModel& m, double adj_scale = 1.0) const {
    const auto r = simulate_forward(m, acq, src, 0, cfg);
    ShotGather adj = r.gather;
    for (std::size_t i = 0; i < adj.data().size(); ++i) adj.data()[i] = adj_scale * (r.gather.data()[i] - observed.data()[i]);
    const auto lam = simulate_adjoint(m, adj, acq, cfg);
    return compute_gradient(m, r.history, lam, cfg);
  }
};

L2Problem layered_problem(int stride) {
  const Grid2D g = Grid2D::make(40, 40, 10.0, 10.0);
  L2Problem p;
  p.acq.sources = {{200.0, 20.0}};
  for (int i = 0; i < 20; ++i) p.acq.receivers.push_back({20.0 + 18.0 * i, 20.0});
  p.acq.dt_record = 2e-3;
  p.acq.record_time = 0.5;
  p.cfg.dt = 1e-3;
  p.cfg.nt = steps_for(p.acq, p.cfg.dt);
  p.cfg.sponge_width = 15;
  p.cfg.sponge_velocity = 3000.0;
  p.cfg.store_stride = stride;
  p.src = ricker(15.0, 0.08, p.cfg.nt, p.cfg.dt);
  std::vector<double> vt(g.size());
  for (int ix = 0; ix < 40; ++ix) {
    for (int iz = 0; iz < 40; ++iz) vt[g.index(ix, iz)] = iz < 20 ? 2000.0 : 3000.0;
  }
  p.observed = simulate_forward(VelocityModel::from_velocity(g, vt), p.acq, p.src, 0, p.cfg, false).gather;
  return p;
}

VelocityModel layered_start() {
  const Grid2D g = Grid2D::make(40, 40, 10.0, 10.0);
  std::vector<double> v(g.size());
  for (int ix = 0; ix < 40; ++ix) {
    for (int iz = 0; iz < 40; ++iz) v[g.index(ix, iz)] = 2000.0 + 25.0 * iz;
  }
  return VelocityModel::from_velocity(g, v);
}

VelocityModel perturbed(const VelocityModel& m, std::size_t cell, double eps) {
  std::vector<double> x(m.m().begin(), m.m().end());
  x[cell] += eps;
  return VelocityModel(m.grid(), std::move(x));
}

}  // namespace

TEST_CASE("adjoint-state gradient matches finite differences") {
  const L2Problem p = layered_problem(1);
  const VelocityModel m0 = layered_start();
  const GradientField g = p.gradient(m0);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> pick(5, 34);
  for (int probe = 0; probe < 5; ++probe) {
    const std::size_t cell = m0.grid().index(pick(rng), pick(rng));
    const double mc = m0.m()[cell];
    double best = 1e300;
    for (double rel : {1e-2, 1e-3, 1e-4}) {
      const double eps = rel * mc;
      const double fd = (p.misfit(perturbed(m0, cell, eps)) - p.misfit(perturbed(m0, cell, -eps))) / (2.0 * eps);
      best = std::min(best, std::abs(fd - g.values[cell]) / std::abs(fd));
    }
    CHECK(best <= 0.05);
  }
}

TEST_CASE("gradient is linear in the adjoint data and zero for zero data") {
  const L2Problem p = layered_problem(1);
  const VelocityModel m0 = layered_start();
  const GradientField g1 = p.gradient(m0, 1.0);
  const GradientField g2 = p.gradient(m0, 2.0);
  for (std::size_t i = 0; i < g1.values.size(); ++i) CHECK(g2.values[i] == 2.0 * g1.values[i]);
  const GradientField g0 = p.gradient(m0, 0.0);
  for (double v : g0.values) CHECK(v == 0.0);
}

TEST_CASE("strided history gives a close gradient") {
  const VelocityModel m0 = layered_start();
  const GradientField g1 = layered_problem(1).gradient(m0);
  const GradientField g2 = layered_problem(2).gradient(m0);
  CHECK(rel_diff(g2.values, g1.values) < 0.1);
}

TEST_CASE("fused adjoint gradient equals the stored-history path") {
  for (int stride : {1, 3}) {
    CAPTURE(stride);
    const L2Problem p = layered_problem(stride);
    const VelocityModel m = layered_start();
    const auto r = simulate_forward(m, p.acq, p.src, 0, p.cfg);
    ShotGather adj = r.gather;
    for (std::size_t i = 0; i < adj.data().size(); ++i) adj.data()[i] = r.gather.data()[i] - p.observed.data()[i];
    const GradientField two_pass = compute_gradient(m, r.history, simulate_adjoint(m, adj, p.acq, p.cfg), p.cfg);
    const GradientField fused = adjoint_gradient(m, adj, p.acq, r.history, p.cfg);
    CHECK(rel_diff(fused.values, two_pass.values) < 1e-12);
  }
}

TEST_CASE("source mask zeroes a disk around each source") {
  const Grid2D g = Grid2D::make(10, 10, 10.0, 10.0);
  GradientField f{g, std::vector<double>(g.size(), 1.0)};
  Acquisition acq{{{50.0, 0.0}}, {{0.0, 0.0}}, 1.0, 1e-3};
  SimConfig cfg;
  cfg.source_mask_radius = 1;
  mask_sources(f, acq, cfg);
  CHECK(f.values[g.index(5, 0)] == 0.0);
  CHECK(f.values[g.index(4, 0)] == 0.0);
  CHECK(f.values[g.index(5, 1)] == 0.0);
  CHECK(f.values[g.index(4, 1)] == 1.0);
}

TEST_CASE("invalid runs raise") {
  Setup s = homogeneous(30, 10.0, 2000.0, 200, 1e-3);
  SimConfig bad = s.cfg;
  bad.dt = 5e-3;
  Acquisition coarse = s.acq;
  coarse.dt_record = 5e-3;
  CHECK_THROWS_AS(simulate_forward(s.model, coarse, ricker(15.0, 0.08, 200, 5e-3), 0, bad), InstabilityError);
  Wavelet nan_src = s.src;
  nan_src.samples[3] = NAN;
  CHECK_THROWS_AS(simulate_forward(s.model, s.acq, nan_src, 0, s.cfg), InstabilityError);
  CHECK_THROWS_AS(simulate_adjoint(s.model, ShotGather(2, 200, 1e-3, 0), s.acq, s.cfg), GridMismatch);
}
