#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fwi/misfit.hpp"

using namespace fwi;

namespace {

struct Problem {
  Acquisition acq;
  Wavelet src;
  SimConfig cfg;
  VelocityModel truth;
  VelocityModel start;
  std::vector<ShotGather> observed;
};

std::vector<ShotGather> synthesize(const VelocityModel& m, const Acquisition& acq, const Wavelet& src,
                                   const SimConfig& cfg) {
  std::vector<ShotGather> out;
  for (std::size_t s = 0; s < acq.sources.size(); ++s) {
    out.push_back(simulate_forward(m, acq, src, static_cast<int>(s), cfg, false).gather);
  }
  return out;
}

Problem two_layer(int n, int shots) {
  const double h = 10.0;
  const Grid2D g = Grid2D::make(n, n, h, h);
  Problem p;
  for (int s = 0; s < shots; ++s) p.acq.sources.push_back({(s + 1) * (n - 1) * h / (shots + 1), 2 * h});
  for (int r = 1; r < n - 1; r += 2) p.acq.receivers.push_back({r * h, 2 * h});
  p.acq.dt_record = 2e-3;
  p.acq.record_time = 0.5;
  p.cfg.dt = 1e-3;
  p.cfg.nt = steps_for(p.acq, p.cfg.dt);
  p.cfg.sponge_width = 15;
  p.cfg.sponge_velocity = 3000.0;
  p.src = ricker(15.0, 0.08, p.cfg.nt, p.cfg.dt);
  std::vector<double> vt(g.size());
  std::vector<double> v0(g.size());
  for (int ix = 0; ix < n; ++ix) {
    for (int iz = 0; iz < n; ++iz) {
      vt[g.index(ix, iz)] = iz < n / 2 ? 2000.0 : 2800.0;
      v0[g.index(ix, iz)] = 2000.0 + 12.0 * iz;
    }
  }
  p.truth = VelocityModel::from_velocity(g, vt);
  p.start = VelocityModel::from_velocity(g, v0);
  p.observed = synthesize(p.truth, p.acq, p.src, p.cfg);
  return p;
}

VelocityModel perturbed(const VelocityModel& m, std::size_t cell, double eps) {
  std::vector<double> x(m.m().begin(), m.m().end());
  x[cell] += eps;
  return VelocityModel(m.grid(), std::move(x));
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Best relative error over a three-point epsilon sweep.
double fd_error(const Problem& p, const MisfitKind& kind, const Evaluation& ev, std::size_t cell) {
  EvalOptions jo;
  jo.compute_gradient = false;
  const double mc = p.start.m()[cell];
  double best = 1e300;
  for (double rel : {1e-2, 1e-3, 1e-4}) {
    const double eps = rel * mc;
    const double jp = evaluate(perturbed(p.start, cell, eps), p.observed, p.acq, p.src, p.cfg, kind, jo).J;
    const double jm = evaluate(perturbed(p.start, cell, -eps), p.observed, p.acq, p.src, p.cfg, kind, jo).J;
    const double fd = (jp - jm) / (2.0 * eps);
    best = std::min(best, std::abs(fd - ev.gradient.values[cell]) / std::abs(fd));
  }
  return best;
}

MisfitKind softplus_kind(const std::vector<ShotGather>& obs) {
  double m = 0.0;
  for (const auto& g : obs) m = std::max(m, max_abs(g.data()));
  return MisfitKind::w2({Scaling::kSoftplus, 1.0 / m, 0.0, false});
}

}  // namespace

TEST_CASE("zero residual gives zero misfit and gradient") {
  const Problem p = two_layer(30, 1);
  for (const MisfitKind& kind : {MisfitKind::l2(), softplus_kind(p.observed)}) {
    const Evaluation ev = evaluate(p.truth, p.observed, p.acq, p.src, p.cfg, kind);
    CHECK(ev.J == 0.0);
    CHECK(max_abs(ev.gradient.values) == 0.0);
  }
}

TEST_CASE("adjoint sources: zero at a perfect fit and the raw residual for L2") {
  const Problem p = two_layer(30, 1);
  const auto syn = synthesize(p.start, p.acq, p.src, p.cfg);
  CHECK(max_abs(assemble_adjoint_sources(p.observed[0], p.observed[0], softplus_kind(p.observed)).data()) < 1e-12);
  const ShotGather a = assemble_adjoint_sources(syn[0], p.observed[0], MisfitKind::l2());
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == syn[0].data()[i] - p.observed[0].data()[i]);
  CHECK_THROWS_AS(assemble_adjoint_sources(syn[0], ShotGather(3, 4, 1e-3, 0), MisfitKind::l2()), GridMismatch);
}

TEST_CASE("gradient matches finite differences on a two-layer model") {
  const Problem p = two_layer(40, 1);
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> pick(6, 33);
  for (const MisfitKind& kind : {MisfitKind::l2(), softplus_kind(p.observed)}) {
    const Evaluation ev = evaluate(p.start, p.observed, p.acq, p.src, p.cfg, kind);
    for (int probe = 0; probe < 5; ++probe) {
      const std::size_t cell = p.start.grid().index(pick(rng), pick(rng));
      CHECK(fd_error(p, kind, ev, cell) <= 0.05);
    }
  }
}

TEST_CASE("shot additivity and thread independence") {
  const Problem p = two_layer(30, 3);
  const MisfitKind kind = softplus_kind(p.observed);
  EvalOptions one;
  one.threads = 1;
  const Evaluation all = evaluate(p.start, p.observed, p.acq, p.src, p.cfg, kind, one);
  double sum = 0.0;
  for (double j : all.per_shot_J) sum += j;
  CHECK(std::abs(all.J - sum) <= 1e-12 * all.J);

  std::vector<double> grad_sum(all.gradient.values.size(), 0.0);
  double j_sum = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    Acquisition single = p.acq;
    single.sources = {p.acq.sources[s]};
    std::vector<ShotGather> obs{p.observed[s]};
    const Evaluation e = evaluate(p.start, obs, single, p.src, p.cfg, kind, one);
    j_sum += e.J;
    for (std::size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += e.gradient.values[i];
  }
  CHECK(std::abs(all.J - j_sum) <= 1e-12 * all.J);
  // Each single-shot run masks only its own source, so compare away from the sources.
  const Grid2D& g = p.start.grid();
  for (int ix = 0; ix < g.nx; ++ix) {
    for (int iz = 5; iz < g.nz; ++iz) {
      const std::size_t c = g.index(ix, iz);
      CHECK(std::abs(all.gradient.values[c] - grad_sum[c]) <= 1e-12 * max_abs(grad_sum));
    }
  }

  EvalOptions three;
  three.threads = 3;
  const Evaluation par = evaluate(p.start, p.observed, p.acq, p.src, p.cfg, kind, three);
  CHECK(par.J == all.J);
  CHECK(std::equal(par.gradient.values.begin(), par.gradient.values.end(), all.gradient.values.begin()));
}

TEST_CASE("L2 misfit is symmetric in its arguments") {
  const Problem p = two_layer(30, 1);
  const auto syn = synthesize(p.start, p.acq, p.src, p.cfg);
  const double w = p.acq.receiver_spacing();
  CHECK(assemble_adjoint_sources(syn[0], p.observed[0], MisfitKind::l2(), w).J ==
        assemble_adjoint_sources(p.observed[0], syn[0], MisfitKind::l2(), w).J);
}

TEST_CASE("evaluate rejects a shot-count mismatch") {
  const Problem p = two_layer(30, 2);
  std::vector<ShotGather> one{p.observed[0]};
  CHECK_THROWS_AS(evaluate(p.start, one, p.acq, p.src, p.cfg, MisfitKind::l2()), GridMismatch);
}

TEST_CASE("W2 adjoint source carries more low-frequency energy than L2 on a cycle-skipped anomaly") {
  // Small disk anomaly, transmission geometry, 10 Hz source.
  const int nx = 60;
  const int nz = 48;
  const double h = 25.0;
  const Grid2D g = Grid2D::make(nx, nz, h, h);
  std::vector<double> vt(g.size(), 4000.0);
  for (int ix = 0; ix < nx; ++ix) {
    for (int iz = 0; iz < nz; ++iz) {
      const double dx = ix * h - 0.5 * (nx - 1) * h;
      const double dz = iz * h - 0.5 * (nz - 1) * h;
      if (dx * dx + dz * dz < 300.0 * 300.0) vt[g.index(ix, iz)] = 4600.0;
    }
  }
  const VelocityModel truth = VelocityModel::from_velocity(g, vt);
  const VelocityModel start = VelocityModel::constant_velocity(g, 4000.0);
  Acquisition acq;
  acq.sources = {{0.5 * (nx - 1) * h, 2 * h}};
  for (int r = 0; r < nx; r += 2) acq.receivers.push_back({r * h, (nz - 3) * h});
  acq.dt_record = 2e-3;
  acq.record_time = 0.8;
  SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.nt = steps_for(acq, cfg.dt);
  cfg.sponge_width = 20;
  cfg.sponge_velocity = 4600.0;
  const Wavelet src = ricker(10.0, 0.12, cfg.nt, cfg.dt);
  const auto obs = synthesize(truth, acq, src, cfg);
  const auto syn = synthesize(start, acq, src, cfg);
  double gmax = max_abs(obs[0].data());

  auto low_fraction = [&](const ShotGather& a) {
    double low = 0.0;
    double total = 0.0;
    const std::size_t n = a.nt();
    for (std::size_t r = 0; r < a.nrec(); ++r) {
      const auto tr = a.trace(r);
      for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += tr[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
        }
        const double e = std::norm(acc);
        total += e;
        if (static_cast<double>(k) / (static_cast<double>(n) * a.dt()) < 10.0) low += e;
      }
    }
    return low / total;
  };
  const ShotGather l2 = assemble_adjoint_sources(syn[0], obs[0], MisfitKind::l2());
  const ShotGather w2 =
      assemble_adjoint_sources(syn[0], obs[0], MisfitKind::w2({Scaling::kLinear, 0.0, gmax, false}));
  CHECK(low_fraction(w2) > low_fraction(l2));
}
