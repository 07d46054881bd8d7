#include "fwi/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fwi {

Grid2D Grid2D::make(int nx, int nz, double dx, double dz) {
  if (nx < 3 || nz < 3) throw InvalidArgument("grid needs at least 3 cells per axis");
  if (!(dx > 0.0) || !(dz > 0.0)) throw InvalidArgument("grid spacing must be positive");
  return Grid2D{nx, nz, dx, dz};
}

VelocityModel::VelocityModel(Grid2D grid, std::vector<double> m) : grid_(grid), m_(std::move(m)) {
  if (m_.size() != grid_.size()) throw InvalidArgument("model size does not match grid");
  for (double v : m_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("squared slowness must be positive and finite");
  }
}

VelocityModel VelocityModel::from_velocity(Grid2D grid, std::span<const double> v) {
  std::vector<double> m(v.size());
  std::transform(v.begin(), v.end(), m.begin(), [](double vel) { return 1.0 / (vel * vel); });
  return VelocityModel(grid, std::move(m));
}

VelocityModel VelocityModel::constant_velocity(Grid2D grid, double v) {
  return VelocityModel(grid, std::vector<double>(grid.size(), 1.0 / (v * v)));
}

double VelocityModel::velocity(int ix, int iz) const { return 1.0 / std::sqrt(m(ix, iz)); }

std::vector<double> VelocityModel::velocity() const {
  std::vector<double> v(m_.size());
  std::transform(m_.begin(), m_.end(), v.begin(), [](double mm) { return 1.0 / std::sqrt(mm); });
  return v;
}

double VelocityModel::min_velocity() const {
  return 1.0 / std::sqrt(*std::max_element(m_.begin(), m_.end()));
}

double VelocityModel::max_velocity() const {
  return 1.0 / std::sqrt(*std::min_element(m_.begin(), m_.end()));
}

VelocityModel VelocityModel::clipped(double v_min, double v_max) const {
  const double m_lo = 1.0 / (v_max * v_max);
  const double m_hi = 1.0 / (v_min * v_min);
  std::vector<double> out(m_.size());
  std::transform(m_.begin(), m_.end(), out.begin(), [&](double mm) { return std::clamp(mm, m_lo, m_hi); });
  return VelocityModel(grid_, std::move(out));
}

Wavelet Wavelet::scaled(double alpha) const {
  Wavelet w = *this;
  for (double& s : w.samples) s *= alpha;
  return w;
}

double ricker_value(double peak_freq, double t0, double t) {
  const double a = std::numbers::pi * peak_freq * (t - t0);
  const double a2 = a * a;
  return (1.0 - 2.0 * a2) * std::exp(-a2);
}

Wavelet ricker(double peak_freq, double t0, std::size_t nt, double dt) {
  if (!(peak_freq > 0.0)) throw InvalidArgument("ricker: peak frequency must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("ricker: dt must be positive");
  if (nt < 2) throw InvalidArgument("ricker: need at least two samples");
  if (!std::isfinite(t0)) throw InvalidArgument("ricker: t0 must be finite");
  Wavelet w;
  w.dt = dt;
  w.t0 = t0;
  w.peak_freq = peak_freq;
  w.samples.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) w.samples[k] = ricker_value(peak_freq, t0, static_cast<double>(k) * dt);
  return w;
}

GridNode snap_to_grid(const Grid2D& grid, Position p) {
  const double fx = p.x / grid.dx;
  const double fz = p.z / grid.dz;
  // Half a cell of slack for positions given in rounded meters.
  if (!(fx > -0.5) || !(fz > -0.5) || !(fx < grid.nx - 0.5) || !(fz < grid.nz - 0.5)) {
    throw InvalidArgument("position (" + std::to_string(p.x) + ", " + std::to_string(p.z) + ") outside grid");
  }
  return GridNode{static_cast<int>(std::lround(fx)), static_cast<int>(std::lround(fz))};
}

int Acquisition::validate(const Grid2D& grid, double sim_dt) const {
  if (sources.empty()) throw InvalidArgument("acquisition has no sources");
  if (receivers.empty()) throw InvalidArgument("acquisition has no receivers");
  for (const auto& p : sources) snap_to_grid(grid, p);
  for (const auto& p : receivers) snap_to_grid(grid, p);
  if (!(record_time > 0.0)) throw InvalidArgument("record_time must be positive");
  if (!(sim_dt > 0.0) || !(dt_record > 0.0)) throw InvalidArgument("time steps must be positive");
  const double ratio = dt_record / sim_dt;
  const long k = std::lround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio) {
    throw InvalidArgument("dt_record must be an integer multiple of the simulation dt");
  }
  return static_cast<int>(k);
}

double Acquisition::receiver_spacing() const {
  if (receivers.size() < 2) return 1.0;
  double total = 0.0;
  for (std::size_t i = 1; i < receivers.size(); ++i) {
    total += std::hypot(receivers[i].x - receivers[i - 1].x, receivers[i].z - receivers[i - 1].z);
  }
  const double h = total / static_cast<double>(receivers.size() - 1);
  return h > 0.0 ? h : 1.0;
}

std::size_t Acquisition::record_samples() const {
  return static_cast<std::size_t>(std::lround(record_time / dt_record));
}

Trace::Trace(std::vector<double> s, double step) : samples(std::move(s)), dt(step) {
  if (samples.size() < 2) throw InvalidArgument("trace needs at least two samples");
  if (!(dt > 0.0)) throw InvalidArgument("trace dt must be positive");
  for (double v : samples) {
    if (!std::isfinite(v)) throw InvalidArgument("trace contains non-finite samples");
  }
}

ShotGather::ShotGather(std::size_t nrec, std::size_t nt, double dt, int source_index)
    : nrec_(nrec), nt_(nt), dt_(dt), source_index_(source_index), data_(nrec * nt, 0.0) {}

ShotGather::ShotGather(std::size_t nrec, std::size_t nt, double dt, int source_index, std::vector<double> data)
    : nrec_(nrec), nt_(nt), dt_(dt), source_index_(source_index), data_(std::move(data)) {
  if (data_.size() != nrec * nt) throw InvalidArgument("gather data size does not match nrec*nt");
}

Trace ShotGather::trace_copy(std::size_t r) const {
  auto s = trace(r);
  return Trace(std::vector<double>(s.begin(), s.end()), dt_);
}

bool ShotGather::same_geometry(const ShotGather& other) const {
  return nrec_ == other.nrec_ && nt_ == other.nt_ && std::abs(dt_ - other.dt_) <= 1e-12 * dt_;
}

double model_error(const VelocityModel& m_iter, const VelocityModel& m_true, const VelocityModel* m_init) {
  if (!(m_iter.grid() == m_true.grid())) throw GridMismatch("model_error: grids differ");
  auto frob = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const double e = frob(m_iter.m(), m_true.m());
  if (m_init == nullptr) return e;
  if (!(m_init->grid() == m_true.grid())) throw GridMismatch("model_error: reference grid differs");
  const double e0 = frob(m_init->m(), m_true.m());
  if (e0 == 0.0) throw InvalidArgument("model_error: reference equals truth");
  return e / e0;
}

}  // namespace fwi
