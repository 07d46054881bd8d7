#pragma once

// Domain types shared by the simulator, the misfits and the inversion driver.
//
// All types are value objects; once constructed they are not mutated by the
// library, so they can be shared read-only between worker threads.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fwi/errors.hpp"

namespace fwi {

struct Grid2D {
  int nx = 0;
  int nz = 0;
  double dx = 0.0;  // meters
  double dz = 0.0;  // meters

  // Throws InvalidArgument unless nx, nz >= 3 and dx, dz > 0.
  static Grid2D make(int nx, int nz, double dx, double dz);

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz); }
  // Row-major with z fastest.
  std::size_t index(int ix, int iz) const {
    return static_cast<std::size_t>(ix) * static_cast<std::size_t>(nz) + static_cast<std::size_t>(iz);
  }
  double x_extent() const { return (nx - 1) * dx; }
  double z_extent() const { return (nz - 1) * dz; }

  bool operator==(const Grid2D&) const = default;
};

// Squared slowness m = 1/v^2 on a Grid2D. The optimization variable.
class VelocityModel {
 public:
  VelocityModel() = default;
  // Throws InvalidArgument if sizes disagree or any m is not strictly positive and finite.
  VelocityModel(Grid2D grid, std::vector<double> m);

  static VelocityModel from_velocity(Grid2D grid, std::span<const double> v);
  static VelocityModel constant_velocity(Grid2D grid, double v);

  const Grid2D& grid() const { return grid_; }
  std::span<const double> m() const { return m_; }
  double m(int ix, int iz) const { return m_[grid_.index(ix, iz)]; }
  double velocity(int ix, int iz) const;
  std::vector<double> velocity() const;
  double min_velocity() const;
  double max_velocity() const;

  // Copy with every cell clipped so that v lies in [v_min, v_max].
  VelocityModel clipped(double v_min, double v_max) const;

 private:
  Grid2D grid_;
  std::vector<double> m_;
};

struct Wavelet {
  std::vector<double> samples;
  double dt = 0.0;
  double t0 = 0.0;
  double peak_freq = 0.0;

  std::size_t nt() const { return samples.size(); }
  Wavelet scaled(double alpha) const;
};

// (1 - 2 pi^2 f^2 (t - t0)^2) exp(-pi^2 f^2 (t - t0)^2) sampled at t = k dt.
Wavelet ricker(double peak_freq, double t0, std::size_t nt, double dt);
double ricker_value(double peak_freq, double t0, double t);

struct Position {
  double x = 0.0;
  double z = 0.0;
};

struct GridNode {
  int ix = 0;
  int iz = 0;
  bool operator==(const GridNode&) const = default;
};

// Nearest grid node; throws InvalidArgument if p lies outside the grid.
GridNode snap_to_grid(const Grid2D& grid, Position p);

struct Acquisition {
  std::vector<Position> sources;
  std::vector<Position> receivers;
  double record_time = 0.0;  // seconds
  double dt_record = 0.0;    // seconds

  // Checks positions are inside the grid and dt_record is an integer
  // multiple of sim_dt. Returns that multiple.
  int validate(const Grid2D& grid, double sim_dt) const;
  // Mean spacing of consecutive receivers, used as the receiver quadrature weight.
  double receiver_spacing() const;
  std::size_t record_samples() const;
};

struct Trace {
  std::vector<double> samples;
  double dt = 0.0;

  Trace() = default;
  // Throws InvalidArgument for nt < 2, dt <= 0 or non-finite samples.
  Trace(std::vector<double> samples, double dt);

  std::size_t nt() const { return samples.size(); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }
  double duration() const { return static_cast<double>(samples.size()) * dt; }
};

// Receiver-indexed traces for one shot, stored contiguously (time fastest).
class ShotGather {
 public:
  ShotGather() = default;
  ShotGather(std::size_t nrec, std::size_t nt, double dt, int source_index);
  ShotGather(std::size_t nrec, std::size_t nt, double dt, int source_index, std::vector<double> data);

  std::size_t nrec() const { return nrec_; }
  std::size_t nt() const { return nt_; }
  double dt() const { return dt_; }
  int source_index() const { return source_index_; }

  std::span<const double> trace(std::size_t r) const { return {data_.data() + r * nt_, nt_}; }
  std::span<double> trace(std::size_t r) { return {data_.data() + r * nt_, nt_}; }
  Trace trace_copy(std::size_t r) const;
  double& at(std::size_t r, std::size_t k) { return data_[r * nt_ + k]; }
  double at(std::size_t r, std::size_t k) const { return data_[r * nt_ + k]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_geometry(const ShotGather& other) const;

 private:
  std::size_t nrec_ = 0;
  std::size_t nt_ = 0;
  double dt_ = 0.0;
  int source_index_ = 0;
  std::vector<double> data_;
};

// Frobenius norm of m_iter - m_true; divided by ||m_init - m_true|| when
// a reference is supplied. Throws GridMismatch on differing grids.
double model_error(const VelocityModel& m_iter, const VelocityModel& m_true,
                   const VelocityModel* m_init = nullptr);

}  // namespace fwi
