#pragma once

// Time-domain acoustic solver, its discrete adjoint, and gradient assembly.
//
// The model grid is padded on the left, right and bottom by a damping layer;
// the top edge is a free surface (zero normal derivative). Histories and
// gradients are reported on the model grid only.

#include <cstddef>
#include <span>
#include <vector>

#include "fwi/grid.hpp"

namespace fwi {

enum class KernelKind {
  kAuto,    // OpenMP kernel unless already inside a parallel region
  kSerial,  // single-threaded reference kernel
  kOpenMP,
};

struct SimConfig {
  double dt = 0.0;
  std::size_t nt = 0;  // time steps, including t = 0
  int stencil_order = 4;
  int sponge_width = 30;            // cells added on left, right and bottom
  double sponge_reflection = 1e-3;  // target amplitude reflection
  // Velocity used to size the damping; 0 means the model's maximum.
  // Fix it when comparing runs on different models.
  double sponge_velocity = 0.0;
  int store_stride = 1;
  int source_mask_radius = 1;  // gradient zeroed within this many cells of a source
  double peak_freq = 0.0;      // for the dispersion diagnostic; 0 disables it
  int check_every = 25;        // steps between non-finite scans
  KernelKind kernel = KernelKind::kAuto;
};

struct CflReport {
  double cfl_number = 0.0;
  double stability_limit = 0.0;
  double max_stable_dt = 0.0;  // largest dt with cfl <= 0.9 * limit
  double points_per_wavelength = 0.0;
  bool stable = true;
  bool dispersion_ok = true;  // at least 5 points per minimum wavelength
};

// Report only; never throws for a valid model.
CflReport check_cfl(const VelocityModel& model, const SimConfig& cfg);

// Number of steps needed to fill every record sample of acq.
std::size_t steps_for(const Acquisition& acq, double dt);

// Field snapshots u(., n * stride) on the model grid.
class WavefieldHistory {
 public:
  WavefieldHistory() = default;
  WavefieldHistory(Grid2D grid, std::size_t nt, int store_stride, double dt);

  const Grid2D& grid() const { return grid_; }
  std::size_t nt() const { return nt_; }
  int store_stride() const { return stride_; }
  double dt() const { return dt_; }
  std::size_t n_stored() const { return n_stored_; }

  std::span<const double> snapshot(std::size_t j) const { return {data_.data() + j * grid_.size(), grid_.size()}; }
  std::span<double> snapshot(std::size_t j) { return {data_.data() + j * grid_.size(), grid_.size()}; }
  std::span<const double> data() const { return data_; }

  double max_abs() const;

 private:
  Grid2D grid_;
  std::size_t nt_ = 0;
  int stride_ = 1;
  double dt_ = 0.0;
  std::size_t n_stored_ = 0;
  std::vector<double> data_;
};

struct GradientField {
  Grid2D grid;
  std::vector<double> values;
};

struct ForwardResult {
  ShotGather gather;
  WavefieldHistory history;  // empty when not requested
};

// Solves from zero initial conditions with the wavelet injected at the
// source node (amplitude per unit area). Throws InstabilityError on a CFL
// violation or a non-finite field.
ForwardResult simulate_forward(const VelocityModel& model, const Acquisition& acq, const Wavelet& src,
                               int source_index, const SimConfig& cfg, bool keep_history = true);

// Backward solve from zero final conditions. adjoint_gather holds dJ/df per
// unit time at each receiver; it is injected with a negative sign.
WavefieldHistory simulate_adjoint(const VelocityModel& model, const ShotGather& adjoint_gather,
                                  const Acquisition& acq, const SimConfig& cfg);

// Backward solve fused with the correlation against a stored forward
// history; equal to compute_gradient(simulate_adjoint(...)) up to summation
// order, without storing the adjoint field.
GradientField adjoint_gradient(const VelocityModel& model, const ShotGather& adjoint_gather, const Acquisition& acq,
                               const WavefieldHistory& fwd, const SimConfig& cfg);

// Time correlation of the adjoint field with the second time derivative of
// the forward field, per model cell. Throws GridMismatch on inconsistent
// histories.
GradientField compute_gradient(const VelocityModel& model, const WavefieldHistory& fwd, const WavefieldHistory& adj,
                               const SimConfig& cfg);

// Zeroes the gradient within cfg.source_mask_radius cells of every source.
void mask_sources(GradientField& grad, const Acquisition& acq, const SimConfig& cfg);

// Raw space-time operators on the model grid. source has nt * grid.size()
// entries (step-major); the result has the same shape. The adjoint satisfies
// <forward(s), r> = <s, adjoint(r)> up to rounding.
std::vector<double> apply_forward_operator(const VelocityModel& model, const SimConfig& cfg,
                                           std::span<const double> source);
std::vector<double> apply_adjoint_operator(const VelocityModel& model, const SimConfig& cfg,
                                           std::span<const double> source);

}  // namespace fwi
