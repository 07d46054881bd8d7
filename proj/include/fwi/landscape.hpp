#pragma once

// Diagnostic scans over the W2 and L2 misfits: shift/dilation landscapes,
// Huber curves, noise scaling, residual spectra and wavenumber splits.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fwi/grid.hpp"
#include "fwi/misfit.hpp"
#include "fwi/transport.hpp"

namespace fwi {

struct ScanAxis {
  std::string name;
  std::vector<double> values;
};

// values[i * n2 + j] belongs to (axis1[i], axis2[j]). A 1D scan has no axis2.
struct ScanGrid {
  ScanAxis axis1;
  std::optional<ScanAxis> axis2;
  std::vector<double> values;
  std::vector<double> analytic;  // closed-form values when requested, else empty
  std::vector<double> overflow;  // fraction of |g| mass moved outside the window, per cell

  std::size_t n1() const { return axis1.values.size(); }
  std::size_t n2() const { return axis2 ? axis2->values.size() : 1; }
  double at(std::size_t i, std::size_t j = 0) const { return values[i * n2() + j]; }
  // Throws InvalidArgument on non-finite values or non-increasing axes.
  void validate() const;
};

// W2^2 of the normalized traces, or ||f - g||^2 for L2.
double trace_misfit(std::span<const double> f, std::span<const double> g, double dt, const MisfitKind& kind);

// f(t) = (1/lambda) g(c + (t - c - s) / lambda) by cubic convolution
// resampling; samples outside the window read as zero. A nonnegative g
// yields a nonnegative result (interpolation undershoot is clipped).
std::vector<double> transform_trace(const Trace& g, double s, double lambda, double centre);

struct ScanOptions {
  // Dilation centre in seconds; NaN picks the window midpoint.
  double centre = std::numeric_limits<double>::quiet_NaN();
  // Cells that move more than this fraction of |g| outside the window throw.
  double overflow_tol = 1e-3;
  // Fill ScanGrid::analytic with the closed form
  // (lambda - 1)^2 E[(t-c)^2] + 2 s (lambda - 1) E[t-c] + s^2 of the normalized g.
  // Exact when the normalization commutes with the transform, i.e. linear
  // scaling with b = c = 0 on a nonnegative g.
  bool analytic = false;
};

// Misfit between transformed copies of g and g itself. A single lambda value
// gives a 1D shift scan.
ScanGrid shift_dilate_scan(const Trace& g, const std::vector<double>& s_values,
                           const std::vector<double>& lambda_values, const MisfitKind& metric,
                           const ScanOptions& opts = {});

struct ConvexityReport {
  double pd_fraction = 0.0;
  bool monotone_to_min = false;
  int nonmonotone_axis1_slices = 0;  // slices along axis1 at fixed axis2
  int nonmonotone_axis2_slices = 0;
};

// Finite-difference Hessians at interior points (non-uniform spacing allowed).
// Eigenvalues below 1e-10 of the largest magnitude seen count as not positive.
// Throws InvalidArgument on a 1D grid or fewer than 3 points per axis.
ConvexityReport convexity_check(const ScanGrid& grid);

// Number of strict interior local minima of a 1D curve.
int count_local_minima(const std::vector<double>& y);

struct HuberCurve {
  double c = 0.0;
  std::vector<double> w2;  // W2^2 against shift, one per s value
  double crossover = 0.0;  // estimated quadratic-to-linear transition
  double threshold = 0.0;  // 1/c + |supp f|
};

struct HuberReport {
  std::vector<double> s_values;
  std::vector<HuberCurve> curves;
  double support_width = 0.0;
};

// f must be a nonnegative density. For each c the linear normalization
// (sigma(f) = f, constant c) is applied to f and to f shifted by s.
HuberReport huber_scan(const Trace& f, const std::vector<double>& s_values, const std::vector<double>& c_values,
                       const NormalizationScheme& base = {});

// Width of the region where f exceeds rel_tol * max f.
double support_width(const Trace& f, double rel_tol = 1e-12);

// Transition of a curve that is quadratic near 0 and linear beyond a
// threshold: the first s past the curvature peak where the finite-difference
// second derivative falls below rel_tol of that peak. For a point mass
// shifted against a uniform background the curvature decays linearly and
// vanishes exactly at the threshold.
double curvature_onset(const std::vector<double>& s, const std::vector<double>& y, double rel_tol = 0.01);

struct NoiseCell {
  double eta = 0.0;
  int n = 0;
  double mean_w2 = 0.0;
  double mean_l2 = 0.0;
};

struct NoiseReport {
  std::vector<NoiseCell> cells;  // eta-major, N-minor
  double w2_slope = 0.0;         // least-squares slope of mean W2^2 against eta / N
  double l2_slope = 0.0;         // least-squares slope of mean L2^2 against eta
};

// g must be a positive density. Noise with variance eta is piecewise constant
// on N intervals; when N does not divide the sample count the last interval
// takes the remainder. Realizations for different N are coupled: the finest
// level is drawn once per trial and coarser levels average neighbour pairs
// scaled by 1/sqrt(2), which keeps the variance at eta. This needs every N to
// be the largest N divided by a power of two. Each realization is shifted to
// zero mean so g + noise keeps unit mass.
NoiseReport noise_scan(const Trace& g, const std::vector<double>& eta_values, const std::vector<int>& n_values,
                       int trials, std::uint64_t seed);

struct Spectrum {
  std::vector<double> freq;       // Hz
  std::vector<double> magnitude;  // mean |X_k| over traces
  // Mean one-sided power; summing it gives the mean windowed trace energy sum x^2.
  std::vector<double> power;
};

struct SpectrumOptions {
  bool hann = true;
};

Spectrum residual_spectrum(const ShotGather& residual, const SpectrumOptions& opts = {});

// Sum of Spectrum::power over bins with f_lo <= f < f_hi.
double band_energy(const Spectrum& s, double f_lo, double f_hi);

struct BandSplit {
  Grid2D grid;
  std::vector<double> low;   // modes with max(|kx|, |kz|) <= k_cut
  std::vector<double> high;  // field - low
};

// Splits a gridded field by integer mode index. The high part of a velocity
// model is signed, so the split works on plain fields.
BandSplit bandpass_split(const Grid2D& grid, std::span<const double> field, int k_cut);
BandSplit bandpass_split(const VelocityModel& model, int k_cut);  // on velocity

// Output helpers. Matrices have axis1 down the rows.
void write_scan_csv(const ScanGrid& grid, const std::filesystem::path& path);
void write_scan_pgm(const ScanGrid& grid, const std::filesystem::path& path);
void write_curve_csv(const std::vector<double>& x, const std::vector<double>& y, const std::string& x_name,
                     const std::string& y_name, const std::filesystem::path& path);

}  // namespace fwi
