#pragma once

// Experiment drivers behind the command-line tool: forward modelling,
// inversion, landscape scans and a two-trace W2 utility. All file writes
// happen on the calling thread.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fwi/config.hpp"
#include "fwi/landscape.hpp"
#include "fwi/optimizer.hpp"

namespace fwi {

struct RunOptions {
  std::filesystem::path out_dir;  // empty: compute only, write nothing
  int threads = -1;               // -1 keeps the config value; 0 is the OpenMP default
  std::optional<std::uint64_t> seed;
  // Leaves timings and other run-dependent fields out of every output.
  bool reproducible = false;
  int snapshots = -1;  // -1 keeps the config value
  std::ostream* log = nullptr;
};

// Applies command-line overrides to a loaded config.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opts);

// Simulation settings with the sponge velocity pinned: an unset value takes
// the true model's maximum velocity so that modelling and inversion damp
// identically whatever the current model.
SimConfig resolved_sim(const ExperimentConfig& cfg, const VelocityModel& truth);

struct ForwardOutcome {
  VelocityModel truth;
  std::vector<ShotGather> gathers;
};

// Writes shot_NNN.bin/.json per source, model_true.bin/.json and a manifest.
ForwardOutcome cmd_forward(const ExperimentConfig& cfg, const RunOptions& opts);

std::vector<ShotGather> read_observed(const std::filesystem::path& data_dir, const ExperimentConfig& cfg);

struct InvertOutcome {
  MisfitKind kind;
  VelocityModel initial;
  VelocityModel truth;
  MinimizeResult result;
  std::vector<ShotGather> observed;
  std::vector<ShotGather> initial_synthetic;
  std::vector<ShotGather> final_synthetic;
  nlohmann::json summary;
};

// Inverts gathers read from data_dir, or simulated from the true model when
// data_dir is empty. Writes model_initial, model_final, trace.csv,
// snapshots/iter_NNNN every K iterations, summary.json and a manifest.
// Throws OptimizerAbort after writing partial outputs when the run aborts.
InvertOutcome cmd_invert(const ExperimentConfig& cfg, const std::filesystem::path& data_dir, const RunOptions& opts);

// Runs every configured scan; writes <name>.csv (and .pgm for 2D scans)
// plus <name>.json with the derived diagnostics. Returns the JSON summaries.
nlohmann::json cmd_landscape(const ExperimentConfig& cfg, const RunOptions& opts);

struct W2Result {
  double w = 0.0;
  double w2 = 0.0;
};

// W_sigma between trace `trace_index` of two gather files. With out_dir set
// it also writes the optimal map and the adjoint source as CSV.
W2Result cmd_w2(const std::filesystem::path& file_f, const std::filesystem::path& file_g, std::size_t trace_index,
                const NormalizationScheme& scheme, const std::filesystem::path& out_dir = {});

// Least-squares fit y = alpha s^2 through the origin.
struct QuadraticFit {
  double alpha = 0.0;
  double r2 = 0.0;
};
QuadraticFit fit_quadratic(const std::vector<double>& s, const std::vector<double>& y);

// Summed one-sided residual power of (syn - obs) over all shots in [f_lo, f_hi).
double residual_band_energy(const std::vector<ShotGather>& syn, const std::vector<ShotGather>& obs, double f_lo,
                            double f_hi);

// ||low(v) - low(v_true)|| / ||low(v_init) - low(v_true)|| for the velocity
// field restricted to modes with max(|kx|, |kz|) <= k_cut.
double low_wavenumber_error(const VelocityModel& m, const VelocityModel& truth, const VelocityModel& init, int k_cut);

}  // namespace fwi
