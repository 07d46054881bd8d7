#pragma once

// Experiment configuration: a JSON document validated up front. Unknown keys
// anywhere in the document raise ConfigError.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fwi/grid.hpp"
#include "fwi/io.hpp"
#include "fwi/misfit.hpp"
#include "fwi/optimizer.hpp"
#include "fwi/wave.hpp"

namespace fwi {

// Either a built-in generator with parameters or a model file.
struct ModelSpec {
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path file;
};

struct WaveletSpec {
  double peak_freq = 5.0;
  double t0 = 0.0;  // 0 picks 1.2 / peak_freq
  double amplitude = 1.0;
};

struct MisfitSpec {
  MisfitKind::Type type = MisfitKind::Type::kL2;
  Scaling scaling = Scaling::kLinear;
  // With *_relative set, b is divided by and c multiplied with the largest
  // absolute observed sample, so b_value is the dimensionless |b| max|g|.
  double b = 0.0;
  double c = 0.0;
  bool b_relative = false;
  bool c_relative = false;
  bool both_sides = false;

  MisfitKind resolve(double data_max) const;
};

struct OutputSpec {
  int snapshot_every = 0;  // 0 disables model snapshots
  int k_cut = 10;          // wavenumber split reported in the summary
  SampleFormat format = SampleFormat::kF32;
  bool write_synthetic = false;
};

// 1D test signals for landscape scans, centred at `centre` seconds.
struct SignalSpec {
  std::string type = "ricker";  // ricker, gaussian, raised_cosine, cosine_density
  std::size_t nt = 1001;
  double dt = 1e-3;
  double centre = 0.5;
  double freq = 10.0;   // ricker
  double sigma = 1.0;   // gaussian
  double width = 1.0;   // raised_cosine
  double amplitude = 1.0;

  Trace make() const;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  int n = 1;
  std::vector<double> values() const;
};

struct LandscapeScan {
  std::string name;
  std::string kind;  // shift_dilate, huber, noise
  SignalSpec signal;
  Range s;
  std::optional<Range> lambda;
  MisfitSpec metric;  // relative b and c use the signal maximum
  std::optional<double> centre;
  bool analytic = false;
  std::vector<double> c_values;  // huber
  std::vector<double> eta;       // noise
  std::vector<int> n_values;     // noise
  int trials = 20;               // noise
};

struct ExperimentConfig {
  std::string name = "experiment";
  Grid2D grid;
  std::optional<ModelSpec> true_model;
  std::optional<ModelSpec> initial_model;
  Acquisition acquisition;
  WaveletSpec wavelet;
  SimConfig sim;  // nt is derived from the acquisition
  MisfitSpec misfit;
  LbfgsOptions optimizer;
  OutputSpec outputs;
  std::vector<LandscapeScan> landscape;
  std::uint64_t seed = 0;
  int threads = 0;
  std::filesystem::path base_dir;  // resolves relative model paths

  bool has_wave_setup() const { return true_model.has_value(); }
};

ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
// Reads and parses a file; IoError if unreadable, ConfigError if invalid.
ExperimentConfig load_config(const std::filesystem::path& path);

// constant {v}; layered {v1, v2, z_interface}; camembert {v_bg, v_anom, cx,
// cz, radius}; gradient {v0, k} (v = v0 + k z).
VelocityModel builtin_model(const std::string& name, const Grid2D& grid, const nlohmann::json& params = {});
VelocityModel make_model(const ModelSpec& spec, const Grid2D& grid, const std::filesystem::path& base_dir = {});

Wavelet make_wavelet(const ExperimentConfig& cfg);

}  // namespace fwi
