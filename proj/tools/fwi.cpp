// Command-line entry point: forward modelling, inversion, landscape scans and
// a two-trace W2 utility, all driven by JSON configs.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "fwi/experiments.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  int threads = -1;
  std::uint64_t seed = 0;
  bool reproducible = false;
  int snapshots = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (default $FWI_OUT_DIR, else ./out)");
  cmd->add_option("--threads", f.threads, "shot worker threads (default $FWI_THREADS, else the config)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", f.seed, "random seed override");
  cmd->add_flag("--reproducible", f.reproducible, "omit timings so reruns are byte-identical");
  cmd->add_flag("--quiet", f.quiet, "no progress output");
}

fwi::RunOptions run_options(const CommonFlags& f, CLI::App* cmd) {
  fwi::RunOptions o;
  if (!f.out.empty()) {
    o.out_dir = f.out;
  } else if (const char* env = std::getenv("FWI_OUT_DIR"); env && *env) {
    o.out_dir = env;
  } else {
    o.out_dir = "out";
  }
  if (cmd->count("--threads") > 0) {
    o.threads = f.threads;
  } else if (const char* env = std::getenv("FWI_THREADS"); env && *env) {
    try {
      o.threads = std::stoi(env);
    } catch (const std::exception&) {
      throw fwi::ConfigError("FWI_THREADS must be an integer");
    }
    if (o.threads < 0) throw fwi::ConfigError("FWI_THREADS must be nonnegative");
  }
  if (cmd->count("--seed") > 0) o.seed = f.seed;
  o.reproducible = f.reproducible;
  o.snapshots = f.snapshots;
  o.log = f.quiet ? nullptr : &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seismic full-waveform inversion with L2 and normalized W2 misfits"};
  app.require_subcommand(1);

  CommonFlags fwd_flags;
  CLI::App* fwd = app.add_subcommand("forward", "simulate observed gathers from the true model");
  add_common(fwd, fwd_flags);

  CommonFlags inv_flags;
  std::string data_dir;
  CLI::App* inv = app.add_subcommand("invert", "invert observed gathers");
  add_common(inv, inv_flags);
  inv->add_option("--data", data_dir, "directory of shot_NNN.bin gathers (default: simulate from the true model)")
      ->check(CLI::ExistingDirectory);
  inv->add_option("--snapshots", inv_flags.snapshots, "write the model every K iterations (0 disables)")
      ->check(CLI::NonNegativeNumber);

  CommonFlags land_flags;
  CLI::App* land = app.add_subcommand("landscape", "run misfit landscape scans");
  add_common(land, land_flags);

  std::string file_f, file_g, scaling = "linear", w2_out;
  std::size_t trace_index = 0;
  double b = 0.0, c = 0.0;
  bool both_sides = false;
  CLI::App* w2 = app.add_subcommand("w2", "W2 distance between one trace of two gather files");
  w2->add_option("f", file_f, "first gather (.bin)")->required()->check(CLI::ExistingFile);
  w2->add_option("g", file_g, "second gather (.bin)")->required()->check(CLI::ExistingFile);
  w2->add_option("--trace", trace_index, "receiver index");
  w2->add_option("--scaling", scaling, "linear, exponential, softplus or square");
  w2->add_option("-b", b, "scaling parameter b");
  w2->add_option("-c", c, "additive constant c");
  w2->add_flag("--both-sides", both_sides, "average with the misfit of the negated traces");
  w2->add_option("--out", w2_out, "write map.csv and adjoint_source.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(fwi::ExitCode::kConfig);
  }

  try {
    if (fwd->parsed()) {
      const auto opts = run_options(fwd_flags, fwd);
      const auto cfg = fwi::apply_overrides(fwi::load_config(fwd_flags.config), opts);
      fwi::cmd_forward(cfg, opts);
    } else if (inv->parsed()) {
      const auto opts = run_options(inv_flags, inv);
      const auto cfg = fwi::apply_overrides(fwi::load_config(inv_flags.config), opts);
      const auto out = fwi::cmd_invert(cfg, data_dir, opts);
      if (opts.log) *opts.log << out.summary.dump(2) << '\n';
    } else if (land->parsed()) {
      const auto opts = run_options(land_flags, land);
      const auto cfg = fwi::apply_overrides(fwi::load_config(land_flags.config), opts);
      const auto summary = fwi::cmd_landscape(cfg, opts);
      if (opts.log) *opts.log << summary.dump(2) << '\n';
    } else if (w2->parsed()) {
      fwi::NormalizationScheme scheme;
      scheme.kind = fwi::parse_scaling(scaling);
      scheme.b = b;
      scheme.c = c;
      scheme.both_sides = both_sides;
      const auto r = fwi::cmd_w2(file_f, file_g, trace_index, scheme, w2_out);
      std::cout.precision(17);
      std::cout << "W " << r.w << "\nW2 " << r.w2 << '\n';
    }
  } catch (const fwi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
