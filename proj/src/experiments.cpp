#include "fwi/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>

namespace fwi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* prefix, std::size_t i, int width, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu%s", prefix, width, i, ext);
  return buf;
}

std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no NaN; store null instead.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void log_line(const RunOptions& opts, const std::string& msg) {
  if (opts.log) *opts.log << msg << '\n' << std::flush;
}

VelocityModel true_model(const ExperimentConfig& cfg) {
  if (!cfg.has_wave_setup()) throw ConfigError("this command needs config.model and config.acquisition");
  return make_model(*cfg.true_model, cfg.grid, cfg.base_dir);
}

double data_max(const std::vector<ShotGather>& gathers) {
  double m = 0.0;
  for (const auto& g : gathers) {
    for (double v : g.data()) m = std::max(m, std::abs(v));
  }
  return m;
}

std::vector<ShotGather> simulate_all(const VelocityModel& model, const ExperimentConfig& cfg, const SimConfig& sim,
                                     const Wavelet& src) {
  const std::size_t nshots = cfg.acquisition.sources.size();
  std::vector<ShotGather> out(nshots);
  std::vector<std::exception_ptr> errors(nshots);
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
  const int team = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), nshots));
#pragma omp parallel for schedule(dynamic) num_threads(team)
  for (std::size_t s = 0; s < nshots; ++s) {
    try {
      out[s] = simulate_forward(model, cfg.acquisition, src, static_cast<int>(s), sim, false).gather;
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<double> residual(const ShotGather& syn, const ShotGather& obs) {
  std::vector<double> r(syn.data().begin(), syn.data().end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= obs.data()[i];
  return r;
}

double residual_energy(const std::vector<ShotGather>& syn, const std::vector<ShotGather>& obs) {
  double e = 0.0;
  for (std::size_t s = 0; s < syn.size(); ++s) {
    for (double v : residual(syn[s], obs[s])) e += v * v;
  }
  return e;
}

json kind_json(const MisfitKind& k) {
  if (k.type == MisfitKind::Type::kL2) return {{"type", "l2"}};
  return {{"type", "w2"},
          {"scaling", std::string(scaling_name(k.scheme.kind))},
          {"b", k.scheme.b},
          {"c", k.scheme.c},
          {"both_sides", k.scheme.both_sides}};
}

}  // namespace

ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opts) {
  if (opts.threads >= 0) cfg.threads = opts.threads;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.snapshots >= 0) cfg.outputs.snapshot_every = opts.snapshots;
  return cfg;
}

SimConfig resolved_sim(const ExperimentConfig& cfg, const VelocityModel& truth) {
  SimConfig sim = cfg.sim;
  if (!(sim.sponge_velocity > 0.0)) sim.sponge_velocity = truth.max_velocity();
  return sim;
}

ForwardOutcome cmd_forward(const ExperimentConfig& cfg, const RunOptions& opts) {
  ForwardOutcome out{true_model(cfg), {}};
  const SimConfig sim = resolved_sim(cfg, out.truth);
  out.gathers = simulate_all(out.truth, cfg, sim, make_wavelet(cfg));
  log_line(opts, "forward: " + std::to_string(out.gathers.size()) + " shots simulated");
  if (opts.out_dir.empty()) return out;

  prepare_dir(opts.out_dir);
  Manifest manifest(opts.out_dir);
  for (std::size_t s = 0; s < out.gathers.size(); ++s) {
    const fs::path bin = opts.out_dir / numbered("shot_", s, 3, ".bin");
    write_gather(bin, out.gathers[s], cfg.outputs.format);
    manifest.add(bin);
    manifest.add(sidecar_path(bin));
  }
  const fs::path model_bin = opts.out_dir / "model_true.bin";
  write_model(model_bin, out.truth, cfg.outputs.format);
  manifest.add(model_bin);
  manifest.add(sidecar_path(model_bin));
  manifest.write();
  return out;
}

std::vector<ShotGather> read_observed(const fs::path& data_dir, const ExperimentConfig& cfg) {
  const std::size_t nshots = cfg.acquisition.sources.size();
  const std::size_t nrec = cfg.acquisition.receivers.size();
  const std::size_t nt = cfg.acquisition.record_samples();
  std::vector<ShotGather> out;
  for (std::size_t s = 0; s < nshots; ++s) {
    ShotGather g = read_gather(data_dir / numbered("shot_", s, 3, ".bin"));
    if (g.nrec() != nrec || g.nt() != nt || std::abs(g.dt() - cfg.acquisition.dt_record) > 1e-12 * g.dt() ||
        g.source_index() != static_cast<int>(s)) {
      throw ConfigError("observed gather " + std::to_string(s) + " does not match the configured acquisition");
    }
    out.push_back(std::move(g));
  }
  return out;
}

InvertOutcome cmd_invert(const ExperimentConfig& cfg, const fs::path& data_dir, const RunOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!cfg.initial_model) throw ConfigError("inversion needs config.model.initial");
  InvertOutcome out;
  out.truth = true_model(cfg);
  out.initial = make_model(*cfg.initial_model, cfg.grid, cfg.base_dir);
  const SimConfig sim = resolved_sim(cfg, out.truth);
  const Wavelet src = make_wavelet(cfg);
  out.observed = data_dir.empty() ? simulate_all(out.truth, cfg, sim, src) : read_observed(data_dir, cfg);
  out.kind = cfg.misfit.resolve(data_max(out.observed));

  const bool write = !opts.out_dir.empty();
  if (write) {
    prepare_dir(opts.out_dir);
    write_model(opts.out_dir / "model_initial.bin", out.initial, cfg.outputs.format);
  }
  const int every = cfg.outputs.snapshot_every;
  if (write && every > 0) prepare_dir(opts.out_dir / "snapshots");

  EvalOptions eval_opts;
  eval_opts.threads = cfg.threads;
  const Objective objective = [&](const VelocityModel& m) {
    Evaluation ev = evaluate(m, out.observed, cfg.acquisition, src, sim, out.kind, eval_opts);
    return ObjectiveValue{ev.J, std::move(ev.gradient.values)};
  };
  const IterationCallback on_iter = [&](const IterationRecord& r, const VelocityModel& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "iter %4d  J %.6e  J/J0 %.6f  err %.6f  step %.3e", r.iter, r.J, r.normalized_J,
                  r.model_error, r.step);
    log_line(opts, buf);
    if (write && every > 0 && r.iter > 0 && r.iter % every == 0) {
      write_model(opts.out_dir / "snapshots" / numbered("iter_", static_cast<std::size_t>(r.iter), 4, ".bin"), m,
                  cfg.outputs.format);
    }
  };
  out.result = minimize(objective, out.initial, cfg.optimizer, &out.truth, on_iter);
  const bool aborted = out.result.trace.stop == StopReason::kAborted;

  EvalOptions syn_opts = eval_opts;
  syn_opts.compute_gradient = false;
  syn_opts.keep_synthetic = true;
  if (!aborted) {
    out.initial_synthetic = evaluate(out.initial, out.observed, cfg.acquisition, src, sim, out.kind, syn_opts).synthetic;
    out.final_synthetic =
        evaluate(out.result.model, out.observed, cfg.acquisition, src, sim, out.kind, syn_opts).synthetic;
  }

  const auto& recs = out.result.trace.records;
  json s;
  s["name"] = cfg.name;
  s["misfit"] = kind_json(out.kind);
  s["iterations"] = recs.empty() ? 0 : recs.back().iter;
  s["stop_reason"] = std::string(stop_reason_name(out.result.trace.stop));
  s["message"] = out.result.trace.message;
  s["J_initial"] = recs.empty() ? json(nullptr) : num(recs.front().J);
  s["J_final"] = recs.empty() ? json(nullptr) : num(recs.back().J);
  s["normalized_J_final"] = recs.empty() ? json(nullptr) : num(recs.back().normalized_J);
  s["model_error"] = num(model_error(out.result.model, out.truth, &out.initial));
  s["k_cut"] = cfg.outputs.k_cut;
  s["low_wavenumber_error"] = num(low_wavenumber_error(out.result.model, out.truth, out.initial, cfg.outputs.k_cut));
  if (!aborted) {
    const double f0 = cfg.wavelet.peak_freq;
    const double nyq = 0.5 / cfg.acquisition.dt_record;
    s["residual_energy_initial"] = residual_energy(out.initial_synthetic, out.observed);
    s["residual_energy_final"] = residual_energy(out.final_synthetic, out.observed);
    s["residual_band_split_hz"] = f0;
    s["residual_low_band_initial"] = residual_band_energy(out.initial_synthetic, out.observed, 0.0, f0);
    s["residual_low_band_final"] = residual_band_energy(out.final_synthetic, out.observed, 0.0, f0);
    s["residual_high_band_initial"] = residual_band_energy(out.initial_synthetic, out.observed, f0, 2.0 * nyq);
    s["residual_high_band_final"] = residual_band_energy(out.final_synthetic, out.observed, f0, 2.0 * nyq);
  }
  if (!opts.reproducible) {
    s["wallclock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  }
  out.summary = s;

  if (write) {
    std::string csv = "iter,J,normalized_J,model_error,step\n";
    for (const auto& r : recs) {
      csv += std::to_string(r.iter) + "," + g17(r.J) + "," + g17(r.normalized_J) + "," + g17(r.model_error) + "," +
             g17(r.step) + "\n";
    }
    write_text(opts.out_dir / "trace.csv", csv);
    write_model(opts.out_dir / "model_final.bin", out.result.model, cfg.outputs.format);
    if (cfg.outputs.write_synthetic && !aborted) {
      prepare_dir(opts.out_dir / "synthetic");
      for (std::size_t i = 0; i < out.final_synthetic.size(); ++i) {
        write_gather(opts.out_dir / "synthetic" / numbered("shot_", i, 3, ".bin"), out.final_synthetic[i],
                     cfg.outputs.format);
      }
    }
    write_text(opts.out_dir / "summary.json", s.dump(2) + "\n");
    Manifest manifest(opts.out_dir);
    manifest.add_all();
    manifest.write();
  }
  if (aborted) throw OptimizerAbort("inversion aborted: " + out.result.trace.message);
  return out;
}

json cmd_landscape(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.landscape.empty()) throw ConfigError("config.landscape lists no scans");
  const bool write = !opts.out_dir.empty();
  if (write) prepare_dir(opts.out_dir);
  json all = json::object();
  for (const auto& sc : cfg.landscape) {
    const Trace g = sc.signal.make();
    json r;
    r["kind"] = sc.kind;
    if (sc.kind == "shift_dilate") {
      double gmax = 0.0;
      for (double v : g.samples) gmax = std::max(gmax, std::abs(v));
      const MisfitKind kind = sc.metric.resolve(gmax);
      ScanOptions so;
      if (sc.centre) so.centre = *sc.centre;
      so.analytic = sc.analytic;
      const std::vector<double> lambdas = sc.lambda ? sc.lambda->values() : std::vector<double>{1.0};
      const ScanGrid grid = shift_dilate_scan(g, sc.s.values(), lambdas, kind, so);
      r["metric"] = kind_json(kind);
      if (grid.axis2) {
        const ConvexityReport c = convexity_check(grid);
        r["pd_fraction"] = c.pd_fraction;
        r["monotone_to_min"] = c.monotone_to_min;
        r["nonmonotone_shift_slices"] = c.nonmonotone_axis1_slices;
        r["nonmonotone_dilation_slices"] = c.nonmonotone_axis2_slices;
        if (write) write_scan_pgm(grid, opts.out_dir / (sc.name + ".pgm"));
      } else {
        const QuadraticFit fit = fit_quadratic(grid.axis1.values, grid.values);
        r["local_minima"] = count_local_minima(grid.values);
        r["alpha"] = fit.alpha;
        r["r2"] = fit.r2;
      }
      if (!grid.analytic.empty()) {
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.values.size(); ++i) {
          worst = std::max(worst, std::abs(grid.values[i] - grid.analytic[i]));
        }
        r["max_analytic_error"] = worst;
      }
      if (write) write_scan_csv(grid, opts.out_dir / (sc.name + ".csv"));
    } else if (sc.kind == "huber") {
      const HuberReport h = huber_scan(g, sc.s.values(), sc.c_values);
      r["support_width"] = h.support_width;
      json curves = json::array();
      for (const auto& c : h.curves) {
        curves.push_back({{"c", c.c}, {"crossover", num(c.crossover)}, {"threshold", c.threshold}});
        if (write) {
          char tag[32];
          std::snprintf(tag, sizeof tag, "_c%g.csv", c.c);
          write_curve_csv(h.s_values, c.w2, "s", "w2", opts.out_dir / (sc.name + tag));
        }
      }
      r["curves"] = curves;
    } else {
      const NoiseReport n = noise_scan(g, sc.eta, sc.n_values, sc.trials, cfg.seed);
      r["w2_slope"] = n.w2_slope;
      r["l2_slope"] = n.l2_slope;
      json cells = json::array();
      std::string csv = "eta,n,mean_w2,mean_l2\n";
      for (const auto& c : n.cells) {
        cells.push_back({{"eta", c.eta}, {"n", c.n}, {"mean_w2", c.mean_w2}, {"mean_l2", c.mean_l2}});
        csv += g17(c.eta) + "," + std::to_string(c.n) + "," + g17(c.mean_w2) + "," + g17(c.mean_l2) + "\n";
      }
      r["cells"] = cells;
      if (write) write_text(opts.out_dir / (sc.name + ".csv"), csv);
    }
    if (write) write_text(opts.out_dir / (sc.name + ".json"), r.dump(2) + "\n");
    log_line(opts, "landscape: " + sc.name + " done");
    all[sc.name] = r;
  }
  if (write) {
    Manifest manifest(opts.out_dir);
    manifest.add_all();
    manifest.write();
  }
  return all;
}

W2Result cmd_w2(const fs::path& file_f, const fs::path& file_g, std::size_t trace_index,
                const NormalizationScheme& scheme, const fs::path& out_dir) {
  const ShotGather gf = read_gather(file_f);
  const ShotGather gg = read_gather(file_g);
  if (!gf.same_geometry(gg)) throw ConfigError("the two gathers have different shapes");
  if (trace_index >= gf.nrec()) throw ConfigError("trace index out of range");
  const Trace f = gf.trace_copy(trace_index);
  const Trace g = gg.trace_copy(trace_index);
  W2Result r;
  r.w = w_sigma(f, g, scheme);
  r.w2 = r.w * r.w;
  if (!out_dir.empty()) {
    prepare_dir(out_dir);
    const TransportPlan1D plan = optimal_map(normalize(f, scheme), normalize(g, scheme));
    std::vector<double> t(f.nt());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = f.time(i) + 0.5 * f.dt;
    write_curve_csv(t, plan.T, "t", "T", out_dir / "map.csv");
    write_curve_csv(t, w2_frechet(f, g, scheme).samples, "t", "adjoint_source", out_dir / "adjoint_source.csv");
  }
  return r;
}

QuadraticFit fit_quadratic(const std::vector<double>& s, const std::vector<double>& y) {
  if (s.size() != y.size() || s.size() < 2) throw InvalidArgument("fit_quadratic needs matching samples");
  double s4 = 0.0, s2y = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double q = s[i] * s[i];
    s4 += q * q;
    s2y += q * y[i];
    mean += y[i];
  }
  mean /= static_cast<double>(y.size());
  QuadraticFit fit;
  fit.alpha = s4 > 0.0 ? s2y / s4 : 0.0;
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = y[i] - fit.alpha * s[i] * s[i];
    res += e * e;
    tot += (y[i] - mean) * (y[i] - mean);
  }
  fit.r2 = tot > 0.0 ? 1.0 - res / tot : 1.0;
  return fit;
}

double residual_band_energy(const std::vector<ShotGather>& syn, const std::vector<ShotGather>& obs, double f_lo,
                            double f_hi) {
  if (syn.size() != obs.size()) throw GridMismatch("shot counts differ");
  double e = 0.0;
  for (std::size_t s = 0; s < syn.size(); ++s) {
    if (!syn[s].same_geometry(obs[s])) throw GridMismatch("gather shapes differ");
    const ShotGather r(syn[s].nrec(), syn[s].nt(), syn[s].dt(), syn[s].source_index(), residual(syn[s], obs[s]));
    const Spectrum sp = residual_spectrum(r);
    e += band_energy(sp, f_lo, f_hi) * static_cast<double>(r.nrec());
  }
  return e;
}

double low_wavenumber_error(const VelocityModel& m, const VelocityModel& truth, const VelocityModel& init, int k_cut) {
  const auto lm = bandpass_split(m, k_cut).low;
  const auto lt = bandpass_split(truth, k_cut).low;
  const auto li = bandpass_split(init, k_cut).low;
  double num2 = 0.0, den2 = 0.0;
  for (std::size_t i = 0; i < lm.size(); ++i) {
    num2 += (lm[i] - lt[i]) * (lm[i] - lt[i]);
    den2 += (li[i] - lt[i]) * (li[i] - lt[i]);
  }
  return den2 > 0.0 ? std::sqrt(num2 / den2) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fwi
