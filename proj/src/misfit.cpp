#include "fwi/misfit.hpp"

#include <omp.h>

#include <chrono>
#include <exception>

namespace fwi {

AdjointSources assemble_adjoint_sources(const ShotGather& syn, const ShotGather& obs, const MisfitKind& kind,
                                        double receiver_weight) {
  if (!syn.same_geometry(obs)) throw GridMismatch("synthetic and observed gathers differ in geometry");
  AdjointSources out{ShotGather(syn.nrec(), syn.nt(), syn.dt(), syn.source_index()), 0.0};
  const double dt = syn.dt();
  for (std::size_t r = 0; r < syn.nrec(); ++r) {
    TraceMisfit tm;
    double scale = receiver_weight;
    if (kind.type == MisfitKind::Type::kL2) {
      tm = l2_trace(syn.trace(r), obs.trace(r), dt);
    } else {
      tm = w2_trace(syn.trace(r), obs.trace(r), dt, kind.scheme);
      scale *= 0.5;
    }
    out.J += scale * tm.value;
    auto dst = out.gather.trace(r);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = scale * tm.adjoint[k];
  }
  return out;
}

ShotGather assemble_adjoint_sources(const ShotGather& syn, const ShotGather& obs, const MisfitKind& kind) {
  return assemble_adjoint_sources(syn, obs, kind, 1.0).gather;
}

Evaluation evaluate(const VelocityModel& model, const std::vector<ShotGather>& observed, const Acquisition& acq,
                    const Wavelet& src, const SimConfig& cfg, const MisfitKind& kind, const EvalOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t nshots = acq.sources.size();
  if (observed.size() != nshots) throw GridMismatch("observed gather count does not match the source count");
  const double weight = acq.receiver_spacing();
  const Grid2D& grid = model.grid();

  Evaluation ev;
  ev.per_shot_J.assign(nshots, 0.0);
  if (opts.keep_synthetic) ev.synthetic.resize(nshots);
  std::vector<std::vector<double>> shot_grad(opts.compute_gradient ? nshots : 0);
  std::vector<std::exception_ptr> errors(nshots);

  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  const int team = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), nshots));
#pragma omp parallel for schedule(dynamic) num_threads(team)
  for (std::size_t s = 0; s < nshots; ++s) {
    try {
      auto fwd = simulate_forward(model, acq, src, static_cast<int>(s), cfg, opts.compute_gradient);
      const AdjointSources adj = assemble_adjoint_sources(fwd.gather, observed[s], kind, weight);
      ev.per_shot_J[s] = adj.J;
      if (opts.compute_gradient) {
        shot_grad[s] = adjoint_gradient(model, adj.gather, acq, fwd.history, cfg).values;
      }
      if (opts.keep_synthetic) ev.synthetic[s] = std::move(fwd.gather);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (double j : ev.per_shot_J) ev.J += j;
  ev.gradient = GradientField{grid, std::vector<double>(grid.size(), 0.0)};
  for (const auto& g : shot_grad) {
    for (std::size_t i = 0; i < g.size(); ++i) ev.gradient.values[i] += g[i];
  }
  if (opts.compute_gradient) mask_sources(ev.gradient, acq, cfg);
  ev.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ev;
}

}  // namespace fwi
