#pragma once

// Global objective over shots and receivers, with its adjoint-state gradient.

#include <vector>

#include "fwi/grid.hpp"
#include "fwi/transport.hpp"
#include "fwi/wave.hpp"

namespace fwi {

struct MisfitKind {
  enum class Type { kL2, kW2 };
  Type type = Type::kL2;
  NormalizationScheme scheme;  // W2 only

  static MisfitKind l2() { return {}; }
  static MisfitKind w2(NormalizationScheme s) { return {Type::kW2, s}; }
};

struct EvalOptions {
  int threads = 0;              // 0: OpenMP default
  bool compute_gradient = true;
  bool keep_synthetic = false;  // return the synthetic gathers
};

struct Evaluation {
  double J = 0.0;
  GradientField gradient;
  std::vector<double> per_shot_J;
  double wallclock = 0.0;  // seconds
  std::vector<ShotGather> synthetic;
};

struct AdjointSources {
  ShotGather gather;  // dJ/df per unit time at each receiver
  double J = 0.0;     // this shot's contribution
};

// Per-trace misfits weighted by the receiver spacing; W2 carries a factor 1/2.
AdjointSources assemble_adjoint_sources(const ShotGather& syn, const ShotGather& obs, const MisfitKind& kind,
                                        double receiver_weight);
ShotGather assemble_adjoint_sources(const ShotGather& syn, const ShotGather& obs, const MisfitKind& kind);

// Forward solve, trace misfits, adjoint solve and correlation for every shot;
// J and the gradient are reduced in shot order, so the result does not depend
// on the thread count. Throws GridMismatch on a shot-count mismatch.
Evaluation evaluate(const VelocityModel& model, const std::vector<ShotGather>& observed, const Acquisition& acq,
                    const Wavelet& src, const SimConfig& cfg, const MisfitKind& kind, const EvalOptions& opts = {});

}  // namespace fwi
