#pragma once

// Limited-memory BFGS on squared slowness with a weak-Wolfe line search and
// clipping to a velocity band after every update.

#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fwi/grid.hpp"

namespace fwi {

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 50;
  double c1 = 1e-4;
  double c2 = 0.9;
  // First trial step; 0 picks the step whose largest velocity change is
  // first_step_fraction of (v_max - v_min).
  double initial_step = 0.0;
  double first_step_fraction = 0.02;
  double grad_tol = 1e-8;   // relative to the initial max-norm gradient
  double step_tol = 1e-10;  // relative model change max|dm| / max|m|
  double v_min = 100.0;
  double v_max = 10000.0;
  int max_line_search = 20;

  void validate() const;
};

enum class StopReason { kMaxIters, kGradTol, kStepTol, kNoDescent, kAborted };
enum class LineSearchStatus { kNone, kWolfe, kArmijo, kFailed };

std::string_view stop_reason_name(StopReason r);
std::string_view line_search_name(LineSearchStatus s);

struct IterationRecord {
  int iter = 0;
  double J = 0.0;
  double normalized_J = 1.0;
  double model_error = std::numeric_limits<double>::quiet_NaN();  // NaN without a truth model
  double step = 0.0;
  int n_evals = 0;
  LineSearchStatus line_search = LineSearchStatus::kNone;
};

struct InversionTrace {
  std::vector<IterationRecord> records;
  StopReason stop = StopReason::kMaxIters;
  std::string message;
};

struct ObjectiveValue {
  double J = 0.0;
  std::vector<double> gradient;  // dJ/dm, one entry per model cell
};

using Objective = std::function<ObjectiveValue(const VelocityModel&)>;
// Called after the initial evaluation and after every accepted iteration.
using IterationCallback = std::function<void(const IterationRecord&, const VelocityModel&)>;

struct MinimizeResult {
  VelocityModel model;
  InversionTrace trace;
};

// Trial points whose evaluation throws NormalizationError or InstabilityError,
// or returns a non-finite J, count as J = +inf. Any other exception after the
// first evaluation ends the run with StopReason::kAborted and the partial trace.
MinimizeResult minimize(const Objective& objective, const VelocityModel& m0, const LbfgsOptions& opts,
                        const VelocityModel* truth = nullptr, const IterationCallback& on_iter = {});

}  // namespace fwi
