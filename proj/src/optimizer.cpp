#include "fwi/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace fwi {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns -H g.
std::vector<double> direction(const std::deque<Pair>& mem, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    alpha[k] = mem[k].rho * dot(mem[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * mem[k].y[i];
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double beta = mem[k].rho * dot(mem[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += (alpha[k] - beta) * mem[k].s[i];
  }
  for (double& v : q) v = -v;
  return q;
}

struct Point {
  VelocityModel model;
  ObjectiveValue value;
};

class Minimizer {
 public:
  Minimizer(const Objective& f, const LbfgsOptions& o) : f_(f), opts_(o) {
    m_lo_ = 1.0 / (o.v_max * o.v_max);
    m_hi_ = 1.0 / (o.v_min * o.v_min);
  }

  VelocityModel project(const VelocityModel& base, std::span<const double> d, double alpha) const {
    auto m = base.m();
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = std::clamp(m[i] + alpha * d[i], m_lo_, m_hi_);
    return VelocityModel(base.grid(), std::move(out));
  }

  // J = +inf for trial points the solver or the normalization rejects.
  bool try_eval(const VelocityModel& m, ObjectiveValue& out) {
    ++evals_;
    try {
      out = f_(m);
    } catch (const NormalizationError&) {
      return false;
    } catch (const InstabilityError&) {
      return false;
    }
    return std::isfinite(out.J);
  }

  // Largest step whose velocity change stays within the first-step fraction.
  double first_step(const VelocityModel& m, std::span<const double> d) const {
    if (opts_.initial_step > 0.0) return opts_.initial_step;
    auto mm = m.m();
    double dv = 0.0;
    for (std::size_t i = 0; i < mm.size(); ++i) dv = std::max(dv, 0.5 * std::pow(mm[i], -1.5) * std::abs(d[i]));
    if (dv == 0.0) return 1.0;
    return opts_.first_step_fraction * (opts_.v_max - opts_.v_min) / dv;
  }

  // Weak Wolfe by bracketing and bisection. Falls back to the best
  // Armijo point when curvature is never met.
  LineSearchStatus search(const Point& cur, std::span<const double> d, double alpha0, Point& next, double& step) {
    const double phi0 = cur.value.J;
    const double dphi0 = dot(cur.value.gradient, d);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double a = alpha0;
    bool have_armijo = false;
    Point best{};
    double best_step = 0.0;
    for (int it = 0; it < opts_.max_line_search; ++it) {
      VelocityModel trial = project(cur.model, d, a);
      ObjectiveValue v;
      const bool ok = try_eval(trial, v);
      if (!ok || v.J > phi0 + opts_.c1 * a * dphi0) {
        hi = a;
      } else {
        if (!have_armijo || v.J < best.value.J) {
          best = Point{trial, v};
          best_step = a;
          have_armijo = true;
        }
        if (dot(v.gradient, d) < opts_.c2 * dphi0) {
          lo = a;
        } else {
          next = Point{std::move(trial), std::move(v)};
          step = a;
          return LineSearchStatus::kWolfe;
        }
      }
      a = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
    }
    if (have_armijo && best.value.J < phi0) {
      next = std::move(best);
      step = best_step;
      return LineSearchStatus::kArmijo;
    }
    return LineSearchStatus::kFailed;
  }

  MinimizeResult run(const VelocityModel& m0, const VelocityModel* truth, const IterationCallback& cb) {
    MinimizeResult res{m0.clipped(opts_.v_min, opts_.v_max), {}};
    Point cur{res.model, f_(res.model)};
    ++evals_;
    if (!std::isfinite(cur.value.J)) throw OptimizerAbort("objective is not finite at the starting model");
    if (cur.value.gradient.size() != cur.model.m().size()) throw InvalidArgument("gradient size mismatch");
    const double j0 = cur.value.J;
    const double g0 = norm_inf(cur.value.gradient);

    auto record = [&](int iter, double step, LineSearchStatus ls) {
      IterationRecord r;
      r.iter = iter;
      r.J = cur.value.J;
      r.normalized_J = j0 > 0.0 ? cur.value.J / j0 : 0.0;
      if (truth != nullptr && !std::ranges::equal(m0.m(), truth->m())) {
        r.model_error = model_error(cur.model, *truth, &m0);
      }
      r.step = step;
      r.n_evals = evals_;
      r.line_search = ls;
      res.trace.records.push_back(r);
      if (cb) cb(r, cur.model);
    };
    record(0, 0.0, LineSearchStatus::kNone);

    std::deque<Pair> mem;
    res.trace.stop = StopReason::kMaxIters;
    if (g0 == 0.0) {
      res.trace.stop = StopReason::kGradTol;
      res.model = cur.model;
      return res;
    }
    for (int iter = 1; iter <= opts_.max_iters; ++iter) {
      evals_ = 0;
      std::vector<double> d = direction(mem, cur.value.gradient);
      bool steepest = mem.empty();
      if (!(dot(d, cur.value.gradient) < 0.0)) {
        mem.clear();
        d = direction(mem, cur.value.gradient);
        steepest = true;
      }
      Point next;
      double step = 0.0;
      LineSearchStatus ls = LineSearchStatus::kFailed;
      try {
        ls = search(cur, d, steepest ? first_step(cur.model, d) : 1.0, next, step);
        if (ls == LineSearchStatus::kFailed && !steepest) {
          mem.clear();
          d = direction(mem, cur.value.gradient);
          ls = search(cur, d, first_step(cur.model, d), next, step);
        }
      } catch (const std::exception& e) {
        res.trace.stop = StopReason::kAborted;
        res.trace.message = e.what();
        break;
      }
      if (ls == LineSearchStatus::kFailed) {
        res.trace.stop = StopReason::kNoDescent;
        res.trace.message = "line search found no decrease";
        break;
      }

      std::vector<double> s(d.size());
      std::vector<double> y(d.size());
      auto mn = next.model.m();
      auto mc = cur.model.m();
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = mn[i] - mc[i];
        y[i] = next.value.gradient[i] - cur.value.gradient[i];
      }
      const double rel_change = norm_inf(s) / norm_inf(mc);
      const double sy = dot(s, y);
      if (sy > 1e-12 * norm2(s) * norm2(y)) {
        mem.push_back(Pair{std::move(s), std::move(y), 1.0 / sy});
        if (static_cast<int>(mem.size()) > opts_.memory) mem.pop_front();
      }
      cur = std::move(next);
      record(iter, step, ls);
      if (norm_inf(cur.value.gradient) <= opts_.grad_tol * g0) {
        res.trace.stop = StopReason::kGradTol;
        break;
      }
      if (rel_change < opts_.step_tol) {
        res.trace.stop = StopReason::kStepTol;
        break;
      }
    }
    res.model = cur.model;
    return res;
  }

 private:
  const Objective& f_;
  LbfgsOptions opts_;
  double m_lo_ = 0.0;
  double m_hi_ = 0.0;
  int evals_ = 0;
};

}  // namespace

void LbfgsOptions::validate() const {
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw InvalidArgument("line search needs 0 < c1 < c2 < 1");
  if (memory < 1) throw InvalidArgument("L-BFGS memory must be at least 1");
  if (max_iters < 0) throw InvalidArgument("max_iters must be non-negative");
  if (!(v_min > 0.0 && v_min < v_max)) throw InvalidArgument("velocity band must satisfy 0 < v_min < v_max");
  if (max_line_search < 1) throw InvalidArgument("max_line_search must be positive");
}

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kMaxIters:
      return "max_iters";
    case StopReason::kGradTol:
      return "grad_tol";
    case StopReason::kStepTol:
      return "step_tol";
    case StopReason::kNoDescent:
      return "no_feasible_descent";
    case StopReason::kAborted:
      return "aborted";
  }
  return "unknown";
}

std::string_view line_search_name(LineSearchStatus s) {
  switch (s) {
    case LineSearchStatus::kNone:
      return "none";
    case LineSearchStatus::kWolfe:
      return "wolfe";
    case LineSearchStatus::kArmijo:
      return "armijo";
    case LineSearchStatus::kFailed:
      return "failed";
  }
  return "unknown";
}

MinimizeResult minimize(const Objective& objective, const VelocityModel& m0, const LbfgsOptions& opts,
                        const VelocityModel* truth, const IterationCallback& on_iter) {
  opts.validate();
  Minimizer mz(objective, opts);
  return mz.run(m0, truth, on_iter);
}

}  // namespace fwi
