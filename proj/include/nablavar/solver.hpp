#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nablavar/errors.hpp"
#include "nablavar/expr.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/summation.hpp"
#include "nablavar/timescale.hpp"
#include "nablavar/variational.hpp"

namespace nablavar {

enum class TerminalMode { kFree, kPinned };

struct SolveOptions {
  double T_trunc = std::numeric_limits<double>::quiet_NaN();  // NaN: last grid point
  TerminalMode terminal = TerminalMode::kFree;
  double terminal_value = 0.0;
  long max_iters = 20000;
  double step_init = 1.0;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0;
  double jitter = 1e-2;  // half-width of the random start around x_a
};

struct SolveResult {
  GridFunction x;
  double objective;  // J_{T_trunc} for the problem's own L
  long iterations;
  bool converged;
  double grad_norm;
  std::string stop_reason;
  std::vector<double> objective_log;  // accepted objective values, maximization sense
};

namespace detail {

// J_K(x) = Σ_{k=1..K} ν_k L(t_k, x^ρ, x^∇, z) for the effective (maximized)
// Lagrangian, evaluated from trajectory values directly.  The solver only
// ever calls expression evaluation, never the symbolic derivatives.
class Objective {
 public:
  Objective(const Problem& p, std::size_t K)
      : p_(p), ts_(p.ts()), n_(p.n()), K_(K), xr_(p.n()), xv_(p.n()) {
    g_is_zero_ = p.constraint().is_number(0.0);
    L_uses_z_ = depends_on(p.effective_lagrangian(), Variable::z());
  }

  std::size_t K() const { return K_; }
  bool suffix_coupled() const { return L_uses_z_ && !g_is_zero_; }

  double g_at(const std::vector<double>& x, std::size_t k) {
    if (g_is_zero_) return 0.0;
    load(x, k);
    return evaluate(p_.constraint(), Env{ts_[k], xr_, xv_, 0.0});
  }

  double L_at(const std::vector<double>& x, std::size_t k, double z) {
    load(x, k);
    return evaluate(p_.effective_lagrangian(), Env{ts_[k], xr_, xv_, z});
  }

  double value(const std::vector<double>& x) {
    CompensatedSum J;
    CompensatedSum z;
    for (std::size_t k = 1; k <= K_; ++k) {
      z += ts_.step_at(k) * g_at(x, k);
      J += ts_.step_at(k) * L_at(x, k, z.value());
    }
    return J.value();
  }

  // J(x with x[i*n+c] = v) - J(x), accumulated only over the terms the
  // coordinate touches.  zs holds z at every index for the unperturbed x.
  double local_delta(std::vector<double>& x, const std::vector<double>& zs, std::size_t i,
                     std::size_t c, double v) {
    const std::size_t last = suffix_coupled() ? K_ : std::min(K_, i + 1);
    std::vector<double> base(last + 1 - i);
    terms(x, zs, i, last, base);
    const double saved = x[i * n_ + c];
    x[i * n_ + c] = v;
    std::vector<double> moved(last + 1 - i);
    terms(x, zs, i, last, moved);
    x[i * n_ + c] = saved;
    CompensatedSum d;
    for (std::size_t k = i; k <= last; ++k) d += ts_.step_at(k) * (moved[k - i] - base[k - i]);
    return d.value();
  }

  // Index of the first term of J that is not finite (K when none is).
  std::size_t first_bad_term(const std::vector<double>& x) {
    CompensatedSum z;
    for (std::size_t k = 1; k <= K_; ++k) {
      try {
        z += ts_.step_at(k) * g_at(x, k);
        if (!std::isfinite(L_at(x, k, z.value()))) return k;
      } catch (const DomainError&) {
        return k;
      }
    }
    return K_;
  }

  // L at points lo..hi, with z carried forward from zs[lo-1] when the terms
  // are coupled through it.
  void terms(const std::vector<double>& x, const std::vector<double>& zs, std::size_t lo,
             std::size_t hi, std::vector<double>& out) {
    double z = zs[lo - 1];
    for (std::size_t k = lo; k <= hi; ++k) {
      if (suffix_coupled()) {
        z += ts_.step_at(k) * g_at(x, k);
      } else {
        z = zs[k];
      }
      out[k - lo] = L_at(x, k, z);
    }
  }

  std::vector<double> z_values(const std::vector<double>& x) {
    std::vector<double> zs(K_ + 1, 0.0);
    CompensatedSum z;
    for (std::size_t k = 1; k <= K_; ++k) {
      z += ts_.step_at(k) * g_at(x, k);
      zs[k] = z.value();
    }
    return zs;
  }

 private:
  void load(const std::vector<double>& x, std::size_t k) {
    const std::size_t r = ts_.rho_index(k);
    const double step = ts_[k] - ts_[k - 1];
    for (std::size_t c = 0; c < n_; ++c) {
      xr_[c] = x[r * n_ + c];
      xv_[c] = (x[k * n_ + c] - x[(k - 1) * n_ + c]) / step;
    }
  }

  const Problem& p_;
  const TimeScale& ts_;
  std::size_t n_;
  std::size_t K_;
  std::vector<double> xr_, xv_;
  bool g_is_zero_ = false;
  bool L_uses_z_ = false;
};

inline std::size_t truncation_index(const Problem& p, const SolveOptions& o) {
  const std::size_t K = std::isnan(o.T_trunc) ? p.ts().size() - 1 : p.ts().index_of(o.T_trunc);
  if (K == 0) throw InputError("T_trunc must be greater than a");
  return K;
}

inline void validate(const SolveOptions& o) {
  if (o.max_iters <= 0) throw InputError("max_iters must be positive");
  if (!(o.step_init > 0) || !std::isfinite(o.step_init)) throw InputError("step_init must be positive");
  if (!(o.grad_tol > 0) || !std::isfinite(o.grad_tol)) throw InputError("grad_tol must be positive");
  if (!(o.jitter >= 0) || !std::isfinite(o.jitter)) throw InputError("jitter must be non-negative");
  if (o.terminal == TerminalMode::kPinned && !std::isfinite(o.terminal_value)) {
    throw InputError("terminal_value must be finite");
  }
}

// Full-grid values from the first K+1 points, held constant afterwards.
inline GridFunction extend_constant(const Problem& p, std::vector<double> x, std::size_t K) {
  const std::size_t n = p.n();
  x.resize(p.ts().size() * n);
  for (std::size_t k = K + 1; k < p.ts().size(); ++k) {
    for (std::size_t c = 0; c < n; ++c) x[k * n + c] = x[K * n + c];
  }
  return GridFunction(p.ts_ptr(), n, std::move(x));
}

inline std::string coordinate_name(const TimeScale& ts, std::size_t i, std::size_t c) {
  return "x" + std::to_string(c + 1) + "(" + PointNotInScale::format_value(ts[i]) + ")";
}

}  // namespace detail

// Preconditioned gradient ascent on the truncated functional.  Gradients are
// central finite differences; the diagonal scaling and the Barzilai-Borwein
// trial step only choose the step, every accepted step passes Armijo.
inline SolveResult direct_solve_detailed(const Problem& p, const SolveOptions& opts) {
  detail::validate(opts);
  const std::size_t K = detail::truncation_index(p, opts);
  const std::size_t n = p.n();
  const TimeScale& ts = p.ts();
  detail::Objective obj(p, K);

  std::vector<double> x((K + 1) * n);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-opts.jitter, opts.jitter);
  for (std::size_t c = 0; c < n; ++c) x[c] = p.x_a()[c];
  for (std::size_t k = 1; k <= K; ++k) {
    for (std::size_t c = 0; c < n; ++c) x[k * n + c] = p.x_a()[c] + (opts.jitter > 0 ? jitter(rng) : 0.0);
  }
  const std::size_t free_end = opts.terminal == TerminalMode::kPinned ? K : K + 1;
  if (opts.terminal == TerminalMode::kPinned) {
    for (std::size_t c = 0; c < n; ++c) x[K * n + c] = opts.terminal_value;
  }
  const std::size_t nv = (free_end - 1) * n;  // variables are x[n .. free_end*n)

  auto safe_value = [&](const std::vector<double>& y) -> double {
    try {
      const double v = obj.value(y);
      return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  auto gradient = [&](std::vector<double>& y) {
    std::vector<double> grad(nv);
    const std::vector<double> zs = obj.z_values(y);
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t i = 1 + v / n;
      const std::size_t c = v % n;
      const double xi = y[i * n + c];
      const double h = 1e-6 * (1.0 + std::abs(xi));
      double up = 0.0;
      double down = 0.0;
      try {
        up = obj.local_delta(y, zs, i, c, xi + h);
        down = obj.local_delta(y, zs, i, c, xi - h);
      } catch (const DomainError& e) {
        throw DomainError(std::string("objective undefined near coordinate ") +
                              detail::coordinate_name(ts, i, c) + ": " + e.what(),
                          e.subtree());
      }
      grad[v] = (up - down) / (2.0 * h);
      if (!std::isfinite(grad[v])) {
        throw MathError("non-finite objective gradient at coordinate " + detail::coordinate_name(ts, i, c));
      }
    }
    return grad;
  };

  // Diagonal of the negated Hessian, from second differences.
  auto curvature = [&](std::vector<double>& y) {
    std::vector<double> d(nv, 0.0);
    const std::vector<double> zs = obj.z_values(y);
    double top = 0.0;
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t i = 1 + v / n;
      const std::size_t c = v % n;
      const double xi = y[i * n + c];
      const double h = 1e-4 * (1.0 + std::abs(xi));
      double second = 0.0;
      try {
        second = (obj.local_delta(y, zs, i, c, xi + h) + obj.local_delta(y, zs, i, c, xi - h)) / (h * h);
      } catch (const DomainError&) {
        second = 0.0;
      }
      d[v] = std::isfinite(second) ? -second : 0.0;
      top = std::max(top, d[v]);
    }
    const double floor = top > 0 ? 1e-15 * top : 1.0;
    for (double& e : d) e = std::max(e, floor);
    return d;
  };

  double f = safe_value(x);
  if (std::isnan(f)) {
    throw MathError("non-finite objective at the starting trajectory (first bad term at t = " +
                    PointNotInScale::format_value(ts[obj.first_bad_term(x)]) + ")");
  }

  SolveResult res{GridFunction::zeros(p.ts_ptr(), n), 0.0, 0, false, 0.0, "max_iters", {f}};
  std::vector<double> grad = gradient(x);
  std::vector<double> D = curvature(x);
  double alpha = opts.step_init;
  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };

  long it = 0;
  for (; it < opts.max_iters; ++it) {
    std::vector<double> dir(nv);
    for (std::size_t v = 0; v < nv; ++v) dir[v] = grad[v] / D[v];
    if (inf_norm(grad) <= opts.grad_tol && inf_norm(dir) <= opts.grad_tol) {
      res.converged = true;
      res.stop_reason = "converged";
      break;
    }
    double slope = 0.0;
    for (std::size_t v = 0; v < nv; ++v) slope += grad[v] * dir[v];

    std::vector<double> trial = x;
    double ft = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      for (std::size_t v = 0; v < nv; ++v) trial[n + v] = x[n + v] + alpha * dir[v];
      ft = safe_value(trial);
      if (std::isfinite(ft) && ft >= f + 1e-4 * alpha * slope && ft >= f) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line search failed";
      break;
    }
    std::vector<double> grad_new = gradient(trial);
    double sDs = 0.0;
    double sy = 0.0;
    for (std::size_t v = 0; v < nv; ++v) {
      const double s = trial[n + v] - x[n + v];
      sDs += s * D[v] * s;
      sy += s * (grad_new[v] - grad[v]);
    }
    x.swap(trial);
    f = ft;
    grad.swap(grad_new);
    res.objective_log.push_back(f);
    const double bb = sy < 0 ? sDs / -sy : 2.0 * alpha;
    alpha = std::isfinite(bb) ? std::clamp(bb, 1e-12, 1e12) : opts.step_init;
  }

  // Coordinates the objective ignores (x at the last point when L has no
  // v-dependence there, say) keep their random start; report them at x_a.
  for (std::size_t v = 0; v < nv; ++v) {
    if (grad[v] != 0.0) continue;
    const std::size_t i = 1 + v / n;
    const std::size_t c = v % n;
    try {
      if (obj.local_delta(x, obj.z_values(x), i, c, p.x_a()[c]) == 0.0) x[i * n + c] = p.x_a()[c];
    } catch (const DomainError&) {
    }
  }

  res.iterations = it;
  res.grad_norm = inf_norm(grad);
  const double J = f;
  res.objective = p.sense() == Sense::kMin ? -J : J;
  res.x = detail::extend_constant(p, std::move(x), K);
  return res;
}

inline Trajectory direct_solve(const Problem& p, const SolveOptions& opts) {
  return Trajectory(p, direct_solve_detailed(p, opts).x);
}

struct BruteForceResult {
  GridFunction x;
  double objective;  // J_{T_trunc} for the problem's own L
  std::size_t evaluated;
};

// Exhaustive argmax of the truncated functional over value_grid assignments
// to the free coordinates, ordered (point, component) with the last one
// varying fastest.  Among equal objectives the lexicographically smallest
// assignment wins.
inline BruteForceResult brute_force_detailed(const Problem& p, const SolveOptions& opts,
                                             std::vector<double> value_grid) {
  detail::validate(opts);
  if (value_grid.empty()) throw InputError("value grid is empty");
  for (double v : value_grid) {
    if (!std::isfinite(v)) throw InputError("value grid entries must be finite");
  }
  std::sort(value_grid.begin(), value_grid.end());
  value_grid.erase(std::unique(value_grid.begin(), value_grid.end()), value_grid.end());

  const std::size_t K = detail::truncation_index(p, opts);
  const std::size_t n = p.n();
  const std::size_t free_end = opts.terminal == TerminalMode::kPinned ? K : K + 1;
  const std::size_t nv = (free_end - 1) * n;
  const std::size_t V = value_grid.size();

  double count = 1.0;
  for (std::size_t v = 0; v < nv; ++v) count *= static_cast<double>(V);
  if (count > 1e7) {
    throw EnumerationGuard("brute force would enumerate " + std::to_string(V) + "^" +
                           std::to_string(nv) + " assignments (limit 1e7)");
  }

  std::vector<double> x((K + 1) * n);
  for (std::size_t c = 0; c < n; ++c) x[c] = p.x_a()[c];
  if (opts.terminal == TerminalMode::kPinned) {
    for (std::size_t c = 0; c < n; ++c) x[K * n + c] = opts.terminal_value;
  }
  std::vector<std::size_t> digit(nv, 0);
  for (std::size_t v = 0; v < nv; ++v) x[n + v] = value_grid[0];

  detail::Objective obj(p, K);
  const TimeScale& ts = p.ts();
  // Running sums through each point, so a change at point i only recomputes
  // the terms from i on.
  std::vector<double> Jpre(K + 1, 0.0);
  std::vector<double> Zpre(K + 1, 0.0);
  auto recompute_from = [&](std::size_t i) {
    for (std::size_t k = std::max<std::size_t>(i, 1); k <= K; ++k) {
      Zpre[k] = Zpre[k - 1] + ts.step_at(k) * obj.g_at(x, k);
      Jpre[k] = Jpre[k - 1] + ts.step_at(k) * obj.L_at(x, k, Zpre[k]);
    }
  };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  std::size_t evaluated = 0;
  std::size_t changed_point = 1;
  while (true) {
    bool ok = true;
    try {
      recompute_from(changed_point);
    } catch (const DomainError&) {
      ok = false;
      changed_point = 1;
    }
    ++evaluated;
    if (ok && std::isfinite(Jpre[K]) && Jpre[K] > best) {
      best = Jpre[K];
      best_x = x;
    }
    // Odometer step.
    std::size_t v = nv;
    while (v > 0) {
      --v;
      if (++digit[v] < V) break;
      digit[v] = 0;
      x[n + v] = value_grid[0];
      if (v == 0) {
        v = nv;  // wrapped around completely
        break;
      }
    }
    if (v == nv || nv == 0) break;
    x[n + v] = value_grid[digit[v]];
    if (ok) changed_point = 1 + v / n;
  }
  if (best_x.empty()) throw MathError("objective undefined for every assignment on the value grid");
  const double J = detail::Objective(p, K).value(best_x);
  return {detail::extend_constant(p, std::move(best_x), K), p.sense() == Sense::kMin ? -J : J, evaluated};
}

inline Trajectory brute_force(const Problem& p, const SolveOptions& opts, std::vector<double> value_grid) {
  return Trajectory(p, brute_force_detailed(p, opts, std::move(value_grid)).x);
}

struct HorizonRow {
  double T_trunc;
  double max_el_residual;
  double trans_T1;
  double trans_T2;
  double objective;
};

struct HorizonStudy {
  std::vector<HorizonRow> rows;
  bool transversality_applicable;  // false for a pinned terminal value
  std::vector<GridFunction> solutions;
};

// Residual columns for one truncation, given the solution computed there.
inline HorizonRow horizon_row(const Problem& p, const Trajectory& x, double T, double objective) {
  const PathEvaluation ev(p, x);
  const std::size_t K = p.ts().index_of(T);
  if (K == 0) throw InputError("T_trunc must be greater than a");
  double worst = 0.0;
  for (std::size_t i = p.ts().kappa_begin(); i <= K; ++i) {
    if (!is_interior(p.ts(), i)) continue;
    for (double r : ev.el_pointwise(i, K)) worst = std::max(worst, std::abs(r));
  }
  return {T, worst, std::abs(ev.trans_T1(K)), std::abs(ev.trans_T2(K)), objective};
}

inline HorizonStudy horizon_study(const Problem& p, std::vector<double> truncations, SolveOptions opts) {
  std::sort(truncations.begin(), truncations.end());
  HorizonStudy out{{}, opts.terminal == TerminalMode::kFree, {}};
  for (double T : truncations) {
    opts.T_trunc = T;
    SolveResult sol = direct_solve_detailed(p, opts);
    out.rows.push_back(horizon_row(p, Trajectory(p, sol.x), T, sol.objective));
    out.solutions.push_back(std::move(sol.x));
  }
  return out;
}

inline void write_horizon_csv(std::ostream& os, const HorizonStudy& study) {
  auto num = [](double v) { return detail::format_number(v); };
  os << "T_trunc,max_el_residual,trans_T1,trans_T2,objective\n";
  for (const auto& r : study.rows) {
    os << num(r.T_trunc) << ',' << num(r.max_el_residual) << ',' << num(r.trans_T1) << ','
       << num(r.trans_T2) << ',' << num(r.objective) << '\n';
  }
}

}  // namespace nablavar
