#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nablavar/errors.hpp"
#include "nablavar/expr.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/nabla_calc.hpp"
#include "nablavar/summation.hpp"
#include "nablavar/timescale.hpp"

namespace nablavar {

enum class Sense { kMax, kMin };

// Maximize (or minimize) ∫_a^∞ L(t, x^ρ, x^∇, z) ∇t with
// z(t) = ∫_a^t g(τ, x^ρ, x^∇) ∇τ and x(a) = x_a, on a truncated grid.
//
// A MIN problem is handled as the MAX problem for -L; every residual below
// refers to that effective Lagrangian.
class Problem {
 public:
  Problem(std::shared_ptr<const TimeScale> ts, std::size_t n, Expr lagrangian, Expr constraint,
          Vector x_a, Sense sense = Sense::kMax)
      : ts_(std::move(ts)),
        n_(n),
        lagrangian_(std::move(lagrangian)),
        constraint_(std::move(constraint)),
        x_a_(std::move(x_a)),
        sense_(sense) {
    if (!ts_) throw InputError("problem without a time scale");
    if (n_ == 0) throw InputError("state dimension must be >= 1");
    if (x_a_.size() != n_) {
      throw InputError("x_a has " + std::to_string(x_a_.size()) + " entries, expected " +
                       std::to_string(n_));
    }
    for (double v : x_a_) {
      if (!std::isfinite(v)) throw InputError("x_a must be finite");
    }
    check_variables(lagrangian_, "L", true);
    check_variables(constraint_, "g", false);

    effective_ = sense_ == Sense::kMin ? neg(lagrangian_) : lagrangian_;
    for (unsigned c = 1; c <= n_; ++c) {
      L_x_.push_back(differentiate(effective_, Variable::x(c)));
      L_v_.push_back(differentiate(effective_, Variable::v(c)));
      g_x_.push_back(differentiate(constraint_, Variable::x(c)));
      g_v_.push_back(differentiate(constraint_, Variable::v(c)));
    }
    L_z_ = differentiate(effective_, Variable::z());
    constraint_on_path_ = std::any_of(g_x_.begin(), g_x_.end(), [](const Expr& e) { return !e.is_number(0.0); }) ||
                          std::any_of(g_v_.begin(), g_v_.end(), [](const Expr& e) { return !e.is_number(0.0); });
  }

  const TimeScale& ts() const { return *ts_; }
  const std::shared_ptr<const TimeScale>& ts_ptr() const { return ts_; }
  std::size_t n() const { return n_; }
  const Expr& lagrangian() const { return lagrangian_; }
  const Expr& constraint() const { return constraint_; }
  const Vector& x_a() const { return x_a_; }
  Sense sense() const { return sense_; }
  double a() const { return ts_->min(); }

  // L for MAX, -L for MIN.
  const Expr& effective_lagrangian() const { return effective_; }
  const Expr& L_x(std::size_t c) const { return L_x_[c]; }
  const Expr& L_v(std::size_t c) const { return L_v_[c]; }
  const Expr& L_z() const { return L_z_; }
  const Expr& g_x(std::size_t c) const { return g_x_[c]; }
  const Expr& g_v(std::size_t c) const { return g_v_[c]; }

  // True when perturbing x at one point can change z further along.
  bool z_coupled() const { return constraint_on_path_ && !L_z_.is_number(0.0); }

 private:
  void check_variables(const Expr& e, const char* what, bool allow_z) const {
    for (const Variable& v : variables(e)) {
      const bool ok = v.kind == Variable::Kind::kTime ||
                      (v.kind == Variable::Kind::kIntegral && allow_z) ||
                      ((v.kind == Variable::Kind::kState || v.kind == Variable::Kind::kRate) &&
                       v.index >= 1 && v.index <= n_);
      if (!ok) {
        throw InputError(std::string(what) + " uses variable '" + v.name() +
                         "', which is not available for n = " + std::to_string(n_));
      }
    }
  }

  std::shared_ptr<const TimeScale> ts_;
  std::size_t n_;
  Expr lagrangian_;
  Expr constraint_;
  Vector x_a_;
  Sense sense_;
  Expr effective_;
  std::vector<Expr> L_x_, L_v_, g_x_, g_v_;
  Expr L_z_;
  bool constraint_on_path_ = false;
};

// An admissible path: n-dimensional samples on the problem grid with
// x(a) = x_a and finite values.
class Trajectory {
 public:
  Trajectory(const Problem& p, GridFunction x) : x_(std::move(x)) {
    if (!(x_.ts() == p.ts())) throw GridMismatch("trajectory grid differs from the problem grid");
    if (x_.dim() != p.n()) {
      throw GridMismatch("trajectory has dimension " + std::to_string(x_.dim()) + ", expected " +
                         std::to_string(p.n()));
    }
    for (double v : x_.values()) {
      if (!std::isfinite(v)) throw InputError("trajectory values must be finite");
    }
    for (std::size_t c = 0; c < p.n(); ++c) {
      if (x_.at(0, c) != p.x_a()[c]) {
        throw InputError("trajectory is not admissible: x(a) differs from x_a in component " +
                         std::to_string(c + 1));
      }
    }
  }

  const GridFunction& x() const { return x_; }
  const TimeScale& ts() const { return x_.ts(); }

 private:
  GridFunction x_;
};

// Points where the Euler-Lagrange residual is constrained by optimality:
// every admissible variation vanishes at a, so p^ρ(t) = 0 whenever ρ(t) = a
// and the equation carries no information there.
inline bool is_interior(const TimeScale& ts, std::size_t i) { return ts.rho_index(i) > 0; }

// Everything the residual formulas need, evaluated once along a path.
class PathEvaluation {
 public:
  PathEvaluation(const Problem& p, const Trajectory& traj)
      : ts_(traj.ts()), n_(p.n()) {
    const GridFunction& x = traj.x();
    const std::size_t m = ts_.size();
    xrho_.assign(m * n_, 0.0);
    const GridFunction dx = nabla_derivative_fn(x);
    xnabla_.assign(dx.values().begin(), dx.values().end());
    z_.assign(m, 0.0);
    L_.assign(m, 0.0);
    Lz_.assign(m, 0.0);
    g_.assign(m, 0.0);
    Lx_.assign(m * n_, 0.0);
    Lv_.assign(m * n_, 0.0);
    gx_.assign(m * n_, 0.0);
    gv_.assign(m * n_, 0.0);

    for (std::size_t i = 0; i < m; ++i) {
      const auto src = x.value(ts_.rho_index(i));
      std::copy(src.begin(), src.end(), xrho_.begin() + static_cast<std::ptrdiff_t>(i * n_));
    }
    CompensatedSum zsum;
    for (std::size_t i = 0; i < m; ++i) {
      const Env env = env_at(i, 0.0);
      g_[i] = evaluate_at(p.constraint(), env, i);
      if (i > 0) {
        zsum += ts_.step_at(i) * g_[i];
        z_[i] = zsum.value();
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Env env = env_at(i, z_[i]);
      L_[i] = evaluate_at(p.effective_lagrangian(), env, i);
      Lz_[i] = evaluate_at(p.L_z(), env, i);
      for (std::size_t c = 0; c < n_; ++c) {
        Lx_[i * n_ + c] = evaluate_at(p.L_x(c), env, i);
        Lv_[i * n_ + c] = evaluate_at(p.L_v(c), env, i);
        gx_[i * n_ + c] = evaluate_at(p.g_x(c), env, i);
        gv_[i * n_ + c] = evaluate_at(p.g_v(c), env, i);
      }
    }
    x_.assign(x.values().begin(), x.values().end());
  }

  const TimeScale& ts() const { return ts_; }
  std::size_t n() const { return n_; }
  double x(std::size_t i, std::size_t c) const { return x_[i * n_ + c]; }
  double z(std::size_t i) const { return z_[i]; }
  double L(std::size_t i) const { return L_[i]; }
  double L_x(std::size_t i, std::size_t c) const { return Lx_[i * n_ + c]; }
  double L_v(std::size_t i, std::size_t c) const { return Lv_[i * n_ + c]; }
  double L_z(std::size_t i) const { return Lz_[i]; }
  double g_x(std::size_t i, std::size_t c) const { return gx_[i * n_ + c]; }
  double g_v(std::size_t i, std::size_t c) const { return gv_[i * n_ + c]; }

  // ∫_{ρ(t_j)}^{t_K} L_z ∇τ, summed ascending.
  double lz_tail(std::size_t j, std::size_t K) const {
    CompensatedSum s;
    for (std::size_t k = ts_.rho_index(j) + 1; k <= K; ++k) s += ts_.step_at(k) * Lz_[k];
    return s.value();
  }

  // ∫_a^{t_K} L ∇t.
  double functional(std::size_t K) const {
    CompensatedSum s;
    for (std::size_t k = 1; k <= K; ++k) s += ts_.step_at(k) * L_[k];
    return s.value();
  }

  // g_x Λ - (g_v Λ)^∇ + L_x - L_v^∇ at t_i, with Λ(t) = ∫_{ρ(t)}^{T'} L_z.
  Vector el_pointwise(std::size_t i, std::size_t K) const {
    require_kappa(i);
    if (i > K) throw InputError("Euler-Lagrange residual needs t <= T'");
    const std::size_t hi = i == 0 ? 1 : i;
    const std::size_t lo = hi - 1;
    const double step = ts_[hi] - ts_[lo];
    const double lam_i = lz_tail(i, K);
    const double lam_hi = lz_tail(hi, K);
    const double lam_lo = lz_tail(lo, K);
    Vector r(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      const double gv_lam_nabla = (g_v(hi, c) * lam_hi - g_v(lo, c) * lam_lo) / step;
      const double lv_nabla = (L_v(hi, c) - L_v(lo, c)) / step;
      r[c] = g_x(i, c) * lam_i - gv_lam_nabla + L_x(i, c) - lv_nabla;
    }
    return r;
  }

  // ∫_t^{T'} g_x Λ ∇τ + g_v(t) Λ(t) + L_v(t) - ∫_a^t L_x ∇τ.
  Vector el_integral(std::size_t i, std::size_t K) const {
    if (i > K) throw InputError("integral Euler-Lagrange form needs t <= T'");
    std::vector<double> lam(K + 1);
    for (std::size_t k = i; k <= K; ++k) lam[k] = lz_tail(k, K);
    Vector r(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      CompensatedSum upper;
      for (std::size_t k = i + 1; k <= K; ++k) upper += ts_.step_at(k) * (g_x(k, c) * lam[k]);
      CompensatedSum lower;
      for (std::size_t k = 1; k <= i; ++k) lower += ts_.step_at(k) * L_x(k, c);
      r[c] = upper.value() + g_v(i, c) * lam[i] + L_v(i, c) - lower.value();
    }
    return r;
  }

  // x(T') · [L_v(T') + g_v(T') ν(T') L_z(T')].
  double trans_T1(std::size_t K) const {
    const double local = ts_.nu_at(K) * L_z(K);
    return dot_state(K, [&](std::size_t c) { return L_v(K, c) + g_v(K, c) * local; });
  }

  // Same pairing with ∫_{ρ(T')}^{T'} L_z taken as a nabla integral.
  double trans_T1_via_integral(std::size_t K) const {
    const double local = lz_tail(K, K);
    return dot_state(K, [&](std::size_t c) { return L_v(K, c) + g_v(K, c) * local; });
  }

  // x(T') · ∫_a^{T'} L_x.
  double trans_T2(std::size_t K) const {
    return dot_state(K, [&](std::size_t c) {
      CompensatedSum s;
      for (std::size_t k = 1; k <= K; ++k) s += ts_.step_at(k) * L_x(k, c);
      return s.value();
    });
  }

 private:
  Env env_at(std::size_t i, double z) const {
    return Env{ts_[i], std::span<const double>(xrho_).subspan(i * n_, n_),
               std::span<const double>(xnabla_).subspan(i * n_, n_), z};
  }

  double evaluate_at(const Expr& e, const Env& env, std::size_t i) const {
    try {
      return evaluate(e, env);
    } catch (const DomainError& err) {
      throw DomainError(std::string(err.what()) + " at t = " + PointNotInScale::format_value(ts_[i]),
                        err.subtree());
    }
  }

  void require_kappa(std::size_t i) const {
    if (!ts_.in_kappa(i)) {
      throw OutsideKappa("t = " + PointNotInScale::format_value(ts_[i]) + " is outside T_kappa");
    }
  }

  template <class F>
  double dot_state(std::size_t K, F&& f) const {
    CompensatedSum s;
    for (std::size_t c = 0; c < n_; ++c) s += x(K, c) * f(c);
    return s.value();
  }

  const TimeScale& ts_;
  std::size_t n_;
  std::vector<double> x_, xrho_, xnabla_, z_, L_, Lz_, g_, Lx_, Lv_, gx_, gv_;
};

// ---------------------------------------------------------------------------
// Operations by value of t

inline GridFunction compute_z(const Problem& p, const Trajectory& x) {
  const PathEvaluation ev(p, x);
  std::vector<double> z(p.ts().size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = ev.z(i);
  return GridFunction(x.x().ts_ptr(), 1, std::move(z));
}

// ∫_a^{T'} L ∇t for the problem's own L (not negated for MIN).
inline double evaluate_functional_partial(const Problem& p, const Trajectory& x, double t_prime) {
  const std::size_t K = p.ts().index_of(t_prime);
  if (K == 0) throw InputError("T' must be greater than a");
  const double J = PathEvaluation(p, x).functional(K);
  return p.sense() == Sense::kMin ? -J : J;
}

inline Vector el_residual_pointwise(const Problem& p, const Trajectory& x, double t, double t_prime) {
  return PathEvaluation(p, x).el_pointwise(p.ts().index_of(t), p.ts().index_of(t_prime));
}

// The finite-horizon equation on [a, b] is the pointwise residual with
// T' = b.
inline Vector finite_horizon_el_residual(const Problem& p, const Trajectory& x, double b, double t) {
  return el_residual_pointwise(p, x, t, b);
}

inline Vector el_residual_integral(const Problem& p, const Trajectory& x, double t, double t_prime) {
  return PathEvaluation(p, x).el_integral(p.ts().index_of(t), p.ts().index_of(t_prime));
}

inline double transversality_residual_T1(const Problem& p, const Trajectory& x, double t_prime) {
  const std::size_t K = p.ts().index_of(t_prime);
  if (K == 0) throw InputError("T' must be greater than a");
  return PathEvaluation(p, x).trans_T1(K);
}

inline double transversality_residual_T2(const Problem& p, const Trajectory& x, double t_prime) {
  const std::size_t K = p.ts().index_of(t_prime);
  if (K == 0) throw InputError("T' must be greater than a");
  return PathEvaluation(p, x).trans_T2(K);
}

struct WeakMaxComparison {
  double margin;
  bool cauchy;
  std::vector<PartialIntegral> partials;  // ∫_a^{T'} (L[x] - L[x*]) for T' > a
};

// liminf over T of inf_{T'>=T} ∫_a^{T'} (L[x,z] - L[x*,z*]) ∇t, estimated on
// the truncated grid.  x* passes against x when the margin is <= tol.
inline WeakMaxComparison weak_max_compare_detailed(const Problem& p, const Trajectory& candidate,
                                                   const Trajectory& star, double cauchy_tol = 1e-8) {
  if (!candidate.x().same_grid(star.x())) throw GridMismatch("trajectories on different grids");
  const PathEvaluation ec(p, candidate);
  const PathEvaluation es(p, star);
  std::vector<double> diff(p.ts().size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ec.L(i) - es.L(i);
  const GridFunction d(p.ts_ptr(), 1, std::move(diff));
  WeakMaxComparison out{0.0, true, partial_integrals(d, p.a())};
  const LiminfEstimate est = liminf_estimate(out.partials, cauchy_tol);
  out.margin = est.value;
  out.cauchy = est.cauchy;
  return out;
}

inline double weak_max_compare(const Problem& p, const Trajectory& candidate, const Trajectory& star) {
  return weak_max_compare_detailed(p, candidate, star).margin;
}

// ---------------------------------------------------------------------------
// Residual reports

struct ResidualRow {
  double t;
  double t_prime;
  std::size_t component;  // 1-based; 0 for scalar quantities
  double value;
  std::string kind;
};

struct ResidualReport {
  std::vector<ResidualRow> el_pointwise;
  std::vector<ResidualRow> el_integral;
  std::vector<double> el_integral_constant_spread;  // at the largest T'
  std::vector<PartialIntegral> trans_T1;
  std::vector<PartialIntegral> trans_T2;
  std::optional<double> weak_max_margin;

  // max |residual| over interior points, across all T' in the report.
  double max_interior_el(const TimeScale& ts) const {
    double m = 0.0;
    for (const auto& r : el_pointwise) {
      if (is_interior(ts, ts.index_of(r.t))) m = std::max(m, std::abs(r.value));
    }
    return m;
  }

  double max_spread() const {
    double m = 0.0;
    for (double s : el_integral_constant_spread) m = std::max(m, s);
    return m;
  }
};

// Per-component max - min of the integral form over t in (a, T'].  The
// value at a itself is excluded for the same reason as in is_interior.
inline Vector el_integral_spread(const PathEvaluation& ev, std::size_t K) {
  Vector lo(ev.n(), std::numeric_limits<double>::infinity());
  Vector hi(ev.n(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 1; i <= K; ++i) {
    const Vector r = ev.el_integral(i, K);
    for (std::size_t c = 0; c < ev.n(); ++c) {
      lo[c] = std::min(lo[c], r[c]);
      hi[c] = std::max(hi[c], r[c]);
    }
  }
  Vector spread(ev.n());
  for (std::size_t c = 0; c < ev.n(); ++c) spread[c] = hi[c] - lo[c];
  return spread;
}

enum class ElForm { kPointwise, kIntegral, kFinite };

inline ResidualReport build_residual_report(const Problem& p, const Trajectory& x,
                                            std::span<const double> t_primes,
                                            ElForm form = ElForm::kPointwise) {
  const PathEvaluation ev(p, x);
  const TimeScale& ts = p.ts();
  std::vector<std::size_t> Ks;
  for (double tp : t_primes) {
    const std::size_t K = ts.index_of(tp);
    if (K == 0) throw InputError("T' must be greater than a");
    Ks.push_back(K);
  }
  std::sort(Ks.begin(), Ks.end());
  Ks.erase(std::unique(Ks.begin(), Ks.end()), Ks.end());

  ResidualReport rep;
  const char* kind = form == ElForm::kFinite ? "el_finite" : "el_pointwise";
  for (std::size_t K : Ks) {
    for (std::size_t i = ts.kappa_begin(); i <= K; ++i) {
      const Vector r = ev.el_pointwise(i, K);
      for (std::size_t c = 0; c < r.size(); ++c) {
        rep.el_pointwise.push_back({ts[i], ts[K], c + 1, r[c], kind});
      }
    }
    if (form == ElForm::kIntegral) {
      for (std::size_t i = 0; i <= K; ++i) {
        const Vector r = ev.el_integral(i, K);
        for (std::size_t c = 0; c < r.size(); ++c) {
          rep.el_integral.push_back({ts[i], ts[K], c + 1, r[c], "el_integral"});
        }
      }
    }
    rep.trans_T1.push_back({ts[K], ev.trans_T1(K)});
    rep.trans_T2.push_back({ts[K], ev.trans_T2(K)});
  }
  if (!Ks.empty()) rep.el_integral_constant_spread = el_integral_spread(ev, Ks.back());
  return rep;
}

inline void write_report_csv(std::ostream& os, const ResidualReport& rep, double spread_t_prime) {
  auto num = [](double v) { return detail::format_number(v); };
  os << "t,T_prime,component,value,kind\n";
  for (const auto& r : rep.el_pointwise) {
    os << num(r.t) << ',' << num(r.t_prime) << ',' << r.component << ',' << num(r.value) << ','
       << r.kind << '\n';
  }
  for (const auto& r : rep.el_integral) {
    os << num(r.t) << ',' << num(r.t_prime) << ',' << r.component << ',' << num(r.value) << ','
       << r.kind << '\n';
  }
  for (std::size_t c = 0; c < rep.el_integral_constant_spread.size(); ++c) {
    os << num(spread_t_prime) << ',' << num(spread_t_prime) << ',' << c + 1 << ','
       << num(rep.el_integral_constant_spread[c]) << ",el_integral_spread\n";
  }
  for (const auto& r : rep.trans_T1) {
    os << num(r.t_prime) << ',' << num(r.t_prime) << ",0," << num(r.value) << ",trans_T1\n";
  }
  for (const auto& r : rep.trans_T2) {
    os << num(r.t_prime) << ',' << num(r.t_prime) << ",0," << num(r.value) << ",trans_T2\n";
  }
  if (rep.weak_max_margin) {
    os << num(spread_t_prime) << ',' << num(spread_t_prime) << ",0," << num(*rep.weak_max_margin)
       << ",weak_max_margin\n";
  }
}

}  // namespace nablavar
