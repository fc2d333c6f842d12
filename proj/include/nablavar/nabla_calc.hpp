#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "nablavar/errors.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/summation.hpp"
#include "nablavar/timescale.hpp"

namespace nablavar {

using Vector = std::vector<double>;

// Nabla derivative at grid index i.  Exact difference quotient at
// left-scattered points; backward difference over the sample step at
// left-dense points; forward difference at a right-dense minimum (its
// one-sided limit on the sampled continuum).
inline Vector nabla_derivative_at(const GridFunction& f, std::size_t i) {
  const TimeScale& ts = f.ts();
  if (!ts.in_kappa(i)) {
    throw OutsideKappa("nabla derivative requested at the right-scattered minimum " +
                       PointNotInScale::format_value(ts[i]));
  }
  const std::size_t hi = i == 0 ? 1 : i;
  const double step = ts[hi] - ts[hi - 1];
  Vector out(f.dim());
  for (std::size_t c = 0; c < f.dim(); ++c) out[c] = (f.at(hi, c) - f.at(hi - 1, c)) / step;
  return out;
}

inline Vector nabla_derivative(const GridFunction& f, double t) {
  return nabla_derivative_at(f, f.ts().index_of(t));
}

// f^nabla on the whole grid.  At a minimum outside T_kappa the value is
// copied from the successor and the result is flagged.
inline GridFunction nabla_derivative_fn(const GridFunction& f) {
  const TimeScale& ts = f.ts();
  const std::size_t d = f.dim();
  std::vector<double> v(f.values().size());
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double step = ts[i] - ts[i - 1];
    for (std::size_t c = 0; c < d; ++c) v[i * d + c] = (f.at(i, c) - f.at(i - 1, c)) / step;
  }
  for (std::size_t c = 0; c < d; ++c) v[c] = v[d + c];
  GridFunction out(f.ts_ptr(), d, std::move(v));
  out.set_first_value_extrapolated(!ts.in_kappa(0));
  return out;
}

// Integral over grid indices (lo, hi] of step * f, ascending, compensated.
inline Vector nabla_integral_indices(const GridFunction& f, std::size_t lo, std::size_t hi) {
  const TimeScale& ts = f.ts();
  std::vector<CompensatedSum> acc(f.dim());
  for (std::size_t k = lo + 1; k <= hi; ++k) {
    const double w = ts[k] - ts[k - 1];
    for (std::size_t c = 0; c < f.dim(); ++c) acc[c] += w * f.at(k, c);
  }
  Vector out(f.dim());
  for (std::size_t c = 0; c < f.dim(); ++c) out[c] = acc[c].value();
  return out;
}

// ∫_a^b f ∇t: sum over grid points t in (a, b] of step(t) f(t).  Exact
// (telescoping) on SCATTERED gaps, left-rectangle rule on DENSE_SAMPLE gaps.
inline Vector nabla_integral(const GridFunction& f, double a, double b) {
  const TimeScale& ts = f.ts();
  const std::size_t ia = ts.index_of(a);
  const std::size_t ib = ts.index_of(b);
  if (ia > ib) {
    throw ReversedBounds("nabla integral with a > b (" + PointNotInScale::format_value(a) + " > " +
                         PointNotInScale::format_value(b) + "); negate explicitly");
  }
  return nabla_integral_indices(f, ia, ib);
}

// ∫_{rho(t)}^{t} f ∇τ = nu(t) f(t).  At left-scattered t the value is also
// checked against the general integral.
inline Vector local_rho_integral(const GridFunction& f, double t) {
  const TimeScale& ts = f.ts();
  const std::size_t i = ts.index_of(t);
  if (!ts.in_kappa(i)) {
    throw OutsideKappa("local rho integral at the right-scattered minimum");
  }
  const double n = ts.nu_at(i);
  Vector out(f.dim());
  for (std::size_t c = 0; c < f.dim(); ++c) out[c] = n * f.at(i, c);
  if (ts.left_scattered(i)) {
    const Vector check = nabla_integral_indices(f, i - 1, i);
    for (std::size_t c = 0; c < f.dim(); ++c) {
      if (check[c] != out[c]) {
        throw MathError("local rho integral disagrees with the nabla integral at " +
                        PointNotInScale::format_value(t));
      }
    }
  }
  return out;
}

// |∫_a^b f g^∇ ∇t − [fg]_a^b + ∫_a^b f^∇ g^ρ ∇t| for scalar f, g.
inline double integration_by_parts_residual(const GridFunction& f, const GridFunction& g,
                                            double a, double b) {
  require_same_grid(f, g);
  if (f.dim() != 1) throw InputError("integration by parts is defined for scalar functions");
  const TimeScale& ts = f.ts();
  const std::size_t ia = ts.index_of(a);
  const std::size_t ib = ts.index_of(b);
  if (ia > ib) throw ReversedBounds("integration by parts with a > b");
  const GridFunction lhs = f * nabla_derivative_fn(g);
  const GridFunction rhs = nabla_derivative_fn(f) * compose_rho(g);
  const double boundary = f.scalar(ib) * g.scalar(ib) - f.scalar(ia) * g.scalar(ia);
  return std::abs(nabla_integral_indices(lhs, ia, ib)[0] - boundary +
                  nabla_integral_indices(rhs, ia, ib)[0]);
}

struct PartialIntegral {
  double t_prime;
  double value;
};

// S(T') = ∫_a^{T'} f ∇t for every grid point T' > a (scalar f).
inline std::vector<PartialIntegral> partial_integrals(const GridFunction& f, double a) {
  const TimeScale& ts = f.ts();
  const std::size_t ia = ts.index_of(a);
  std::vector<PartialIntegral> out;
  out.reserve(ts.size() - ia);
  CompensatedSum acc;
  for (std::size_t k = ia + 1; k < ts.size(); ++k) {
    acc += (ts[k] - ts[k - 1]) * f.at(k, 0);
    out.push_back({ts[k], acc.value()});
  }
  return out;
}

// inf { value : T' >= T }.
inline double liminf_tail(std::span<const PartialIntegral> seq, double T) {
  if (seq.empty()) throw EmptyTail("liminf over an empty sequence");
  double inf = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& p : seq) {
    if (p.t_prime >= T) {
      inf = std::min(inf, p.value);
      any = true;
    }
  }
  if (!any) {
    throw EmptyTail("no sequence entry at or beyond T = " + PointNotInScale::format_value(T));
  }
  return inf;
}

// Estimate of lim_{T→∞} inf_{T'≥T} on a truncated sequence: the tail-inf
// over the last quarter of the entries, with a Cauchy flag comparing it to
// the tail-inf over the last half.
struct LiminfEstimate {
  double value;
  double last_half;
  bool cauchy;
};

inline LiminfEstimate liminf_estimate(std::span<const PartialIntegral> seq, double tol = 1e-8) {
  if (seq.empty()) throw EmptyTail("liminf over an empty sequence");
  const std::size_t n = seq.size();
  const std::size_t q = n - std::max<std::size_t>(1, (n + 3) / 4);
  const std::size_t h = n - std::max<std::size_t>(1, (n + 1) / 2);
  const double quarter = liminf_tail(seq, seq[q].t_prime);
  const double half = liminf_tail(seq, seq[h].t_prime);
  return {quarter, half, std::abs(quarter - half) <= tol};
}

// Heuristic report on a truncated partial-integral sequence.  Divergence is
// flagged when the last half is monotone and the increment over the last
// quarter has not decayed below 3/4 of the increment over the quarter
// before it.  Not a proof either way.
enum class TailBehavior { kStabilizing, kDivergingUp, kDivergingDown, kUndetermined };

inline TailBehavior classify_tail(std::span<const PartialIntegral> seq, double tol = 1e-8) {
  const LiminfEstimate est = liminf_estimate(seq, tol);
  if (est.cauchy) return TailBehavior::kStabilizing;
  const std::size_t n = seq.size();
  if (n < 4) return TailBehavior::kUndetermined;
  const std::size_t half = n / 2;
  const std::size_t three_q = (3 * n) / 4;
  bool up = true;
  bool down = true;
  for (std::size_t k = half + 1; k < n; ++k) {
    up = up && seq[k].value >= seq[k - 1].value;
    down = down && seq[k].value <= seq[k - 1].value;
  }
  const double late = std::abs(seq[n - 1].value - seq[three_q].value);
  const double early = std::abs(seq[three_q].value - seq[half].value);
  if ((up || down) && late >= 0.75 * early && late > tol) {
    return up ? TailBehavior::kDivergingUp : TailBehavior::kDivergingDown;
  }
  return TailBehavior::kUndetermined;
}

}  // namespace nablavar
