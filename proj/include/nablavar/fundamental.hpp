#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nablavar/grid_function.hpp"
#include "nablavar/nabla_calc.hpp"
#include "nablavar/timescale.hpp"

namespace nablavar {

enum class CaseTag { kLeftDenseBump, kScatteredSpike, kRhoDenseBump, kBridge };

inline const char* to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::kLeftDenseBump: return "LEFT_DENSE_BUMP";
    case CaseTag::kScatteredSpike: return "SCATTERED_SPIKE";
    case CaseTag::kRhoDenseBump: return "RHO_DENSE_BUMP";
    case CaseTag::kBridge: return "BRIDGE";
  }
  return "?";
}

// A variation η with η(a) = 0 that makes ∫ g η^ρ ∇t nonzero.  t0 is the
// grid point whose residual value the construction exposes.
struct Variation {
  GridFunction eta;
  double support_lo;
  double support_hi;
  CaseTag case_tag;
  double t0;
};

// What counts as "g(t) = 0".  On left-dense points the threshold scales
// with the sup norm of g, since there g is itself an O(h) approximation.
struct ZeroTolerance {
  double scattered = 1e-10;
  double dense_relative = 1e-6;
};

// ∫_a^{max} g(t) η(ρ(t)) ∇t over the whole grid.
inline double witness_value(const GridFunction& g, const GridFunction& eta) {
  require_same_grid(g, eta);
  const TimeScale& ts = g.ts();
  return nabla_integral_indices(g * compose_rho(eta), 0, ts.size() - 1)[0];
}

// A residual value at t can only be detected by variations when ρ(t) > a:
// every admissible η vanishes at a, and η^ρ(t) = η(a) otherwise.
inline bool witnessable(const TimeScale& ts, std::size_t i) { return ts.rho_index(i) > 0; }

namespace detail {

class LemmaBuilder {
 public:
  LemmaBuilder(const GridFunction& g, ZeroTolerance tol) : g_(g), ts_(g.ts()) {
    double sup = 0.0;
    for (std::size_t i = 0; i < ts_.size(); ++i) sup = std::max(sup, std::abs(g.scalar(i)));
    dense_tol_ = std::max(tol.scattered, tol.dense_relative * sup);
    scattered_tol_ = tol.scattered;
  }

  double tol_at(std::size_t i) const {
    return ts_.left_dense_gap(i) ? dense_tol_ : scattered_tol_;
  }
  bool nonzero(std::size_t i) const { return std::abs(g_.scalar(i)) > tol_at(i); }

  std::vector<std::size_t> candidates() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ts_.size(); ++i) {
      if (witnessable(ts_, i) && nonzero(i)) out.push_back(i);
    }
    std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(g_.scalar(a)) > std::abs(g_.scalar(b));
    });
    return out;
  }

  std::optional<Variation> build(std::size_t t0) const {
    if (ts_.left_dense_gap(t0)) return bump(t0, CaseTag::kLeftDenseBump, t0);
    const std::size_t r = t0 - 1;
    if (r == 0) return std::nullopt;
    if (!ts_.left_dense_gap(r)) return spike(t0);
    if (nonzero(r)) return bump(r, CaseTag::kRhoDenseBump, t0);
    // g vanishes at ρ(t0).  Walk left through the zero run inside the dense
    // component.
    std::size_t j = r;
    while (j > 0 && ts_.left_dense_gap(j) && !nonzero(j - 1)) --j;
    if (j < r) return bridge(j, t0);
    if (j > 0 && ts_.left_dense_gap(j)) {
      const std::size_t next = j - 1;
      if (witnessable(ts_, next) && nonzero(next)) return build(next);
    }
    return std::nullopt;
  }

  // Tent at the grid point whose functional G_j is largest in magnitude.
  std::optional<Variation> tent() const {
    const std::size_t m = ts_.size();
    std::size_t best = 0;
    double best_val = 0.0;
    for (std::size_t j = 1; j < m; ++j) {
      double gj = 0.0;
      if (ts_.left_dense_gap(j)) gj += ts_.step_at(j) * g_.scalar(j);
      if (j + 1 < m && ts_.left_scattered(j + 1)) gj += ts_.step_at(j + 1) * g_.scalar(j + 1);
      if (std::abs(gj) > std::abs(best_val)) {
        best = j;
        best_val = gj;
      }
    }
    if (best == 0) return std::nullopt;
    std::vector<double> eta(m, 0.0);
    eta[best] = best_val > 0 ? 1.0 : -1.0;
    const double lo = ts_[best - 1];
    const double hi = best + 1 < m ? ts_[best + 1] : ts_[best];
    const CaseTag tag = ts_.left_dense_gap(best) ? CaseTag::kLeftDenseBump : CaseTag::kScatteredSpike;
    return Variation{GridFunction(g_.ts_ptr(), 1, std::move(eta)), lo, hi, tag, ts_[best]};
  }

 private:
  // First index of the dense component containing i.
  std::size_t component_begin(std::size_t i) const {
    while (i > 0 && ts_.left_dense_gap(i)) --i;
    return i;
  }
  std::size_t component_end(std::size_t i) const {
    while (i + 1 < ts_.size() && ts_.left_dense_gap(i + 1)) ++i;
    return i;
  }

  // η(t) = s (t0 - t)(t - t1) with t1 the left end of the sign run of g
  // through t0.  When that leaves no interior grid point the bump is
  // stretched over the right part of the run instead.
  std::optional<Variation> bump(std::size_t t0, CaseTag tag, std::size_t reported) const {
    const double s = g_.scalar(t0) > 0 ? 1.0 : -1.0;
    const std::size_t cl = component_begin(t0);
    const std::size_t cr = component_end(t0);
    std::size_t l = t0;
    while (l > cl && s * g_.scalar(l - 1) > 0) --l;
    const std::size_t lo = l > cl ? l - 1 : l;
    std::size_t hi = t0;
    if (hi <= lo + 1) {
      std::size_t r = t0;
      while (r < cr && s * g_.scalar(r + 1) > 0) ++r;
      hi = r < cr ? r + 1 : r;
    }
    if (hi <= lo + 1) return std::nullopt;
    std::vector<double> eta(ts_.size(), 0.0);
    const double tlo = ts_[lo];
    const double thi = ts_[hi];
    for (std::size_t i = lo + 1; i < hi; ++i) eta[i] = s * (thi - ts_[i]) * (ts_[i] - tlo);
    return Variation{GridFunction(g_.ts_ptr(), 1, std::move(eta)), tlo, thi, tag, ts_[reported]};
  }

  // η(ρ(t0)) = g(t0), zero elsewhere.
  std::optional<Variation> spike(std::size_t t0) const {
    std::vector<double> eta(ts_.size(), 0.0);
    eta[t0 - 1] = g_.scalar(t0);
    return Variation{GridFunction(g_.ts_ptr(), 1, std::move(eta)), ts_[t0 - 1], ts_[t0 - 1],
                     CaseTag::kScatteredSpike, ts_[t0]};
  }

  // Linear from 0 at t3 to g(t0) at ρ(t0), zero elsewhere.  g is (near) zero
  // on (t3, ρ(t0)], so only the scattered step into t0 contributes.
  std::optional<Variation> bridge(std::size_t t3, std::size_t t0) const {
    const std::size_t r = t0 - 1;
    std::vector<double> eta(ts_.size(), 0.0);
    const double gt0 = g_.scalar(t0);
    for (std::size_t i = t3 + 1; i < r; ++i) eta[i] = gt0 * (ts_[i] - ts_[t3]) / (ts_[r] - ts_[t3]);
    eta[r] = gt0;
    return Variation{GridFunction(g_.ts_ptr(), 1, std::move(eta)), ts_[t3], ts_[r], CaseTag::kBridge,
                     ts_[t0]};
  }

  const GridFunction& g_;
  const TimeScale& ts_;
  double dense_tol_ = 0.0;
  double scattered_tol_ = 0.0;
};

}  // namespace detail

// Returns a variation whose witness value is strictly positive, or none when
// g is zero (at tolerance) on every point a variation can see.
inline std::optional<Variation> construct_violating_variation(const GridFunction& g,
                                                              ZeroTolerance tol = {}) {
  if (g.dim() != 1) throw InputError("fundamental lemma needs a scalar function");
  const detail::LemmaBuilder builder(g, tol);
  const auto cands = builder.candidates();
  if (cands.empty()) return std::nullopt;
  for (std::size_t t0 : cands) {
    auto v = builder.build(t0);
    if (v && witness_value(g, v->eta) > 0.0) return v;
  }
  auto v = builder.tent();
  if (v && witness_value(g, v->eta) > 0.0) return v;
  return std::nullopt;
}

// Same, with the exposed point chosen by the caller.  Returns none when g is
// zero there, t0 is not witnessable, or the local construction fails.
inline std::optional<Variation> construct_violating_variation_at(const GridFunction& g, double t0,
                                                                 ZeroTolerance tol = {}) {
  if (g.dim() != 1) throw InputError("fundamental lemma needs a scalar function");
  const std::size_t i = g.ts().index_of(t0);
  const detail::LemmaBuilder builder(g, tol);
  if (!witnessable(g.ts(), i) || !builder.nonzero(i)) return std::nullopt;
  auto v = builder.build(i);
  if (v && witness_value(g, v->eta) > 0.0) return v;
  return std::nullopt;
}

inline std::optional<Variation> construct_violating_variation(const GridFunction& g, const TimeScale& ts,
                                                              ZeroTolerance tol = {}) {
  if (!(g.ts() == ts)) throw GridMismatch("function does not live on the given time scale");
  return construct_violating_variation(g, tol);
}

struct DuboisReymondResult {
  bool is_constant;
  double spread;
  std::optional<Variation> witness;
  double witness_value;
};

// h is constant iff no variation certifies h^∇ ≠ 0.
inline DuboisReymondResult dubois_reymond_check(const GridFunction& h, ZeroTolerance tol = {}) {
  if (h.dim() != 1) throw InputError("Dubois-Reymond check needs a scalar function");
  const GridFunction dh = nabla_derivative_fn(h);
  DuboisReymondResult out{true, 0.0, construct_violating_variation(dh, tol), 0.0};
  out.is_constant = !out.witness.has_value();
  if (out.witness) out.witness_value = witness_value(dh, out.witness->eta);
  const auto vals = h.values();
  const auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
  out.spread = *mx - *mn;
  return out;
}

}  // namespace nablavar
