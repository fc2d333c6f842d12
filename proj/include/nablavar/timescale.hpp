#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nablavar/errors.hpp"

namespace nablavar {

// Kind of the gap between two consecutive grid points.  A SCATTERED gap is a
// hole in the time scale; a DENSE_SAMPLE gap samples a continuum interval.
enum class GapKind { kScattered, kDenseSample };

enum class Side { kDense, kScattered };

struct PointClass {
  Side left;
  Side right;

  bool isolated() const { return left == Side::kScattered && right == Side::kScattered; }
  bool dense() const { return left == Side::kDense && right == Side::kDense; }
  friend bool operator==(const PointClass&, const PointClass&) = default;
};

// A time scale represented by a finite sorted grid.  Immutable once built.
//
// Calculus on SCATTERED gaps is exact; on DENSE_SAMPLE gaps it is the O(h)
// sampled counterpart.  The truncated grid uses rho(t_0) = t_0 and
// sigma(t_m) = t_m.
class TimeScale {
 public:
  TimeScale(std::vector<double> points, std::vector<GapKind> gaps,
            bool unbounded_above = false)
      : points_(std::move(points)),
        gaps_(std::move(gaps)),
        unbounded_above_(unbounded_above) {
    if (points_.size() < 2) {
      throw InvalidTimeScale("a time scale needs at least two grid points");
    }
    if (gaps_.size() + 1 != points_.size()) {
      throw InvalidTimeScale("expected " + std::to_string(points_.size() - 1) +
                             " gap kinds, got " + std::to_string(gaps_.size()));
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i])) {
        throw InvalidTimeScale("grid point " + std::to_string(i) + " is not finite");
      }
      if (i > 0 && !(points_[i - 1] < points_[i])) {
        throw InvalidTimeScale("grid points must be strictly increasing (index " +
                               std::to_string(i) + ")");
      }
    }
  }

  std::span<const double> points() const { return points_; }
  std::span<const GapKind> gaps() const { return gaps_; }
  bool unbounded_above() const { return unbounded_above_; }
  std::size_t size() const { return points_.size(); }
  std::size_t last() const { return points_.size() - 1; }
  double min() const { return points_.front(); }
  double max() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }

  TimeScale with_unbounded_above(bool flag = true) const {
    TimeScale copy = *this;
    copy.unbounded_above_ = flag;
    return copy;
  }

  bool contains(double t) const {
    return std::binary_search(points_.begin(), points_.end(), t);
  }

  // Exact lookup; no snapping to the nearest grid point.
  std::size_t index_of(double t) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), t);
    if (it == points_.end() || *it != t) throw PointNotInScale(t);
    return static_cast<std::size_t>(it - points_.begin());
  }

  bool left_scattered(std::size_t i) const {
    return i > 0 && gaps_[i - 1] == GapKind::kScattered;
  }
  bool left_dense_gap(std::size_t i) const {
    return i > 0 && gaps_[i - 1] == GapKind::kDenseSample;
  }
  bool right_scattered(std::size_t i) const {
    return i < last() && gaps_[i] == GapKind::kScattered;
  }

  std::size_t rho_index(std::size_t i) const { return left_scattered(i) ? i - 1 : i; }
  std::size_t sigma_index(std::size_t i) const { return right_scattered(i) ? i + 1 : i; }

  double rho_at(std::size_t i) const { return points_[rho_index(i)]; }
  double sigma_at(std::size_t i) const { return points_[sigma_index(i)]; }
  double nu_at(std::size_t i) const { return points_[i] - rho_at(i); }

  // Local step t_i - t_{i-1}: equals nu at left-scattered points and the
  // sample step at left-dense points.  Zero at the minimum.
  double step_at(std::size_t i) const { return i == 0 ? 0.0 : points_[i] - points_[i - 1]; }

  PointClass classify_at(std::size_t i) const {
    return {rho_index(i) == i ? Side::kDense : Side::kScattered,
            sigma_index(i) == i ? Side::kDense : Side::kScattered};
  }

  // The minimum is excluded from T_kappa iff it is right-scattered.
  bool in_kappa(std::size_t i) const { return i > 0 || !right_scattered(0); }
  std::size_t kappa_begin() const { return right_scattered(0) ? 1 : 0; }

  friend bool operator==(const TimeScale& a, const TimeScale& b) {
    return a.points_ == b.points_ && a.gaps_ == b.gaps_ &&
           a.unbounded_above_ == b.unbounded_above_;
  }

 private:
  std::vector<double> points_;
  std::vector<GapKind> gaps_;
  bool unbounded_above_;
};

inline double rho(const TimeScale& ts, double t) { return ts.rho_at(ts.index_of(t)); }
inline double sigma(const TimeScale& ts, double t) { return ts.sigma_at(ts.index_of(t)); }
inline double nu(const TimeScale& ts, double t) { return ts.nu_at(ts.index_of(t)); }
inline PointClass classify(const TimeScale& ts, double t) {
  return ts.classify_at(ts.index_of(t));
}

inline std::vector<double> kappa_set(const TimeScale& ts) {
  auto pts = ts.points();
  return {pts.begin() + static_cast<std::ptrdiff_t>(ts.kappa_begin()), pts.end()};
}

// ---------------------------------------------------------------------------
// Builders

inline TimeScale from_points(std::vector<double> points, std::vector<GapKind> gaps,
                             bool unbounded_above = false) {
  return TimeScale(std::move(points), std::move(gaps), unbounded_above);
}

// Z ∩ [a, b].
inline TimeScale integers(long a, long b) {
  if (b <= a) throw InvalidTimeScale("integers(a, b) needs a < b");
  std::vector<double> pts;
  for (long k = a; k <= b; ++k) pts.push_back(static_cast<double>(k));
  return TimeScale(std::move(pts), std::vector<GapKind>(static_cast<std::size_t>(b - a),
                                                        GapKind::kScattered));
}

// hZ shifted to start at a, truncated at b.
inline TimeScale uniform(double a, double b, double h) {
  if (!(h > 0.0) || !(b > a)) throw InvalidTimeScale("uniform(a, b, h) needs h > 0 and a < b");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
  if (count < 1) throw InvalidTimeScale("uniform(a, b, h): step larger than the interval");
  std::vector<double> pts(count + 1);
  for (std::size_t i = 0; i <= count; ++i) pts[i] = a + static_cast<double>(i) * h;
  return TimeScale(std::move(pts), std::vector<GapKind>(count, GapKind::kScattered));
}

// The continuum [a, b] sampled with n equal steps.
inline TimeScale sampled_interval(double a, double b, std::size_t n) {
  if (n < 1 || !(b > a)) throw InvalidTimeScale("sampled_interval(a, b, n) needs n >= 1 and a < b");
  std::vector<double> pts(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    pts[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
  }
  pts[n] = b;
  return TimeScale(std::move(pts), std::vector<GapKind>(n, GapKind::kDenseSample));
}

// {t0 q^k : k = 0 .. count-1}.
inline TimeScale q_scale(double q, double t0, std::size_t count) {
  if (!(q > 1.0) || !(t0 > 0.0) || count < 2) {
    throw InvalidTimeScale("q_scale(q, t0, count) needs q > 1, t0 > 0, count >= 2");
  }
  std::vector<double> pts(count);
  double t = t0;
  for (std::size_t k = 0; k < count; ++k, t *= q) pts[k] = t;
  return TimeScale(std::move(pts), std::vector<GapKind>(count - 1, GapKind::kScattered));
}

// Union of disjoint scales and isolated points.  Gaps inside each piece are
// kept; gaps between pieces are SCATTERED.  Pieces may touch at one shared
// endpoint, which is merged.
inline TimeScale unite(std::span<const TimeScale> scales,
                       std::span<const double> isolated_points = {}) {
  struct Piece {
    std::vector<double> pts;
    std::vector<GapKind> gaps;
  };
  std::vector<Piece> pieces;
  for (const auto& s : scales) {
    pieces.push_back({{s.points().begin(), s.points().end()}, {s.gaps().begin(), s.gaps().end()}});
  }
  for (double p : isolated_points) pieces.push_back({{p}, {}});
  if (pieces.empty()) throw InvalidTimeScale("union of nothing");
  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return a.pts.front() < b.pts.front(); });

  std::vector<double> pts = pieces.front().pts;
  std::vector<GapKind> gaps = pieces.front().gaps;
  for (std::size_t k = 1; k < pieces.size(); ++k) {
    const Piece& p = pieces[k];
    std::size_t start = 0;
    if (p.pts.front() < pts.back()) {
      throw InvalidTimeScale("union pieces overlap");
    }
    if (p.pts.front() == pts.back()) {
      start = 1;  // shared endpoint
    } else {
      gaps.push_back(GapKind::kScattered);
    }
    for (std::size_t i = start; i < p.pts.size(); ++i) {
      pts.push_back(p.pts[i]);
      if (i > 0) gaps.push_back(p.gaps[i - 1]);
    }
  }
  return TimeScale(std::move(pts), std::move(gaps));
}

inline const char* to_string(GapKind g) {
  return g == GapKind::kScattered ? "SCATTERED" : "DENSE_SAMPLE";
}

}  // namespace nablavar
