#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "nablavar/errors.hpp"
#include "nablavar/timescale.hpp"

namespace nablavar {

// Real-vector samples of dimension d at every grid point of a time scale.
// Values are stored point-major: value(i)[c] == values()[i * d + c].
class GridFunction {
 public:
  GridFunction(std::shared_ptr<const TimeScale> ts, std::size_t dim, std::vector<double> values)
      : ts_(std::move(ts)), dim_(dim), values_(std::move(values)) {
    if (!ts_) throw InputError("grid function without a time scale");
    if (dim_ == 0) throw InputError("grid function dimension must be >= 1");
    if (values_.size() != ts_->size() * dim_) {
      throw InputError("grid function expects " + std::to_string(ts_->size() * dim_) +
                       " values, got " + std::to_string(values_.size()));
    }
  }

  static GridFunction zeros(std::shared_ptr<const TimeScale> ts, std::size_t dim) {
    const std::size_t n = ts->size() * dim;
    return GridFunction(std::move(ts), dim, std::vector<double>(n, 0.0));
  }

  static GridFunction sample(std::shared_ptr<const TimeScale> ts,
                             const std::function<double(double)>& f) {
    std::vector<double> v(ts->size());
    for (std::size_t i = 0; i < ts->size(); ++i) v[i] = f((*ts)[i]);
    return GridFunction(std::move(ts), 1, std::move(v));
  }

  const TimeScale& ts() const { return *ts_; }
  const std::shared_ptr<const TimeScale>& ts_ptr() const { return ts_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ts_->size(); }
  std::span<const double> values() const { return values_; }

  std::span<const double> value(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * dim_, dim_);
  }
  std::span<double> value(std::size_t i) {
    return std::span<double>(values_).subspan(i * dim_, dim_);
  }
  double scalar(std::size_t i) const { return values_[i * dim_]; }
  double& scalar(std::size_t i) { return values_[i * dim_]; }
  double at(std::size_t i, std::size_t c) const { return values_[i * dim_ + c]; }
  double& at(std::size_t i, std::size_t c) { return values_[i * dim_ + c]; }

  // Set when the value at the minimum was copied from its successor because
  // the minimum lies outside T_kappa (see nabla_derivative_fn).
  bool first_value_extrapolated() const { return first_extrapolated_; }
  void set_first_value_extrapolated(bool flag) { first_extrapolated_ = flag; }

  bool same_grid(const GridFunction& other) const {
    return ts_ == other.ts_ || *ts_ == *other.ts_;
  }

 private:
  std::shared_ptr<const TimeScale> ts_;
  std::size_t dim_;
  std::vector<double> values_;
  bool first_extrapolated_ = false;
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b) {
  if (!a.same_grid(b)) throw GridMismatch("grid functions live on different time scales");
  if (a.dim() != b.dim()) throw GridMismatch("grid functions have different dimensions");
}

// Pointwise combinations.  Each output value is one floating-point operation
// on the inputs, so identities such as (f+g)' = f' + g' are checked at the
// rounding level only.
inline GridFunction operator+(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f.values()[k] + g.values()[k];
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

inline GridFunction operator-(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f.values()[k] - g.values()[k];
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

inline GridFunction operator*(double alpha, const GridFunction& f) {
  std::vector<double> v(f.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = alpha * f.values()[k];
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

// Componentwise product and quotient.
inline GridFunction operator*(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f.values()[k] * g.values()[k];
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

inline GridFunction operator/(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f, g);
  std::vector<double> v(f.values().size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f.values()[k] / g.values()[k];
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

// f^rho: t -> f(rho(t)).
inline GridFunction compose_rho(const GridFunction& f) {
  const TimeScale& ts = f.ts();
  std::vector<double> v(f.values().size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto src = f.value(ts.rho_index(i));
    std::copy(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(i * f.dim()));
  }
  return GridFunction(f.ts_ptr(), f.dim(), std::move(v));
}

}  // namespace nablavar
