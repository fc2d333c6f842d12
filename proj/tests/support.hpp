#pragma once

// Random instances shared by the unit tests and the acceptance suite.

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "nablavar/expr.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/timescale.hpp"

namespace nablavar::testing {

inline std::shared_ptr<const TimeScale> share(TimeScale ts) {
  return std::make_shared<const TimeScale>(std::move(ts));
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Largest |f| at which a central difference with h = 1e-6 still resolves a
// derivative to 1e-5 relative: its rounding error is roughly 1e-10 |f| times
// the number of roundings in f.
inline constexpr double kDifferenceOracleRange = 1e4;

enum class ScaleKind { kScattered, kDense, kMixed };

// Between 2 and max_points grid points starting in [-2, 2].
inline std::shared_ptr<const TimeScale> random_scale(std::mt19937_64& rng, ScaleKind kind,
                                                     int max_points = 64) {
  std::uniform_int_distribution<int> count(2, max_points);
  std::uniform_real_distribution<double> step(0.05, 1.5);
  const int m = count(rng);
  std::vector<double> pts{std::uniform_real_distribution<double>(-2, 2)(rng)};
  std::vector<GapKind> gaps;
  const double h = std::uniform_real_distribution<double>(0.01, 0.1)(rng);
  bool dense_run = kind == ScaleKind::kDense;
  for (int i = 1; i < m; ++i) {
    if (kind == ScaleKind::kMixed && std::bernoulli_distribution(0.15)(rng)) dense_run = !dense_run;
    const bool dense = kind == ScaleKind::kDense || (kind == ScaleKind::kMixed && dense_run);
    pts.push_back(pts.back() + (dense ? h : step(rng)));
    gaps.push_back(dense ? GapKind::kDenseSample : GapKind::kScattered);
  }
  return share(from_points(pts, gaps));
}

// c0 + c1 t + c2 t^2 + c3 exp(k t).
inline GridFunction random_function(const std::shared_ptr<const TimeScale>& ts, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-2, 2);
  const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng), c3 = coef(rng), k = 0.3 * coef(rng);
  return GridFunction::sample(ts, [=](double t) { return c0 + c1 * t + c2 * t * t + c3 * std::exp(k * t); });
}

// Random tree over t, x1, x2, v1, v2, z with every operator of the language.
class ExprGenerator {
 public:
  explicit ExprGenerator(std::uint64_t seed) : rng_(seed) {}

  Expr operator()(int depth = 4) { return node(depth); }

  std::mt19937_64& rng() { return rng_; }

  static std::vector<Variable> all_variables() {
    return {Variable::t(), Variable::x(1), Variable::x(2), Variable::v(1), Variable::v(2), Variable::z()};
  }

 private:
  Expr leaf() {
    std::uniform_int_distribution<int> pick(0, 7);
    const int k = pick(rng_);
    if (k >= 6) return Expr::number(std::round(std::uniform_real_distribution<double>(-3, 3)(rng_) * 4) / 4);
    return Expr::variable(all_variables()[k]);
  }

  Expr node(int depth) {
    if (depth == 0 || std::bernoulli_distribution(0.25)(rng_)) return leaf();
    std::uniform_int_distribution<int> pick(0, 11);
    switch (pick(rng_)) {
      case 0: return Expr::binary(Op::kAdd, node(depth - 1), node(depth - 1));
      case 1: return Expr::binary(Op::kSub, node(depth - 1), node(depth - 1));
      case 2:
      case 3: return Expr::binary(Op::kMul, node(depth - 1), node(depth - 1));
      case 4: return Expr::binary(Op::kDiv, node(depth - 1), node(depth - 1));
      case 5: {
        const int e = std::uniform_int_distribution<int>(-2, 3)(rng_);
        return Expr::binary(Op::kPow, node(depth - 1), Expr::number(e));
      }
      case 6: return Expr::binary(Op::kPow, node(depth - 1), node(depth - 1));
      case 7: return Expr::unary(Op::kNeg, node(depth - 1));
      case 8: return Expr::unary(Op::kExp, node(depth - 1));
      case 9: return Expr::unary(Op::kLog, node(depth - 1));
      case 10: return Expr::unary(std::bernoulli_distribution(0.5)(rng_) ? Op::kSin : Op::kCos, node(depth - 1));
      default: return Expr::unary(Op::kSqrt, node(depth - 1));
    }
  }

  std::mt19937_64 rng_;
};

// Values of t, x, v, z for the generator's variables.
struct RandomEnv {
  double t;
  std::vector<double> x;
  std::vector<double> v;
  double z;

  Env env() const { return Env{t, x, v, z}; }

  double& slot(Variable var) {
    switch (var.kind) {
      case Variable::Kind::kTime: return t;
      case Variable::Kind::kState: return x[var.index - 1];
      case Variable::Kind::kRate: return v[var.index - 1];
      case Variable::Kind::kIntegral: return z;
    }
    return t;
  }

  static RandomEnv draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 2.0);
    return {u(rng), {u(rng), u(rng)}, {u(rng), u(rng)}, u(rng)};
  }
};

}  // namespace nablavar::testing
