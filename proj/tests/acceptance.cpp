// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nablavar/nablavar.hpp"
#include "nablavar/io.hpp"
#include "support.hpp"

using namespace nablavar;
using nablavar::testing::rel_err;
using nablavar::testing::ScaleKind;
using nablavar::testing::share;

namespace {

using TsPtr = std::shared_ptr<const TimeScale>;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Problem problem(const TsPtr& ts, const std::string& L, const std::string& g, double x_a) {
  return Problem(ts, 1, parse(L), parse(g), Vector{x_a});
}

// Error of `got` against `want`, relative to the largest magnitude among the
// quantities that were combined to produce them.
double scaled_err(double got, double want, std::initializer_list<double> terms) {
  double scale = std::max({1.0, std::abs(got), std::abs(want)});
  for (double t : terms) scale = std::max(scale, std::abs(t));
  return std::abs(got - want) / scale;
}

// --- 1 ----------------------------------------------------------------------

Verdict calculus_exactness() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  std::string where;
  auto note = [&](double e, const char* what) {
    if (e > worst) {
      worst = e;
      where = what;
    }
  };
  for (int trial = 0; trial < 50; ++trial) {
    const auto ts = nablavar::testing::random_scale(rng, ScaleKind::kScattered, 64);
    const GridFunction f = nablavar::testing::random_function(ts, rng);
    const GridFunction g = nablavar::testing::random_function(ts, rng);
    const double alpha = std::uniform_real_distribution<double>(-3, 3)(rng);
    const GridFunction df = nabla_derivative_fn(f), dg = nabla_derivative_fn(g);
    const GridFunction fr = compose_rho(f), gr = compose_rho(g);
    const GridFunction dsum = nabla_derivative_fn(f + g);
    const GridFunction dscaled = nabla_derivative_fn(alpha * f);
    const GridFunction dprod = nabla_derivative_fn(f * g);
    const GridFunction quotient = f / g;
    const GridFunction dquot = nabla_derivative_fn(quotient);
    for (std::size_t i = ts->kappa_begin(); i < ts->size(); ++i) {
      const double nu = ts->nu_at(i);
      note(scaled_err(dsum.scalar(i), df.scalar(i) + dg.scalar(i),
                      {df.scalar(i), dg.scalar(i), (f.scalar(i) + g.scalar(i)) / nu}),
           "sum rule");
      note(scaled_err(dscaled.scalar(i), alpha * df.scalar(i), {alpha * f.scalar(i) / nu}), "scalar rule");
      const double fg_nu = f.scalar(i) * g.scalar(i) / nu;
      note(scaled_err(dprod.scalar(i), df.scalar(i) * g.scalar(i) + fr.scalar(i) * dg.scalar(i),
                      {fg_nu, df.scalar(i) * g.scalar(i), fr.scalar(i) * dg.scalar(i)}),
           "product rule (f^rho form)");
      note(scaled_err(dprod.scalar(i), df.scalar(i) * gr.scalar(i) + f.scalar(i) * dg.scalar(i),
                      {fg_nu, df.scalar(i) * gr.scalar(i), f.scalar(i) * dg.scalar(i)}),
           "product rule (g^rho form)");
      const double den = g.scalar(i) * gr.scalar(i);
      if (den != 0.0) {
        const double want = (df.scalar(i) * g.scalar(i) - f.scalar(i) * dg.scalar(i)) / den;
        note(scaled_err(dquot.scalar(i), want, {quotient.scalar(i) / nu, df.scalar(i) * g.scalar(i) / den,
                                                f.scalar(i) * dg.scalar(i) / den}),
             "quotient rule");
      }
      note(scaled_err(local_rho_integral(f, (*ts)[i])[0], nu * f.scalar(i), {}), "local rho integral");
    }
    const std::size_t last = ts->last();
    note(scaled_err(nabla_integral(df, ts->min(), ts->max())[0], f.scalar(last) - f.scalar(0),
                    {f.scalar(last), f.scalar(0)}),
         "fundamental theorem");
    const double ibp = integration_by_parts_residual(f, g, ts->min(), ts->max());
    note(ibp / std::max({1.0, std::abs(f.scalar(last) * g.scalar(last)), std::abs(f.scalar(0) * g.scalar(0))}),
         "integration by parts");
  }
  return {worst <= 1e-10, "worst relative error " + fmt(worst) + (where.empty() ? "" : " (" + where + ")")};
}

// --- 2 ----------------------------------------------------------------------

double classical_limit_residual(std::size_t n) {
  const auto ts = share(sampled_interval(0, 1, n));
  const Problem p = problem(ts, "-(v1^2)", "0", 0.0);
  SolveOptions o;
  o.terminal = TerminalMode::kPinned;
  o.terminal_value = 1.0;
  const Trajectory x = direct_solve(p, o);
  double worst = 0.0;
  for (std::size_t i = 1; i < ts->size(); ++i) {
    if (!is_interior(*ts, i)) continue;
    worst = std::max(worst, std::abs(el_residual_pointwise(p, x, (*ts)[i], 1.0)[0]));
  }
  return worst;
}

Verdict classical_limit() {
  const double coarse = classical_limit_residual(64);
  const double fine = classical_limit_residual(128);
  const double ratio = coarse / fine;
  return {ratio >= 1.8, "max residual " + fmt(coarse) + " (h = 1/64) -> " + fmt(fine) + " (h = 1/128), ratio " +
                            fmt(ratio) + " (need >= 1.8)"};
}

// --- 3 ----------------------------------------------------------------------

// Tracking problems L = -w(t)(x1 - y(t-1))^2 - k(t)(v1 - (y(t) - y(t-1)))^2
// with y integer-valued in [-5, 5] on {0, ..., 5}.  L <= 0 with equality
// exactly on x = y, so the maximizer lies on the value grid {-5, ..., 5}.
struct Tracking {
  const char* y;       // y(t)
  const char* y_prev;  // y(t - 1)
  const char* w;
  const char* k;
};

const Tracking kTracking[] = {
    {"t", "t - 1", "1", "1"},
    {"-t", "1 - t", "exp(-t/5)", "1"},
    {"t*(5 - t)/2", "(t - 1)*(6 - t)/2", "0.5", "0.5"},
    {"3 - t", "4 - t", "1 + t", "2"},
    {"t*(t - 5)/2", "(t - 1)*(t - 6)/2", "2", "1"},
    {"(t - 2)^2 - 4", "(t - 3)^2 - 4", "0.25", "1"},
    {"(t - 1)*(t - 4)", "(t - 2)*(t - 5)", "exp(-t)", "1"},
    {"5 - 2*t", "7 - 2*t", "3", "0.1"},
    {"(t - 2)*(t - 3)*(t - 4)/6", "(t - 3)*(t - 4)*(t - 5)/6", "0.1 + t^2", "1"},
    {"1", "1", "1", "4"},
};

Verdict oracle_equivalence() {
  const auto z = share(integers(0, 5));
  std::vector<double> grid;
  for (int k = -5; k <= 5; ++k) grid.push_back(k);
  double worst_gap = 0.0;
  double worst_el = 0.0;
  bool bracketed = true;
  bool enumerated_all = true;
  for (std::size_t k = 0; k < std::size(kTracking); ++k) {
    const Tracking& tr = kTracking[k];
    const Expr y = parse(tr.y);
    auto y_at = [&](double t) { return evaluate(y, Env{t, {}, {}, 0.0}); };
    const std::string L = std::string("-(") + tr.w + ")*(x1 - (" + tr.y_prev + "))^2 - (" + tr.k + ")*(v1 - ((" +
                          tr.y + ") - (" + tr.y_prev + ")))^2";
    const Problem p = problem(z, L, "0", y_at(0));
    SolveOptions o;
    o.terminal = TerminalMode::kPinned;
    o.terminal_value = y_at(5);
    o.seed = k;
    const auto bf = brute_force_detailed(p, o, grid);
    const auto direct = direct_solve_detailed(p, o);
    // Four free coordinates (t = 1..4), each over the 11 grid values.
    if (bf.evaluated != 14641) enumerated_all = false;

    // Within grid resolution: the best grid point is no worse than the
    // direct solution rounded to the grid, and no better than the
    // continuous optimum.
    std::vector<double> rounded(z->size());
    for (std::size_t i = 0; i < z->size(); ++i) rounded[i] = std::clamp(std::round(direct.x.scalar(i)), -5.0, 5.0);
    rounded.front() = p.x_a()[0];
    rounded.back() = o.terminal_value;
    const double j_round = evaluate_functional_partial(p, Trajectory(p, GridFunction(z, 1, rounded)), 5);
    if (!(j_round <= bf.objective && bf.objective <= direct.objective + 1e-9)) bracketed = false;
    worst_gap = std::max(worst_gap, std::abs(direct.objective - bf.objective));

    const Trajectory xb(p, bf.x);
    for (std::size_t i = 1; i < z->size(); ++i) {
      if (!is_interior(*z, i)) continue;
      worst_el = std::max(worst_el, std::abs(finite_horizon_el_residual(p, xb, 5, (*z)[i])[0]));
    }
  }
  const bool pass = bracketed && enumerated_all && worst_el <= 1e-4;
  return {pass, std::string("10 instances, ") + (enumerated_all ? "11^4 assignments each, " : "wrong enumeration count, ") +
                    (bracketed ? "J(round(direct)) <= J_brute <= J_direct" : "objectives not bracketed") +
                    ", max |J_direct - J_brute| " + fmt(worst_gap) + ", max EL residual at brute-force optimum " +
                    fmt(worst_el)};
}

// --- 4 ----------------------------------------------------------------------

Verdict z_coupled() {
  const auto z = share(integers(0, 8));
  const Problem p = problem(z, "-(v1^2) - z", "x1^2", 1.0);
  SolveOptions o;
  o.grad_tol = 1e-10;
  const Trajectory x = direct_solve(p, o);
  const double T = 8;
  double pointwise = 0.0;
  double equivalence = 0.0;
  for (std::size_t i = 1; i < z->size(); ++i) {
    if (!is_interior(*z, i)) continue;
    const double t = (*z)[i];
    const double r = el_residual_pointwise(p, x, t, T)[0];
    pointwise = std::max(pointwise, std::abs(r));
    const double dI = (el_residual_integral(p, x, t, T)[0] - el_residual_integral(p, x, (*z)[i - 1], T)[0]) /
                      z->nu_at(i);
    equivalence = std::max(equivalence, rel_err(dI, -r));
  }
  const double ts[] = {T};
  const double spread = build_residual_report(p, x, ts, ElForm::kIntegral).max_spread();
  const bool pass = pointwise <= 1e-4 && spread <= 1e-4 && equivalence <= 1e-8;
  return {pass, "max pointwise residual " + fmt(pointwise) + ", integral-form spread " + fmt(spread) +
                    ", derivative equivalence " + fmt(equivalence)};
}

// --- 5 ----------------------------------------------------------------------

Verdict transversality_trend() {
  const auto z = share(integers(0, 30));
  const Problem p = problem(z, "exp(-t)*(-(v1^2) - x1^2)", "0", 1.0);
  const HorizonStudy study = horizon_study(p, {10, 20, 30}, SolveOptions{});
  bool decreasing = true;
  for (std::size_t k = 1; k < study.rows.size(); ++k) {
    decreasing = decreasing && std::abs(study.rows[k].trans_T1) < std::abs(study.rows[k - 1].trans_T1) &&
                 std::abs(study.rows[k].trans_T2) < std::abs(study.rows[k - 1].trans_T2);
  }
  const HorizonRow& last = study.rows.back();
  const bool small = std::abs(last.trans_T1) <= 1e-3 && std::abs(last.trans_T2) <= 1e-3;
  std::string trail;
  for (const auto& r : study.rows) trail += " " + fmt(std::abs(r.trans_T1)) + "/" + fmt(std::abs(r.trans_T2));
  return {study.transversality_applicable && decreasing && small,
          std::string("|T1|/|T2| at T_trunc 10, 20, 30:") + trail + (decreasing ? "" : ", not strictly decreasing")};
}

// --- 6 ----------------------------------------------------------------------

Verdict lemma_soundness() {
  std::mt19937_64 rng(606);
  const ScaleKind kinds[] = {ScaleKind::kScattered, ScaleKind::kDense, ScaleKind::kMixed};
  int cases = 0, found = 0, spikes = 0, spikes_exact = 0;
  double min_witness = std::numeric_limits<double>::infinity();
  while (cases < 200) {
    const auto ts = nablavar::testing::random_scale(rng, kinds[cases % 3], 64);
    GridFunction g = nablavar::testing::random_function(ts, rng);
    if (cases % 4 == 0) {
      // Sparse: nonzero at a few witnessable points only.
      std::vector<double> v(ts->size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (witnessable(*ts, i) && std::bernoulli_distribution(0.15)(rng)) v[i] = g.scalar(i);
      }
      g = GridFunction(ts, 1, v);
    }
    // "Nonzero" as a residual: some witnessable value clears the tolerance.
    const ZeroTolerance tol;
    double sup = 0.0;
    for (std::size_t i = 0; i < ts->size(); ++i) sup = std::max(sup, std::abs(g.scalar(i)));
    bool nonzero = false;
    for (std::size_t i = 0; i < ts->size(); ++i) {
      const double limit = ts->left_dense_gap(i) ? std::max(tol.scattered, tol.dense_relative * sup) : tol.scattered;
      if (witnessable(*ts, i) && std::abs(g.scalar(i)) > limit) nonzero = true;
    }
    if (!nonzero) continue;
    ++cases;
    const auto var = construct_violating_variation(g, tol);
    if (!var) continue;
    const double w = witness_value(g, var->eta);
    if (w > 0) ++found;
    min_witness = std::min(min_witness, w);
    if (var->case_tag == CaseTag::kScatteredSpike) {
      const std::size_t i = ts->index_of(var->t0);
      ++spikes;
      if (w == g.scalar(i) * g.scalar(i) * ts->nu_at(i)) ++spikes_exact;
    }
  }
  return {found == cases && spikes_exact == spikes && spikes > 0,
          std::to_string(found) + "/" + std::to_string(cases) + " with positive witness (min " + fmt(min_witness) +
              "), " + std::to_string(spikes_exact) + "/" + std::to_string(spikes) + " spikes equal g(t0)^2 nu(t0)"};
}

// --- 7 ----------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = "'" + std::string(NABLAVAR_CLI) + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict weak_max_margin() {
  const auto z = share(integers(0, 10));
  const char* L = "-(x1 + cos(pi*t))^2 - 0.5*(v1 - 2*cos(pi*t))^2";
  const Problem p = problem(z, L, "0", 1.0);
  const auto bf = brute_force_detailed(p, SolveOptions{}, {-1, -0.5, 0, 0.5, 1});
  const Trajectory star(p, bf.x);

  std::mt19937_64 rng(707);
  std::normal_distribution<double> noise(0.0, 0.5);
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    std::vector<double> v(bf.x.values().begin(), bf.x.values().end());
    for (std::size_t i = 1; i < v.size(); ++i) v[i] += noise(rng);
    worst = std::max(worst, weak_max_compare(p, Trajectory(p, GridFunction(z, 1, v)), star));
  }

  // Improved candidate: the optimum against a star with one coordinate moved.
  std::vector<double> moved(bf.x.values().begin(), bf.x.values().end());
  moved[3] += 0.5;
  const Trajectory worse(p, GridFunction(z, 1, moved));
  const double improved = weak_max_compare(p, star, worse);

  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "nablavar_acceptance";
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "problem.ini");
    cfg << "[timescale]\nfamily = integers\na = 0\nb = 10\n[problem]\nn = 1\nL = \"" << L
        << "\"\ng = \"0\"\nx_a = 1\n";
    std::ofstream a(dir / "optimum.csv");
    write_trajectory_csv(a, bf.x);
    std::ofstream b(dir / "worse.csv");
    write_trajectory_csv(b, worse.x());
  }
  const int code = run_cli("compare '" + (dir / "problem.ini").string() + "' --candidate '" +
                           (dir / "optimum.csv").string() + "' --star '" + (dir / "worse.csv").string() + "'");
  std::filesystem::remove_all(dir);

  return {worst <= 1e-9 && improved > 0 && code == 1,
          "brute force over " + std::to_string(bf.evaluated) + " trajectories, max perturbation margin " +
              fmt(worst) + ", improved candidate margin " + fmt(improved) + ", compare exit " + std::to_string(code)};
}

// --- 8 ----------------------------------------------------------------------

Verdict symbolic_derivatives() {
  nablavar::testing::ExprGenerator gen(808);
  const double h = 1e-6;
  int expressions = 0, compared = 0, redrawn = 0;
  double worst = 0.0;
  std::string worst_expr;
  while (expressions < 200) {
    const Expr e = gen();
    // Redraw the point until every partial can be compared; give up on the
    // expression after 50 draws.
    bool done = false;
    for (int attempt = 0; attempt < 50 && !done; ++attempt) {
      const auto env = nablavar::testing::RandomEnv::draw(gen.rng());
      std::vector<std::pair<double, double>> pairs;
      try {
        const double f = evaluate(e, env.env());
        if (!std::isfinite(f) || std::abs(f) > nablavar::testing::kDifferenceOracleRange) {
          ++redrawn;
          continue;
        }
        bool ok = true;
        for (Variable var : nablavar::testing::ExprGenerator::all_variables()) {
          const double sym = evaluate(differentiate(e, var), env.env());
          auto up = env, down = env;
          up.slot(var) += h;
          down.slot(var) -= h;
          const double fd = (evaluate(e, up.env()) - evaluate(e, down.env())) / (2 * h);
          if (!std::isfinite(sym) || !std::isfinite(fd)) {
            ok = false;
            break;
          }
          pairs.emplace_back(sym, fd);
        }
        if (!ok) {
          ++redrawn;
          continue;
        }
      } catch (const DomainError&) {
        ++redrawn;
        continue;
      }
      for (const auto& [sym, fd] : pairs) {
        const double err = rel_err(sym, fd);
        if (err > worst) {
          worst = err;
          worst_expr = to_string(e);
        }
        ++compared;
      }
      done = true;
    }
    if (done) ++expressions;
  }
  return {worst <= 1e-5, std::to_string(expressions) + " expressions, " + std::to_string(compared) +
                             " partials, worst relative error " + fmt(worst) + " (" + std::to_string(redrawn) +
                             " points redrawn)" + (worst > 1e-5 ? " at " + worst_expr : "")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1 calculus exactness", 5, calculus_exactness},
      {"2 classical-limit EL", 30, classical_limit},
      {"3 oracle equivalence", 60, oracle_equivalence},
      {"4 z-coupled EL", 60, z_coupled},
      {"5 transversality trend", 120, transversality_trend},
      {"6 fundamental-lemma soundness", 10, lemma_soundness},
      {"7 weak-maximizer margin", 30, weak_max_margin},
      {"8 symbolic-derivative oracle", 5, symbolic_derivatives},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s  %s: %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs,
                c.budget_s, in_time ? "" : " over time");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
