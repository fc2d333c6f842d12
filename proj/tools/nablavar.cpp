#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "nablavar/fundamental.hpp"
#include "nablavar/io.hpp"
#include "nablavar/nabla_calc.hpp"
#include "nablavar/solver.hpp"
#include "nablavar/variational.hpp"

namespace nv = nablavar;

namespace {

enum Exit { kPass = 0, kToleranceFail = 1, kUsage = 2, kMath = 3, kLemmaTrivial = 4 };

std::string num(double v) { return nv::detail::format_number(v); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw nv::InputError("cannot write '" + path + "'");
  return out;
}

double report_double(const nv::Config& cfg, const char* key, double fallback) {
  return cfg.get_double("report", key).value_or(fallback);
}

int run_quad(const std::string& config, double from, double to) {
  const auto cfg = nv::Config::load(config);
  const auto ts = nv::read_timescale(cfg);
  cfg.require_section("quad");
  const nv::Expr f = nv::parse(cfg.require("quad", "f"));
  for (const auto& v : nv::variables(f)) {
    if (v.kind != nv::Variable::Kind::kTime) {
      throw nv::ConfigError("[quad] f may only use t, found '" + v.name() + "'");
    }
  }
  const auto g = nv::GridFunction::sample(ts, [&](double t) { return nv::evaluate(f, nv::Env{t, {}, {}, 0.0}); });
  const double value = nv::nabla_integral(g, from, to)[0];
  std::printf("%#.15g\n", value);
  return kPass;
}

int run_check_el(const std::string& config, const std::string& trajectory, const std::string& form_name,
                 std::optional<double> t_prime) {
  const auto cfg = nv::Config::load(config);
  const nv::Problem p = nv::read_problem(cfg, nv::read_timescale(cfg));
  const nv::Trajectory x = nv::read_trajectory_file(trajectory, p);
  const nv::ElForm form = form_name == "integral" ? nv::ElForm::kIntegral
                          : form_name == "finite" ? nv::ElForm::kFinite
                                                  : nv::ElForm::kPointwise;
  if (!t_prime) t_prime = cfg.get_double("report", "T_prime");
  const double tp = t_prime.value_or(p.ts().max());
  const std::vector<double> tps{tp};
  const nv::ResidualReport rep = nv::build_residual_report(p, x, tps, form);
  const double worst = form == nv::ElForm::kIntegral ? rep.max_spread() : rep.max_interior_el(p.ts());
  const double tol = report_double(cfg, "tolerance", 1e-6);

  const auto out_path = cfg.get("report", "report_out");
  if (out_path) {
    auto out = open_out(*out_path);
    nv::write_report_csv(out, rep, tp);
  } else {
    nv::write_report_csv(std::cout, rep, tp);
  }
  std::ostream& summary = out_path ? std::cout : std::cerr;
  summary << (form == nv::ElForm::kIntegral ? "integral-form spread" : "max residual") << " (" << form_name
          << ", T' = " << num(tp) << "): " << num(worst) << (worst <= tol ? " <= " : " > ") << "tolerance "
          << num(tol) << '\n';
  return worst <= tol ? kPass : kToleranceFail;
}

int run_solve(const std::string& config, std::optional<std::string> traj_out,
              std::optional<std::string> horizon_out) {
  const auto cfg = nv::Config::load(config);
  const nv::Problem p = nv::read_problem(cfg, nv::read_timescale(cfg));
  const nv::SolveOptions opts = nv::read_solve_options(cfg);
  std::vector<double> truncations =
      cfg.get_list("solve", "truncations")
          .value_or(std::vector<double>{std::isnan(opts.T_trunc) ? p.ts().max() : opts.T_trunc});
  if (truncations.empty()) throw nv::ConfigError("[solve] truncations is empty");
  const std::string method = cfg.get("solve", "method").value_or("direct");

  nv::HorizonStudy study{{}, opts.terminal == nv::TerminalMode::kFree, {}};
  if (method == "direct") {
    for (double T : truncations) {
      nv::SolveOptions o = opts;
      o.T_trunc = T;
      const auto sol = nv::direct_solve_detailed(p, o);
      if (!sol.converged) {
        std::cerr << "warning: T_trunc = " << num(T) << ": " << sol.stop_reason << " after " << sol.iterations
                  << " iterations (|grad| = " << num(sol.grad_norm) << ")\n";
      }
      study.rows.push_back(nv::horizon_row(p, nv::Trajectory(p, sol.x), T, sol.objective));
      study.solutions.push_back(sol.x);
    }
  } else if (method == "brute_force") {
    const auto grid = cfg.get_list("solve", "value_grid");
    if (!grid) throw nv::ConfigError("method brute_force needs [solve] value_grid");
    for (double T : truncations) {
      nv::SolveOptions o = opts;
      o.T_trunc = T;
      const auto sol = nv::brute_force_detailed(p, o, *grid);
      study.rows.push_back(nv::horizon_row(p, nv::Trajectory(p, sol.x), T, sol.objective));
      study.solutions.push_back(sol.x);
    }
  } else {
    throw nv::ConfigError("[solve] method must be direct or brute_force");
  }
  // Rows in increasing T_trunc order; the trajectory written is the one for
  // the largest truncation.
  std::vector<std::size_t> order(study.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return study.rows[a].T_trunc < study.rows[b].T_trunc; });
  nv::HorizonStudy sorted{{}, study.transversality_applicable, {}};
  for (std::size_t i : order) {
    sorted.rows.push_back(study.rows[i]);
    sorted.solutions.push_back(study.solutions[i]);
  }

  const std::string tpath = traj_out.value_or(cfg.get("report", "trajectory_out").value_or("trajectory.csv"));
  const std::string hpath = horizon_out.value_or(cfg.get("report", "horizon_out").value_or("horizon.csv"));
  {
    auto out = open_out(tpath);
    nv::write_trajectory_csv(out, sorted.solutions.back());
  }
  {
    auto out = open_out(hpath);
    nv::write_horizon_csv(out, sorted);
  }
  nv::write_horizon_csv(std::cout, sorted);
  if (!sorted.transversality_applicable) {
    std::cout << "transversality columns not applicable: terminal value is pinned\n";
  }
  std::cout << "wrote " << tpath << " and " << hpath << '\n';
  return kPass;
}

int run_lemma(const std::string& config, const std::string& function) {
  const auto cfg = nv::Config::load(config);
  const auto ts = nv::read_timescale(cfg);
  const nv::GridFunction g = nv::read_grid_function_file(function, ts);
  if (g.dim() != 1) throw nv::InputError(function + ": expected exactly one value column");
  nv::ZeroTolerance tol;
  tol.scattered = report_double(cfg, "zero_tol", tol.scattered);
  tol.dense_relative = report_double(cfg, "zero_tol_dense_relative", tol.dense_relative);
  const auto v = nv::construct_violating_variation(g, tol);
  if (!v) {
    std::cout << "no violating variation: g vanishes at tolerance wherever a variation can see it\n";
    return kLemmaTrivial;
  }
  std::cout << "case_tag: " << nv::to_string(v->case_tag) << '\n'
            << "t0: " << num(v->t0) << '\n'
            << "support: [" << num(v->support_lo) << ", " << num(v->support_hi) << "]\n"
            << "witness_value: " << num(nv::witness_value(g, v->eta)) << '\n';
  return kPass;
}

int run_compare(const std::string& config, const std::string& candidate, const std::string& star) {
  const auto cfg = nv::Config::load(config);
  const nv::Problem p = nv::read_problem(cfg, nv::read_timescale(cfg));
  const nv::Trajectory xc = nv::read_trajectory_file(candidate, p);
  const nv::Trajectory xs = nv::read_trajectory_file(star, p);
  const auto cmp = nv::weak_max_compare_detailed(p, xc, xs);
  const double tol = report_double(cfg, "margin_tolerance", 1e-9);
  std::cout << "margin: " << num(cmp.margin) << '\n'
            << "tail settled: " << (cmp.cauchy ? "yes" : "no") << '\n'
            << (cmp.margin <= tol ? "star is not beaten by the candidate" : "candidate beats star") << " (tolerance "
            << num(tol) << ")\n";
  return cmp.margin <= tol ? kPass : kToleranceFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nabla calculus on time scales and infinite-horizon variational problems"};
  app.require_subcommand(1);

  std::string config;
  double from = 0.0;
  double to = 0.0;
  auto* quad = app.add_subcommand("quad", "nabla integral of [quad] f between two grid points");
  quad->add_option("config", config, "config file")->required();
  quad->add_option("--from", from, "lower bound (grid point)")->required();
  quad->add_option("--to", to, "upper bound (grid point)")->required();

  std::string trajectory;
  std::string form = "pointwise";
  std::optional<double> t_prime;
  auto* check = app.add_subcommand("check-el", "Euler-Lagrange residual report for a trajectory");
  check->add_option("config", config, "config file")->required();
  check->add_option("--trajectory", trajectory, "trajectory CSV (t,x1,...,xn)")->required();
  check->add_option("--form", form, "pointwise, integral or finite")
      ->check(CLI::IsMember({"pointwise", "integral", "finite"}));
  check->add_option("--Tprime", t_prime, "truncation point (default: last grid point)");

  std::optional<std::string> traj_out;
  std::optional<std::string> horizon_out;
  auto* solve = app.add_subcommand("solve", "solve the truncated problem and run the horizon study");
  solve->add_option("config", config, "config file")->required();
  solve->add_option("--trajectory-out", traj_out, "trajectory CSV path");
  solve->add_option("--horizon-out", horizon_out, "horizon study CSV path");

  std::string function;
  auto* lemma = app.add_subcommand("lemma", "build a variation exposing a nonzero residual");
  lemma->add_option("config", config, "config file")->required();
  lemma->add_option("--function", function, "CSV with columns t,g")->required();

  std::string candidate;
  std::string star;
  auto* compare = app.add_subcommand("compare", "weak-maximizer margin of star against candidate");
  compare->add_option("config", config, "config file")->required();
  compare->add_option("--candidate", candidate, "candidate trajectory CSV")->required();
  compare->add_option("--star", star, "reference trajectory CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kUsage;
  }

  try {
    if (*quad) return run_quad(config, from, to);
    if (*check) return run_check_el(config, trajectory, form, t_prime);
    if (*solve) return run_solve(config, traj_out, horizon_out);
    if (*lemma) return run_lemma(config, function);
    if (*compare) return run_compare(config, candidate, star);
  } catch (const nv::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nv::MathError& e) {
    std::cerr << "math error: " << e.what() << '\n';
    return kMath;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kMath;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMath;
  }
  return kUsage;
}
