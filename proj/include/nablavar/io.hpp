#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nablavar/errors.hpp"
#include "nablavar/expr.hpp"
#include "nablavar/grid_function.hpp"
#include "nablavar/solver.hpp"
#include "nablavar/timescale.hpp"
#include "nablavar/variational.hpp"

namespace nablavar {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Flat INI file: [section] headers, key = value lines, ';' or '#' comments.
// Expression values may be quoted.
class Config {
 public:
  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  static Config parse(std::istream& in, const std::string& name = "<config>") {
    Config c;
    try {
      boost::property_tree::ini_parser::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(name + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  bool has_section(const std::string& section) const { return tree_.get_child_optional(section).has_value(); }

  void require_section(const std::string& section) const {
    if (!has_section(section)) throw ConfigError("config has no [" + section + "] section");
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return detail::unquote(*v);
  }

  std::string require(const std::string& section, const std::string& key) const {
    auto v = get(section, key);
    if (!v) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    return *v;
  }

  std::optional<double> get_double(const std::string& section, const std::string& key) const {
    const auto s = get(section, key);
    if (!s) return std::nullopt;
    const auto v = detail::to_double(*s);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError("[" + section + "] " + key + " = '" + *s + "' is not a finite number");
    }
    return v;
  }

  double require_double(const std::string& section, const std::string& key) const {
    const auto v = get_double(section, key);
    if (!v) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    return *v;
  }

  std::optional<long> get_integer(const std::string& section, const std::string& key) const {
    const auto v = get_double(section, key);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || std::abs(*v) > 9.0e15) {
      throw ConfigError("[" + section + "] " + key + " must be an integer");
    }
    return static_cast<long>(*v);
  }

  std::optional<std::vector<double>> get_list(const std::string& section, const std::string& key) const {
    const auto s = get(section, key);
    if (!s) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : detail::split(*s, ',')) {
      const auto v = detail::to_double(item);
      if (!v || !std::isfinite(*v)) {
        throw ConfigError("[" + section + "] " + key + ": '" + item + "' is not a finite number");
      }
      out.push_back(*v);
    }
    return out;
  }

  std::optional<bool> get_bool(const std::string& section, const std::string& key) const {
    const auto s = get(section, key);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    throw ConfigError("[" + section + "] " + key + " must be true or false");
  }

 private:
  boost::property_tree::ptree tree_;
};

inline std::shared_ptr<const TimeScale> read_timescale(const Config& cfg) {
  cfg.require_section("timescale");
  const std::string family = cfg.require("timescale", "family");
  auto num = [&](const char* key) { return cfg.require_double("timescale", key); };
  auto whole = [&](const char* key) {
    const auto v = cfg.get_integer("timescale", key);
    if (!v) throw ConfigError(std::string("missing key '") + key + "' in [timescale]");
    return *v;
  };
  TimeScale ts = [&] {
    if (family == "integers") return integers(whole("a"), whole("b"));
    if (family == "uniform") return uniform(num("a"), num("b"), num("h"));
    if (family == "sampled") {
      const long n = whole("n");
      if (n < 1) throw ConfigError("[timescale] n must be >= 1");
      return sampled_interval(num("a"), num("b"), static_cast<std::size_t>(n));
    }
    if (family == "q_scale") {
      const long count = whole("count");
      if (count < 2) throw ConfigError("[timescale] count must be >= 2");
      return q_scale(num("q"), num("t0"), static_cast<std::size_t>(count));
    }
    if (family == "points") {
      const auto pts = cfg.get_list("timescale", "points");
      if (!pts) throw ConfigError("missing key 'points' in [timescale]");
      std::vector<GapKind> gaps;
      if (const auto g = cfg.get("timescale", "gaps")) {
        for (const auto& item : detail::split(*g, ',')) {
          if (item == "SCATTERED") {
            gaps.push_back(GapKind::kScattered);
          } else if (item == "DENSE_SAMPLE") {
            gaps.push_back(GapKind::kDenseSample);
          } else {
            throw ConfigError("[timescale] unknown gap kind '" + item + "'");
          }
        }
      } else {
        gaps.assign(pts->empty() ? 0 : pts->size() - 1, GapKind::kScattered);
      }
      return from_points(*pts, gaps);
    }
    throw ConfigError("[timescale] unknown family '" + family + "'");
  }();
  if (cfg.get_bool("timescale", "unbounded_above").value_or(false)) ts = ts.with_unbounded_above();
  return std::make_shared<const TimeScale>(std::move(ts));
}

inline Problem read_problem(const Config& cfg, std::shared_ptr<const TimeScale> ts) {
  cfg.require_section("problem");
  const auto n = cfg.get_integer("problem", "n");
  if (!n) throw ConfigError("missing key 'n' in [problem]");
  if (*n < 1) throw ConfigError("[problem] n must be >= 1");
  const Expr L = parse(cfg.require("problem", "L"));
  const Expr g = parse(cfg.get("problem", "g").value_or("0"));
  const auto x_a = cfg.get_list("problem", "x_a");
  if (!x_a) throw ConfigError("missing key 'x_a' in [problem]");
  Sense sense = Sense::kMax;
  if (const auto s = cfg.get("problem", "sense")) {
    if (*s == "max" || *s == "MAX") {
      sense = Sense::kMax;
    } else if (*s == "min" || *s == "MIN") {
      sense = Sense::kMin;
    } else {
      throw ConfigError("[problem] sense must be max or min");
    }
  }
  return Problem(std::move(ts), static_cast<std::size_t>(*n), L, g, *x_a, sense);
}

inline SolveOptions read_solve_options(const Config& cfg) {
  SolveOptions o;
  if (!cfg.has_section("solve")) return o;
  if (const auto v = cfg.get_double("solve", "T_trunc")) o.T_trunc = *v;
  if (const auto t = cfg.get("solve", "terminal")) {
    if (*t == "free" || *t == "FREE") {
      o.terminal = TerminalMode::kFree;
    } else if (*t == "pinned" || *t == "PINNED") {
      o.terminal = TerminalMode::kPinned;
      o.terminal_value = cfg.require_double("solve", "terminal_value");
    } else {
      throw ConfigError("[solve] terminal must be free or pinned");
    }
  }
  if (const auto v = cfg.get_integer("solve", "max_iters")) o.max_iters = *v;
  if (const auto v = cfg.get_double("solve", "step_init")) o.step_init = *v;
  if (const auto v = cfg.get_double("solve", "grad_tol")) o.grad_tol = *v;
  if (const auto v = cfg.get_double("solve", "jitter")) o.jitter = *v;
  if (const auto v = cfg.get_integer("solve", "seed")) {
    if (*v < 0) throw ConfigError("[solve] seed must be non-negative");
    o.seed = static_cast<std::uint64_t>(*v);
  }
  detail::validate(o);
  return o;
}

// ---------------------------------------------------------------------------
// CSV files

namespace detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(name + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      const auto v = to_double(c);
      if (!v || !std::isfinite(*v)) {
        throw InputError(name + ":" + std::to_string(line_no) + ": '" + c + "' is not a finite number");
      }
      row.push_back(*v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InputError(name + ": empty CSV file");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in, path);
}

// Rows must list the grid points in order, bit-for-bit.
inline void check_grid_column(const CsvTable& t, const TimeScale& ts, const std::string& name) {
  if (t.rows.size() != ts.size()) {
    throw GridMismatch(name + ": " + std::to_string(t.rows.size()) + " rows for a grid of " +
                       std::to_string(ts.size()) + " points");
  }
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (t.rows[i][0] != ts[i]) {
      throw GridMismatch(name + ": row " + std::to_string(i + 1) + " has t = " + format_full(t.rows[i][0]) +
                         ", grid point is " + format_full(ts[i]));
    }
  }
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& os, const GridFunction& x) {
  os << 't';
  for (std::size_t c = 0; c < x.dim(); ++c) os << ",x" << c + 1;
  os << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << detail::format_full(x.ts()[i]);
    for (std::size_t c = 0; c < x.dim(); ++c) os << ',' << detail::format_full(x.at(i, c));
    os << '\n';
  }
}

inline GridFunction read_grid_function_csv(std::istream& in, std::shared_ptr<const TimeScale> ts,
                                           const std::string& name = "<csv>") {
  const auto t = detail::read_csv(in, name);
  if (t.header.size() < 2 || t.header[0] != "t") {
    throw InputError(name + ": header must start with 't' followed by value columns");
  }
  detail::check_grid_column(t, *ts, name);
  const std::size_t d = t.header.size() - 1;
  std::vector<double> v;
  v.reserve(ts->size() * d);
  for (const auto& row : t.rows) v.insert(v.end(), row.begin() + 1, row.end());
  return GridFunction(std::move(ts), d, std::move(v));
}

inline GridFunction read_grid_function_file(const std::string& path, std::shared_ptr<const TimeScale> ts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_grid_function_csv(in, std::move(ts), path);
}

inline Trajectory read_trajectory_file(const std::string& path, const Problem& p) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trajectory file '" + path + "'");
  const auto t = detail::read_csv(in, path);
  if (t.header.size() != p.n() + 1 || t.header[0] != "t") {
    throw InputError(path + ": header must be t,x1,...,x" + std::to_string(p.n()));
  }
  for (std::size_t c = 1; c <= p.n(); ++c) {
    if (t.header[c] != "x" + std::to_string(c)) {
      throw InputError(path + ": column " + std::to_string(c + 1) + " must be named x" + std::to_string(c));
    }
  }
  detail::check_grid_column(t, p.ts(), path);
  std::vector<double> v;
  for (const auto& row : t.rows) v.insert(v.end(), row.begin() + 1, row.end());
  return Trajectory(p, GridFunction(p.ts_ptr(), p.n(), std::move(v)));
}

}  // namespace nablavar
