#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nablavar/errors.hpp"

namespace nablavar {

// A free variable of a Lagrangian: t, x_i (state at rho(t)), v_i (nabla
// derivative), or z (the integral constraint).  State indices are 1-based.
struct Variable {
  enum class Kind { kTime, kState, kRate, kIntegral };
  Kind kind = Kind::kTime;
  unsigned index = 0;

  static Variable t() { return {Kind::kTime, 0}; }
  static Variable x(unsigned i) { return {Kind::kState, i}; }
  static Variable v(unsigned i) { return {Kind::kRate, i}; }
  static Variable z() { return {Kind::kIntegral, 0}; }

  std::string name() const {
    switch (kind) {
      case Kind::kTime: return "t";
      case Kind::kState: return "x" + std::to_string(index);
      case Kind::kRate: return "v" + std::to_string(index);
      case Kind::kIntegral: return "z";
    }
    return "?";
  }

  friend bool operator==(const Variable&, const Variable&) = default;
};

enum class Op { kNumber, kVariable, kAdd, kSub, kMul, kDiv, kPow, kNeg, kExp, kLog, kSin, kCos, kSqrt };

struct Env {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> v;
  double z = 0.0;
};

class Expr;
std::string to_string(const Expr& e);

// Immutable expression tree with shared subtrees.
class Expr {
 public:
  Expr() : node_(make_number(0.0)) {}

  static Expr number(double value) { return Expr(make_number(value)); }
  static Expr variable(Variable var) {
    auto n = std::make_shared<Node>();
    n->op = Op::kVariable;
    n->var = var;
    return Expr(std::move(n));
  }
  static Expr unary(Op op, Expr arg) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(arg.node_);
    return Expr(std::move(n));
  }
  static Expr binary(Op op, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs.node_);
    n->rhs = std::move(rhs.node_);
    return Expr(std::move(n));
  }

  Op op() const { return node_->op; }
  double value() const { return node_->number; }
  Variable var() const { return node_->var; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  bool is_number() const { return op() == Op::kNumber; }
  bool is_number(double v) const { return is_number() && value() == v; }

 private:
  struct Node {
    Op op = Op::kNumber;
    double number = 0.0;
    Variable var;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static std::shared_ptr<const Node> make_number(double value) {
    auto n = std::make_shared<Node>();
    n->op = Op::kNumber;
    n->number = value;
    return n;
  }

  std::shared_ptr<const Node> node_;
};

inline bool is_function(Op op) {
  return op == Op::kExp || op == Op::kLog || op == Op::kSin || op == Op::kCos || op == Op::kSqrt;
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kSqrt: return "sqrt";
    default: return "";
  }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline double lookup(const Env& env, Variable var) {
  switch (var.kind) {
    case Variable::Kind::kTime: return env.t;
    case Variable::Kind::kIntegral: return env.z;
    case Variable::Kind::kState:
      if (var.index == 0 || var.index > env.x.size()) {
        throw InputError("variable " + var.name() + " is not bound");
      }
      return env.x[var.index - 1];
    case Variable::Kind::kRate:
      if (var.index == 0 || var.index > env.v.size()) {
        throw InputError("variable " + var.name() + " is not bound");
      }
      return env.v[var.index - 1];
  }
  return 0.0;
}

// Returns a quiet NaN on success of the domain check, otherwise a message.
inline const char* apply_check(Op op, double a, double b) {
  switch (op) {
    case Op::kDiv: return b == 0.0 ? "division by zero" : nullptr;
    case Op::kLog: return a <= 0.0 ? "log of a non-positive value" : nullptr;
    case Op::kSqrt: return a < 0.0 ? "sqrt of a negative value" : nullptr;
    case Op::kPow:
      if (a < 0.0 && b != std::trunc(b)) return "negative base with non-integer exponent";
      if (a == 0.0 && b < 0.0) return "zero raised to a negative power";
      return nullptr;
    default: return nullptr;
  }
}

inline double apply(Op op, double a, double b) {
  switch (op) {
    case Op::kAdd: return a + b;
    case Op::kSub: return a - b;
    case Op::kMul: return a * b;
    case Op::kDiv: return a / b;
    case Op::kPow: return b == 2.0 ? a * a : std::pow(a, b);
    case Op::kNeg: return -a;
    case Op::kExp: return std::exp(a);
    case Op::kLog: return std::log(a);
    case Op::kSin: return std::sin(a);
    case Op::kCos: return std::cos(a);
    case Op::kSqrt: return std::sqrt(a);
    default: return 0.0;
  }
}

}  // namespace detail

inline double evaluate(const Expr& e, const Env& env) {
  switch (e.op()) {
    case Op::kNumber: return e.value();
    case Op::kVariable: return detail::lookup(env, e.var());
    default: break;
  }
  const double a = evaluate(e.lhs(), env);
  const bool binary = e.op() == Op::kAdd || e.op() == Op::kSub || e.op() == Op::kMul ||
                      e.op() == Op::kDiv || e.op() == Op::kPow;
  const double b = binary ? evaluate(e.rhs(), env) : 0.0;
  if (const char* msg = detail::apply_check(e.op(), a, b)) throw DomainError(msg, to_string(e));
  return detail::apply(e.op(), a, b);
}

// ---------------------------------------------------------------------------
// Simplifying constructors: constant folding and 0/1 absorption only.

namespace detail {

inline bool foldable(Op op, double a, double b, double& out) {
  if (apply_check(op, a, b)) return false;
  out = apply(op, a, b);
  return std::isfinite(out);
}

}  // namespace detail

inline Expr neg(const Expr& a) {
  if (a.is_number()) return Expr::number(-a.value());
  if (a.op() == Op::kNeg) return a.lhs();
  return Expr::unary(Op::kNeg, a);
}

inline Expr add(const Expr& a, const Expr& b) {
  double v;
  if (a.is_number() && b.is_number() && detail::foldable(Op::kAdd, a.value(), b.value(), v)) {
    return Expr::number(v);
  }
  if (a.is_number(0.0)) return b;
  if (b.is_number(0.0)) return a;
  return Expr::binary(Op::kAdd, a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
  double v;
  if (a.is_number() && b.is_number() && detail::foldable(Op::kSub, a.value(), b.value(), v)) {
    return Expr::number(v);
  }
  if (b.is_number(0.0)) return a;
  if (a.is_number(0.0)) return neg(b);
  return Expr::binary(Op::kSub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  double v;
  if (a.is_number() && b.is_number() && detail::foldable(Op::kMul, a.value(), b.value(), v)) {
    return Expr::number(v);
  }
  if (a.is_number(0.0) || b.is_number(0.0)) return Expr::number(0.0);
  if (a.is_number(1.0)) return b;
  if (b.is_number(1.0)) return a;
  if (a.is_number(-1.0)) return neg(b);
  if (b.is_number(-1.0)) return neg(a);
  return Expr::binary(Op::kMul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  double v;
  if (a.is_number() && b.is_number() && detail::foldable(Op::kDiv, a.value(), b.value(), v)) {
    return Expr::number(v);
  }
  if (a.is_number(0.0) && !b.is_number()) return Expr::number(0.0);
  if (b.is_number(1.0)) return a;
  return Expr::binary(Op::kDiv, a, b);
}

inline Expr pow(const Expr& a, const Expr& b) {
  double v;
  if (a.is_number() && b.is_number() && detail::foldable(Op::kPow, a.value(), b.value(), v)) {
    return Expr::number(v);
  }
  if (b.is_number(1.0)) return a;
  if (b.is_number(0.0)) return Expr::number(1.0);
  return Expr::binary(Op::kPow, a, b);
}

inline Expr apply_function(Op op, const Expr& a) {
  double v;
  if (a.is_number() && detail::foldable(op, a.value(), 0.0, v)) return Expr::number(v);
  return Expr::unary(op, a);
}

// ---------------------------------------------------------------------------
// Structural queries

inline bool depends_on(const Expr& e, Variable var) {
  switch (e.op()) {
    case Op::kNumber: return false;
    case Op::kVariable: return e.var() == var;
    case Op::kNeg:
    case Op::kExp:
    case Op::kLog:
    case Op::kSin:
    case Op::kCos:
    case Op::kSqrt: return depends_on(e.lhs(), var);
    default: return depends_on(e.lhs(), var) || depends_on(e.rhs(), var);
  }
}

inline void collect_variables(const Expr& e, std::vector<Variable>& out) {
  switch (e.op()) {
    case Op::kNumber: return;
    case Op::kVariable:
      for (const auto& v : out) {
        if (v == e.var()) return;
      }
      out.push_back(e.var());
      return;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kPow:
      collect_variables(e.lhs(), out);
      collect_variables(e.rhs(), out);
      return;
    default: collect_variables(e.lhs(), out);
  }
}

inline std::vector<Variable> variables(const Expr& e) {
  std::vector<Variable> out;
  collect_variables(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Symbolic differentiation

inline Expr differentiate(const Expr& e, Variable var) {
  switch (e.op()) {
    case Op::kNumber: return Expr::number(0.0);
    case Op::kVariable: return Expr::number(e.var() == var ? 1.0 : 0.0);
    case Op::kAdd: return add(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::kSub: return sub(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::kNeg: return neg(differentiate(e.lhs(), var));
    case Op::kMul: {
      const Expr u = e.lhs(), w = e.rhs();
      return add(mul(differentiate(u, var), w), mul(u, differentiate(w, var)));
    }
    case Op::kDiv: {
      const Expr u = e.lhs(), w = e.rhs();
      const Expr du = differentiate(u, var), dw = differentiate(w, var);
      return sub(div(du, w), div(mul(u, dw), pow(w, Expr::number(2.0))));
    }
    case Op::kPow: {
      const Expr u = e.lhs(), w = e.rhs();
      const bool base_varies = depends_on(u, var);
      const bool exp_varies = depends_on(w, var);
      if (!base_varies && !exp_varies) return Expr::number(0.0);
      if (!exp_varies) {
        // Power rule: w u^(w-1) u'.
        return mul(mul(w, pow(u, sub(w, Expr::number(1.0)))), differentiate(u, var));
      }
      if (!base_varies) {
        return mul(mul(e, apply_function(Op::kLog, u)), differentiate(w, var));
      }
      return differentiate(apply_function(Op::kExp, mul(w, apply_function(Op::kLog, u))), var);
    }
    case Op::kExp: return mul(e, differentiate(e.lhs(), var));
    case Op::kLog: return div(differentiate(e.lhs(), var), e.lhs());
    case Op::kSin:
      return mul(apply_function(Op::kCos, e.lhs()), differentiate(e.lhs(), var));
    case Op::kCos:
      return neg(mul(apply_function(Op::kSin, e.lhs()), differentiate(e.lhs(), var)));
    case Op::kSqrt:
      return div(differentiate(e.lhs(), var), mul(Expr::number(2.0), e));
  }
  return Expr::number(0.0);
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::kNumber: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    case Op::kAdd:
    case Op::kSub: return 1;
    case Op::kMul:
    case Op::kDiv: return 2;
    case Op::kNeg: return 3;
    case Op::kPow: return 4;
    default: return 5;
  }
}

inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void print(const Expr& e, std::string& out);

inline void print_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print(child, out);
  if (parens) out += ')';
}

inline void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::kNumber: out += format_number(e.value()); return;
    case Op::kVariable: out += e.var().name(); return;
    case Op::kNeg:
      out += '-';
      print_child(e.lhs(), precedence(e.lhs()) < 3, out);
      return;
    case Op::kPow:
      print_child(e.lhs(), precedence(e.lhs()) <= 4, out);
      out += '^';
      print_child(e.rhs(), precedence(e.rhs()) < 3, out);
      return;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const int p = precedence(e);
      const char sym = e.op() == Op::kAdd ? '+' : e.op() == Op::kSub ? '-' : e.op() == Op::kMul ? '*' : '/';
      print_child(e.lhs(), precedence(e.lhs()) < p, out);
      if (p == 1) {
        out += ' ';
        out += sym;
        out += ' ';
      } else {
        out += sym;
      }
      print_child(e.rhs(), precedence(e.rhs()) <= p, out);
      return;
    }
    default:
      out += function_name(e.op());
      out += '(';
      print(e.lhs(), out);
      out += ')';
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | name | func '(' expr ')' | '(' expr ')'

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr parse() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) {
      throw SyntaxError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    }
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                  src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void unexpected() {
    if (pos_ >= src_.size()) throw SyntaxError("unexpected end of input", pos_);
    throw SyntaxError(std::string("unexpected '") + src_[pos_] + "'", pos_);
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept('+')) {
        e = Expr::binary(Op::kAdd, e, parse_term());
      } else if (accept('-')) {
        e = Expr::binary(Op::kSub, e, parse_term());
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*')) {
        e = Expr::binary(Op::kMul, e, parse_unary());
      } else if (accept('/')) {
        e = Expr::binary(Op::kDiv, e, parse_unary());
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::unary(Op::kNeg, parse_unary());
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(Op::kPow, base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) unexpected();
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) unexpected();
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (is_ident_start(c)) return parse_name();
    unexpected();
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw SyntaxError("malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // not an exponent; leave 'e' for the caller
    }
    const std::string text(src_.substr(start, pos_ - start));
    const double v = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(v)) throw SyntaxError("number out of range", start);
    return Expr::number(v);
  }

  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  Expr parse_name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);

    for (Op f : {Op::kExp, Op::kLog, Op::kSin, Op::kCos, Op::kSqrt}) {
      if (name == function_name(f)) return parse_call(f, start);
    }
    if (name == "t") return Expr::variable(Variable::t());
    if (name == "z") return Expr::variable(Variable::z());
    if (name == "pi") return Expr::number(std::numbers::pi);
    if (name == "e") return Expr::number(std::numbers::e);
    if ((name[0] == 'x' || name[0] == 'v') && name.size() > 1 && name[1] >= '1' && name[1] <= '9') {
      unsigned idx = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (ec == std::errc() && ptr == name.data() + name.size()) {
        return Expr::variable(name[0] == 'x' ? Variable::x(idx) : Variable::v(idx));
      }
    }
    throw UnknownIdentifier("unknown identifier '" + std::string(name) + "'", start);
  }

  Expr parse_call(Op f, std::size_t start) {
    if (!accept('(')) {
      throw ArityError(std::string(function_name(f)) + " expects one argument", start);
    }
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == ')') {
      throw ArityError(std::string(function_name(f)) + " expects one argument, got none", pos_);
    }
    Expr arg = parse_expr();
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == ',') {
      throw ArityError(std::string(function_name(f)) + " expects one argument, got more", pos_);
    }
    if (!accept(')')) unexpected();
    return Expr::unary(f, arg);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view source) { return detail::Parser(source).parse(); }

}  // namespace nablavar
