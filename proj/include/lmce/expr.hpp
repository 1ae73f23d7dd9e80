#ifndef LMCE_EXPR_HPP
#define LMCE_EXPR_HPP

#include <cctype>
#include <cmath>
#include <memory>
#include <string>

#include "lmce/errors.hpp"

namespace lmce {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression tree over x1, x2: sums, products, quotients, integer
/// powers, sin/cos/exp and constants. Small enough to differentiate exactly.
struct Expr {
  enum class Kind { constant, x1, x2, add, sub, mul, div, neg, pow, sin, cos, exp };
  Kind kind = Kind::constant;
  double value = 0.0; // constant
  int exponent = 0;   // pow
  ExprPtr a, b;

  double eval(double x1, double x2) const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::x1: return x1;
      case Kind::x2: return x2;
      case Kind::add: return a->eval(x1, x2) + b->eval(x1, x2);
      case Kind::sub: return a->eval(x1, x2) - b->eval(x1, x2);
      case Kind::mul: return a->eval(x1, x2) * b->eval(x1, x2);
      case Kind::div: return a->eval(x1, x2) / b->eval(x1, x2);
      case Kind::neg: return -a->eval(x1, x2);
      case Kind::pow: return std::pow(a->eval(x1, x2), exponent);
      case Kind::sin: return std::sin(a->eval(x1, x2));
      case Kind::cos: return std::cos(a->eval(x1, x2));
      case Kind::exp: return std::exp(a->eval(x1, x2));
    }
    return 0.0;
  }
};

inline ExprPtr expr_const(double c) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::constant;
  e->value = c;
  return e;
}

inline ExprPtr expr_var(int which) {
  auto e = std::make_shared<Expr>();
  e->kind = which == 1 ? Expr::Kind::x1 : Expr::Kind::x2;
  return e;
}

namespace detail {

inline bool is_const(const ExprPtr& e, double c) {
  return e->kind == Expr::Kind::constant && e->value == c;
}
inline bool is_const(const ExprPtr& e) { return e->kind == Expr::Kind::constant; }

inline ExprPtr node(Expr::Kind k, ExprPtr a, ExprPtr b = nullptr) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

} // namespace detail

// Constructors with constant folding and unit/zero elimination, so that
// symbolic derivatives stay compact.

inline ExprPtr expr_add(ExprPtr a, ExprPtr b) {
  using detail::is_const;
  if (is_const(a) && is_const(b)) return expr_const(a->value + b->value);
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  return detail::node(Expr::Kind::add, std::move(a), std::move(b));
}

inline ExprPtr expr_neg(ExprPtr a) {
  if (detail::is_const(a)) return expr_const(-a->value);
  if (a->kind == Expr::Kind::neg) return a->a;
  return detail::node(Expr::Kind::neg, std::move(a));
}

inline ExprPtr expr_sub(ExprPtr a, ExprPtr b) {
  using detail::is_const;
  if (is_const(a) && is_const(b)) return expr_const(a->value - b->value);
  if (is_const(b, 0)) return a;
  if (is_const(a, 0)) return expr_neg(std::move(b));
  return detail::node(Expr::Kind::sub, std::move(a), std::move(b));
}

inline ExprPtr expr_mul(ExprPtr a, ExprPtr b) {
  using detail::is_const;
  if (is_const(a) && is_const(b)) return expr_const(a->value * b->value);
  if (is_const(a, 0) || is_const(b, 0)) return expr_const(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  return detail::node(Expr::Kind::mul, std::move(a), std::move(b));
}

inline ExprPtr expr_div(ExprPtr a, ExprPtr b) {
  using detail::is_const;
  if (is_const(b, 0)) throw ValidationError("expr.division_by_zero", "constant divisor is zero");
  if (is_const(a) && is_const(b)) return expr_const(a->value / b->value);
  if (is_const(a, 0)) return expr_const(0);
  if (is_const(b, 1)) return a;
  return detail::node(Expr::Kind::div, std::move(a), std::move(b));
}

inline ExprPtr expr_pow(ExprPtr a, int n) {
  if (n == 0) return expr_const(1);
  if (n == 1) return a;
  if (detail::is_const(a)) return expr_const(std::pow(a->value, n));
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::pow;
  e->exponent = n;
  e->a = std::move(a);
  return e;
}

inline ExprPtr expr_sin(ExprPtr a) {
  if (detail::is_const(a)) return expr_const(std::sin(a->value));
  return detail::node(Expr::Kind::sin, std::move(a));
}
inline ExprPtr expr_cos(ExprPtr a) {
  if (detail::is_const(a)) return expr_const(std::cos(a->value));
  return detail::node(Expr::Kind::cos, std::move(a));
}
inline ExprPtr expr_exp(ExprPtr a) {
  if (detail::is_const(a)) return expr_const(std::exp(a->value));
  return detail::node(Expr::Kind::exp, std::move(a));
}

/// Exact partial derivative with respect to x1 (which = 1) or x2 (which = 2).
inline ExprPtr derivative(const ExprPtr& e, int which) {
  switch (e->kind) {
    case Expr::Kind::constant: return expr_const(0);
    case Expr::Kind::x1: return expr_const(which == 1 ? 1 : 0);
    case Expr::Kind::x2: return expr_const(which == 2 ? 1 : 0);
    case Expr::Kind::add: return expr_add(derivative(e->a, which), derivative(e->b, which));
    case Expr::Kind::sub: return expr_sub(derivative(e->a, which), derivative(e->b, which));
    case Expr::Kind::mul:
      return expr_add(expr_mul(derivative(e->a, which), e->b),
                      expr_mul(e->a, derivative(e->b, which)));
    case Expr::Kind::div:
      return expr_div(expr_sub(expr_mul(derivative(e->a, which), e->b),
                               expr_mul(e->a, derivative(e->b, which))),
                      expr_pow(e->b, 2));
    case Expr::Kind::neg: return expr_neg(derivative(e->a, which));
    case Expr::Kind::pow:
      return expr_mul(expr_mul(expr_const(e->exponent), expr_pow(e->a, e->exponent - 1)),
                      derivative(e->a, which));
    case Expr::Kind::sin: return expr_mul(expr_cos(e->a), derivative(e->a, which));
    case Expr::Kind::cos: return expr_neg(expr_mul(expr_sin(e->a), derivative(e->a, which)));
    case Expr::Kind::exp: return expr_mul(e, derivative(e->a, which));
  }
  return expr_const(0);
}

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(const std::string& src) : src_(src) {}

  ExprPtr parse() {
    ExprPtr e = sum();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("expr.parse_error",
                          what + " at position " + std::to_string(pos_) + " in \"" + src_ + "\"");
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  ExprPtr sum() {
    ExprPtr e = product();
    for (;;) {
      if (eat('+')) e = expr_add(e, product());
      else if (eat('-')) e = expr_sub(e, product());
      else return e;
    }
  }

  ExprPtr product() {
    ExprPtr e = factor();
    for (;;) {
      if (eat('*')) e = expr_mul(e, factor());
      else if (eat('/')) e = expr_div(e, factor());
      else return e;
    }
  }

  ExprPtr factor() {
    if (eat('-')) return expr_neg(factor());
    ExprPtr e = primary();
    if (eat('^')) {
      skip_space();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ == start) fail("exponent must be a nonnegative integer");
      e = expr_pow(e, std::stoi(src_.substr(start, pos_ - start)));
    }
    return e;
  }

  ExprPtr primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return word();
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr number() {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(src_.substr(pos_), &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ += used;
    return expr_const(v);
  }

  ExprPtr word() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name = src_.substr(start, pos_ - start);
    if (name == "x1") return expr_var(1);
    if (name == "x2") return expr_var(2);
    if (name == "pi") return expr_const(3.14159265358979323846);
    if (name == "sin" || name == "cos" || name == "exp") {
      if (!eat('(')) fail("expected '(' after function name");
      ExprPtr arg = sum();
      if (!eat(')')) fail("expected ')'");
      if (name == "sin") return expr_sin(arg);
      if (name == "cos") return expr_cos(arg);
      return expr_exp(arg);
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  const std::string& src_;
  std::size_t pos_ = 0;
};

} // namespace detail

/// Parse "0.5*pi + 0.2*sin(pi*x1)*x2^2" style expressions; throws
/// ValidationError("expr.parse_error") with the offending position.
inline ExprPtr parse_expression(const std::string& src) {
  return detail::ExprParser(src).parse();
}

} // namespace lmce

#endif
