#pragma once

// Expression-backed real functions, and a cancellation-free evaluator for the
// difference quotient (f(x0 + h) - f(x0)) / h over an expression tree.
//
// Subtracting two nearly equal doubles loses about log10(|f| / |h f'|) digits,
// which for h below 1e-8 swamps any sensible convergence tolerance. The
// evaluator below carries, for every node u, the triple
//   (u(x0), u(x0 + h), [u] = (u(x0 + h) - u(x0)) / h)
// and combines the divided differences with exact algebraic identities
// (e.g. [u v] = u1 [v] + v0 [u], [exp u] = exp(u0) [u] expm1(h [u]) / (h [u])),
// so no difference of nearly equal values is ever formed. Where no such
// identity applies (sign, branch switches of abs/min/max) the quotient is
// formed directly; those cases have no cancellation problem.

#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "fderiv/expr.hpp"

namespace fderiv {

namespace detail {

struct Divided {
  double v0;  // value at x0
  double v1;  // value at x0 + h
  double d;   // (v1 - v0) / h
};

inline double expm1_ratio(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }
inline double log1p_ratio(double z) { return z == 0.0 ? 1.0 : std::log1p(z) / z; }
inline double sinc(double z) { return z == 0.0 ? 1.0 : std::sin(z) / z; }

class DividedDifference {
 public:
  DividedDifference(std::string_view var, double x0, double h) : var_(var), x0_(x0), h_(h) {
    x1_ = x0 + h;
    if (!std::isfinite(x1_)) throw DomainError(std::string(var), x1_);
  }

  Divided eval(const Expr& e) const {
    Divided r = std::visit([&](const auto& n) { return node(e, n); }, e.node().data);
    if (!std::isfinite(r.d)) throw DomainError("difference quotient of " + render(e), x1_);
    return r;
  }

 private:
  Divided node(const Expr& e, const Constant& c) const {
    finite_or_throw(c.value, e, c.value);
    return {c.value, c.value, 0.0};
  }

  Divided node(const Expr&, const Variable& v) const {
    if (v.name != var_) throw UnboundVariable(v.name);
    return {x0_, x1_, 1.0};
  }

  Divided node(const Expr&, const Unary& u) const {
    Divided a = eval(u.child);
    return {-a.v0, -a.v1, -a.d};
  }

  Divided node(const Expr& e, const Binary& b) const {
    const Divided a = eval(b.left);
    const Divided c = eval(b.right);
    const double v0 = apply_binary(b.op, a.v0, c.v0, e);
    const double v1 = apply_binary(b.op, a.v1, c.v1, e);
    switch (b.op) {
      case BinaryOp::add: return {v0, v1, a.d + c.d};
      case BinaryOp::sub: return {v0, v1, a.d - c.d};
      case BinaryOp::mul: return {v0, v1, a.v1 * c.d + c.v0 * a.d};
      case BinaryOp::div: return {v0, v1, (a.d - v0 * c.d) / c.v1};
      case BinaryOp::pow: return {v0, v1, power(a, c, v0, v1)};
    }
    return {v0, v1, (v1 - v0) / h_};
  }

  double power(const Divided& base, const Divided& ex, double v0, double v1) const {
    if (ex.d == 0.0 && ex.v0 == ex.v1 && is_integer(ex.v0) && std::fabs(ex.v0) <= 64.0) {
      const int p = static_cast<int>(ex.v0);
      if (p == 0) return 0.0;
      const int q = p < 0 ? -p : p;
      // [u^q] = [u] * sum_{i<q} u1^i u0^(q-1-i)
      double sum = 0.0, p1 = 1.0;
      for (int i = 0; i < q; ++i) {
        sum += p1 * std::pow(base.v0, q - 1 - i);
        p1 *= base.v1;
      }
      const double dq = base.d * sum;
      if (p > 0) return dq;
      // [1/w] = -[w] / (w0 w1)
      const double w0 = std::pow(base.v0, q), w1 = std::pow(base.v1, q);
      return -(dq / w0) / w1;
    }
    if (base.v0 > 0.0 && base.v1 > 0.0) {
      const double z = h_ * base.d / base.v0;
      if (z > -1.0) {
        const double dlog = base.d / base.v0 * log1p_ratio(z);
        const double dw = ex.v1 * dlog + std::log(base.v0) * ex.d;
        return v0 * dw * expm1_ratio(h_ * dw);
      }
    }
    return (v1 - v0) / h_;
  }

  Divided node(const Expr& e, const Call& c) const {
    const Divided a = eval(c.args[0]);
    const Divided b = c.args.size() > 1 ? eval(c.args[1]) : Divided{0.0, 0.0, 0.0};
    const double v0 = apply_call(c.fn, a.v0, b.v0, e);
    const double v1 = apply_call(c.fn, a.v1, b.v1, e);
    const double direct = (v1 - v0) / h_;
    const double delta = h_ * a.d;
    switch (c.fn) {
      case Function::abs:
        if (a.v0 > 0.0 && a.v1 >= 0.0) return {v0, v1, a.d};
        if (a.v0 < 0.0 && a.v1 <= 0.0) return {v0, v1, -a.d};
        if (a.v0 == 0.0) return {v0, v1, sign_of(a.v1) * a.d};
        return {v0, v1, direct};
      case Function::sign:
        return {v0, v1, direct};
      case Function::sin:
        return {v0, v1, std::cos(a.v0 + delta / 2) * a.d * sinc(delta / 2)};
      case Function::cos:
        return {v0, v1, -std::sin(a.v0 + delta / 2) * a.d * sinc(delta / 2)};
      case Function::tan:
        return {v0, v1, a.d * sinc(delta) / (std::cos(a.v0) * std::cos(a.v1))};
      case Function::exp:
        return {v0, v1, v0 * a.d * expm1_ratio(delta)};
      case Function::log: {
        const double z = delta / a.v0;
        if (z <= -1.0) return {v0, v1, direct};
        return {v0, v1, a.d / a.v0 * log1p_ratio(z)};
      }
      case Function::sqrt: {
        const double s = v0 + v1;
        return {v0, v1, s == 0.0 ? 0.0 : a.d / s};
      }
      case Function::min:
      case Function::max: {
        const bool is_min = c.fn == Function::min;
        // Which argument realises the extremum at x0 and at x0 + h.
        const bool first0 = is_min ? a.v0 < b.v0 : a.v0 > b.v0;
        const bool second0 = is_min ? b.v0 < a.v0 : b.v0 > a.v0;
        const bool first1 = is_min ? a.v1 <= b.v1 : a.v1 >= b.v1;
        const bool second1 = is_min ? b.v1 <= a.v1 : b.v1 >= a.v1;
        if (first0 && first1) return {v0, v1, a.d};
        if (second0 && second1) return {v0, v1, b.d};
        if (a.v0 == b.v0) {
          // min(a1, b1) - a0 = min(h[a], h[b])
          const bool take_min = is_min == (h_ > 0.0);
          return {v0, v1, take_min ? std::fmin(a.d, b.d) : std::fmax(a.d, b.d)};
        }
        return {v0, v1, direct};
      }
    }
    return {v0, v1, direct};
  }

  std::string_view var_;
  double x0_;
  double h_;
  double x1_;
};

}  // namespace detail

/// (f(x0 + h) - f(x0)) / h for an expression in `var`, evaluated without
/// cancellation. h = 0 is a domain error.
inline double expr_difference_quotient(const Expr& e, std::string_view var, double x0, double h) {
  if (h == 0.0) throw DomainError("difference quotient (h = 0)", h);
  return detail::DividedDifference(var, x0, h).eval(e).d;
}

/// A real function of one variable described by an expression.
class ExprFunction {
 public:
  /// Uses the single free variable of `e` (or "x" for constants).
  explicit ExprFunction(Expr e) : expr_(std::move(e)) {
    auto vars = free_vars(expr_);
    if (vars.size() > 1) throw Error("expression has more than one free variable: " + render(expr_));
    var_ = vars.empty() ? "x" : *vars.begin();
  }

  ExprFunction(Expr e, std::string var) : expr_(std::move(e)), var_(std::move(var)) {
    for (const auto& v : free_vars(expr_))
      if (v != var_) throw UnboundVariable(v);
  }

  static ExprFunction parse(std::string_view text) { return ExprFunction(fderiv::parse(text)); }

  double operator()(double x) const { return evaluate(expr_, var_, x); }

  double quotient(double x0, double h) const { return expr_difference_quotient(expr_, var_, x0, h); }

  const Expr& expr() const { return expr_; }
  const std::string& var() const { return var_; }

  /// Same function written in terms of `name`.
  ExprFunction renamed(const std::string& name) const {
    if (name == var_) return *this;
    return ExprFunction(substitute(expr_, var_, Expr::variable(name)), name);
  }

 private:
  Expr expr_;
  std::string var_;
};

inline ExprFunction linear_combination(double alpha, const ExprFunction& f, double beta,
                                       const ExprFunction& g) {
  const ExprFunction gg = g.renamed(f.var());
  return ExprFunction(
      Expr::binary(BinaryOp::add, Expr::binary(BinaryOp::mul, Expr::constant(alpha), f.expr()),
                   Expr::binary(BinaryOp::mul, Expr::constant(beta), gg.expr())),
      f.var());
}

inline ExprFunction product(const ExprFunction& f, const ExprFunction& g) {
  return ExprFunction(Expr::binary(BinaryOp::mul, f.expr(), g.renamed(f.var()).expr()), f.var());
}

inline ExprFunction ratio(const ExprFunction& f, const ExprFunction& g) {
  return ExprFunction(Expr::binary(BinaryOp::div, f.expr(), g.renamed(f.var()).expr()), f.var());
}

}  // namespace fderiv
