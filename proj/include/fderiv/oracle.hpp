#pragma once

// Reference derivatives independent of the filter engine: symbolic
// differentiation of expression trees, and Richardson extrapolation of
// one-sided difference quotients.

#include <cmath>
#include <string>
#include <vector>

#include "fderiv/error.hpp"
#include "fderiv/expr.hpp"
#include "fderiv/flimit.hpp"

namespace fderiv::oracle {

enum class Method { symbolic, richardson_right, richardson_left };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::symbolic: return "symbolic";
    case Method::richardson_right: return "richardson-right";
    case Method::richardson_left: return "richardson-left";
  }
  return "?";
}

struct OracleValue {
  double value = 0.0;
  Method method = Method::symbolic;
  double estimated_error = 0.0;
};

/// The oracle declines points where an abs/sign argument (or a min/max
/// argument difference) vanishes.
class NonSmoothPoint : public Error {
 public:
  using Error::Error;
};

inline constexpr double kKinkThreshold = 1e-12;

// ---------------------------------------------------------------------------
// Builders with constant folding

namespace build {

inline bool is_const(const Expr& e, double v) {
  auto c = e.as<Constant>();
  return c && c->value == v;
}
inline const Constant* as_const(const Expr& e) { return e.as<Constant>(); }

inline Expr num(double v) { return Expr::constant(v); }

inline Expr neg(const Expr& a) {
  if (auto c = as_const(a)) return num(-c->value);
  if (auto u = a.as<Unary>()) return u->child;
  return Expr::unary(UnaryOp::neg, a);
}

inline Expr add(const Expr& a, const Expr& b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (as_const(a) && as_const(b)) return num(as_const(a)->value + as_const(b)->value);
  return Expr::binary(BinaryOp::add, a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (is_const(b, 0)) return a;
  if (is_const(a, 0)) return neg(b);
  if (as_const(a) && as_const(b)) return num(as_const(a)->value - as_const(b)->value);
  return Expr::binary(BinaryOp::sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (is_const(a, 0) || is_const(b, 0)) return num(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (as_const(a) && as_const(b)) return num(as_const(a)->value * as_const(b)->value);
  return Expr::binary(BinaryOp::mul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  if (is_const(b, 1)) return a;
  if (is_const(a, 0)) return num(0);
  return Expr::binary(BinaryOp::div, a, b);
}

inline Expr pow(const Expr& a, const Expr& b) {
  if (is_const(b, 1)) return a;
  if (is_const(b, 0)) return num(1);
  return Expr::binary(BinaryOp::pow, a, b);
}

inline Expr call(Function fn, Expr a) { return Expr::call(fn, {std::move(a)}); }

}  // namespace build

inline bool depends_on(const Expr& e, const std::string& var) { return free_vars(e).count(var) > 0; }

/// Classical derivative of `e` with respect to `var`, node by node.
/// abs′(u) = sign(u)·u′ and sign′ = 0 hold away from zeros of u; min and max
/// go through min(a,b) = (a + b − |a − b|)/2.
inline Expr symbolic_derivative(const Expr& e, const std::string& var) {
  using namespace build;
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return num(0);
        } else if constexpr (std::is_same_v<T, Variable>) {
          return num(n.name == var ? 1 : 0);
        } else if constexpr (std::is_same_v<T, Unary>) {
          return neg(symbolic_derivative(n.child, var));
        } else if constexpr (std::is_same_v<T, Binary>) {
          const Expr& u = n.left;
          const Expr& v = n.right;
          const Expr du = symbolic_derivative(u, var);
          const Expr dv = symbolic_derivative(v, var);
          switch (n.op) {
            case BinaryOp::add: return add(du, dv);
            case BinaryOp::sub: return sub(du, dv);
            case BinaryOp::mul: return add(mul(du, v), mul(u, dv));
            case BinaryOp::div:
              if (!depends_on(u, var)) return neg(div(mul(u, dv), pow(v, num(2))));
              return div(sub(mul(du, v), mul(u, dv)), pow(v, num(2)));
            case BinaryOp::pow:
              if (!depends_on(v, var)) {
                Expr lowered = as_const(v) ? num(as_const(v)->value - 1) : sub(v, num(1));
                return mul(mul(v, pow(u, lowered)), du);
              }
              // (u^v)' = u^v · (v′ log u + v u′ / u)
              return mul(e, add(mul(dv, call(Function::log, u)), div(mul(v, du), u)));
          }
          throw Error("unsupported binary operator");
        } else {
          const Expr& u = n.args[0];
          const Expr du = symbolic_derivative(u, var);
          switch (n.fn) {
            case Function::abs: return mul(call(Function::sign, u), du);
            case Function::sign: return num(0);
            case Function::sin: return mul(call(Function::cos, u), du);
            case Function::cos: return neg(mul(call(Function::sin, u), du));
            case Function::tan: return div(du, pow(call(Function::cos, u), num(2)));
            case Function::exp: return mul(e, du);
            case Function::log: return div(du, u);
            case Function::sqrt: return div(du, mul(num(2), e));
            case Function::min:
            case Function::max: {
              const Expr& w = n.args[1];
              const Expr dw = symbolic_derivative(w, var);
              const Expr jump = mul(call(Function::sign, sub(u, w)), sub(du, dw));
              const Expr sum = add(du, dw);
              return div(n.fn == Function::min ? sub(sum, jump) : add(sum, jump), num(2));
            }
          }
          throw Error("unsupported function");
        }
      },
      e.node().data);
}

/// Throws NonSmoothPoint if some abs/sign argument, or min/max argument
/// difference, is within kKinkThreshold of zero at var = x0.
inline void require_smooth_at(const Expr& e, const std::string& var, double x0) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Unary>) {
          require_smooth_at(n.child, var, x0);
        } else if constexpr (std::is_same_v<T, Binary>) {
          require_smooth_at(n.left, var, x0);
          require_smooth_at(n.right, var, x0);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) require_smooth_at(a, var, x0);
          double gap = 0.0;
          if (n.fn == Function::abs || n.fn == Function::sign)
            gap = evaluate(n.args[0], var, x0);
          else if (n.fn == Function::min || n.fn == Function::max)
            gap = evaluate(n.args[0], var, x0) - evaluate(n.args[1], var, x0);
          else
            return;
          if (std::fabs(gap) < kKinkThreshold)
            throw NonSmoothPoint("non-smooth point: " + render(e) + " has a kink at " + format_number(x0));
        }
      },
      e.node().data);
}

/// Symbolic derivative evaluated at x0 (estimated_error = 0).
inline OracleValue symbolic_value(const Expr& e, const std::string& var, double x0) {
  require_smooth_at(e, var, x0);
  return {evaluate(symbolic_derivative(e, var), var, x0), Method::symbolic, 0.0};
}

enum class Side { right, left };

struct RichardsonConfig {
  double h0 = 0.1;
  int depth = 8;
};

/// Richardson extrapolation of one-sided quotients with h_j = h0·2^(−j).
/// The forward quotient's error has all integer powers of h, so column i
/// eliminates the h^i term.
template <RealFunction F>
OracleValue richardson_one_sided(const F& f, double x0, Side side, const RichardsonConfig& cfg = {}) {
  if (cfg.depth < 1 || !(cfg.h0 > 0.0)) throw ParameterError("Richardson needs depth >= 1 and h0 > 0");
  const double dir = side == Side::right ? 1.0 : -1.0;
  const double f0 = static_cast<double>(f(x0));
  std::vector<std::vector<double>> table(cfg.depth + 1);
  double h = cfg.h0;
  for (int j = 0; j <= cfg.depth; ++j, h *= 0.5) {
    const double step = dir * h;
    const double fx = static_cast<double>(f(x0 + step));
    if (!std::isfinite(fx)) throw DomainError("Richardson sample", x0 + step);
    table[j].push_back((fx - f0) / step);
    double factor = 1.0;
    for (int i = 1; i <= j; ++i) {
      factor *= 2.0;
      table[j].push_back(table[j][i - 1] + (table[j][i - 1] - table[j - 1][i - 1]) / (factor - 1.0));
    }
  }
  const double best = table[cfg.depth][cfg.depth];
  const double prev = cfg.depth > 0 ? table[cfg.depth - 1][cfg.depth - 1] : best;
  return {best, side == Side::right ? Method::richardson_right : Method::richardson_left, std::fabs(best - prev)};
}

}  // namespace fderiv::oracle
