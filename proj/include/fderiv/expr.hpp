#pragma once

// Expression trees for real functions of one real variable: parsing,
// canonical rendering and checked double-precision evaluation.
//
// Grammar:
//   expr   := term (("+" | "-") term)*
//   term   := factor (("*" | "/") factor)*
//   factor := unary ("^" factor)?          right-associative
//   unary  := "-" unary | atom
//   atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)? ")" | "(" expr ")"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fderiv/error.hpp"

namespace fderiv {

enum class UnaryOp { neg };
enum class BinaryOp { add, sub, mul, div, pow };
enum class Function { abs, sign, sin, cos, tan, exp, log, sqrt, min, max };

inline constexpr std::string_view function_name(Function fn) {
  switch (fn) {
    case Function::abs: return "abs";
    case Function::sign: return "sign";
    case Function::sin: return "sin";
    case Function::cos: return "cos";
    case Function::tan: return "tan";
    case Function::exp: return "exp";
    case Function::log: return "log";
    case Function::sqrt: return "sqrt";
    case Function::min: return "min";
    case Function::max: return "max";
  }
  return "?";
}

inline constexpr std::size_t function_arity(Function fn) {
  return (fn == Function::min || fn == Function::max) ? 2 : 1;
}

inline std::optional<Function> function_from_name(std::string_view name) {
  static constexpr Function all[] = {Function::abs, Function::sign, Function::sin, Function::cos,
                                     Function::tan, Function::exp,  Function::log, Function::sqrt,
                                     Function::min, Function::max};
  for (Function fn : all)
    if (function_name(fn) == name) return fn;
  return std::nullopt;
}

inline constexpr char binary_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return '+';
    case BinaryOp::sub: return '-';
    case BinaryOp::mul: return '*';
    case BinaryOp::div: return '/';
    case BinaryOp::pow: return '^';
  }
  return '?';
}

struct Node;

/// Immutable, cheaply copyable handle to an expression tree.
class Expr {
 public:
  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr unary(UnaryOp op, Expr child);
  static Expr binary(BinaryOp op, Expr left, Expr right);
  static Expr call(Function fn, std::vector<Expr> args);

  const Node& node() const { return *node_; }

  template <class T>
  const T* as() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Constant {
  double value;
};
struct Variable {
  std::string name;
};
struct Unary {
  UnaryOp op;
  Expr child;
};
struct Binary {
  BinaryOp op;
  Expr left;
  Expr right;
};
struct Call {
  Function fn;
  std::vector<Expr> args;
};

struct Node {
  std::variant<Constant, Variable, Unary, Binary, Call> data;
};

inline Expr Expr::constant(double value) {
  return Expr(std::make_shared<const Node>(Node{Constant{value}}));
}
inline Expr Expr::variable(std::string name) {
  return Expr(std::make_shared<const Node>(Node{Variable{std::move(name)}}));
}
inline Expr Expr::unary(UnaryOp op, Expr child) {
  return Expr(std::make_shared<const Node>(Node{Unary{op, std::move(child)}}));
}
inline Expr Expr::binary(BinaryOp op, Expr left, Expr right) {
  return Expr(std::make_shared<const Node>(Node{Binary{op, std::move(left), std::move(right)}}));
}
inline Expr Expr::call(Function fn, std::vector<Expr> args) {
  if (args.size() != function_arity(fn))
    throw Error(std::string(function_name(fn)) + " takes " + std::to_string(function_arity(fn)) +
                " argument(s), got " + std::to_string(args.size()));
  return Expr(std::make_shared<const Node>(Node{Call{fn, std::move(args)}}));
}

template <class T>
const T* Expr::as() const {
  return std::get_if<T>(&node_->data);
}

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node_->data;
  const auto& y = b.node_->data;
  if (x.index() != y.index()) return false;
  return std::visit(
      [&](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const T& rhs = std::get<T>(y);
        if constexpr (std::is_same_v<T, Constant>) {
          return lhs.value == rhs.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return lhs.name == rhs.name;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return lhs.op == rhs.op && lhs.child == rhs.child;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return lhs.op == rhs.op && lhs.left == rhs.left && lhs.right == rhs.right;
        } else {
          return lhs.fn == rhs.fn && lhs.args == rhs.args;
        }
      },
      x);
}

// ---------------------------------------------------------------------------
// Rendering

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Canonical printer. Binary and unary children are parenthesised, so
/// parse(render(e)) reproduces every tree that parse can produce.
inline std::string render(const Expr& e) {
  auto wrapped = [](const Expr& child) {
    if (child.as<Binary>() || child.as<Unary>()) return "(" + render(child) + ")";
    return render(child);
  };
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return format_number(n.value);
        } else if constexpr (std::is_same_v<T, Variable>) {
          return n.name;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return "-" + wrapped(n.child);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return wrapped(n.left) + " " + binary_symbol(n.op) + " " + wrapped(n.right);
        } else {
          std::string out(function_name(n.fn));
          out += "(";
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ", ";
            out += render(n.args[i]);
          }
          return out + ")";
        }
      },
      e.node().data);
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse_expr();
    if (peek() != '\0') fail("operator or end of input");
    return e;
  }

 private:
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  std::size_t skip_ws(std::size_t i) const {
    while (i < text_.size() &&
           (text_[i] == ' ' || text_[i] == '\t' || text_[i] == '\n' || text_[i] == '\r'))
      ++i;
    return i;
  }

  char peek() const {
    std::size_t i = skip_ws(end_);
    return i < text_.size() ? text_[i] : '\0';
  }

  // Consumes a single-character token known to be next.
  void take() { end_ = skip_ws(end_) + 1; }

  [[noreturn]] void fail(std::string expected) const { throw ParseError(end_, std::move(expected)); }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (char c = peek(); c == '+' || c == '-'; c = peek()) {
      take();
      lhs = Expr::binary(c == '+' ? BinaryOp::add : BinaryOp::sub, lhs, parse_term());
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    for (char c = peek(); c == '*' || c == '/'; c = peek()) {
      take();
      lhs = Expr::binary(c == '*' ? BinaryOp::mul : BinaryOp::div, lhs, parse_factor());
    }
    return lhs;
  }

  Expr parse_factor() {
    Expr base = parse_unary();
    if (peek() == '^') {
      take();
      return Expr::binary(BinaryOp::pow, base, parse_factor());
    }
    return base;
  }

  Expr parse_unary() {
    if (peek() == '-') {
      take();
      return Expr::unary(UnaryOp::neg, parse_unary());
    }
    return parse_atom();
  }

  Expr parse_atom() {
    const std::size_t start = skip_ws(end_);
    const char c = peek();
    if (is_digit(c) || c == '.') return parse_number(start);
    if (is_ident_start(c)) return parse_identifier(start);
    if (c == '(') {
      take();
      Expr inner = parse_expr();
      if (peek() != ')') fail("')'");
      take();
      return inner;
    }
    fail("number, identifier, '(' or '-'");
  }

  Expr parse_number(std::size_t start) {
    std::size_t i = start;
    bool digits = false;
    while (i < text_.size() && is_digit(text_[i])) ++i, digits = true;
    if (i < text_.size() && text_[i] == '.') {
      ++i;
      while (i < text_.size() && is_digit(text_[i])) ++i, digits = true;
    }
    if (!digits) fail("digit");
    if (i < text_.size() && (text_[i] == 'e' || text_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < text_.size() && (text_[j] == '+' || text_[j] == '-')) ++j;
      if (j >= text_.size() || !is_digit(text_[j])) {
        end_ = j;
        fail("exponent digits");
      }
      while (j < text_.size() && is_digit(text_[j])) ++j;
      i = j;
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + i, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + i) fail("representable number");
    end_ = i;
    return Expr::constant(value);
  }

  Expr parse_identifier(std::size_t start) {
    std::size_t i = start + 1;
    while (i < text_.size() && (is_ident_start(text_[i]) || is_digit(text_[i]))) ++i;
    std::string name(text_.substr(start, i - start));
    end_ = i;
    auto fn = function_from_name(name);
    if (!fn) {
      if (peek() == '(') fail("known function name (abs, sign, sin, cos, tan, exp, log, sqrt, min, max)");
      return Expr::variable(std::move(name));
    }
    if (peek() != '(') fail("'(' after function name");
    take();
    std::vector<Expr> args;
    args.push_back(parse_expr());
    if (peek() == ',') {
      take();
      args.push_back(parse_expr());
    }
    if (peek() != ')') fail(args.size() < function_arity(*fn) ? "','" : "')'");
    if (args.size() != function_arity(*fn)) fail("',' and a second argument");
    take();
    return Expr::call(*fn, std::move(args));
  }

  std::string_view text_;
  std::size_t end_ = 0;  // one past the last accepted token
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse_all(); }

// ---------------------------------------------------------------------------
// Queries

inline void collect_vars(const Expr& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect_vars(n.child, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_vars(n.left, out);
          collect_vars(n.right, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) collect_vars(a, out);
        }
      },
      e.node().data);
}

inline std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

/// Replaces every occurrence of variable `name` by `replacement`.
inline Expr substitute(const Expr& e, const std::string& name, const Expr& replacement) {
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return e;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return n.name == name ? replacement : e;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return Expr::unary(n.op, substitute(n.child, name, replacement));
        } else if constexpr (std::is_same_v<T, Binary>) {
          return Expr::binary(n.op, substitute(n.left, name, replacement),
                              substitute(n.right, name, replacement));
        } else {
          std::vector<Expr> args;
          for (const auto& a : n.args) args.push_back(substitute(a, name, replacement));
          return Expr::call(n.fn, std::move(args));
        }
      },
      e.node().data);
}

// ---------------------------------------------------------------------------
// Evaluation

using Bindings = std::map<std::string, double, std::less<>>;

namespace detail {

inline double finite_or_throw(double v, const Expr& where, double argument) {
  if (!std::isfinite(v)) throw DomainError(render(where), argument);
  return v;
}

inline double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

/// Checked binary operation. `where` names the node for error reports.
inline double apply_binary(BinaryOp op, double a, double b, const Expr& where) {
  double r = 0.0;
  switch (op) {
    case BinaryOp::add: r = a + b; break;
    case BinaryOp::sub: r = a - b; break;
    case BinaryOp::mul: r = a * b; break;
    case BinaryOp::div:
      if (b == 0.0) throw DomainError(render(where), b);
      r = a / b;
      break;
    case BinaryOp::pow:
      if (a < 0.0 && !is_integer(b)) throw DomainError(render(where), a);
      if (a == 0.0 && b < 0.0) throw DomainError(render(where), a);
      r = std::pow(a, b);
      break;
  }
  return finite_or_throw(r, where, op == BinaryOp::div ? b : a);
}

/// Checked elementary function.
inline double apply_call(Function fn, double a, double b, const Expr& where) {
  double r = 0.0;
  switch (fn) {
    case Function::abs: r = std::fabs(a); break;
    case Function::sign: r = sign_of(a); break;
    case Function::sin: r = std::sin(a); break;
    case Function::cos: r = std::cos(a); break;
    case Function::tan: r = std::tan(a); break;
    case Function::exp: r = std::exp(a); break;
    case Function::log:
      if (a <= 0.0) throw DomainError(render(where), a);
      r = std::log(a);
      break;
    case Function::sqrt:
      if (a < 0.0) throw DomainError(render(where), a);
      r = std::sqrt(a);
      break;
    case Function::min: r = std::fmin(a, b); break;
    case Function::max: r = std::fmax(a, b); break;
  }
  return finite_or_throw(r, where, a);
}

template <class Lookup>
double evaluate_with(const Expr& e, const Lookup& lookup) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return finite_or_throw(n.value, e, n.value);
        } else if constexpr (std::is_same_v<T, Variable>) {
          return lookup(n.name);
        } else if constexpr (std::is_same_v<T, Unary>) {
          return -evaluate_with(n.child, lookup);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const double a = evaluate_with(n.left, lookup);
          const double b = evaluate_with(n.right, lookup);
          return apply_binary(n.op, a, b, e);
        } else {
          const double a = evaluate_with(n.args[0], lookup);
          const double b = n.args.size() > 1 ? evaluate_with(n.args[1], lookup) : 0.0;
          return apply_call(n.fn, a, b, e);
        }
      },
      e.node().data);
}

}  // namespace detail

/// Evaluates `e` in IEEE double precision. Never returns NaN or an infinity:
/// those conditions, and arguments outside a function's domain, raise
/// DomainError.
inline double evaluate(const Expr& e, const Bindings& bindings) {
  return detail::evaluate_with(e, [&](const std::string& name) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw UnboundVariable(name);
    if (!std::isfinite(it->second)) throw DomainError(name, it->second);
    return it->second;
  });
}

/// Single-variable shortcut used on hot paths.
inline double evaluate(const Expr& e, std::string_view var, double value) {
  return detail::evaluate_with(e, [&](const std::string& name) {
    if (name != var) throw UnboundVariable(name);
    if (!std::isfinite(value)) throw DomainError(name, value);
    return value;
  });
}

}  // namespace fderiv
