#pragma once

// Derivatives with respect to a filter, F-continuity, and checkers for the
// linearity, product and quotient rules.
//
//   df/dF(x0) = lim_F D(h),   D(h) = (f(x0 + h) - f(x0)) / h
//
// The classical derivative is the case F = F(punctured neighbourhoods of 0);
// one-sided derivatives come from the bases (0, δ) and (−δ, 0).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fderiv/expr_function.hpp"
#include "fderiv/filterbase.hpp"
#include "fderiv/flimit.hpp"

namespace fderiv {

/// Functions that can supply their own cancellation-free difference quotient.
template <class F>
concept StableQuotient = RealFunction<F> && requires(const F& f, double x0, double h) {
  { f.quotient(x0, h) } -> std::convertible_to<double>;
};

/// h ↦ (f(x0 + h) − f(x0)) / h. Throws DomainError at h = 0.
template <RealFunction F>
auto difference_quotient(const F& f, double x0) {
  if constexpr (StableQuotient<F>) {
    return [f, x0](double h) -> double { return f.quotient(x0, h); };
  } else {
    return [f, x0](double h) -> double {
      if (h == 0.0) throw DomainError("difference quotient (h = 0)", h);
      return (static_cast<double>(f(x0 + h)) - static_cast<double>(f(x0))) / h;
    };
  }
}

struct DerivativeResult {
  double x0 = 0.0;
  std::string base_id;
  LimitEstimate estimate;
  LimitConfig cfg;

  /// "Differentiable with respect to the filter" means the limit converged.
  bool differentiable() const { return estimate.converged(); }
  std::optional<double> value() const { return estimate.value; }
};

template <RealFunction F>
DerivativeResult derivative(const F& f, double x0, const FilterBaseChain& b, const LimitConfig& cfg) {
  if (!b.punctured_at_zero())
    throw PreconditionError("base " + b.id() + " is not punctured at zero; h would hit 0 in the quotient");
  return {x0, b.id(), estimate_limit(difference_quotient(f, x0), b, cfg), cfg};
}

template <RealFunction F>
DerivativeResult classical_derivative(const F& f, double x0, const LimitConfig& cfg) {
  return derivative(f, x0, punctured_base(cfg.delta0, cfg.ratio), cfg);
}

struct FContinuityReport {
  double a = 0.0;
  std::string base_id;
  LimitEstimate limit;
  double target = 0.0;  // f(a)
  bool is_continuous = false;
};

/// Tests lim_F f(a + h) = f(a). Throws DomainError if f is undefined at a.
template <RealFunction F>
FContinuityReport f_continuity(const F& f, double a, const FilterBaseChain& b, const LimitConfig& cfg) {
  const double fa = static_cast<double>(f(a));
  if (!std::isfinite(fa)) throw DomainError("f at the continuity point", a);
  FContinuityReport r;
  r.a = a;
  r.base_id = b.id();
  r.target = fa;
  r.limit = estimate_limit([&f, a](double h) { return static_cast<double>(f(a + h)); }, b, cfg);
  r.is_continuous = r.limit.converged() && std::fabs(*r.limit.value - fa) <= cfg.tol_step * (1.0 + std::fabs(fa));
  return r;
}

// ---------------------------------------------------------------------------
// Rule checkers

enum class Rule { linearity, product, quotient };
enum class Verdict { holds, violated, inconclusive };

inline std::string to_string(Rule r) {
  switch (r) {
    case Rule::linearity: return "linearity";
    case Rule::product: return "product";
    case Rule::quotient: return "quotient";
  }
  return "?";
}

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

inline constexpr const char* kQuotientRuleErratum =
    "quotient rule erratum: the numerator is f'_F(x0)*g(x0) - g'_F(x0)*f(x0); the variant "
    "f'_F(x0)*g(x0) - g'_F(x0)*g(x0) sometimes displayed for this rule is a misprint and is not used";

struct RuleInputs {
  DerivativeResult df;
  DerivativeResult dg;
  double f_x0 = 0.0;
  double g_x0 = 0.0;
  double alpha = 0.0;  // linearity only
  double beta = 0.0;
};

struct RuleCheckReport {
  Rule rule = Rule::linearity;
  DerivativeResult lhs;
  std::optional<double> rhs_value;  // absent when an ingredient did not converge
  RuleInputs inputs;
  std::vector<FContinuityReport> continuity;  // f then g, where checked
  Verdict verdict = Verdict::inconclusive;
  double abs_error = NAN;
  double rel_error = NAN;  // abs_error / (1 + |rhs|)
  std::vector<std::string> unmet_hypotheses;
  std::vector<std::string> notes;
};

namespace detail {

template <RealFunction F, RealFunction G>
auto combine_linear(double alpha, const F& f, double beta, const G& g) {
  return [=](double x) { return alpha * static_cast<double>(f(x)) + beta * static_cast<double>(g(x)); };
}
inline ExprFunction combine_linear(double alpha, const ExprFunction& f, double beta, const ExprFunction& g) {
  return linear_combination(alpha, f, beta, g);
}

template <RealFunction F, RealFunction G>
auto combine_product(const F& f, const G& g) {
  return [=](double x) { return static_cast<double>(f(x)) * static_cast<double>(g(x)); };
}
inline ExprFunction combine_product(const ExprFunction& f, const ExprFunction& g) { return product(f, g); }

template <RealFunction F, RealFunction G>
auto combine_ratio(const F& f, const G& g) {
  return [=](double x) {
    const double den = static_cast<double>(g(x));
    if (den == 0.0) throw DomainError("denominator g vanishes", x);
    return static_cast<double>(f(x)) / den;
  };
}
inline ExprFunction combine_ratio(const ExprFunction& f, const ExprFunction& g) { return ratio(f, g); }

inline void require_converged(const DerivativeResult& d, const char* name, std::vector<std::string>& unmet) {
  if (!d.differentiable())
    unmet.push_back(std::string(name) + " is not differentiable along the filter (" + to_string(d.estimate.status) + ")");
}

// Shared verdict logic once lhs, ingredients and hypotheses are known.
inline void settle(RuleCheckReport& r, double check_tol) {
  if (r.rhs_value && r.lhs.differentiable()) {
    r.abs_error = std::fabs(*r.lhs.value() - *r.rhs_value);
    r.rel_error = r.abs_error / (1.0 + std::fabs(*r.rhs_value));
  }
  if (!r.unmet_hypotheses.empty()) {
    r.verdict = Verdict::inconclusive;
    return;
  }
  switch (r.lhs.estimate.status) {
    case LimitStatus::converged:
      r.verdict = r.rel_error <= check_tol ? Verdict::holds : Verdict::violated;
      return;
    case LimitStatus::no_limit:
      // Hypotheses hold yet the combination has no derivative.
      r.verdict = Verdict::violated;
      return;
    default:
      r.verdict = Verdict::inconclusive;
      return;
  }
}

}  // namespace detail

/// d(αf + βg)/dF = α df/dF + β dg/dF
template <RealFunction F, RealFunction G>
RuleCheckReport check_linearity(const F& f, const G& g, double alpha, double beta, double x0,
                                const FilterBaseChain& b, const LimitConfig& cfg, double check_tol) {
  RuleCheckReport r;
  r.rule = Rule::linearity;
  r.inputs.alpha = alpha;
  r.inputs.beta = beta;
  r.inputs.df = derivative(f, x0, b, cfg);
  r.inputs.dg = derivative(g, x0, b, cfg);
  r.lhs = derivative(detail::combine_linear(alpha, f, beta, g), x0, b, cfg);
  detail::require_converged(r.inputs.df, "f", r.unmet_hypotheses);
  detail::require_converged(r.inputs.dg, "g", r.unmet_hypotheses);
  if (r.unmet_hypotheses.empty()) r.rhs_value = alpha * *r.inputs.df.value() + beta * *r.inputs.dg.value();
  detail::settle(r, check_tol);
  return r;
}

/// d(f·g)/dF = f'_F g(x0) + g'_F f(x0). Only g's F-continuity enters the
/// verdict; f's is reported.
template <RealFunction F, RealFunction G>
RuleCheckReport check_product_rule(const F& f, const G& g, double x0, const FilterBaseChain& b,
                                   const LimitConfig& cfg, double check_tol) {
  RuleCheckReport r;
  r.rule = Rule::product;
  r.inputs.f_x0 = static_cast<double>(f(x0));
  r.inputs.g_x0 = static_cast<double>(g(x0));
  r.inputs.df = derivative(f, x0, b, cfg);
  r.inputs.dg = derivative(g, x0, b, cfg);
  r.lhs = derivative(detail::combine_product(f, g), x0, b, cfg);
  r.continuity.push_back(f_continuity(f, x0, b, cfg));
  r.continuity.push_back(f_continuity(g, x0, b, cfg));
  detail::require_converged(r.inputs.df, "f", r.unmet_hypotheses);
  detail::require_converged(r.inputs.dg, "g", r.unmet_hypotheses);
  if (!r.continuity[1].is_continuous) r.unmet_hypotheses.push_back("g is not F-continuous at x0");
  if (r.inputs.df.differentiable() && r.inputs.dg.differentiable())
    r.rhs_value = *r.inputs.df.value() * r.inputs.g_x0 + *r.inputs.dg.value() * r.inputs.f_x0;
  detail::settle(r, check_tol);
  return r;
}

/// d(f/g)/dF = (f'_F g(x0) − g'_F f(x0)) / g(x0)². Requires g(x0) ≠ 0.
template <RealFunction F, RealFunction G>
RuleCheckReport check_quotient_rule(const F& f, const G& g, double x0, const FilterBaseChain& b,
                                    const LimitConfig& cfg, double check_tol) {
  const double gx0 = static_cast<double>(g(x0));
  if (gx0 == 0.0) throw PreconditionError("quotient rule requires g(x0) != 0");
  RuleCheckReport r;
  r.rule = Rule::quotient;
  r.notes.emplace_back(kQuotientRuleErratum);
  r.inputs.f_x0 = static_cast<double>(f(x0));
  r.inputs.g_x0 = gx0;
  r.inputs.df = derivative(f, x0, b, cfg);
  r.inputs.dg = derivative(g, x0, b, cfg);
  r.lhs = derivative(detail::combine_ratio(f, g), x0, b, cfg);
  r.continuity.push_back(f_continuity(g, x0, b, cfg));
  detail::require_converged(r.inputs.df, "f", r.unmet_hypotheses);
  detail::require_converged(r.inputs.dg, "g", r.unmet_hypotheses);
  if (!r.continuity[0].is_continuous) r.unmet_hypotheses.push_back("g is not F-continuous at x0");
  if (r.lhs.estimate.status == LimitStatus::domain_error)
    r.unmet_hypotheses.push_back("f/g is undefined at a sampled point: " +
                                 r.lhs.estimate.failure_detail.value_or("domain error"));
  if (r.inputs.df.differentiable() && r.inputs.dg.differentiable())
    r.rhs_value = (*r.inputs.df.value() * gx0 - *r.inputs.dg.value() * r.inputs.f_x0) / (gx0 * gx0);
  detail::settle(r, check_tol);
  return r;
}

}  // namespace fderiv
