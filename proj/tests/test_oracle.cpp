#include <cmath>

#include <gtest/gtest.h>

#include "fderiv/expr_function.hpp"
#include "fderiv/oracle.hpp"
#include "corpus.hpp"

using namespace fderiv;
using namespace fderiv::oracle;

TEST(Symbolic, PowerRule) {
  EXPECT_EQ(render(symbolic_derivative(parse("x^2"), "x")), "2 * x");
}

TEST(Symbolic, AbsIsSign) {
  EXPECT_EQ(symbolic_derivative(parse("abs(x)"), "x"), parse("sign(x)"));
}

TEST(Symbolic, ProductAndChain) {
  const Expr d = symbolic_derivative(parse("x*sin(1/x)"), "x");
  // sin(1/x) + x·cos(1/x)·(−1/x²), cross-checked by extrapolation at 0.3.
  const double x = 0.3;
  const double expected = std::sin(1 / x) - std::cos(1 / x) / x;
  EXPECT_NEAR(evaluate(d, "x", x), expected, 1e-14);
  const auto f = ExprFunction::parse("x*sin(1/x)");
  const auto r = richardson_one_sided(f, x, Side::right);
  EXPECT_NEAR(r.value, expected, 1e-7);
}

TEST(Symbolic, MinMaxViaAbsIdentity) {
  const auto d = symbolic_derivative(parse("min(x^2, 3*x)"), "x");
  EXPECT_NEAR(evaluate(d, "x", 1.0), 2.0, 1e-15);  // x^2 < 3x
  EXPECT_NEAR(evaluate(d, "x", 5.0), 3.0, 1e-15);
  const auto e = symbolic_derivative(parse("max(x^2, 3*x)"), "x");
  EXPECT_NEAR(evaluate(e, "x", 1.0), 3.0, 1e-15);
  EXPECT_NEAR(evaluate(e, "x", 5.0), 10.0, 1e-15);
}

TEST(Symbolic, OtherVariablesAreConstants) {
  EXPECT_EQ(symbolic_derivative(parse("y*x"), "x"), parse("y"));
  EXPECT_EQ(symbolic_derivative(parse("y^2"), "x"), parse("0"));
}

TEST(Symbolic, VariableExponent) {
  const auto d = symbolic_derivative(parse("x^x"), "x");
  const double x = 1.7;
  EXPECT_NEAR(evaluate(d, "x", x), std::pow(x, x) * (std::log(x) + 1), 1e-13);
}

TEST(Symbolic, RefusesKinks) {
  EXPECT_THROW(symbolic_value(parse("abs(x)"), "x", 0.0), NonSmoothPoint);
  EXPECT_THROW(symbolic_value(parse("sign(x - 1)"), "x", 1.0), NonSmoothPoint);
  EXPECT_THROW(symbolic_value(parse("max(x, 2*x)"), "x", 0.0), NonSmoothPoint);
  EXPECT_EQ(symbolic_value(parse("abs(x)"), "x", -2.0).value, -1.0);
}

TEST(Richardson, AbsOneSided) {
  const auto f = ExprFunction::parse("abs(x)");
  const auto r = richardson_one_sided(f, 0.0, Side::right);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_EQ(r.method, Method::richardson_right);
  const auto l = richardson_one_sided(f, 0.0, Side::left);
  EXPECT_NEAR(l.value, -1.0, 1e-12);
  EXPECT_EQ(l.method, Method::richardson_left);
}

TEST(Richardson, ExpAtZero) {
  const auto r = richardson_one_sided([](double x) { return std::exp(x); }, 0.0, Side::right);
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_GE(r.estimated_error, 0.0);
}

TEST(Richardson, DomainErrorsPropagate) {
  EXPECT_THROW(richardson_one_sided(ExprFunction::parse("sqrt(x)"), 0.0, Side::left), DomainError);
}

TEST(OracleProperties, SymbolicAndRichardsonAgreeOnSmoothCorpus) {
  for (const auto& text : test::kSmoothCorpus) {
    const auto f = ExprFunction::parse(text);
    for (double x0 : test::kSmoothPoints) {
      const auto s = symbolic_value(f.expr(), f.var(), x0);
      EXPECT_EQ(s.estimated_error, 0.0);
      for (Side side : {Side::right, Side::left}) {
        const auto r = richardson_one_sided(f, x0, side);
        EXPECT_LE(std::fabs(s.value - r.value), std::max(1e-8, r.estimated_error)) << text << " at " << x0;
      }
    }
  }
}
