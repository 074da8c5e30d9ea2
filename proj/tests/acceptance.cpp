// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fderiv/fderiv.hpp"
#include "corpus.hpp"

using namespace fderiv;

namespace {

constexpr double kCheckTol = 1e-5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

std::string quote(const std::string& s) {
  std::string r = "'";
  for (char c : s) r += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return r + "'";
}

int run_cli(const std::vector<std::string>& args, const std::filesystem::path& stdout_file) {
  std::string cmd = quote(FDERIV_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(stdout_file.string()) + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir() {
  const auto d = std::filesystem::temp_directory_path() / "fderiv_acceptance";
  std::filesystem::create_directories(d);
  return d;
}

// 1 -------------------------------------------------------------------------
Outcome one_sided_abs() {
  Outcome o;
  const auto f = ExprFunction::parse("abs(x)");
  const LimitConfig cfg;
  const auto r = derivative(f, 0.0, right_base(1, 0.5), cfg);
  const auto l = derivative(f, 0.0, left_base(1, 0.5), cfg);
  if (!r.differentiable() || *r.value() != 1.0) fail(o, "right derivative is not exactly 1");
  if (!l.differentiable() || *l.value() != -1.0) fail(o, "left derivative is not exactly -1");
  o.detail = o.pass ? "right = 1, left = -1" : o.detail;
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome kink_no_limit() {
  Outcome o;
  const auto d = derivative(ExprFunction::parse("abs(x)"), 0.0, punctured_base(1, 0.5), LimitConfig{});
  if (d.estimate.status != LimitStatus::no_limit) fail(o, "status " + to_string(d.estimate.status));
  for (const auto& row : d.estimate.trace)
    if (row.osc < 1.9 || row.osc > 2.0) fail(o, "oscillation " + std::to_string(row.osc) + " at k=" + std::to_string(row.k));
  const int code = run_cli({"derive", "--expr", "abs(x)", "--x0", "0", "--base", "punctured:delta0=1,ratio=0.5"},
                           scratch_dir() / "kink.json");
  if (code != 2) fail(o, "CLI exit code " + std::to_string(code));
  if (o.pass) o.detail = std::to_string(d.estimate.trace.size()) + " levels, CLI exit 2";
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome classical_equivalence() {
  Outcome o;
  int agree = 0, total = 0;
  double worst = 0;
  for (const auto& text : test::kSmoothCorpus) {
    const auto f = ExprFunction::parse(text);
    for (double x0 : test::kSmoothPoints) {
      ++total;
      const auto d = classical_derivative(f, x0, LimitConfig{});
      const double ref = oracle::symbolic_value(f.expr(), f.var(), x0).value;
      if (!d.differentiable()) {
        fail(o, text + " at " + std::to_string(x0) + ": " + to_string(d.estimate.status));
        continue;
      }
      const double rel = std::fabs(*d.value() - ref) / std::max(1.0, std::fabs(ref));
      worst = std::max(worst, rel);
      if (rel <= 1e-6) ++agree;
      else fail(o, text + " at " + std::to_string(x0) + ": relative error " + std::to_string(rel));
    }
  }
  if (agree != total) o.pass = false;
  std::ostringstream s;
  s << agree << "/" << total << " agree, worst relative error " << worst;
  if (o.pass) o.detail = s.str();
  else o.detail = s.str() + "; " + o.detail;
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome sequence_filter() {
  Outcome o;
  // x·sin(1/x) with f(0) = 0; the quotient at 0 is sin(1/h).
  auto f = [](double x) { return x == 0.0 ? 0.0 : x * std::sin(1 / x); };
  const LimitConfig cfg;
  const auto p = derivative(f, 0.0, punctured_base(1, 0.5), cfg);
  if (p.estimate.status != LimitStatus::no_limit) fail(o, "punctured base gave " + to_string(p.estimate.status));
  const auto s = derivative(f, 0.0, sequence_base({SequenceSpec::Kind::piovern, 1.0}), cfg);
  if (!s.differentiable() || std::fabs(*s.value()) > 1e-9) fail(o, "sequence base gave " + to_string(s.estimate.status));
  if (o.pass) {
    std::ostringstream d;
    d << "punctured: no-limit; 1/(pi n): " << *s.value();
    o.detail = d.str();
  }
  return o;
}

// Random instances for the rule suites --------------------------------------

struct Instance {
  std::string f, g;
  double x0;
  FilterBaseChain base;
};

const std::vector<std::string> kKinkCorpus = {"abs(x)", "max(x, 0)", "x + abs(x)", "abs(x)*cos(x)", "min(x, 3*x)",
                                              "abs(sin(x))", "exp(abs(x))"};
const std::vector<std::string> kPositiveKink = {"1 + abs(x)", "2 + max(x, 0)", "exp(abs(x))", "3 - min(x, 0)"};

FilterBaseChain one_sided(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> d0(0.1, 2.0);
  switch (pick(rng)) {
    case 0: return right_base(d0(rng), 0.5);
    case 1: return left_base(d0(rng), 0.5);
    case 2: return sequence_base({SequenceSpec::Kind::geo, d0(rng), 1.0, 0.5});
    default: return sequence_base({SequenceSpec::Kind::geo, -d0(rng), 1.0, 0.5});
  }
}

FilterBaseChain any_base(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_real_distribution<double> d0(0.1, 2.0);
  std::uniform_real_distribution<double> ratio(0.25, 0.5);
  switch (pick(rng)) {
    case 0:
    case 1: return punctured_base(d0(rng), ratio(rng));
    default: return one_sided(rng);
  }
}

template <class Range>
const auto& choose(std::mt19937_64& rng, const Range& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

// Every third instance sits at a kink with a one-sided base; the rest are
// smooth functions at corpus points along any base.
Instance make_instance(std::mt19937_64& rng, int i, const std::vector<std::string>& g_smooth,
                       const std::vector<std::string>& g_kink) {
  if (i % 3 == 0) return {choose(rng, kKinkCorpus), choose(rng, g_kink), 0.0, one_sided(rng)};
  return {choose(rng, test::kSmoothCorpus), choose(rng, g_smooth), choose(rng, test::kSmoothPoints), any_base(rng)};
}

std::string describe(const Instance& in) {
  return "f=" + in.f + " g=" + in.g + " x0=" + std::to_string(in.x0) + " base=" + in.base.id();
}

void tally(Outcome& o, const RuleCheckReport& r, const Instance& in, double& worst) {
  if (r.verdict != Verdict::holds) {
    fail(o, to_string(r.verdict) + " for " + describe(in));
    return;
  }
  worst = std::max(worst, r.rel_error);
  if (!(r.rel_error <= kCheckTol)) fail(o, "rel_error " + std::to_string(r.rel_error) + " for " + describe(in));
}

std::string summary(int n, double worst) {
  std::ostringstream s;
  s << n << " instances hold, worst rel_error " << worst;
  return s.str();
}

// 5 -------------------------------------------------------------------------
Outcome linearity_suite() {
  Outcome o;
  std::mt19937_64 rng(20240501);
  std::uniform_real_distribution<double> coef(-10, 10);
  const auto& gs = test::kSmoothCorpus;
  double worst = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const auto in = make_instance(rng, i, gs, kKinkCorpus);
    const double a = coef(rng), b = coef(rng);
    const auto r = check_linearity(ExprFunction::parse(in.f), ExprFunction::parse(in.g), a, b, in.x0, in.base,
                                   LimitConfig{}, kCheckTol);
    tally(o, r, in, worst);
  }
  if (o.pass) o.detail = summary(n, worst);
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome product_suite() {
  Outcome o;
  std::mt19937_64 rng(20240502);
  const auto& gs = test::kSmoothCorpus;
  double worst = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto in = make_instance(rng, i, gs, kKinkCorpus);
    tally(o, check_product_rule(ExprFunction::parse(in.f), ExprFunction::parse(in.g), in.x0, in.base, LimitConfig{}, kCheckTol),
          in, worst);
  }
  // The named one-sided example: lhs = rhs = 0.
  const auto abs = ExprFunction::parse("abs(x)");
  const LimitConfig cfg;
  const auto ex = check_product_rule(abs, abs, 0.0, right_base(1, 0.5), cfg, kCheckTol);
  if (ex.verdict != Verdict::holds || std::fabs(*ex.lhs.value()) > cfg.tol_osc || *ex.rhs_value != 0.0)
    fail(o, "abs*abs along the right base is not lhs = rhs = 0");
  // g = sign is not F-continuous at 0: never violated.
  const auto x = ExprFunction::parse("x"), sign = ExprFunction::parse("sign(x)");
  for (const auto& b : {punctured_base(1, 0.5), right_base(1, 0.5), left_base(1, 0.5)}) {
    const auto r = check_product_rule(x, sign, 0.0, b, LimitConfig{}, kCheckTol);
    if (r.verdict != Verdict::inconclusive) fail(o, "g = sign along " + b.id() + " gave " + to_string(r.verdict));
  }
  if (o.pass) o.detail = summary(n + 1, worst) + "; g = sign inconclusive on 3 bases";
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome quotient_suite() {
  Outcome o;
  std::mt19937_64 rng(20240503);
  const auto& gs = test::kPositiveCorpus;
  double worst = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto in = make_instance(rng, i, gs, kPositiveKink);
    const auto r =
        check_quotient_rule(ExprFunction::parse(in.f), ExprFunction::parse(in.g), in.x0, in.base, LimitConfig{}, kCheckTol);
    tally(o, r, in, worst);
    if (r.notes.empty() || r.notes.front() != kQuotientRuleErratum) fail(o, "erratum note missing for " + describe(in));
  }
  const auto ex = check_quotient_rule(ExprFunction::parse("x"), ExprFunction::parse("1 + abs(x)"), 0.0, right_base(1, 0.5),
                                      LimitConfig{}, kCheckTol);
  if (ex.verdict != Verdict::holds || std::fabs(*ex.lhs.value() - 1) > 1e-6 || std::fabs(*ex.rhs_value - 1) > 1e-6)
    fail(o, "x/(1+|x|) along the right base is not lhs = rhs = 1");
  if (o.pass) o.detail = summary(n + 1, worst) + "; erratum note present";
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome axiom_suite() {
  Outcome o;
  int checked = 0;
  for (double d0 : {0.1, 1.0, 10.0})
    for (double r : {0.25, 0.5, 0.9})
      for (const auto& b : {punctured_base(d0, r), right_base(d0, r), left_base(d0, r)}) {
        ++checked;
        if (!verify_base_axioms(b, 64).ok()) fail(o, b.id() + " fails the axioms");
      }
  for (const auto& spec : {SequenceSpec{SequenceSpec::Kind::powinv, 1, 1, 0.5}, SequenceSpec{SequenceSpec::Kind::geo, -2, 1, 0.9},
                           SequenceSpec{SequenceSpec::Kind::piovern, 1, 1, 0.5}}) {
    ++checked;
    if (!verify_base_axioms(sequence_base(spec), 64).ok()) fail(o, sequence_base(spec).id() + " fails the axioms");
  }

  // Levels 3 and 4 swap radii, so element(4) ⊄ element(3).
  const FilterBaseChain unnested("unnested", [](int k) {
    const int j = k == 3 ? 4 : (k == 4 ? 3 : k);
    return SetDescriptor::interval(0, std::ldexp(1.0, -j));
  }, 8, false);
  const auto a = verify_base_axioms(unnested, 8);
  if (a.nested || a.nesting_failures.empty() || a.nesting_failures.front() != std::pair{3, 4} || !a.nonempty)
    fail(o, "unnested chain not reported as a nesting failure at (3, 4)");

  const FilterBaseChain hollow("hollow", [](int k) {
    return k >= 5 ? SetDescriptor() : SetDescriptor::interval(0, std::ldexp(1.0, -k));
  }, 8, false);
  const auto h = verify_base_axioms(hollow, 8);
  if (h.nonempty || h.empty_levels.empty() || h.empty_levels.front() != 5) fail(o, "empty element at level 5 not named");

  const FilterBaseChain unpunctured("unpunctured", [](int k) {
    const double d = std::ldexp(1.0, -k);
    return SetDescriptor::interval(-d, d);
  }, 8, true);
  const auto u = verify_base_axioms(unpunctured, 8);
  if (u.punctured || !u.nonempty || !u.nested) fail(o, "chain containing 0 not reported as a puncture failure");

  if (o.pass) o.detail = std::to_string(checked) + " built-in chains pass; 3 broken chains named";
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
  Outcome o;
  const auto dir = scratch_dir();
  const auto trace = (dir / "trace.csv").string();
  const std::vector<std::vector<std::string>> invocations = {
      {"derive", "--expr", "sin(x)*exp(x)", "--x0", "0.4", "--seed", "7", "--oracle", "--trace", trace},
      {"derive", "--expr", "abs(x)", "--base", "punctured:delta0=2,ratio=0.3", "--samples", "9", "--trace", trace},
      {"limit", "--expr", "sin(1/h)", "--base", "seq:kind=piovern,c=1", "--trace", trace},
      {"continuity", "--expr", "sign(x)", "--a", "0", "--base", "left", "--seed", "3", "--trace", trace},
      {"check", "quotient", "--f", "cos(x)", "--g", "2 + sin(x)", "--x0", "1.1", "--seed", "11"},
      {"verify-base", "--base", "seq:kind=geo,c=-1,q=0.7"},
  };
  for (const auto& args : invocations) {
    std::string json[2], csv[2];
    int code[2];
    for (int rep = 0; rep < 2; ++rep) {
      std::filesystem::remove(trace);
      code[rep] = run_cli(args, dir / "out.json");
      json[rep] = slurp(dir / "out.json");
      csv[rep] = std::filesystem::exists(trace) ? slurp(trace) : "";
    }
    if (json[0].empty()) fail(o, args[0] + ": empty output");
    if (code[0] != code[1] || json[0] != json[1]) fail(o, args[0] + ": JSON differs between runs");
    if (csv[0] != csv[1]) fail(o, args[0] + ": CSV differs between runs");
  }
  if (o.pass) o.detail = std::to_string(invocations.size()) + " invocations byte-identical";
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome refinement() {
  Outcome o;
  const LimitConfig cfg;
  int compared = 0;
  double worst = 0;
  for (const auto& text : test::kSmoothCorpus) {
    const auto f = ExprFunction::parse(text);
    for (double x0 : test::kSmoothPoints) {
      const auto b = punctured_base(cfg.delta0, cfg.ratio);
      const auto coarse = derivative(f, x0, b, cfg);
      if (!coarse.differentiable()) continue;
      ++compared;
      const auto fine = derivative(f, x0, b.refined(2), cfg);
      if (!fine.differentiable()) {
        fail(o, text + " at " + std::to_string(x0) + ": refined chain gave " + to_string(fine.estimate.status));
        continue;
      }
      const double diff = std::fabs(*fine.value() - *coarse.value());
      worst = std::max(worst, diff);
      if (diff > 10 * cfg.tol_step) fail(o, text + " at " + std::to_string(x0) + ": differs by " + std::to_string(diff));
    }
  }
  if (compared == 0) fail(o, "no converged cases");
  if (o.pass) {
    std::ostringstream s;
    s << compared << " converged cases, worst difference " << worst;
    o.detail = s.str();
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"one-sided derivatives of abs at 0", one_sided_abs},
      {"no limit at the kink along the punctured base", kink_no_limit},
      {"classical derivative matches symbolic on the smooth corpus", classical_equivalence},
      {"x sin(1/x): no limit classically, 0 along 1/(pi n)", sequence_filter},
      {"linearity property suite", linearity_suite},
      {"product rule property suite", product_suite},
      {"quotient rule property suite", quotient_suite},
      {"filter base axioms", axiom_suite},
      {"CLI determinism", determinism},
      {"refinement consistency", refinement},
  };
  int failures = 0;
  int n = 0;
  for (const auto& c : criteria) {
    ++n;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, c.name, o.detail.c_str());
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  return failures == 0 ? 0 : 1;
}
