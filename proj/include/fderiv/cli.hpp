#pragma once

// Command-line front end: derive, limit, continuity, check, verify-base.
// Every command prints a single JSON document on stdout; per-level traces
// go to CSV with --trace. Exit codes:
//   0 converged / holds / continuous / axioms pass
//   2 no-limit / violated / not continuous / axioms fail
//   3 undecided / inconclusive
//   4 input error (parse, base spec, parameters, domain errors)

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fderiv/derivative.hpp"
#include "fderiv/expr_function.hpp"
#include "fderiv/filterbase.hpp"
#include "fderiv/flimit.hpp"
#include "fderiv/oracle.hpp"

namespace fderiv::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kNegative = 2, kUndecided = 3, kInputError = 4 };

inline int exit_code(LimitStatus s) {
  switch (s) {
    case LimitStatus::converged: return kOk;
    case LimitStatus::no_limit: return kNegative;
    case LimitStatus::undecided: return kUndecided;
    case LimitStatus::domain_error: return kInputError;
  }
  return kInputError;
}

inline int exit_code(Verdict v) {
  switch (v) {
    case Verdict::holds: return kOk;
    case Verdict::violated: return kNegative;
    case Verdict::inconclusive: return kUndecided;
  }
  return kInputError;
}

inline Json number_or_null(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const LimitEstimate& e) {
  Json j;
  j["status"] = to_string(e.status);
  j["value"] = number_or_null(e.value);
  j["levels_used"] = e.levels_used;
  if (!e.trace.empty()) {
    const auto& r = e.trace.back();
    j["final_level"] = {{"k", r.k}, {"scale", r.scale}, {"min", r.min}, {"max", r.max}, {"mean", r.mean}, {"osc", r.osc}};
  } else {
    j["final_level"] = nullptr;
  }
  j["failure_detail"] = e.failure_detail ? Json(*e.failure_detail) : Json(nullptr);
  j["failure_point"] = number_or_null(e.failure_point);
  return j;
}

inline Json to_json(const DerivativeResult& d) {
  Json j;
  j["x0"] = d.x0;
  j["base"] = d.base_id;
  j["estimate"] = to_json(d.estimate);
  return j;
}

inline Json to_json(const FContinuityReport& r) {
  Json j;
  j["a"] = r.a;
  j["base"] = r.base_id;
  j["target"] = r.target;
  j["is_continuous"] = r.is_continuous;
  j["limit"] = to_json(r.limit);
  return j;
}

inline Json to_json(const RuleCheckReport& r) {
  Json j;
  j["rule"] = to_string(r.rule);
  j["verdict"] = to_string(r.verdict);
  j["lhs"] = to_json(r.lhs);
  j["rhs_value"] = number_or_null(r.rhs_value);
  j["abs_error"] = number_or_null(r.abs_error);
  j["rel_error"] = number_or_null(r.rel_error);
  j["df"] = to_json(r.inputs.df);
  j["dg"] = to_json(r.inputs.dg);
  j["f_x0"] = r.inputs.f_x0;
  j["g_x0"] = r.inputs.g_x0;
  if (r.rule == Rule::linearity) {
    j["alpha"] = r.inputs.alpha;
    j["beta"] = r.inputs.beta;
  }
  Json cont = Json::array();
  for (const auto& c : r.continuity) cont.push_back(to_json(c));
  j["continuity"] = cont;
  j["unmet_hypotheses"] = r.unmet_hypotheses;
  return j;
}

inline Json to_json(const AxiomReport& r) {
  Json j;
  j["levels_checked"] = r.levels_checked;
  j["nonempty"] = r.nonempty;
  j["nested"] = r.nested;
  j["punctured"] = r.punctured;
  j["empty_levels"] = r.empty_levels;
  Json pairs = Json::array();
  for (auto [a, b] : r.nesting_failures) pairs.push_back({a, b});
  j["nesting_failures"] = pairs;
  j["punctured_failures"] = r.punctured_failures;
  return j;
}

struct RunOutput {
  Json json;
  int exit_code = kOk;
};

namespace detail {

struct CommonOptions {
  std::string base = "punctured:delta0=1,ratio=0.5";
  LimitConfig cfg;
  std::string trace;

  void attach(CLI::App* cmd, bool with_limit_flags = true) {
    cmd->add_option("--base", base, "filter base spec")->capture_default_str();
    if (!with_limit_flags) return;
    cmd->add_option("--levels", cfg.max_level, "deepest level K")->capture_default_str();
    cmd->add_option("--samples", cfg.samples_per_level, "samples per level m")->capture_default_str();
    cmd->add_option("--tol-osc", cfg.tol_osc, "oscillation tolerance")->capture_default_str();
    cmd->add_option("--tol-step", cfg.tol_step, "relative step tolerance")->capture_default_str();
    cmd->add_option("--stable", cfg.stable_levels, "stable levels s")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "sampling seed")->capture_default_str();
    cmd->add_option("--trace", trace, "write the per-level trace CSV to FILE");
    cmd->add_flag("--json", "JSON output (always on)");
  }

  Json params(const FilterBaseChain& b) const {
    Json j;
    j["base"] = b.id();
    j["levels"] = cfg.max_level;
    j["samples"] = cfg.samples_per_level;
    j["tol_osc"] = cfg.tol_osc;
    j["tol_step"] = cfg.tol_step;
    j["stable"] = cfg.stable_levels;
    j["no_limit_floor"] = cfg.no_limit_floor;
    j["seed"] = cfg.seed;
    return j;
  }
};

inline Json envelope(const std::string& command, Json params) {
  Json j;
  j["command"] = command;
  j["params"] = std::move(params);
  j["status"] = nullptr;
  j["value"] = nullptr;
  j["trace_file"] = nullptr;
  j["oracle"] = nullptr;
  j["notes"] = Json::array();
  j["detail"] = nullptr;
  return j;
}

inline void write_trace(const std::string& path, const std::vector<TraceRow>& trace, Json& out) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open trace file '" + path + "'");
  write_trace_csv(f, trace);
  out["trace_file"] = path;
}

inline Json oracle_report(const ExprFunction& f, double x0, const FilterBaseChain& b,
                          std::optional<double> engine_value) {
  Json j;
  std::optional<double> symbolic, right, left;
  try {
    auto v = oracle::symbolic_value(f.expr(), f.var(), x0);
    symbolic = v.value;
    j["symbolic"] = {{"value", v.value}, {"derivative", render(oracle::symbolic_derivative(f.expr(), f.var()))}};
  } catch (const Error& e) {
    j["symbolic"] = {{"refused", e.what()}};
  }
  auto richardson = [&](oracle::Side side, std::optional<double>& slot) -> Json {
    try {
      auto v = oracle::richardson_one_sided(f, x0, side);
      slot = v.value;
      return {{"value", v.value}, {"estimated_error", v.estimated_error}};
    } catch (const Error& e) {
      return {{"error", e.what()}};
    }
  };
  j["richardson_right"] = richardson(oracle::Side::right, right);
  j["richardson_left"] = richardson(oracle::Side::left, left);
  const std::string& id = b.id();
  std::optional<double> reference;
  std::string reference_name;
  if (id.rfind("right", 0) == 0) {
    reference = right;
    reference_name = "richardson_right";
  } else if (id.rfind("left", 0) == 0) {
    reference = left;
    reference_name = "richardson_left";
  } else {
    reference = symbolic;
    reference_name = "symbolic";
  }
  j["reference"] = reference_name;
  j["abs_difference"] =
      (reference && engine_value) ? Json(std::fabs(*reference - *engine_value)) : Json(nullptr);
  return j;
}

inline ExprFunction single_variable(const std::string& text) {
  auto e = parse(text);
  auto vars = free_vars(e);
  if (vars.size() > 1) throw Error("expression must have at most one free variable: '" + text + "'");
  return ExprFunction(std::move(e));
}

}  // namespace detail

inline RunOutput cmd_derive(const std::string& expr, double x0, detail::CommonOptions opt, bool with_oracle) {
  const ExprFunction f = detail::single_variable(expr);
  const FilterBaseChain b = parse_base_spec(opt.base);
  Json params = {{"expr", expr}, {"x0", x0}};
  params.update(opt.params(b));
  params["oracle"] = with_oracle;
  RunOutput out{detail::envelope("derive", params), kOk};
  const auto d = derivative(f, x0, b, opt.cfg);
  out.json["status"] = to_string(d.estimate.status);
  out.json["value"] = number_or_null(d.value());
  detail::write_trace(opt.trace, d.estimate.trace, out.json);
  if (with_oracle) out.json["oracle"] = detail::oracle_report(f, x0, b, d.value());
  out.json["detail"] = to_json(d);
  out.exit_code = exit_code(d.estimate.status);
  return out;
}

inline RunOutput cmd_limit(const std::string& expr, detail::CommonOptions opt) {
  const ExprFunction g = detail::single_variable(expr);
  const FilterBaseChain b = parse_base_spec(opt.base);
  Json params = {{"expr", expr}};
  params.update(opt.params(b));
  RunOutput out{detail::envelope("limit", params), kOk};
  const auto est = estimate_limit(g, b, opt.cfg);
  out.json["status"] = to_string(est.status);
  out.json["value"] = number_or_null(est.value);
  detail::write_trace(opt.trace, est.trace, out.json);
  out.json["detail"] = to_json(est);
  out.exit_code = exit_code(est.status);
  return out;
}

inline RunOutput cmd_continuity(const std::string& expr, double a, detail::CommonOptions opt) {
  const ExprFunction f = detail::single_variable(expr);
  const FilterBaseChain b = parse_base_spec(opt.base);
  Json params = {{"expr", expr}, {"a", a}};
  params.update(opt.params(b));
  RunOutput out{detail::envelope("continuity", params), kOk};
  const auto r = f_continuity(f, a, b, opt.cfg);
  out.json["status"] = r.is_continuous ? "continuous" : "not-continuous";
  out.json["value"] = number_or_null(r.limit.value);
  detail::write_trace(opt.trace, r.limit.trace, out.json);
  out.json["detail"] = to_json(r);
  if (r.is_continuous)
    out.exit_code = kOk;
  else if (r.limit.status == LimitStatus::converged)
    out.exit_code = kNegative;
  else
    out.exit_code = exit_code(r.limit.status);
  return out;
}

inline RunOutput cmd_check(const std::string& rule, const std::string& f_text, const std::string& g_text,
                           double alpha, double beta, double x0, double check_tol, detail::CommonOptions opt) {
  const ExprFunction f = detail::single_variable(f_text);
  const ExprFunction g = detail::single_variable(g_text);
  const FilterBaseChain b = parse_base_spec(opt.base);
  Json params = {{"rule", rule}, {"f", f_text}, {"g", g_text}};
  if (rule == "linearity") {
    params["alpha"] = alpha;
    params["beta"] = beta;
  }
  params["x0"] = x0;
  params.update(opt.params(b));
  params["check_tol"] = check_tol;
  RunOutput out{detail::envelope("check", params), kOk};
  RuleCheckReport r;
  if (rule == "linearity")
    r = check_linearity(f, g, alpha, beta, x0, b, opt.cfg, check_tol);
  else if (rule == "product")
    r = check_product_rule(f, g, x0, b, opt.cfg, check_tol);
  else if (rule == "quotient")
    r = check_quotient_rule(f, g, x0, b, opt.cfg, check_tol);
  else
    throw ParameterError("unknown rule '" + rule + "' (expected linearity, product or quotient)");
  out.json["status"] = to_string(r.verdict);
  out.json["value"] = number_or_null(r.lhs.value());
  detail::write_trace(opt.trace, r.lhs.estimate.trace, out.json);
  out.json["notes"] = r.notes;
  out.json["detail"] = to_json(r);
  out.exit_code = exit_code(r.verdict);
  return out;
}

inline RunOutput cmd_verify_base(const std::string& base, int K) {
  const FilterBaseChain b = parse_base_spec(base);
  RunOutput out{detail::envelope("verify-base", {{"base", b.id()}, {"levels", K}}), kOk};
  const auto report = verify_base_axioms(b, K);
  out.json["status"] = report.ok() ? "pass" : "fail";
  out.json["detail"] = to_json(report);
  out.exit_code = report.ok() ? kOk : kNegative;
  return out;
}

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Derivatives of real functions with respect to filters", "fderiv"};
  app.require_subcommand(1);

  detail::CommonOptions common;
  std::string expr, f_text, g_text, rule;
  double x0 = 0.0, a = 0.0, alpha = 1.0, beta = 1.0, check_tol = 1e-5;
  bool with_oracle = false;
  int verify_levels = 64;

  auto* derive = app.add_subcommand("derive", "derivative of --expr at --x0 along --base");
  derive->add_option("--expr", expr, "f(x)")->required();
  derive->add_option("--x0", x0)->capture_default_str();
  derive->add_flag("--oracle", with_oracle, "append symbolic and Richardson reference values");
  common.attach(derive);

  auto* limit = app.add_subcommand("limit", "limit of --expr along --base");
  limit->add_option("--expr", expr, "g(h)")->required();
  common.attach(limit);

  auto* continuity = app.add_subcommand("continuity", "F-continuity of --expr at --a");
  continuity->add_option("--expr", expr, "f(x)")->required();
  continuity->add_option("--a", a)->capture_default_str();
  common.attach(continuity);

  auto* check = app.add_subcommand("check", "check a differentiation rule along --base");
  check->add_option("rule", rule, "linearity | product | quotient")
      ->required()
      ->check(CLI::IsMember({"linearity", "product", "quotient"}));
  check->add_option("--f", f_text)->required();
  check->add_option("--g", g_text)->required();
  check->add_option("--alpha", alpha)->capture_default_str();
  check->add_option("--beta", beta)->capture_default_str();
  check->add_option("--x0", x0)->capture_default_str();
  check->add_option("--check-tol", check_tol)->capture_default_str();
  common.attach(check);

  auto* verify = app.add_subcommand("verify-base", "check the filter-base axioms of --base");
  verify->add_option("--levels", verify_levels, "levels 0..K to check")->capture_default_str();
  common.attach(verify, false);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    RunOutput result;
    if (derive->parsed())
      result = cmd_derive(expr, x0, common, with_oracle);
    else if (limit->parsed())
      result = cmd_limit(expr, common);
    else if (continuity->parsed())
      result = cmd_continuity(expr, a, common);
    else if (check->parsed())
      result = cmd_check(rule, f_text, g_text, alpha, beta, x0, check_tol, common);
    else
      result = cmd_verify_base(common.base, verify_levels);
    out << result.json.dump(2) << "\n";
    return result.exit_code;
  } catch (const Error& e) {
    Json j;
    j["command"] = app.get_subcommands().front()->get_name();
    j["status"] = "input-error";
    j["error"] = e.what();
    out << j.dump(2) << "\n";
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace fderiv::cli
