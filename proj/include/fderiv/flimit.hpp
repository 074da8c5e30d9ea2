#pragma once

// Numerical limits along a filter base chain.
//
// At each level k the function is sampled on element(k). The estimate is
// `converged` once s consecutive levels show oscillation <= tol_osc and
// relative mean steps <= tol_step; `no-limit` when the last s levels at
// k = K all oscillate by at least c_min; `undecided` otherwise.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fderiv/error.hpp"
#include "fderiv/filterbase.hpp"

namespace fderiv {

template <class F>
concept RealFunction = std::invocable<const F&, double> &&
                       std::convertible_to<std::invoke_result_t<const F&, double>, double>;

struct LimitConfig {
  int max_level = 48;            // K
  int samples_per_level = 32;    // m
  double tol_osc = 1e-9;
  double tol_step = 1e-9;
  int stable_levels = 3;         // s
  double no_limit_floor = 1e-6;  // c_min
  std::uint64_t seed = 0;
  // Base used by classical_derivative.
  double delta0 = 1.0;
  double ratio = 0.5;

  void validate() const {
    if (stable_levels < 1) throw ParameterError("stable_levels must be >= 1");
    if (max_level < stable_levels) throw ParameterError("max_level must be >= stable_levels");
    if (samples_per_level < 2) throw ParameterError("samples_per_level must be >= 2");
    if (!(tol_osc > 0.0) || !(tol_step > 0.0) || !(no_limit_floor > 0.0))
      throw ParameterError("tolerances must be positive");
  }
};

enum class LimitStatus { converged, no_limit, undecided, domain_error };

inline std::string to_string(LimitStatus s) {
  switch (s) {
    case LimitStatus::converged: return "converged";
    case LimitStatus::no_limit: return "no-limit";
    case LimitStatus::undecided: return "undecided";
    case LimitStatus::domain_error: return "domain-error";
  }
  return "?";
}

struct TraceRow {
  int k;
  double scale;
  double min;
  double max;
  double mean;
  double osc;
};

struct LimitEstimate {
  LimitStatus status = LimitStatus::undecided;
  std::optional<double> value;  // present iff converged
  std::vector<TraceRow> trace;
  int levels_used = 0;
  std::optional<std::string> failure_detail;
  std::optional<double> failure_point;

  bool converged() const { return status == LimitStatus::converged; }
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "k,scale,min,max,mean,osc\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k, r.scale, r.min, r.max, r.mean,
                  r.osc);
    os << buf;
  }
}

namespace detail {

struct LevelSample {
  TraceRow row{};
  std::optional<double> bad_point;
  std::string bad_detail;
};

template <RealFunction G>
LevelSample sample_level(const G& g, const FilterBaseChain& b, int k, const LimitConfig& cfg) {
  LevelSample out;
  const auto pts = sample(b, k, cfg.samples_per_level, cfg.seed);
  double lo = 0.0, hi = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double v = 0.0;
    try {
      v = static_cast<double>(g(pts[i]));
    } catch (const DomainError& e) {
      out.bad_point = pts[i];
      out.bad_detail = e.what();
      return out;
    }
    if (!std::isfinite(v)) {
      out.bad_point = pts[i];
      out.bad_detail = "non-finite value";
      return out;
    }
    if (i == 0) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  out.row = {k, b.scale(k), lo, hi, sum / static_cast<double>(pts.size()), hi - lo};
  return out;
}

inline void check_levels(const FilterBaseChain& b, const LimitConfig& cfg) {
  cfg.validate();
  if (cfg.max_level > b.max_level())
    throw PreconditionError("max_level " + std::to_string(cfg.max_level) + " exceeds the depth " +
                            std::to_string(b.max_level()) + " of base " + b.id());
}

}  // namespace detail

/// Estimates lim_F g along the filter generated by `b`.
/// Precondition: b satisfies the base axioms up to cfg.max_level.
template <RealFunction G>
LimitEstimate estimate_limit(const G& g, const FilterBaseChain& b, const LimitConfig& cfg) {
  detail::check_levels(b, cfg);
  LimitEstimate est;
  const int s = cfg.stable_levels;
  int stable_run = 0;
  for (int k = 0; k <= cfg.max_level; ++k) {
    auto level = detail::sample_level(g, b, k, cfg);
    if (level.bad_point) {
      est.status = LimitStatus::domain_error;
      est.failure_point = level.bad_point;
      est.failure_detail = level.bad_detail;
      est.levels_used = static_cast<int>(est.trace.size());
      return est;
    }
    const TraceRow& row = level.row;
    est.trace.push_back(row);
    bool stable = false;
    if (k > 0) {
      const double step = std::fabs(row.mean - est.trace[k - 1].mean);
      stable = row.osc <= cfg.tol_osc && step <= cfg.tol_step * (1.0 + std::fabs(row.mean));
    }
    stable_run = stable ? stable_run + 1 : 0;
    if (stable_run >= s) {
      est.status = LimitStatus::converged;
      est.value = row.mean;
      est.levels_used = static_cast<int>(est.trace.size());
      return est;
    }
  }
  est.levels_used = static_cast<int>(est.trace.size());
  const bool wide = static_cast<int>(est.trace.size()) >= s &&
                    std::all_of(est.trace.end() - s, est.trace.end(),
                                [&](const TraceRow& r) { return r.osc >= cfg.no_limit_floor; });
  est.status = wide ? LimitStatus::no_limit : LimitStatus::undecided;
  if (wide) est.failure_detail = "oscillation stays above the no-limit floor";
  return est;
}

/// The sampled range of g on element(k), as recorded in the trace.
template <RealFunction G>
std::pair<double, double> oscillation_at(const G& g, const FilterBaseChain& b, int k, const LimitConfig& cfg) {
  detail::check_levels(b, cfg);
  if (k < 0 || k > cfg.max_level) throw PreconditionError("level outside 0..max_level");
  auto level = detail::sample_level(g, b, k, cfg);
  if (level.bad_point) throw DomainError(level.bad_detail, *level.bad_point);
  return {level.row.min, level.row.max};
}

}  // namespace fderiv
