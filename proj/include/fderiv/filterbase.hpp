#pragma once

// Filter bases on the real line, realised as nested chains of simple sets
// (finite unions of open intervals plus finitely many points, minus finitely
// many excluded points). The filter generated by a chain is never
// materialised; membership is answered by containment queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fderiv/error.hpp"
#include "fderiv/expr.hpp"

namespace fderiv {

struct OpenInterval {
  double lo;
  double hi;

  bool contains(double x) const { return lo < x && x < hi; }
  double width() const { return hi - lo; }
  friend bool operator==(const OpenInterval&, const OpenInterval&) = default;
};

/// (union of intervals, union of points) \ excluded
class SetDescriptor {
 public:
  SetDescriptor() = default;

  /// Intervals must satisfy lo < hi; they are sorted by lo and must be
  /// pairwise disjoint. `points` keeps its order (sequence samplers rely on it).
  SetDescriptor(std::vector<OpenInterval> intervals, std::vector<double> points = {},
                std::vector<double> excluded = {})
      : intervals_(std::move(intervals)), points_(std::move(points)), excluded_(std::move(excluded)) {
    for (const auto& iv : intervals_)
      if (!(iv.lo < iv.hi) || std::isnan(iv.lo) || std::isnan(iv.hi))
        throw ParameterError("open interval requires lo < hi");
    std::sort(intervals_.begin(), intervals_.end(),
              [](const OpenInterval& a, const OpenInterval& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < intervals_.size(); ++i)
      if (intervals_[i].lo < intervals_[i - 1].hi) throw ParameterError("intervals overlap");
    for (double p : points_)
      if (!std::isfinite(p)) throw ParameterError("set points must be finite");
    sorted_points_ = points_;
    std::sort(sorted_points_.begin(), sorted_points_.end());
    std::sort(excluded_.begin(), excluded_.end());
  }

  static SetDescriptor interval(double lo, double hi, std::vector<double> excluded = {}) {
    return SetDescriptor({{lo, hi}}, {}, std::move(excluded));
  }

  const std::vector<OpenInterval>& intervals() const { return intervals_; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& excluded() const { return excluded_; }

  bool is_excluded(double x) const { return std::binary_search(excluded_.begin(), excluded_.end(), x); }

  bool contains(double x) const {
    if (is_excluded(x)) return false;
    if (std::binary_search(sorted_points_.begin(), sorted_points_.end(), x)) return true;
    return in_intervals(x);
  }

  /// Every open interval is an infinite set, so removing finitely many points
  /// leaves it nonempty.
  bool empty() const {
    if (!intervals_.empty()) return false;
    return std::all_of(points_.begin(), points_.end(), [&](double p) { return is_excluded(p); });
  }

  /// Exact containment test: *this is a subset of `other`.
  bool subset_of(const SetDescriptor& other) const {
    for (double p : points_)
      if (!is_excluded(p) && !other.contains(p)) return false;
    for (const auto& iv : intervals_) {
      // iv minus our excluded points splits into open pieces; each must be covered.
      double lo = iv.lo;
      auto it = std::upper_bound(excluded_.begin(), excluded_.end(), iv.lo);
      for (; it != excluded_.end() && *it < iv.hi; ++it) {
        if (lo < *it && !other.covers_open(lo, *it)) return false;
        lo = *it;
      }
      if (!other.covers_open(lo, iv.hi)) return false;
    }
    return true;
  }

  friend bool operator==(const SetDescriptor& a, const SetDescriptor& b) {
    return a.intervals_ == b.intervals_ && a.points_ == b.points_ && a.excluded_ == b.excluded_;
  }

  std::string describe() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& iv : intervals_) {
      os << (first ? "" : " u ") << "(" << format_number(iv.lo) << ", " << format_number(iv.hi) << ")";
      first = false;
    }
    if (!points_.empty()) {
      os << (first ? "" : " u ") << "{";
      for (std::size_t i = 0; i < points_.size(); ++i) os << (i ? ", " : "") << format_number(points_[i]);
      os << "}";
      first = false;
    }
    if (first) os << "{}";
    if (!excluded_.empty()) {
      os << " \\ {";
      for (std::size_t i = 0; i < excluded_.size(); ++i) os << (i ? ", " : "") << format_number(excluded_[i]);
      os << "}";
    }
    return os.str();
  }

 private:
  bool in_intervals(double x) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), x,
                               [](double v, const OpenInterval& iv) { return v < iv.lo; });
    return it != intervals_.begin() && std::prev(it)->contains(x);
  }

  // Is the open interval (lo, hi) a subset of this set?
  bool covers_open(double lo, double hi) const {
    for (double e : excluded_)
      if (lo < e && e < hi) return false;
    // Walk the sorted, disjoint intervals; gaps may be plugged by single points.
    double reached = lo;
    bool need_point = false;  // whether `reached` itself must be covered
    for (const auto& iv : intervals_) {
      if (iv.hi <= reached) continue;
      if (iv.lo > reached) return false;
      if (need_point && iv.lo == reached && !contains(reached)) return false;
      reached = iv.hi;
      if (reached >= hi) return true;
      need_point = true;
    }
    return false;
  }

  std::vector<OpenInterval> intervals_;
  std::vector<double> points_;
  std::vector<double> excluded_;
  std::vector<double> sorted_points_;
};

/// A filter base on R given as a nested chain element(0) ⊇ element(1) ⊇ ...
class FilterBaseChain {
 public:
  using ElementFn = std::function<SetDescriptor(int)>;
  using ScaleFn = std::function<double(int)>;

  FilterBaseChain(std::string id, ElementFn element, int max_level, bool punctured_at_zero,
                  ScaleFn scale = nullptr, std::map<std::string, double> params = {})
      : id_(std::move(id)),
        element_(std::move(element)),
        scale_(std::move(scale)),
        max_level_(max_level),
        punctured_at_zero_(punctured_at_zero),
        params_(std::move(params)) {
    if (max_level_ < 0) throw ParameterError("max_level must be non-negative");
    if (!scale_) scale_ = [](int k) { return static_cast<double>(k); };
  }

  const std::string& id() const { return id_; }
  int max_level() const { return max_level_; }
  bool punctured_at_zero() const { return punctured_at_zero_; }
  const std::map<std::string, double>& params() const { return params_; }

  SetDescriptor element(int k) const {
    if (k < 0 || k > max_level_)
      throw PreconditionError("level " + std::to_string(k) + " outside 0.." + std::to_string(max_level_));
    return element_(k);
  }

  /// δ0·rᵏ for interval chains, the tail start index for sequence chains.
  double scale(int k) const { return scale_(k); }

  /// The chain k ↦ element(stride·k); a finer description of the same filter.
  FilterBaseChain refined(int stride) const {
    if (stride < 1) throw ParameterError("stride must be positive");
    auto self = *this;
    return FilterBaseChain(
        id_ + "/stride=" + std::to_string(stride),
        [self, stride](int k) { return self.element(stride * k); }, max_level_ / stride,
        punctured_at_zero_, [self, stride](int k) { return self.scale(stride * k); }, params_);
  }

 private:
  std::string id_;
  ElementFn element_;
  ScaleFn scale_;
  int max_level_;
  bool punctured_at_zero_;
  std::map<std::string, double> params_;
};

inline constexpr int kDefaultIntervalLevels = 128;
inline constexpr int kDefaultSequenceLevels = 128;
inline constexpr int kDefaultTailPoints = 64;

namespace detail {

inline void check_geometric(double delta0, double ratio) {
  if (!(delta0 > 0.0) || !std::isfinite(delta0)) throw ParameterError("delta0 must be a positive finite number");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("ratio must lie in (0, 1)");
}

// Deepest level <= requested whose radius is still a normal double.
inline int geometric_levels(double delta0, double ratio, int requested) {
  int k = 0;
  double d = delta0;
  while (k < requested && d * ratio >= std::numeric_limits<double>::min()) {
    d *= ratio;
    ++k;
  }
  return k;
}

inline double geometric_radius(double delta0, double ratio, int k) {
  double d = delta0;
  for (int i = 0; i < k; ++i) d *= ratio;
  return d;
}

enum class Side { both, right, left };

inline FilterBaseChain geometric_chain(std::string kind, Side side, double delta0, double ratio, int max_level) {
  check_geometric(delta0, ratio);
  const int levels = geometric_levels(delta0, ratio, max_level);
  std::string id = kind + ":delta0=" + format_number(delta0) + ",ratio=" + format_number(ratio);
  // Radii are materialised once so every element is bit-for-bit reproducible.
  std::vector<double> radii(levels + 1);
  for (int k = 0; k <= levels; ++k) radii[k] = geometric_radius(delta0, ratio, k);
  auto element = [radii, side](int k) {
    const double d = radii[k];
    switch (side) {
      case Side::both: return SetDescriptor::interval(-d, d, {0.0});
      case Side::right: return SetDescriptor::interval(0.0, d);
      case Side::left: return SetDescriptor::interval(-d, 0.0);
    }
    return SetDescriptor{};
  };
  return FilterBaseChain(std::move(id), element, levels, true, [radii](int k) { return radii[k]; },
                         {{"delta0", delta0}, {"ratio", ratio}});
}

}  // namespace detail

/// element(k) = (−δ0·rᵏ, δ0·rᵏ) \ {0}
inline FilterBaseChain punctured_base(double delta0, double ratio, int max_level = kDefaultIntervalLevels) {
  return detail::geometric_chain("punctured", detail::Side::both, delta0, ratio, max_level);
}

/// element(k) = (0, δ0·rᵏ)
inline FilterBaseChain right_base(double delta0, double ratio, int max_level = kDefaultIntervalLevels) {
  return detail::geometric_chain("right", detail::Side::right, delta0, ratio, max_level);
}

/// element(k) = (−δ0·rᵏ, 0)
inline FilterBaseChain left_base(double delta0, double ratio, int max_level = kDefaultIntervalLevels) {
  return detail::geometric_chain("left", detail::Side::left, delta0, ratio, max_level);
}

/// Closed family of null sequences usable as tails-of-a-sequence bases.
struct SequenceSpec {
  enum class Kind { powinv, geo, piovern };
  Kind kind = Kind::powinv;
  double c = 1.0;
  double p = 1.0;  // powinv exponent
  double q = 0.5;  // geo ratio

  /// h_n for n >= 1.
  double term(long n) const {
    const double nn = static_cast<double>(n);
    switch (kind) {
      case Kind::powinv: return c * std::pow(nn, -p);
      case Kind::geo: return c * std::pow(q, nn);
      case Kind::piovern: return c / (std::numbers::pi * nn);
    }
    return 0.0;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::powinv: return "seq:kind=powinv,c=" + format_number(c) + ",p=" + format_number(p);
      case Kind::geo: return "seq:kind=geo,c=" + format_number(c) + ",q=" + format_number(q);
      case Kind::piovern: return "seq:kind=piovern,c=" + format_number(c);
    }
    return "seq";
  }
};

/// element(k) = {h_n : k + 1 <= n <= max_level + tail_points}. All elements
/// share the same last index so the tails are exactly nested; the deepest
/// element holds `tail_points` members.
inline FilterBaseChain sequence_base(const SequenceSpec& spec, int max_level = kDefaultSequenceLevels,
                                     int tail_points = kDefaultTailPoints) {
  if (!std::isfinite(spec.c) || spec.c == 0.0) throw ParameterError("sequence scale c must be finite and nonzero");
  if (spec.kind == SequenceSpec::Kind::powinv && !(spec.p > 0.0 && std::isfinite(spec.p)))
    throw ParameterError("powinv exponent p must be positive");
  if (spec.kind == SequenceSpec::Kind::geo && !(spec.q > 0.0 && spec.q < 1.0))
    throw ParameterError("geo ratio q must lie in (0, 1)");
  if (max_level < 0 || tail_points < 1) throw ParameterError("sequence base needs max_level >= 0 and tail_points >= 1");

  const long last = static_cast<long>(max_level) + tail_points;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(last));
  for (long n = 1; n <= last; ++n) {
    const double h = spec.term(n);
    if (h == 0.0 || !std::isfinite(h))
      throw ParameterError("sequence term h_" + std::to_string(n) + " is zero or not finite");
    if (!terms.empty() && !(std::fabs(h) < std::fabs(terms.back())))
      throw ParameterError("sequence is not strictly decreasing in magnitude at n = " + std::to_string(n));
    terms.push_back(h);
  }
  std::map<std::string, double> params{{"c", spec.c}};
  if (spec.kind == SequenceSpec::Kind::powinv) params["p"] = spec.p;
  if (spec.kind == SequenceSpec::Kind::geo) params["q"] = spec.q;
  params["tail_points"] = tail_points;
  auto element = [terms](int k) {
    return SetDescriptor({}, std::vector<double>(terms.begin() + k, terms.end()));
  };
  return FilterBaseChain(spec.describe(), element, max_level, true,
                         [](int k) { return static_cast<double>(k + 1); }, std::move(params));
}

// ---------------------------------------------------------------------------
// Axioms and generated-filter membership

struct AxiomReport {
  int levels_checked = 0;  // K
  bool nonempty = true;    // axiom 1: no element is empty
  bool nested = true;      // axiom 2, via element(max(j,k)) ⊆ element(j) ∩ element(k)
  bool punctured = true;   // only meaningful when the chain is flagged punctured_at_zero
  std::vector<int> empty_levels;
  std::vector<std::pair<int, int>> nesting_failures;  // (j, k), j < k, element(k) ⊄ element(j)
  std::vector<int> punctured_failures;

  bool ok() const { return nonempty && nested && punctured; }
};

inline AxiomReport verify_base_axioms(const FilterBaseChain& b, int K) {
  if (K < 0 || K > b.max_level())
    throw PreconditionError("K = " + std::to_string(K) + " exceeds max_level " + std::to_string(b.max_level()));
  AxiomReport report;
  report.levels_checked = K;
  std::vector<SetDescriptor> elements;
  elements.reserve(K + 1);
  for (int k = 0; k <= K; ++k) elements.push_back(b.element(k));

  for (int k = 0; k <= K; ++k) {
    if (elements[k].empty()) {
      report.nonempty = false;
      report.empty_levels.push_back(k);
    }
    if (b.punctured_at_zero() && elements[k].contains(0.0)) {
      report.punctured = false;
      report.punctured_failures.push_back(k);
    }
  }
  for (int k = 0; k <= K; ++k)
    for (int j = 0; j < k; ++j)
      if (!elements[k].subset_of(elements[j])) {
        report.nested = false;
        report.nesting_failures.emplace_back(j, k);
      }
  return report;
}

/// Smallest level k <= K with element(k) ⊆ S, if any.
inline std::optional<int> generated_filter_witness(const FilterBaseChain& b, const SetDescriptor& S, int K) {
  if (K < 0 || K > b.max_level())
    throw PreconditionError("K = " + std::to_string(K) + " exceeds max_level " + std::to_string(b.max_level()));
  for (int k = 0; k <= K; ++k)
    if (b.element(k).subset_of(S)) return k;
  return std::nullopt;
}

/// S ∈ F(B), as witnessed up to level K. `false` means "not witnessed".
inline bool in_generated_filter(const FilterBaseChain& b, const SetDescriptor& S, int K) {
  return generated_filter_witness(b, S, K).has_value();
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Counter-based uniform variate in the open interval (0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ (counter * 0xD1B54A32D192ED03ull));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Largest-remainder split of m strata across components, proportional to width.
inline std::vector<int> allocate_strata(const std::vector<OpenInterval>& comps, int m) {
  double total = 0.0;
  for (const auto& c : comps) total += c.width();
  std::vector<int> counts(comps.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  int used = 0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const double quota = m * (comps[i].width() / total);
    counts[i] = static_cast<int>(std::floor(quota));
    used += counts[i];
    rema.emplace_back(quota - counts[i], i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < m; ++i, ++used) ++counts[rema[i % rema.size()].second];
  return counts;
}

}  // namespace detail

/// m distinct members of `set`, deterministic in (set, m, seed).
inline std::vector<double> sample_set(const SetDescriptor& set, int m, std::uint64_t seed) {
  if (m < 2) throw PreconditionError("sample size m must be at least 2");
  std::vector<double> out;
  out.reserve(m);
  if (set.intervals().empty()) {
    for (double p : set.points()) {
      if ((int)out.size() == m) break;
      if (!set.is_excluded(p) && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    if ((int)out.size() < m)
      throw PreconditionError("requested " + std::to_string(m) + " samples but the set has only " +
                              std::to_string(out.size()) + " points");
    return out;
  }

  const auto& comps = set.intervals();
  const auto counts = detail::allocate_strata(comps, m);
  std::uint64_t counter = 0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const auto& iv = comps[c];
    const int n = counts[c];
    double prev = iv.lo;
    for (int i = 0; i < n; ++i, ++counter) {
      const double jitter = detail::counter_uniform(seed, counter) - 0.5;
      // Fallback positions inside stratum i if the jittered point is unusable.
      const double rel[] = {i + 0.5 + jitter, i + 0.5, i + 0.25, i + 0.75, i + 0.125, i + 0.875};
      bool placed = false;
      for (double r : rel) {
        const double x = iv.lo + iv.width() * (r / n);
        if (x > prev && set.contains(x) && iv.contains(x)) {
          out.push_back(x);
          prev = x;
          placed = true;
          break;
        }
      }
      if (!placed)
        throw PreconditionError("cannot place " + std::to_string(n) + " distinct samples in " + set.describe());
    }
  }
  return out;
}

inline std::vector<double> sample(const FilterBaseChain& b, int k, int m, std::uint64_t seed) {
  return sample_set(b.element(k), m, seed);
}

// ---------------------------------------------------------------------------
// Base spec strings:
//   punctured:delta0=<r>,ratio=<r>   right:...   left:...
//   seq:kind=<powinv|geo|piovern>,c=<r>,p=<r>|q=<r>

inline FilterBaseChain parse_base_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string kind(text.substr(0, colon));
  std::map<std::string, std::string> kv;
  if (colon != std::string_view::npos) {
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0) throw ParameterError("malformed base parameter '" + std::string(item) + "'");
      const std::string key(item.substr(0, eq));
      if (kv.count(key)) throw ParameterError("duplicate base parameter '" + key + "'");
      kv[key] = std::string(item.substr(eq + 1));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto number = [&](const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = 0.0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ParameterError("base parameter " + key + " is not a number: '" + s + "'");
    kv.erase(it);
    return v;
  };
  auto reject_leftovers = [&] {
    if (!kv.empty()) throw ParameterError("unknown base parameter '" + kv.begin()->first + "' for " + kind);
  };

  if (kind == "punctured" || kind == "right" || kind == "left") {
    const double delta0 = number("delta0", 1.0);
    const double ratio = number("ratio", 0.5);
    reject_leftovers();
    if (kind == "punctured") return punctured_base(delta0, ratio);
    if (kind == "right") return right_base(delta0, ratio);
    return left_base(delta0, ratio);
  }
  if (kind == "seq") {
    SequenceSpec spec;
    auto it = kv.find("kind");
    if (it == kv.end()) throw ParameterError("seq base requires kind=<powinv|geo|piovern>");
    const std::string family = it->second;
    kv.erase(it);
    if (family == "powinv") {
      spec.kind = SequenceSpec::Kind::powinv;
      spec.p = number("p", 1.0);
    } else if (family == "geo") {
      spec.kind = SequenceSpec::Kind::geo;
      spec.q = number("q", 0.5);
    } else if (family == "piovern") {
      spec.kind = SequenceSpec::Kind::piovern;
    } else {
      throw ParameterError("sequence kind '" + family + "' is outside the family powinv|geo|piovern");
    }
    spec.c = number("c", 1.0);
    reject_leftovers();
    return sequence_base(spec);
  }
  throw ParameterError("unknown base kind '" + kind + "' (expected punctured, right, left or seq)");
}

}  // namespace fderiv
