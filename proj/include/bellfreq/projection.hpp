#pragma once

// Collectives extracted from a trial log, and the two wing-level analyses built
// on them: freedom of choice (settings vs lambda) and wing dependence through
// the shared lambda.

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bellfreq/epr_model.hpp"
#include "bellfreq/independence.hpp"

namespace bellfreq {

enum class Field { lambda, omega_left, omega_right, setting_left, setting_right, outcome_left, outcome_right };

inline const char* to_string(Field f) {
  switch (f) {
    case Field::lambda: return "lambda";
    case Field::omega_left: return "omega_left";
    case Field::omega_right: return "omega_right";
    case Field::setting_left: return "setting_left";
    case Field::setting_right: return "setting_right";
    case Field::outcome_left: return "outcome_left";
    case Field::outcome_right: return "outcome_right";
  }
  return "?";
}

inline Field parse_field(std::string_view name) {
  for (Field f : {Field::lambda, Field::omega_left, Field::omega_right, Field::setting_left, Field::setting_right,
                  Field::outcome_left, Field::outcome_right})
    if (name == to_string(f)) return f;
  throw Error(ErrorKind::invalid_argument, "unknown field: " + std::string(name));
}

inline constexpr std::size_t kDefaultLambdaBins = 64;

/// Equal-width bin of [0, 2pi).
inline std::size_t lambda_bin(double angle, std::size_t bins) {
  const auto k = static_cast<std::size_t>(angle / kTwoPi * static_cast<double>(bins));
  return std::min(k, bins - 1);
}

/// Fields to project. omega_* project the apparatus setting; the noise draw is
/// continuous and is not part of any collective. Continuous lambda is binned
/// into lambda_bins equal-width bins at extraction time.
struct Projection {
  std::vector<Field> fields;
  std::size_t lambda_bins = kDefaultLambdaBins;

  static Projection parse(const std::vector<std::string>& names, std::size_t bins = kDefaultLambdaBins) {
    Projection p{{}, bins};
    for (const auto& n : names) p.fields.push_back(parse_field(n));
    return p;
  }
};

namespace detail {

inline std::vector<double> distinct_settings(const TrialLog& log, bool left) {
  std::vector<double> v;
  for (const auto& r : log.records) v.push_back(left ? r.left.setting : r.right.setting);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct FieldColumn {
  Alphabet alphabet;
  std::vector<SymbolId> ids;
};

inline FieldColumn setting_column(const TrialLog& log, bool left) {
  const auto values = distinct_settings(log, left);
  std::vector<std::string> labels;
  for (double v : values) labels.push_back(format_double(v));
  FieldColumn col{Alphabet(std::move(labels)), {}};
  col.ids.reserve(log.size());
  for (const auto& r : log.records) {
    const double s = left ? r.left.setting : r.right.setting;
    col.ids.push_back(static_cast<SymbolId>(std::lower_bound(values.begin(), values.end(), s) - values.begin()));
  }
  return col;
}

inline Alphabet lambda_bin_alphabet(std::size_t bins) {
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < bins; ++k) labels.push_back("bin" + std::to_string(k));
  return Alphabet(std::move(labels));
}

inline FieldColumn lambda_column(const TrialLog& log, std::size_t bins) {
  if (log.backend == LambdaBackend::discrete) {
    FieldColumn col{*log.lambda_alphabet, {}};
    col.ids.reserve(log.size());
    for (const auto& r : log.records) col.ids.push_back(r.lambda.symbol);
    return col;
  }
  if (bins == 0) throw Error(ErrorKind::invalid_argument, "lambda bins must be >= 1");
  FieldColumn col{lambda_bin_alphabet(bins), {}};
  col.ids.reserve(log.size());
  for (const auto& r : log.records) col.ids.push_back(static_cast<SymbolId>(lambda_bin(r.lambda.angle, bins)));
  return col;
}

inline FieldColumn column(const TrialLog& log, Field f, std::size_t bins) {
  switch (f) {
    case Field::lambda: return lambda_column(log, bins);
    case Field::omega_left:
    case Field::setting_left: return setting_column(log, true);
    case Field::omega_right:
    case Field::setting_right: return setting_column(log, false);
    case Field::outcome_left:
    case Field::outcome_right: {
      FieldColumn col{Alphabet({"-1", "+1"}), {}};
      col.ids.reserve(log.size());
      for (const auto& r : log.records)
        col.ids.push_back((f == Field::outcome_left ? r.outcome_left : r.outcome_right) == Outcome::plus ? 1U : 0U);
      return col;
    }
  }
  throw Error(ErrorKind::invalid_argument, "unknown field");
}

}  // namespace detail

/// Index-aligned collective over the product alphabet of the projected fields.
inline Collective extract_collective(const TrialLog& log, const Projection& projection) {
  if (projection.fields.empty()) throw Error(ErrorKind::invalid_argument, "projection needs at least one field");
  if (log.size() == 0) throw Error(ErrorKind::missing_data, "empty trial log");
  auto acc = detail::column(log, projection.fields.front(), projection.lambda_bins);
  for (std::size_t i = 1; i < projection.fields.size(); ++i) {
    auto next = detail::column(log, projection.fields[i], projection.lambda_bins);
    const auto radix = static_cast<SymbolId>(next.alphabet.size());
    for (std::size_t j = 0; j < acc.ids.size(); ++j) acc.ids[j] = acc.ids[j] * radix + next.ids[j];
    acc.alphabet = Alphabet::product(acc.alphabet, next.alphabet);
  }
  return Collective(std::move(acc.alphabet), std::move(acc.ids));
}

inline Collective extract_collective(const TrialLog& log, std::initializer_list<Field> fields,
                                     std::size_t bins = kDefaultLambdaBins) {
  return extract_collective(log, Projection{std::vector<Field>(fields), bins});
}

/// Trials whose settings equal (a, b) within kSettingTolerance.
inline TrialLog filter_settings(const TrialLog& log, double a, double b) {
  TrialLog out;
  out.backend = log.backend;
  out.lambda_alphabet = log.lambda_alphabet;
  out.has_noise = log.has_noise;
  out.master_seed = log.master_seed;
  for (const auto& r : log.records)
    if (same_setting(r.left.setting, a) && same_setting(r.right.setting, b)) out.records.push_back(r);
  return out;
}

struct FreedomOfChoiceReport {
  std::size_t lambda_bins = 0;
  IndependenceReport left;
  IndependenceReport right;
  bool both_independent = false;
};

/// Event-independence test of each wing's setting collective against the
/// (binned) lambda collective.
inline FreedomOfChoiceReport freedom_of_choice_check(const TrialLog& log, std::size_t bins = kDefaultLambdaBins,
                                                     const IndependenceThresholds& th = {}) {
  const Collective lambda = extract_collective(log, {Field::lambda}, bins);
  FreedomOfChoiceReport r;
  r.lambda_bins = log.backend == LambdaBackend::discrete ? log.lambda_alphabet->size() : bins;
  r.left = event_independence_test(combine(extract_collective(log, {Field::setting_left}), lambda), th);
  r.right = event_independence_test(combine(extract_collective(log, {Field::setting_right}), lambda), th);
  r.both_independent = r.left.verdict == Verdict::independent && r.right.verdict == Verdict::independent;
  return r;
}

struct PairOutcomeDependence {
  double a = 0.0, b = 0.0;
  std::size_t trials = 0;
  double dependence_metric = 0.0;
  IndependenceReport report;
};

struct WingDependenceReport {
  std::size_t lambda_bins = 0;
  IndependenceReport omega_lambda;  // x_{omega_left, lambda} vs x_{omega_right, lambda}
  double omega_lambda_metric = 0.0;
  IndependenceReport outcomes;  // outcome_left vs outcome_right over all trials
  double outcome_metric = 0.0;
  std::vector<PairOutcomeDependence> per_settings;  // sorted by (a, b)
  double max_pair_metric = 0.0;
  // Outcome-level verdict: dependent if the pooled or any per-settings outcome
  // test is dependent, independent if all are independent. The shared-lambda
  // verdict is omega_lambda.verdict.
  Verdict outcome_verdict = Verdict::inconclusive;
};

inline WingDependenceReport wing_dependence_demo(const TrialLog& log, std::size_t bins = kDefaultLambdaBins,
                                                 const IndependenceThresholds& th = {}) {
  WingDependenceReport r;
  r.lambda_bins = log.backend == LambdaBackend::discrete ? log.lambda_alphabet->size() : bins;
  const auto wings = combine(extract_collective(log, {Field::omega_left, Field::lambda}, bins),
                             extract_collective(log, {Field::omega_right, Field::lambda}, bins));
  r.omega_lambda = event_independence_test(wings, th);
  r.omega_lambda_metric = dependence_metric(wings);
  const auto outcomes =
      combine(extract_collective(log, {Field::outcome_left}), extract_collective(log, {Field::outcome_right}));
  r.outcomes = event_independence_test(outcomes, th);
  r.outcome_metric = dependence_metric(outcomes);

  bool dependent = r.outcomes.verdict == Verdict::dependent;
  bool all_independent = r.outcomes.verdict == Verdict::independent;
  for (double a : detail::distinct_settings(log, true))
    for (double b : detail::distinct_settings(log, false)) {
      const TrialLog sub = filter_settings(log, a, b);
      if (sub.size() == 0) continue;
      const auto cc =
          combine(extract_collective(sub, {Field::outcome_left}), extract_collective(sub, {Field::outcome_right}));
      PairOutcomeDependence p{a, b, sub.size(), dependence_metric(cc), event_independence_test(cc, th)};
      dependent = dependent || p.report.verdict == Verdict::dependent;
      all_independent = all_independent && p.report.verdict == Verdict::independent;
      r.max_pair_metric = std::max(r.max_pair_metric, p.dependence_metric);
      r.per_settings.push_back(std::move(p));
    }
  r.outcome_verdict = dependent ? Verdict::dependent : (all_independent ? Verdict::independent : Verdict::inconclusive);
  return r;
}

}  // namespace bellfreq
