#pragma once

// JSON: model definitions (exact rational tables) and report serialization.
//
// Model document:
//   {
//     "kind": "discrete_table" | "dependent_collectives" | "quantum_singlet" | "local_deterministic",
//     "lambda":   [{"symbol": "l0", "p": [1, 2]}, ...],
//     "settings": {"left": [0, "pi/2"], "right": ["pi/4", "3pi/4"]},
//     "joint":    [{"lambda": "l0", "left": 0, "right": 0, "p": [[1,2],[0,1],[0,1],[1,2]]}, ...]
//   }
// "left"/"right" in joint entries index the settings lists; "p" lists the
// outcome pairs (+,+), (+,-), (-,+), (-,-). Instead of "joint", a factorized
// model may give
//     "responses": {"left":  [{"lambda": "l0", "setting": 0, "p_plus": [1, 2]}, ...],
//                   "right": [...]}
// Probabilities are [numerator, denominator] pairs; "n/d" strings and integers
// are accepted too. Angles are numbers or expressions such as "3pi/4".

#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bellfreq/bell_analysis.hpp"
#include "bellfreq/counterexample.hpp"
#include "bellfreq/detail/format.hpp"

namespace bellfreq {

using json = nlohmann::json;

/// Number, or [sign][coef][*]pi[/den], e.g. "pi/2", "-3*pi/4", "2pi".
inline double parse_angle(std::string_view text) {
  const auto bad = [&] { return Error(ErrorKind::invalid_argument, "bad angle: '" + std::string(text) + "'"); };
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (auto v = detail::parse_double(s)) return *v;
  const auto pi_pos = s.find("pi");
  if (pi_pos == std::string::npos) throw bad();
  std::string coef = s.substr(0, pi_pos);
  std::string rest = s.substr(pi_pos + 2);
  if (!coef.empty() && coef.back() == '*') coef.pop_back();
  double c = 1.0;
  if (coef == "-") {
    c = -1.0;
  } else if (!coef.empty() && coef != "+") {
    auto v = detail::parse_double(coef);
    if (!v) throw bad();
    c = *v;
  }
  double d = 1.0;
  if (!rest.empty()) {
    if (rest.front() != '/') throw bad();
    auto v = detail::parse_double(rest.substr(1));
    if (!v || *v == 0.0) throw bad();
    d = *v;
  }
  return c * std::numbers::pi / d;
}

inline double angle_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_angle(j.get<std::string>());
  throw Error(ErrorKind::invalid_model, "model: angle must be a number or string");
}

inline Rational rational_from_json(const json& j) {
  try {
    if (j.is_number_integer()) return Rational(j.get<long long>());
    if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer()) {
      const auto den = j[1].get<long long>();
      if (den == 0) throw Error(ErrorKind::invalid_model, "model: zero denominator");
      return Rational(j[0].get<long long>(), den);
    }
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      const auto slash = s.find('/');
      const auto num = detail::parse_integer<long long>(detail::trim(s.substr(0, slash)));
      const auto den = slash == std::string::npos ? std::optional<long long>(1)
                                                  : detail::parse_integer<long long>(detail::trim(s.substr(slash + 1)));
      if (num && den && *den != 0) return Rational(*num, *den);
    }
  } catch (const json::exception&) {
  }
  throw Error(ErrorKind::invalid_model, "model: bad rational " + j.dump() + " (use [numerator, denominator])");
}

inline json rational_to_json(const Rational& r) {
  return json::array({static_cast<long long>(numerator(r)), static_cast<long long>(denominator(r))});
}

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::invalid_model, ctx + key + ": required");
  return j.at(key);
}

inline std::size_t index_in(const json& j, std::size_t size, const char* what) {
  if (!j.is_number_integer() || j.get<long long>() < 0 || static_cast<std::size_t>(j.get<long long>()) >= size)
    throw Error(ErrorKind::invalid_model, std::string("model: bad ") + what + " index " + j.dump());
  return static_cast<std::size_t>(j.get<long long>());
}

}  // namespace detail

inline TableModel table_model_from_json(const json& j) {
  TableModel t;
  std::vector<std::string> symbols;
  for (const auto& e : detail::require(j, "lambda", "model: ")) {
    symbols.push_back(detail::require(e, "symbol", "model: lambda.").get<std::string>());
    t.lambda_probabilities.push_back(rational_from_json(detail::require(e, "p", "model: lambda.")));
  }
  try {
    t.lambda_alphabet = Alphabet(symbols);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_model, std::string("model: ") + e.what());
  }
  const auto& settings = detail::require(j, "settings", "model: ");
  for (const auto& a : detail::require(settings, "left", "model: settings.")) t.left_settings.push_back(angle_from_json(a));
  for (const auto& b : detail::require(settings, "right", "model: settings.")) t.right_settings.push_back(angle_from_json(b));
  const std::size_t nl = symbols.size(), na = t.left_settings.size(), nb = t.right_settings.size();
  t.joint.assign(nl * na * nb, {Rational(-1), Rational(-1), Rational(-1), Rational(-1)});
  std::vector<bool> seen(t.joint.size(), false);

  if (j.contains("joint")) {
    for (const auto& e : j.at("joint")) {
      const auto l = t.lambda_alphabet.find(detail::require(e, "lambda", "model: joint.").get<std::string>());
      if (!l) throw Error(ErrorKind::invalid_model, "model: joint entry names unknown lambda " + e.at("lambda").dump());
      const auto a = detail::index_in(detail::require(e, "left", "model: joint."), na, "left setting");
      const auto b = detail::index_in(detail::require(e, "right", "model: joint."), nb, "right setting");
      const auto& p = detail::require(e, "p", "model: joint.");
      if (!p.is_array() || p.size() != 4) throw Error(ErrorKind::invalid_model, "model: joint.p needs 4 entries");
      const auto idx = t.index(*l, a, b);
      if (seen[idx]) throw Error(ErrorKind::invalid_model, "model: duplicate joint entry");
      seen[idx] = true;
      for (std::size_t i = 0; i < 4; ++i) t.joint[idx][i] = rational_from_json(p[i]);
    }
  } else if (j.contains("responses")) {
    const auto& resp = j.at("responses");
    std::vector<std::optional<Rational>> left(nl * na), right(nl * nb);
    const auto load = [&](const char* wing, std::vector<std::optional<Rational>>& dst, std::size_t ns) {
      for (const auto& e : detail::require(resp, wing, "model: responses.")) {
        const auto l = t.lambda_alphabet.find(detail::require(e, "lambda", "model: responses.").get<std::string>());
        if (!l) throw Error(ErrorKind::invalid_model, "model: response names unknown lambda");
        const auto s = detail::index_in(detail::require(e, "setting", "model: responses."), ns, "setting");
        if (dst[*l * ns + s]) throw Error(ErrorKind::invalid_model, "model: duplicate response entry");
        dst[*l * ns + s] = rational_from_json(detail::require(e, "p_plus", "model: responses."));
      }
    };
    load("left", left, na);
    load("right", right, nb);
    for (std::size_t l = 0; l < nl; ++l)
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b) {
          const auto& pa = left[l * na + a];
          const auto& pb = right[l * nb + b];
          if (!pa || !pb) throw Error(ErrorKind::invalid_model, "model: responses incomplete");
          if (*pa < 0 || *pa > 1 || *pb < 0 || *pb > 1)
            throw Error(ErrorKind::invalid_model, "model: p_plus outside [0, 1]");
          const auto idx = t.index(l, a, b);
          t.joint[idx] = {*pa * *pb, *pa * (1 - *pb), (1 - *pa) * *pb, (1 - *pa) * (1 - *pb)};
          seen[idx] = true;
        }
  } else {
    throw Error(ErrorKind::invalid_model, "model: joint: required (or responses)");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(ErrorKind::invalid_model, "model: joint table is incomplete");
  return t;
}

inline json table_model_to_json(const TableModel& t) {
  json j;
  j["lambda"] = json::array();
  for (std::size_t l = 0; l < t.lambda_alphabet.size(); ++l)
    j["lambda"].push_back({{"symbol", t.lambda_alphabet.symbol(static_cast<SymbolId>(l))},
                           {"p", rational_to_json(t.lambda_probabilities[l])}});
  j["settings"] = {{"left", t.left_settings}, {"right", t.right_settings}};
  j["joint"] = json::array();
  for (std::size_t l = 0; l < t.lambda_alphabet.size(); ++l)
    for (std::size_t a = 0; a < t.left_settings.size(); ++a)
      for (std::size_t b = 0; b < t.right_settings.size(); ++b) {
        json p = json::array();
        for (const auto& v : t.cell(l, a, b)) p.push_back(rational_to_json(v));
        j["joint"].push_back(
            {{"lambda", t.lambda_alphabet.symbol(static_cast<SymbolId>(l))}, {"left", a}, {"right", b}, {"p", p}});
      }
  return j;
}

inline SourceModel model_from_json(const json& j) {
  const auto kind = detail::require(j, "kind", "model: ").get<std::string>();
  if (kind == "local_deterministic") return SourceModel::local_deterministic();
  if (kind == "quantum_singlet") return SourceModel::quantum_singlet();
  if (kind == "discrete_table") return SourceModel::discrete_table(table_model_from_json(j));
  if (kind == "dependent_collectives") return SourceModel::dependent_collectives(table_model_from_json(j));
  throw Error(ErrorKind::invalid_model, "model: unknown kind '" + kind + "'");
}

inline json model_to_json(const SourceModel& m) {
  json j = m.discrete_lambda() ? table_model_to_json(m.table()) : json::object();
  j["kind"] = to_string(m.kind());
  return j;
}

// ---- reports -------------------------------------------------------------

inline void to_json(json& j, const Frequency& f) {
  j = {{"count", f.count}, {"total", f.total}, {"value", f.value()}};
}

inline void to_json(json& j, const FrequencyEstimate& e) {
  j = {{"alphabet", e.alphabet.symbols()}, {"counts", e.counts}, {"total", e.total}, {"frequencies", e.frequencies}};
}

inline void to_json(json& j, const ConvergenceTrace& t) {
  json running = json::array();
  for (const auto& f : t.running) running.push_back(f.value());
  j = {{"symbol", t.symbol}, {"checkpoints", t.checkpoints}, {"running_frequencies", running}};
}

inline void to_json(json& j, const StabilityReport& r) {
  json sels = json::array();
  for (const auto& s : r.selections) {
    json e = {{"name", s.name}, {"length", s.length}, {"skipped", s.skipped}};
    if (!s.skipped) {
      e["deviations"] = s.deviations;
      e["tolerances"] = s.tolerances;
      e["max_deviation"] = s.max_deviation;
      e["stable"] = s.stable;
    }
    sels.push_back(std::move(e));
  }
  j = {{"full", r.full},   {"min_subseq", r.min_subseq}, {"sigmas", r.sigmas},
       {"selections", sels}, {"all_stable", r.all_stable}};
}

inline void to_json(json& j, const IndependenceReport& r) {
  j = {{"row_labels", r.row_labels},
       {"col_labels", r.col_labels},
       {"deviation_matrix", r.deviation_matrix},
       {"max_deviation", r.max_deviation},
       {"exact_factorization", r.exact_factorization},
       {"chi_square", {{"statistic", r.chi_square}, {"degrees_of_freedom", r.degrees_of_freedom}, {"p_value", r.p_value}}},
       {"n", r.n},
       {"dependent_band", r.dependent_band},
       {"independent_band", r.independent_band},
       {"threshold_rule", r.threshold_rule},
       {"verdict", to_string(r.verdict)}};
}

inline void to_json(json& j, const CollectiveIndependenceReport& r) {
  json subs = json::array();
  for (const auto& s : r.subsequences) {
    json e = {{"selection", s.selection}, {"length", s.length}, {"skipped", s.skipped}};
    if (s.report) {
      e["max_deviation"] = s.report->max_deviation;
      e["p_value"] = s.report->p_value;
      e["verdict"] = to_string(s.report->verdict);
    }
    subs.push_back(std::move(e));
  }
  j = {{"full", r.full},
       {"event_verdict", to_string(r.event_verdict)},
       {"verdict", to_string(r.verdict)},
       {"breaking_selection", r.breaking_selection ? json(*r.breaking_selection) : json(nullptr)},
       {"min_length", r.min_length},
       {"subsequence_p_dependent", r.subsequence_p_dependent},
       {"skipped", r.skipped},
       {"subsequences", subs}};
}

inline void to_json(json& j, const CorrelationEstimate& e) {
  j = {{"a", e.a}, {"b", e.b}, {"E", e.E}, {"M", e.trials}, {"product_sum", e.product_sum},
       {"standard_error", e.standard_error}};
}

inline void to_json(json& j, const CHSHReport& r) {
  j = {{"settings", {{"a", r.a}, {"a_prime", r.a_prime}, {"b", r.b}, {"b_prime", r.b_prime}}},
       {"sign_convention", "S = E(a,b) - E(a,b') + E(a',b) + E(a',b')"},
       {"terms", r.terms},
       {"S", r.S},
       {"standard_error", r.standard_error}};
}

inline void to_json(json& j, const FactorabilityCell& c) {
  j = {{"bin", c.bin}, {"a", c.a}, {"b", c.b}, {"count", c.count}, {"deviations", c.deviations},
       {"max_deviation", c.max_deviation}};
}

inline void to_json(json& j, const FactorabilityReport& r) {
  json skipped = json::array();
  for (const auto& c : r.skipped) skipped.push_back({{"bin", c.bin}, {"a", c.a}, {"b", c.b}, {"count", c.count}});
  j = {{"binning", r.binning},
       {"bins", r.bins},
       {"min_count", r.min_count},
       {"max_deviation", r.max_deviation},
       {"witness", r.witness ? json(*r.witness) : json(nullptr)},
       {"smallest_scored_count", r.smallest_scored_count},
       {"threshold", r.threshold},
       {"verdict", to_string(r.verdict)},
       {"scored_cells", r.cells.size()},
       {"skipped", skipped}};
}

inline void to_json(json& j, const FreedomOfChoiceReport& r) {
  j = {{"lambda_bins", r.lambda_bins}, {"left", r.left}, {"right", r.right}, {"both_independent", r.both_independent}};
}

inline void to_json(json& j, const WingDependenceReport& r) {
  json pairs = json::array();
  for (const auto& p : r.per_settings)
    pairs.push_back({{"a", p.a},
                     {"b", p.b},
                     {"trials", p.trials},
                     {"dependence_metric", p.dependence_metric},
                     {"verdict", to_string(p.report.verdict)},
                     {"p_value", p.report.p_value}});
  j = {{"lambda_bins", r.lambda_bins},
       {"omega_lambda", r.omega_lambda},
       {"omega_lambda_metric", r.omega_lambda_metric},
       {"outcomes", r.outcomes},
       {"outcome_metric", r.outcome_metric},
       {"per_settings", pairs},
       {"max_pair_metric", r.max_pair_metric},
       {"outcome_verdict", to_string(r.outcome_verdict)}};
}

inline json table_to_json(const ContingencyTable& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols; ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ratio_string(std::uint64_t num, std::uint64_t den) {
  const Rational r(num, den);
  return numerator(r).str() + "/" + denominator(r).str();
}

inline void to_json(json& j, const NumberplayWitness& w) {
  json pattern = json::array();
  for (const auto& [x, y] : w.pattern) pattern.push_back({x, y});
  json joint = json::array(), left = json::array(), right = json::array();
  const auto& t = w.period_counts;
  for (std::size_t r = 0; r < t.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < t.cols; ++c) row.push_back(ratio_string(t.at(r, c), t.total));
    joint.push_back(std::move(row));
    left.push_back(ratio_string(t.row_totals[r], t.total));
  }
  for (std::size_t c = 0; c < t.cols; ++c) right.push_back(ratio_string(t.col_totals[c], t.total));
  j = {{"alphabet_sizes", {w.left_size, w.right_size}},
       {"period", w.period},
       {"pattern", pattern},
       {"period_frequencies", {{"joint", joint}, {"left", left}, {"right", right}}},
       {"repetitions", w.repetitions},
       {"selection", w.selection},
       {"selected_length", w.selected_counts.total},
       {"selected_counts", table_to_json(w.selected_counts)},
       {"cell", {w.cell_row, w.cell_col}},
       {"deviation", ratio_string(w.deviation_num, w.deviation_den)},
       {"deviation_value", w.deviation()},
       {"candidates_examined", w.candidates_examined}};
}

}  // namespace bellfreq
