#pragma once

// Event independence (numeric factorization of joint frequencies) and
// collective independence (factorization that survives a family of place
// selections, including rules that pick one component's positions from the
// other component's past).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "bellfreq/collective.hpp"
#include "bellfreq/detail/format.hpp"
#include "bellfreq/detail/parallel.hpp"
#include "bellfreq/place_selection.hpp"

namespace bellfreq {

/// Index-aligned components of equal length.
class CombinedCollective {
 public:
  explicit CombinedCollective(std::vector<Collective> components) : components_(std::move(components)) {
    if (components_.empty()) throw Error(ErrorKind::invalid_argument, "combination needs at least one component");
    for (const auto& c : components_)
      if (c.size() != components_.front().size())
        throw Error(ErrorKind::length_mismatch, "length mismatch: " + std::to_string(components_.front().size()) +
                                                    " vs " + std::to_string(c.size()));
    if (components_.front().empty()) throw Error(ErrorKind::invalid_argument, "combination of empty collectives");
  }

  std::size_t arity() const noexcept { return components_.size(); }
  std::size_t size() const noexcept { return components_.front().size(); }
  const std::vector<Collective>& components() const noexcept { return components_; }
  const Collective& component(std::size_t i) const { return components_.at(i); }

  std::vector<SymbolId> tuple(std::size_t j) const {
    std::vector<SymbolId> t;
    t.reserve(arity());
    for (const auto& c : components_) t.push_back(c[j]);
    return t;
  }

  /// The tuple sequence as one collective over the mixed-radix product alphabet.
  Collective tuple_view() const {
    Alphabet alphabet = components_.front().alphabet();
    for (std::size_t i = 1; i < arity(); ++i) alphabet = Alphabet::product(alphabet, components_[i].alphabet());
    std::vector<SymbolId> ids(size(), 0);
    for (const auto& c : components_) {
      const auto radix = static_cast<SymbolId>(c.alphabet().size());
      for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = ids[j] * radix + c[j];
    }
    return Collective(std::move(alphabet), std::move(ids));
  }

 private:
  std::vector<Collective> components_;
};

inline CombinedCollective combine(const Collective& c1, const Collective& c2) {
  if (c1.size() != c2.size())
    throw Error(ErrorKind::length_mismatch,
                "length mismatch: " + std::to_string(c1.size()) + " vs " + std::to_string(c2.size()));
  return CombinedCollective({c1, c2});
}

/// Joint counts of a two-way table.
struct ContingencyTable {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint64_t> counts;  // row-major
  std::vector<std::uint64_t> row_totals, col_totals;
  std::uint64_t total = 0;

  ContingencyTable(std::size_t r, std::size_t c)
      : rows(r), cols(c), counts(r * c, 0), row_totals(r, 0), col_totals(c, 0) {}

  void add(SymbolId r, SymbolId c) {
    ++counts[r * cols + c];
    ++row_totals[r];
    ++col_totals[c];
    ++total;
  }
  std::uint64_t at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }

  /// |n_rc N - n_r n_c| / N^2, exact zero when the cell factorizes.
  double deviation(std::size_t r, std::size_t c) const {
    const auto lhs = static_cast<__int128>(at(r, c)) * static_cast<__int128>(total);
    const auto rhs = static_cast<__int128>(row_totals[r]) * static_cast<__int128>(col_totals[c]);
    const auto diff = lhs > rhs ? lhs - rhs : rhs - lhs;
    const double n = static_cast<double>(total);
    return static_cast<double>(diff) / (n * n);
  }

  bool factorizes_exactly() const {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (static_cast<__int128>(at(r, c)) * total !=
            static_cast<__int128>(row_totals[r]) * static_cast<__int128>(col_totals[c]))
          return false;
    return true;
  }
};

inline ContingencyTable contingency(const CombinedCollective& cc) {
  if (cc.arity() != 2)
    throw Error(ErrorKind::invalid_argument, "independence tests are pairwise: got " + std::to_string(cc.arity()) +
                                                 " components");
  const auto& a = cc.component(0);
  const auto& b = cc.component(1);
  ContingencyTable t(a.alphabet().size(), b.alphabet().size());
  for (std::size_t j = 0; j < cc.size(); ++j) t.add(a[j], b[j]);
  return t;
}

enum class Verdict { independent, dependent, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::independent: return "independent";
    case Verdict::dependent: return "dependent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/// Finite-sample decision rule. With sigma = sqrt(0.25 / N):
///   dependent    when max_deviation > dependent_sigmas * sigma or p < p_dependent
///   independent  when max_deviation < independent_sigmas * sigma and p >= p_independent
///   inconclusive otherwise
struct IndependenceThresholds {
  double dependent_sigmas = 3.0;
  double independent_sigmas = 1.0;
  double p_dependent = 0.01;
  double p_independent = 0.05;

  std::string describe() const {
    using detail::format_double;
    return "sigma=sqrt(0.25/N); dependent if max_deviation > " + format_double(dependent_sigmas) +
           "*sigma or p < " + format_double(p_dependent) + "; independent if max_deviation < " +
           format_double(independent_sigmas) + "*sigma and p >= " + format_double(p_independent) +
           "; else inconclusive";
  }
};

struct IndependenceReport {
  std::vector<std::string> row_labels, col_labels;
  std::vector<std::vector<double>> deviation_matrix;
  double max_deviation = 0.0;
  bool exact_factorization = false;
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;
  std::uint64_t n = 0;
  double dependent_band = 0.0;
  double independent_band = 0.0;
  std::string threshold_rule;
  Verdict verdict = Verdict::inconclusive;
};

/// Pearson chi-square over cells with positive expected count; degrees of
/// freedom count only rows and columns with nonzero margins.
inline IndependenceReport independence_from_table(const ContingencyTable& t, std::vector<std::string> row_labels,
                                                  std::vector<std::string> col_labels,
                                                  const IndependenceThresholds& th = {}) {
  IndependenceReport r;
  r.row_labels = std::move(row_labels);
  r.col_labels = std::move(col_labels);
  r.n = t.total;
  r.deviation_matrix.assign(t.rows, std::vector<double>(t.cols, 0.0));
  const double n = static_cast<double>(t.total);
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t j = 0; j < t.cols; ++j) {
      const double dev = t.deviation(i, j);
      r.deviation_matrix[i][j] = dev;
      r.max_deviation = std::max(r.max_deviation, dev);
      if (t.row_totals[i] == 0 || t.col_totals[j] == 0) continue;
      const double expected = static_cast<double>(t.row_totals[i]) * static_cast<double>(t.col_totals[j]) / n;
      const double diff = static_cast<double>(t.at(i, j)) - expected;
      r.chi_square += diff * diff / expected;
    }
  }
  r.exact_factorization = t.factorizes_exactly();
  if (r.exact_factorization) r.chi_square = 0.0;
  const auto nonzero = [](const std::vector<std::uint64_t>& v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](auto x) { return x > 0; }));
  };
  const std::size_t live_rows = nonzero(t.row_totals), live_cols = nonzero(t.col_totals);
  r.degrees_of_freedom = (live_rows > 0 && live_cols > 0) ? (live_rows - 1) * (live_cols - 1) : 0;
  r.p_value = r.degrees_of_freedom == 0
                  ? 1.0
                  : boost::math::gamma_q(static_cast<double>(r.degrees_of_freedom) / 2.0, r.chi_square / 2.0);
  const double sigma = std::sqrt(0.25 / n);
  r.dependent_band = th.dependent_sigmas * sigma;
  r.independent_band = th.independent_sigmas * sigma;
  r.threshold_rule = th.describe();
  if (r.max_deviation > r.dependent_band || r.p_value < th.p_dependent)
    r.verdict = Verdict::dependent;
  else if (r.max_deviation < r.independent_band && r.p_value >= th.p_independent)
    r.verdict = Verdict::independent;
  else
    r.verdict = Verdict::inconclusive;
  return r;
}

inline IndependenceReport event_independence_test(const CombinedCollective& cc, const IndependenceThresholds& th = {}) {
  const auto t = contingency(cc);
  return independence_from_table(t, cc.component(0).alphabet().symbols(), cc.component(1).alphabet().symbols(), th);
}

/// max over (s1, s2) of |f(s1, s2) - f(s1) f(s2)|.
inline double dependence_metric(const CombinedCollective& cc) {
  const auto t = contingency(cc);
  double m = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j) m = std::max(m, t.deviation(i, j));
  return m;
}

inline bool factorizes_exactly(const CombinedCollective& cc) { return contingency(cc).factorizes_exactly(); }

/// Selection family over the pair alphabet of a two-component combination:
/// strides and the mask act on positions only; after(s) and parity(s) are lifted
/// onto each component. The c2:after(s) rules are the cross rules: they choose
/// pair j (and so component 1 at j) from component 2's symbol at j - 1.
inline std::vector<PlaceSelection> joint_selection_family(const Alphabet& first, const Alphabet& second,
                                                          bool include_mask = true,
                                                          std::uint64_t mask_seed = kDefaultMaskSeed) {
  std::vector<PlaceSelection> family;
  for (std::size_t k : {2, 3, 5})
    for (std::size_t off = 0; off < k; ++off) family.push_back(selections::stride(k, off));
  const std::size_t k1 = first.size(), k2 = second.size();
  for (SymbolId s = 0; s < k1; ++s) {
    family.push_back(selections::on_component(selections::after_symbol(s, first.symbol(s)), "c1", k2, k1));
    family.push_back(selections::on_component(selections::prefix_count_parity(s, first.symbol(s)), "c1", k2, k1));
  }
  for (SymbolId s = 0; s < k2; ++s) {
    family.push_back(selections::on_component(selections::after_symbol(s, second.symbol(s)), "c2", 1, k2));
    family.push_back(selections::on_component(selections::prefix_count_parity(s, second.symbol(s)), "c2", 1, k2));
  }
  if (include_mask) family.push_back(selections::seeded_mask(mask_seed));
  return family;
}

inline std::vector<PlaceSelection> joint_selection_family(const CombinedCollective& cc, bool include_mask = true) {
  if (cc.arity() != 2) throw Error(ErrorKind::invalid_argument, "joint selection family needs two components");
  return joint_selection_family(cc.component(0).alphabet(), cc.component(1).alphabet(), include_mask);
}

enum class CollectiveVerdict { collective_independent, not_collective_independent, inconclusive };

inline const char* to_string(CollectiveVerdict v) {
  switch (v) {
    case CollectiveVerdict::collective_independent: return "collective-independent";
    case CollectiveVerdict::not_collective_independent: return "not-collective-independent";
    case CollectiveVerdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct SubsequenceIndependence {
  std::string selection;
  std::size_t length = 0;
  bool skipped = false;
  std::optional<IndependenceReport> report;
};

struct CollectiveIndependenceReport {
  IndependenceReport full;
  std::vector<SubsequenceIndependence> subsequences;  // sorted by selection name
  std::vector<std::string> skipped;
  std::size_t min_length = 0;
  double subsequence_p_dependent = 0.0;
  Verdict event_verdict = Verdict::inconclusive;
  CollectiveVerdict verdict = CollectiveVerdict::inconclusive;
  std::optional<std::string> breaking_selection;
};

struct CollectiveTestOptions {
  std::size_t min_length = 100;
  IndependenceThresholds thresholds{};
  unsigned threads = 1;
};

/// Runs the event test on the full sequence and on every subsequence chosen by
/// the family. Subsequence tests apply the same rule with N = subsequence length
/// and a Bonferroni-corrected p_dependent (divided by the number of scored
/// subsequences). Verdict:
///   collective-independent      full test independent, no subsequence dependent
///   not-collective-independent  full test or some subsequence dependent
///   inconclusive                otherwise
inline CollectiveIndependenceReport collective_independence_test(const CombinedCollective& cc,
                                                                 std::span<const PlaceSelection> family,
                                                                 const CollectiveTestOptions& opts = {}) {
  CollectiveIndependenceReport out;
  out.min_length = opts.min_length;
  out.full = event_independence_test(cc, opts.thresholds);
  out.event_verdict = out.full.verdict;

  const Collective tuples = cc.tuple_view();
  const auto& a = cc.component(0).alphabet();
  const auto& b = cc.component(1).alphabet();
  const std::size_t k2 = b.size();

  struct Selected {
    std::size_t length = 0;
    std::optional<ContingencyTable> table;
  };
  std::vector<Selected> selected(family.size());
  detail::parallel_for(family.size(), opts.threads, [&](std::size_t i) {
    auto rule = family[i].start();
    ContingencyTable t(a.size(), k2);
    for (std::size_t j = 0; j < tuples.size(); ++j) {
      const SymbolId s = tuples[j];
      if (rule->keep(j + 1)) t.add(static_cast<SymbolId>(s / k2), static_cast<SymbolId>(s % k2));
      rule->observe(s);
    }
    selected[i].length = t.total;
    if (t.total >= std::max<std::size_t>(opts.min_length, 1)) selected[i].table = std::move(t);
  });

  const auto scored = static_cast<std::size_t>(
      std::count_if(selected.begin(), selected.end(), [](const Selected& s) { return s.table.has_value(); }));
  IndependenceThresholds sub_th = opts.thresholds;
  sub_th.p_dependent = opts.thresholds.p_dependent / static_cast<double>(std::max<std::size_t>(scored, 1));
  out.subsequence_p_dependent = sub_th.p_dependent;

  for (std::size_t i = 0; i < family.size(); ++i) {
    SubsequenceIndependence entry{family[i].name(), selected[i].length, !selected[i].table.has_value(), {}};
    if (selected[i].table) entry.report = independence_from_table(*selected[i].table, a.symbols(), b.symbols(), sub_th);
    out.subsequences.push_back(std::move(entry));
  }
  std::stable_sort(out.subsequences.begin(), out.subsequences.end(),
                   [](const auto& x, const auto& y) { return x.selection < y.selection; });

  bool any_dependent = out.full.verdict == Verdict::dependent;
  if (any_dependent) out.breaking_selection = "full";
  for (const auto& s : out.subsequences) {
    if (s.skipped) {
      out.skipped.push_back(s.selection);
      continue;
    }
    if (s.report->verdict == Verdict::dependent && !any_dependent) {
      any_dependent = true;
      out.breaking_selection = s.selection;
    }
  }
  if (any_dependent)
    out.verdict = CollectiveVerdict::not_collective_independent;
  else if (out.full.verdict == Verdict::independent)
    out.verdict = CollectiveVerdict::collective_independent;
  else
    out.verdict = CollectiveVerdict::inconclusive;
  return out;
}

inline CollectiveIndependenceReport collective_independence_test(const CombinedCollective& cc,
                                                                 const CollectiveTestOptions& opts = {}) {
  const auto family = joint_selection_family(cc);
  return collective_independence_test(cc, family, opts);
}

}  // namespace bellfreq
