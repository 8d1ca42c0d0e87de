#pragma once

// Correlations, the CHSH combination, and the factorability check
// P(A, B | a, b, lambda) = P(A | a, lambda) P(B | b, lambda) on binned lambda.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bellfreq/detail/format.hpp"
#include "bellfreq/projection.hpp"

namespace bellfreq {

struct CorrelationEstimate {
  double a = 0.0, b = 0.0;
  std::int64_t product_sum = 0;  // sum of outcome_left * outcome_right
  std::uint64_t trials = 0;      // M
  double E = 0.0;
  double standard_error = 0.0;   // sqrt((1 - E^2) / M)
};

inline CorrelationEstimate correlation(const TrialLog& log, double a, double b) {
  CorrelationEstimate e{a, b, 0, 0, 0.0, 0.0};
  for (const auto& r : log.records)
    if (same_setting(r.left.setting, a) && same_setting(r.right.setting, b)) {
      e.product_sum += value(r.outcome_left) * value(r.outcome_right);
      ++e.trials;
    }
  if (e.trials == 0)
    throw Error(ErrorKind::missing_data, "no data at settings pair (" + detail::format_double(a) + ", " +
                                             detail::format_double(b) + ")");
  const double m = static_cast<double>(e.trials);
  e.E = static_cast<double>(e.product_sum) / m;
  e.standard_error = std::sqrt(std::max(0.0, 1.0 - e.E * e.E) / m);
  return e;
}

struct CHSHReport {
  double a = 0.0, a_prime = 0.0, b = 0.0, b_prime = 0.0;
  // (a,b), (a,b'), (a',b), (a',b')
  std::array<CorrelationEstimate, 4> terms{};
  double S = 0.0;
  double standard_error = 0.0;
};

/// S = E(a,b) - E(a,b') + E(a',b) + E(a',b').
inline double chsh_combination(double ab, double abp, double apb, double apbp) { return ab - abp + apb + apbp; }

inline CHSHReport chsh(const TrialLog& log, double a, double a_prime, double b, double b_prime) {
  CHSHReport r{a, a_prime, b, b_prime, {}, 0.0, 0.0};
  const std::array<std::pair<double, double>, 4> pairs{{{a, b}, {a, b_prime}, {a_prime, b}, {a_prime, b_prime}}};
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < 4; ++i) {
    try {
      r.terms[i] = correlation(log, pairs[i].first, pairs[i].second);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::missing_data) throw;
      missing.push_back("(" + detail::format_double(pairs[i].first) + ", " + detail::format_double(pairs[i].second) +
                        ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing settings pairs:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorKind::missing_data, msg);
  }
  r.S = chsh_combination(r.terms[0].E, r.terms[1].E, r.terms[2].E, r.terms[3].E);
  double var = 0.0;
  for (const auto& t : r.terms) var += t.standard_error * t.standard_error;
  r.standard_error = std::sqrt(var);
  return r;
}

enum class FactorabilityVerdict { consistent, violated, insufficient_data };

inline const char* to_string(FactorabilityVerdict v) {
  switch (v) {
    case FactorabilityVerdict::consistent: return "consistent with factorability";
    case FactorabilityVerdict::violated: return "factorability violated";
    case FactorabilityVerdict::insufficient_data: return "insufficient data";
  }
  return "?";
}

struct FactorabilityCell {
  std::string bin;
  double a = 0.0, b = 0.0;
  std::uint64_t count = 0;
  // |f(A,B | a,b,bin) - f(A | a,bin) f(B | b,bin)| in outcome-pair order ++, +-, -+, --
  std::array<double, 4> deviations{};
  double max_deviation = 0.0;
};

struct FactorabilityReport {
  std::string binning;
  std::size_t bins = 0;
  std::uint64_t min_count = 0;
  std::vector<FactorabilityCell> cells;    // scored cells
  std::vector<FactorabilityCell> skipped;  // count < min_count
  double max_deviation = 0.0;
  std::optional<FactorabilityCell> witness;  // cell attaining max_deviation
  std::uint64_t smallest_scored_count = 0;
  double threshold = 0.0;  // 3 sqrt(0.25 / smallest_scored_count)
  FactorabilityVerdict verdict = FactorabilityVerdict::insufficient_data;
};

inline constexpr std::uint64_t kDefaultMinBinCount = 100;

/// Conditional frequencies per (lambda bin, a, b). The per-wing marginals are
/// pooled over the other wing's settings, f(A | a, bin) and f(B | b, bin), so
/// a response that depends on the distant setting shows up as a deviation.
/// A (bin, a, b) cell is scored when it holds at least min_count trials.
inline FactorabilityReport factorability_check(const TrialLog& log, std::size_t bins = kDefaultLambdaBins,
                                               std::uint64_t min_count = kDefaultMinBinCount,
                                               double sigmas = 3.0) {
  if (log.size() == 0) throw Error(ErrorKind::missing_data, "empty trial log");
  const Collective lambda = extract_collective(log, {Field::lambda}, bins);
  const Collective left = extract_collective(log, {Field::setting_left});
  const Collective right = extract_collective(log, {Field::setting_right});
  const std::size_t nk = lambda.alphabet().size(), na = left.alphabet().size(), nb = right.alphabet().size();

  FactorabilityReport r;
  r.bins = nk;
  r.min_count = min_count;
  r.binning = log.backend == LambdaBackend::discrete
                  ? "exact lambda values (" + std::to_string(nk) + ")"
                  : std::to_string(nk) + " equal-width bins on [0, 2pi)";

  // joint[(k, a, b)][AB], left_marg[(k, a)][A], right_marg[(k, b)][B]
  std::vector<std::array<std::uint64_t, 4>> joint(nk * na * nb, {0, 0, 0, 0});
  std::vector<std::array<std::uint64_t, 2>> left_marg(nk * na, {0, 0}), right_marg(nk * nb, {0, 0});
  for (std::size_t j = 0; j < log.size(); ++j) {
    const auto& rec = log.records[j];
    const std::size_t k = lambda[j], a = left[j], b = right[j];
    ++joint[(k * na + a) * nb + b][outcome_pair_index(rec.outcome_left, rec.outcome_right)];
    ++left_marg[k * na + a][rec.outcome_left == Outcome::plus ? 0 : 1];
    ++right_marg[k * nb + b][rec.outcome_right == Outcome::plus ? 0 : 1];
  }

  for (std::size_t k = 0; k < nk; ++k)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        const auto& cnt = joint[(k * na + a) * nb + b];
        const std::uint64_t n = cnt[0] + cnt[1] + cnt[2] + cnt[3];
        if (n == 0) continue;
        FactorabilityCell cell;
        cell.bin = lambda.alphabet().symbol(static_cast<SymbolId>(k));
        cell.a = *detail::parse_double(left.alphabet().symbol(static_cast<SymbolId>(a)));
        cell.b = *detail::parse_double(right.alphabet().symbol(static_cast<SymbolId>(b)));
        cell.count = n;
        const auto& lm = left_marg[k * na + a];
        const auto& rm = right_marg[k * nb + b];
        const double nl = static_cast<double>(lm[0] + lm[1]), nr = static_cast<double>(rm[0] + rm[1]);
        for (std::size_t x = 0; x < 2; ++x)
          for (std::size_t y = 0; y < 2; ++y) {
            const double fj = static_cast<double>(cnt[2 * x + y]) / static_cast<double>(n);
            const double fa = static_cast<double>(lm[x]) / nl;
            const double fb = static_cast<double>(rm[y]) / nr;
            cell.deviations[2 * x + y] = std::abs(fj - fa * fb);
          }
        cell.max_deviation = *std::max_element(cell.deviations.begin(), cell.deviations.end());
        if (n < min_count) {
          r.skipped.push_back(std::move(cell));
          continue;
        }
        if (!r.witness || cell.max_deviation > r.max_deviation) {
          r.max_deviation = cell.max_deviation;
          r.witness = cell;
        }
        r.smallest_scored_count = r.smallest_scored_count == 0 ? n : std::min(r.smallest_scored_count, n);
        r.cells.push_back(std::move(cell));
      }

  if (r.cells.empty()) {
    r.verdict = FactorabilityVerdict::insufficient_data;
    return r;
  }
  r.threshold = sigmas * std::sqrt(0.25 / static_cast<double>(r.smallest_scored_count));
  r.verdict = r.max_deviation <= r.threshold ? FactorabilityVerdict::consistent : FactorabilityVerdict::violated;
  return r;
}

/// Outcome factorization at one settings pair with lambda marginalized out.
inline IndependenceReport unconditional_factorization(const TrialLog& log, double a, double b,
                                                      const IndependenceThresholds& th = {}) {
  const TrialLog sub = filter_settings(log, a, b);
  if (sub.size() == 0)
    throw Error(ErrorKind::missing_data, "no data at settings pair (" + detail::format_double(a) + ", " +
                                             detail::format_double(b) + ")");
  return event_independence_test(
      combine(extract_collective(sub, {Field::outcome_left}), extract_collective(sub, {Field::outcome_right})), th);
}

}  // namespace bellfreq
