#pragma once

// Exhaustive search for periodic pair sequences whose joint frequencies over a
// period factorize exactly, yet some built-in place selection picks out a
// subsequence that is far from factorizing: factorization by arithmetic alone,
// without independence of the generating sequences.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bellfreq/independence.hpp"

namespace bellfreq {

struct CounterexampleBounds {
  std::size_t left_size = 2;
  std::size_t right_size = 2;
  std::size_t max_period = 16;
  // Selections are evaluated on the pattern repeated this many times; 60 is a
  // multiple of every stride length and of the parity cycle.
  std::size_t repetitions = 60;
  // Required deviation as an exact ratio (default 1/10).
  std::uint64_t min_deviation_num = 1;
  std::uint64_t min_deviation_den = 10;
  std::uint64_t candidate_budget = 50'000'000;
};

inline constexpr std::size_t kMaxCounterexamplePeriod = 24;

struct NumberplayWitness {
  std::size_t left_size = 0, right_size = 0;
  std::size_t period = 0;
  std::vector<std::pair<SymbolId, SymbolId>> pattern;
  std::size_t repetitions = 0;
  std::string selection;
  ContingencyTable period_counts{0, 0};
  ContingencyTable selected_counts{0, 0};
  std::size_t cell_row = 0, cell_col = 0;
  // deviation = deviation_num / deviation_den = |n_rc M - n_r n_c| / M^2
  std::uint64_t deviation_num = 0, deviation_den = 1;
  std::uint64_t candidates_examined = 0;

  double deviation() const { return static_cast<double>(deviation_num) / static_cast<double>(deviation_den); }
};

inline Alphabet numeric_alphabet(std::size_t k) {
  std::vector<std::string> s;
  for (std::size_t i = 0; i < k; ++i) s.push_back(std::to_string(i));
  return Alphabet(std::move(s));
}

/// Family used by the search: the joint family without the seeded mask, so
/// every rule is periodic on a periodic input.
inline std::vector<PlaceSelection> counterexample_family(std::size_t left_size, std::size_t right_size) {
  return joint_selection_family(numeric_alphabet(left_size), numeric_alphabet(right_size), false);
}

namespace detail {

struct CellDeviation {
  std::size_t row = 0, col = 0;
  unsigned __int128 num = 0;  // |n_rc M - n_r n_c|
  unsigned __int128 den = 1;  // M^2
};

inline CellDeviation largest_cell_deviation(const ContingencyTable& t) {
  CellDeviation best;
  const auto m = static_cast<__int128>(t.total);
  best.den = static_cast<unsigned __int128>(m * m);
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) {
      const __int128 diff = static_cast<__int128>(t.at(r, c)) * m -
                            static_cast<__int128>(t.row_totals[r]) * static_cast<__int128>(t.col_totals[c]);
      const auto mag = static_cast<unsigned __int128>(diff < 0 ? -diff : diff);
      if (mag > best.num) best = {r, c, mag, best.den};
    }
  return best;
}

inline ContingencyTable select_pairs(std::span<const SymbolId> tuples, std::size_t k1, std::size_t k2,
                                     const PlaceSelection& sel) {
  ContingencyTable t(k1, k2);
  auto rule = sel.start();
  for (std::size_t j = 0; j < tuples.size(); ++j) {
    if (rule->keep(j + 1)) t.add(static_cast<SymbolId>(tuples[j] / k2), static_cast<SymbolId>(tuples[j] % k2));
    rule->observe(tuples[j]);
  }
  return t;
}

}  // namespace detail

/// Periods 1..max_period in increasing order; within a period, patterns in
/// lexicographic order of their pair ids (id = left * right_size + right).
/// Returns the first witness, or nullopt when none exists within bounds.
inline std::optional<NumberplayWitness> find_numberplay_counterexample(const CounterexampleBounds& bounds) {
  if (bounds.left_size < 2 || bounds.right_size < 2)
    throw Error(ErrorKind::invalid_argument, "alphabet sizes must be >= 2");
  if (bounds.max_period < 1) throw Error(ErrorKind::invalid_argument, "max_period must be >= 1");
  if (bounds.max_period > kMaxCounterexamplePeriod)
    throw Error(ErrorKind::search_space_exceeded,
                "search space exceeded: max_period " + std::to_string(bounds.max_period) + " > " +
                    std::to_string(kMaxCounterexamplePeriod));
  if (bounds.repetitions < 1 || bounds.min_deviation_den == 0)
    throw Error(ErrorKind::invalid_argument, "repetitions and deviation denominator must be positive");

  const std::size_t k1 = bounds.left_size, k2 = bounds.right_size, radix = k1 * k2;
  const auto family = counterexample_family(k1, k2);
  std::uint64_t examined = 0;

  for (std::size_t period = 1; period <= bounds.max_period; ++period) {
    std::vector<SymbolId> digits(period, 0);
    while (true) {
      if (++examined > bounds.candidate_budget)
        throw Error(ErrorKind::search_space_exceeded,
                    "search space exceeded: candidate budget " + std::to_string(bounds.candidate_budget) +
                        " exhausted at period " + std::to_string(period));
      ContingencyTable per(k1, k2);
      for (SymbolId d : digits) per.add(static_cast<SymbolId>(d / k2), static_cast<SymbolId>(d % k2));
      if (per.factorizes_exactly()) {
        std::vector<SymbolId> tuples;
        tuples.reserve(period * bounds.repetitions);
        for (std::size_t r = 0; r < bounds.repetitions; ++r) tuples.insert(tuples.end(), digits.begin(), digits.end());
        for (const auto& sel : family) {
          auto sub = detail::select_pairs(tuples, k1, k2, sel);
          if (sub.total < period) continue;
          const auto dev = detail::largest_cell_deviation(sub);
          if (dev.num * bounds.min_deviation_den >= dev.den * bounds.min_deviation_num) {
            NumberplayWitness w;
            w.left_size = k1;
            w.right_size = k2;
            w.period = period;
            for (SymbolId d : digits) w.pattern.emplace_back(d / k2, d % k2);
            w.repetitions = bounds.repetitions;
            w.selection = sel.name();
            w.period_counts = per;
            w.selected_counts = std::move(sub);
            w.cell_row = dev.row;
            w.cell_col = dev.col;
            w.deviation_num = static_cast<std::uint64_t>(dev.num);
            w.deviation_den = static_cast<std::uint64_t>(dev.den);
            w.candidates_examined = examined;
            return w;
          }
        }
      }
      // odometer, last digit fastest
      std::size_t pos = period;
      while (pos > 0) {
        if (++digits[pos - 1] < radix) break;
        digits[pos - 1] = 0;
        --pos;
      }
      if (pos == 0) break;
    }
  }
  return std::nullopt;
}

/// Pattern repeated `repetitions` times as a two-component combination.
inline CombinedCollective witness_sequence(const NumberplayWitness& w) {
  std::vector<SymbolId> left, right;
  for (std::size_t r = 0; r < w.repetitions; ++r)
    for (const auto& [x, y] : w.pattern) {
      left.push_back(x);
      right.push_back(y);
    }
  return combine(Collective(numeric_alphabet(w.left_size), std::move(left)),
                 Collective(numeric_alphabet(w.right_size), std::move(right)));
}

/// Recounts the witness: exact factorization over one period, and deviation
/// >= min_num / min_den for the named selection on the repeated pattern.
inline bool verify_witness(const NumberplayWitness& w, std::uint64_t min_num = 1, std::uint64_t min_den = 10) {
  if (w.pattern.size() != w.period || w.period == 0) return false;
  ContingencyTable per(w.left_size, w.right_size);
  for (const auto& [x, y] : w.pattern) per.add(x, y);
  if (!per.factorizes_exactly()) return false;
  const auto family = counterexample_family(w.left_size, w.right_size);
  const auto it = std::find_if(family.begin(), family.end(), [&](const auto& s) { return s.name() == w.selection; });
  if (it == family.end()) return false;
  const Collective tuples = witness_sequence(w).tuple_view();
  const auto sub = detail::select_pairs(tuples.samples(), w.left_size, w.right_size, *it);
  if (sub.total == 0) return false;
  const auto dev = detail::largest_cell_deviation(sub);
  return dev.num * min_den >= dev.den * min_num;
}

}  // namespace bellfreq
