#pragma once

// Finite collectives: labeled sample sequences and their relative frequencies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bellfreq/error.hpp"

namespace bellfreq {

using SymbolId = std::uint32_t;

/// Ordered finite set of distinct symbol labels.
class Alphabet {
 public:
  explicit Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw Error(ErrorKind::invalid_argument, "alphabet must have at least one symbol");
    index_.reserve(symbols_.size());
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (!index_.emplace(symbols_[i], static_cast<SymbolId>(i)).second)
        throw Error(ErrorKind::invalid_argument, "duplicate symbol in alphabet: " + symbols_[i]);
    }
  }

  /// Mixed-radix product: id = a_id * rhs.size() + b_id, labels joined by sep.
  static Alphabet product(const Alphabet& lhs, const Alphabet& rhs, std::string_view sep = "|") {
    std::vector<std::string> out;
    out.reserve(lhs.size() * rhs.size());
    for (const auto& a : lhs.symbols_)
      for (const auto& b : rhs.symbols_) out.push_back(a + std::string(sep) + b);
    return Alphabet(std::move(out));
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(SymbolId id) const { return symbols_.at(id); }
  bool contains(std::string_view s) const { return index_.contains(std::string(s)); }

  std::optional<SymbolId> find(std::string_view s) const {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  SymbolId id_of(std::string_view s) const {
    if (auto id = find(s)) return *id;
    throw Error(ErrorKind::unknown_symbol, "unknown symbol: " + std::string(s));
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> index_;
};

/// Immutable finite sample sequence over an alphabet. Samples are stored as
/// symbol ids.
class Collective {
 public:
  Collective(Alphabet alphabet, std::vector<SymbolId> samples)
      : alphabet_(std::move(alphabet)), samples_(std::move(samples)) {
    for (SymbolId s : samples_)
      if (s >= alphabet_.size())
        throw Error(ErrorKind::unknown_symbol, "sample id " + std::to_string(s) + " outside alphabet");
  }

  static Collective from_symbols(Alphabet alphabet, std::span<const std::string> labels) {
    std::vector<SymbolId> ids;
    ids.reserve(labels.size());
    for (const auto& l : labels) ids.push_back(alphabet.id_of(l));
    return Collective(std::move(alphabet), std::move(ids));
  }

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::span<const SymbolId> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  SymbolId operator[](std::size_t i) const { return samples_[i]; }
  const std::string& label_at(std::size_t i) const { return alphabet_.symbol(samples_.at(i)); }

  friend bool operator==(const Collective& a, const Collective& b) {
    return a.alphabet_ == b.alphabet_ && a.samples_ == b.samples_;
  }

 private:
  Alphabet alphabet_;
  std::vector<SymbolId> samples_;
};

/// Exact relative frequency count/total, with a floating view.
struct Frequency {
  std::uint64_t count = 0;
  std::uint64_t total = 0;

  double value() const { return static_cast<double>(count) / static_cast<double>(total); }

  // Exact comparison by cross-multiplication.
  friend bool operator==(const Frequency& a, const Frequency& b) {
    return static_cast<unsigned __int128>(a.count) * b.total ==
           static_cast<unsigned __int128>(b.count) * a.total;
  }
};

/// |p/q - r/s| computed from integers, so equal ratios give exactly 0.
inline double exact_gap(const Frequency& x, const Frequency& y) {
  const auto lhs = static_cast<__int128>(x.count) * static_cast<__int128>(y.total);
  const auto rhs = static_cast<__int128>(y.count) * static_cast<__int128>(x.total);
  const auto diff = lhs > rhs ? lhs - rhs : rhs - lhs;
  return static_cast<double>(diff) / (static_cast<double>(x.total) * static_cast<double>(y.total));
}

struct FrequencyEstimate {
  Alphabet alphabet;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  std::vector<double> frequencies;

  Frequency exact(SymbolId s) const { return {counts.at(s), total}; }
};

struct ConvergenceTrace {
  std::string symbol;
  std::vector<std::size_t> checkpoints;
  std::vector<Frequency> running;
};

inline std::vector<std::uint64_t> symbol_counts(const Collective& c) {
  std::vector<std::uint64_t> counts(c.alphabet().size(), 0);
  for (SymbolId s : c.samples()) ++counts[s];
  return counts;
}

inline Frequency relative_frequency(const Collective& c, SymbolId s) {
  if (c.empty()) throw Error(ErrorKind::undefined_frequency, "undefined frequency: empty collective");
  if (s >= c.alphabet().size()) throw Error(ErrorKind::unknown_symbol, "unknown symbol id " + std::to_string(s));
  const auto n = static_cast<std::uint64_t>(std::count(c.samples().begin(), c.samples().end(), s));
  return {n, c.size()};
}

inline Frequency relative_frequency(const Collective& c, std::string_view symbol) {
  if (c.empty()) throw Error(ErrorKind::undefined_frequency, "undefined frequency: empty collective");
  return relative_frequency(c, c.alphabet().id_of(symbol));
}

inline FrequencyEstimate frequency_estimate(const Collective& c) {
  if (c.empty()) throw Error(ErrorKind::undefined_frequency, "undefined frequency: empty collective");
  FrequencyEstimate est{c.alphabet(), symbol_counts(c), c.size(), {}};
  est.frequencies.reserve(est.counts.size());
  for (auto n : est.counts) est.frequencies.push_back(static_cast<double>(n) / static_cast<double>(est.total));
  return est;
}

/// Exact prefix frequencies of `symbol` at each checkpoint (prefix lengths).
inline ConvergenceTrace convergence_trace(const Collective& c, std::string_view symbol,
                                          std::span<const std::size_t> checkpoints) {
  const SymbolId target = c.alphabet().id_of(symbol);
  if (checkpoints.empty()) throw Error(ErrorKind::invalid_argument, "invalid checkpoints: none given");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] == 0 || checkpoints[i] > c.size())
      throw Error(ErrorKind::invalid_argument,
                  "invalid checkpoints: " + std::to_string(checkpoints[i]) + " outside [1, " +
                      std::to_string(c.size()) + "]");
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
      throw Error(ErrorKind::invalid_argument, "invalid checkpoints: not strictly increasing");
  }
  ConvergenceTrace trace{std::string(symbol), {checkpoints.begin(), checkpoints.end()}, {}};
  trace.running.reserve(checkpoints.size());
  std::uint64_t hits = 0;
  std::size_t pos = 0;
  for (std::size_t cp : checkpoints) {
    for (; pos < cp; ++pos) hits += (c[pos] == target);
    trace.running.push_back({hits, cp});
  }
  return trace;
}

}  // namespace bellfreq
