#pragma once

// Place selections: subsequence rules whose decision at position n depends only
// on n and the samples before n.
//
// A rule is driven as a scan. For each position n = 1, 2, ... the driver first
// asks keep(n) and only afterwards reveals the sample through observe(). A rule
// therefore cannot read the value it is deciding on, so every PlaceSelection is
// prefix-measurable by construction.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bellfreq/collective.hpp"
#include "bellfreq/seeding.hpp"

namespace bellfreq {

class PrefixRule {
 public:
  virtual ~PrefixRule() = default;
  /// Decision for 1-based position n, made before the sample at n is seen.
  virtual bool keep(std::size_t n) = 0;
  /// Reveals the sample at the position last passed to keep().
  virtual void observe(SymbolId s) = 0;
};

/// Named factory of fresh rule scans; immutable and shareable.
class PlaceSelection {
 public:
  using Factory = std::function<std::unique_ptr<PrefixRule>()>;

  PlaceSelection(std::string name, Factory factory) : name_(std::move(name)), factory_(std::move(factory)) {}

  const std::string& name() const noexcept { return name_; }
  std::unique_ptr<PrefixRule> start() const { return factory_(); }

 private:
  std::string name_;
  Factory factory_;
};

/// Positions (0-based) kept by `sel` on `samples`.
inline std::vector<std::size_t> selected_positions(std::span<const SymbolId> samples, const PlaceSelection& sel) {
  auto rule = sel.start();
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (rule->keep(i + 1)) kept.push_back(i);
    rule->observe(samples[i]);
  }
  return kept;
}

inline Collective apply_place_selection(const Collective& c, const PlaceSelection& sel) {
  auto rule = sel.start();
  std::vector<SymbolId> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (rule->keep(i + 1)) out.push_back(c[i]);
    rule->observe(c[i]);
  }
  return Collective(c.alphabet(), std::move(out));
}

namespace selections {

namespace detail {

class StrideRule final : public PrefixRule {
 public:
  StrideRule(std::size_t k, std::size_t offset) : k_(k), offset_(offset) {}
  bool keep(std::size_t n) override { return (n - 1) % k_ == offset_; }
  void observe(SymbolId) override {}

 private:
  std::size_t k_, offset_;
};

class AfterSymbolRule final : public PrefixRule {
 public:
  explicit AfterSymbolRule(SymbolId s) : target_(s) {}
  bool keep(std::size_t) override { return seen_ && last_ == target_; }
  void observe(SymbolId s) override {
    last_ = s;
    seen_ = true;
  }

 private:
  SymbolId target_;
  SymbolId last_ = 0;
  bool seen_ = false;
};

class ParityRule final : public PrefixRule {
 public:
  explicit ParityRule(SymbolId s) : target_(s) {}
  bool keep(std::size_t) override { return count_ % 2 == 0; }
  void observe(SymbolId s) override { count_ += (s == target_); }

 private:
  SymbolId target_;
  std::uint64_t count_ = 0;
};

class MaskRule final : public PrefixRule {
 public:
  explicit MaskRule(std::uint64_t seed) : seed_(seed) {}
  bool keep(std::size_t n) override { return (splitmix64(seed_ ^ splitmix64(n)) >> 63) != 0; }
  void observe(SymbolId) override {}

 private:
  std::uint64_t seed_;
};

class PrefixFunctionRule final : public PrefixRule {
 public:
  using Fn = std::function<bool(std::size_t, std::span<const SymbolId>)>;
  explicit PrefixFunctionRule(std::shared_ptr<const Fn> fn) : fn_(std::move(fn)) {}
  bool keep(std::size_t n) override { return (*fn_)(n, std::span<const SymbolId>(prefix_)); }
  void observe(SymbolId s) override { prefix_.push_back(s); }

 private:
  std::shared_ptr<const Fn> fn_;
  std::vector<SymbolId> prefix_;
};

class ComposedRule final : public PrefixRule {
 public:
  ComposedRule(std::unique_ptr<PrefixRule> outer, std::unique_ptr<PrefixRule> inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {}
  bool keep(std::size_t n) override {
    outer_kept_ = outer_->keep(n);
    if (!outer_kept_) return false;
    return inner_->keep(++inner_position_);
  }
  void observe(SymbolId s) override {
    outer_->observe(s);
    if (outer_kept_) inner_->observe(s);
  }

 private:
  std::unique_ptr<PrefixRule> outer_, inner_;
  std::size_t inner_position_ = 0;
  bool outer_kept_ = false;
};

class ProjectedRule final : public PrefixRule {
 public:
  ProjectedRule(std::unique_ptr<PrefixRule> inner, std::size_t divisor, std::size_t modulus)
      : inner_(std::move(inner)), divisor_(divisor), modulus_(modulus) {}
  bool keep(std::size_t n) override { return inner_->keep(n); }
  void observe(SymbolId s) override { inner_->observe(static_cast<SymbolId>((s / divisor_) % modulus_)); }

 private:
  std::unique_ptr<PrefixRule> inner_;
  std::size_t divisor_, modulus_;
};

}  // namespace detail

/// Keeps positions n with (n - 1) mod k == offset.
inline PlaceSelection stride(std::size_t k, std::size_t offset = 0) {
  if (k == 0 || offset >= k) throw Error(ErrorKind::invalid_argument, "stride requires k >= 1 and offset < k");
  return {"stride(" + std::to_string(k) + "," + std::to_string(offset) + ")",
          [k, offset] { return std::make_unique<detail::StrideRule>(k, offset); }};
}

/// Keeps positions whose immediate predecessor equals `s`.
inline PlaceSelection after_symbol(SymbolId s, const std::string& label) {
  return {"after(" + label + ")", [s] { return std::make_unique<detail::AfterSymbolRule>(s); }};
}

/// Keeps positions where the prefix holds an even number of `s`.
inline PlaceSelection prefix_count_parity(SymbolId s, const std::string& label) {
  return {"parity(" + label + ")", [s] { return std::make_unique<detail::ParityRule>(s); }};
}

/// Data-independent pseudo-random mask; keeps about half the positions.
inline PlaceSelection seeded_mask(std::uint64_t seed) {
  return {"mask(" + std::to_string(seed) + ")", [seed] { return std::make_unique<detail::MaskRule>(seed); }};
}

/// Wraps a decision function of (n, x_1..x_{n-1}). The prefix is materialized
/// as the scan proceeds, so this costs O(N) memory per application.
inline PlaceSelection from_prefix_function(std::string name, detail::PrefixFunctionRule::Fn fn) {
  auto shared = std::make_shared<const detail::PrefixFunctionRule::Fn>(std::move(fn));
  return {std::move(name), [shared] { return std::make_unique<detail::PrefixFunctionRule>(shared); }};
}

/// Applies `outer`, then `inner` to the subsequence `outer` kept.
inline PlaceSelection compose(const PlaceSelection& outer, const PlaceSelection& inner) {
  return {outer.name() + ">" + inner.name(),
          [outer, inner] { return std::make_unique<detail::ComposedRule>(outer.start(), inner.start()); }};
}

/// Lifts a selection over one component of a mixed-radix tuple alphabet. The
/// rule sees (id / divisor) % modulus instead of the tuple id.
inline PlaceSelection on_component(const PlaceSelection& sel, std::string prefix, std::size_t divisor,
                                   std::size_t modulus) {
  return {std::move(prefix) + ":" + sel.name(), [sel, divisor, modulus] {
            return std::make_unique<detail::ProjectedRule>(sel.start(), divisor, modulus);
          }};
}

}  // namespace selections

inline constexpr std::uint64_t kDefaultMaskSeed = 0x5EED;

/// Built-in family: stride(k, offset) for k in {2, 3, 5} and every offset,
/// after(s) and parity(s) for every symbol, and one seeded mask.
inline std::vector<PlaceSelection> builtin_family(const Alphabet& alphabet, bool include_mask = true,
                                                  std::uint64_t mask_seed = kDefaultMaskSeed) {
  std::vector<PlaceSelection> family;
  for (std::size_t k : {2, 3, 5})
    for (std::size_t off = 0; off < k; ++off) family.push_back(selections::stride(k, off));
  for (SymbolId s = 0; s < alphabet.size(); ++s) family.push_back(selections::after_symbol(s, alphabet.symbol(s)));
  for (SymbolId s = 0; s < alphabet.size(); ++s)
    family.push_back(selections::prefix_count_parity(s, alphabet.symbol(s)));
  if (include_mask) family.push_back(selections::seeded_mask(mask_seed));
  return family;
}

struct SelectionStability {
  std::string name;
  std::size_t length = 0;
  bool skipped = false;
  std::vector<double> deviations;  // per symbol, |f_sub - f_full|
  std::vector<double> tolerances;  // per symbol, 3 sqrt(f (1 - f) / M)
  double max_deviation = 0.0;
  bool stable = true;
};

struct StabilityReport {
  FrequencyEstimate full;
  std::size_t min_subseq = 0;
  double sigmas = 3.0;
  std::vector<SelectionStability> selections;
  bool all_stable = true;
};

/// Compares symbol frequencies of each selected subsequence with the full
/// collective. Subsequences shorter than min_subseq are reported as skipped.
inline StabilityReport stability_report(const Collective& c, std::span<const PlaceSelection> family,
                                        std::size_t min_subseq, double sigmas = 3.0) {
  StabilityReport report{frequency_estimate(c), min_subseq, sigmas, {}, true};
  const std::size_t k = c.alphabet().size();
  for (const auto& sel : family) {
    SelectionStability entry;
    entry.name = sel.name();
    const Collective sub = apply_place_selection(c, sel);
    entry.length = sub.size();
    if (sub.size() < std::max<std::size_t>(min_subseq, 1)) {
      entry.skipped = true;
      report.selections.push_back(std::move(entry));
      continue;
    }
    const auto counts = symbol_counts(sub);
    for (SymbolId s = 0; s < k; ++s) {
      const Frequency full = report.full.exact(s);
      const double dev = exact_gap(Frequency{counts[s], sub.size()}, full);
      const double f = full.value();
      const double tol = sigmas * std::sqrt(f * (1.0 - f) / static_cast<double>(sub.size()));
      entry.deviations.push_back(dev);
      entry.tolerances.push_back(tol);
      entry.max_deviation = std::max(entry.max_deviation, dev);
      if (dev > tol) entry.stable = false;
    }
    report.all_stable = report.all_stable && entry.stable;
    report.selections.push_back(std::move(entry));
  }
  return report;
}

}  // namespace bellfreq
