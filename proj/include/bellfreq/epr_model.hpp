#pragma once

// EPR-Bohm trial generation: a source U emits a hidden variable lambda per pair,
// two setting devices choose the apparatus settings, and per-wing responses map
// (setting, lambda, wing-local noise) to outcomes in {-1, +1}.
//
// Streams. Trials are generated in fixed chunks of kChunkSize. Chunk c draws
// from five streams derived from the master seed (see seeding.hpp) with labels
// "lambda", "setting.left", "setting.right", "noise.left", "noise.right" and
// chunk index c. Each trial consumes exactly one lambda draw and one noise draw
// per wing; uniform setting policies consume one draw from their own stream.
// The log is therefore identical for any thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bellfreq/collective.hpp"
#include "bellfreq/detail/format.hpp"
#include "bellfreq/detail/parallel.hpp"
#include "bellfreq/error.hpp"
#include "bellfreq/seeding.hpp"

namespace bellfreq {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr std::size_t kChunkSize = 1U << 16;
inline constexpr double kSettingTolerance = 1e-9;

enum class Outcome : std::int8_t { minus = -1, plus = 1 };

constexpr int value(Outcome o) noexcept { return static_cast<int>(o); }
constexpr Outcome flip(Outcome o) noexcept { return o == Outcome::plus ? Outcome::minus : Outcome::plus; }
constexpr Outcome sign_outcome(double x) noexcept { return x >= 0.0 ? Outcome::plus : Outcome::minus; }

inline bool same_setting(double x, double y) { return std::abs(x - y) <= kSettingTolerance; }

/// Per-wing response: (setting, lambda, noise in [0,1)) -> outcome. When
/// deterministic is set the noise argument must not influence the result.
struct ResponseRule {
  std::function<Outcome(double setting, double lambda, double noise)> map;
  bool deterministic = true;
};

/// Outcome-pair index used by all tables: (+,+)=0, (+,-)=1, (-,+)=2, (-,-)=3.
constexpr std::size_t outcome_pair_index(Outcome a, Outcome b) noexcept {
  return (a == Outcome::plus ? 0U : 2U) + (b == Outcome::plus ? 0U : 1U);
}

/// Finite-lambda model given by exact joint tables p(A, B | a, b, lambda).
struct TableModel {
  Alphabet lambda_alphabet{{"l0"}};
  std::vector<Rational> lambda_probabilities;
  std::vector<double> left_settings, right_settings;
  std::vector<std::array<Rational, 4>> joint;  // index ((l * |left|) + a) * |right| + b

  std::size_t index(std::size_t l, std::size_t a, std::size_t b) const {
    return (l * left_settings.size() + a) * right_settings.size() + b;
  }
  const std::array<Rational, 4>& cell(std::size_t l, std::size_t a, std::size_t b) const {
    return joint.at(index(l, a, b));
  }

  static Rational left_plus(const std::array<Rational, 4>& p) { return p[0] + p[1]; }
  static Rational right_plus(const std::array<Rational, 4>& p) { return p[0] + p[2]; }

  bool factorizes(std::size_t l, std::size_t a, std::size_t b) const {
    const auto& p = cell(l, a, b);
    const Rational pa = left_plus(p), pb = right_plus(p);
    const Rational qa = 1 - pa, qb = 1 - pb;
    return p[0] == pa * pb && p[1] == pa * qb && p[2] == qa * pb && p[3] == qa * qb;
  }

  bool deterministic() const {
    for (const auto& p : joint)
      for (const auto& v : p)
        if (v != 0 && v != 1) return false;
    return true;
  }

  void validate() const {
    const std::size_t nl = lambda_alphabet.size(), na = left_settings.size(), nb = right_settings.size();
    if (na == 0 || nb == 0) throw Error(ErrorKind::invalid_model, "model: settings must be non-empty per wing");
    if (lambda_probabilities.size() != nl)
      throw Error(ErrorKind::invalid_model, "model: lambda probabilities do not match the lambda alphabet");
    Rational total = 0;
    for (const auto& p : lambda_probabilities) {
      if (p < 0) throw Error(ErrorKind::invalid_model, "model: negative lambda probability");
      total += p;
    }
    if (total != 1)
      throw Error(ErrorKind::invalid_model, "model: lambda probabilities sum to " + total.str() + ", not 1");
    if (joint.size() != nl * na * nb) throw Error(ErrorKind::invalid_model, "model: joint table is incomplete");
    for (std::size_t l = 0; l < nl; ++l)
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b) {
          Rational s = 0;
          for (const auto& v : cell(l, a, b)) {
            if (v < 0) throw Error(ErrorKind::invalid_model, "model: negative table entry");
            s += v;
          }
          if (s != 1)
            throw Error(ErrorKind::invalid_model, "model: table at (lambda=" + lambda_alphabet.symbol(l) +
                                                      ", a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                                                      ") sums to " + s.str() + ", not 1");
        }
    for (const auto& s : lambda_alphabet.symbols())
      if (detail::parse_double(s))
        throw Error(ErrorKind::invalid_model, "model: lambda symbol '" + s + "' must not be numeric");
  }
};

enum class ModelKind { local_deterministic, quantum_singlet, dependent_collectives, discrete_table };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::local_deterministic: return "local_deterministic";
    case ModelKind::quantum_singlet: return "quantum_singlet";
    case ModelKind::dependent_collectives: return "dependent_collectives";
    case ModelKind::discrete_table: return "discrete_table";
  }
  return "?";
}

/// The source U together with both wings' response laws.
///
/// local_deterministic: lambda ~ Uniform[0, 2pi); by default
///   A = sign(cos(lambda - a)), B = -sign(cos(lambda - b)), with sign(0) = +1.
/// quantum_singlet: lambda ~ Uniform[0, 2pi); A = +1 iff lambda < pi, and
///   B = -A with probability (1 + cos(a - b)) / 2 using the right noise draw.
///   This reproduces P(A=x, B=y | a, b) = (1 - x y cos(a - b)) / 4 exactly.
/// discrete_table / dependent_collectives: lambda from a finite alphabet, A drawn
///   from p(A | a, b, lambda) with the left noise, then B from p(B | A, a, b, lambda)
///   with the right noise. dependent_collectives additionally requires at least
///   one non-factorizing table.
class SourceModel {
 public:
  static SourceModel local_deterministic() {
    return local_deterministic(
        {[](double a, double lambda, double) { return sign_outcome(std::cos(lambda - a)); }, true},
        {[](double b, double lambda, double) { return flip(sign_outcome(std::cos(lambda - b))); }, true});
  }

  static SourceModel local_deterministic(ResponseRule left, ResponseRule right) {
    if (!left.deterministic || !right.deterministic)
      throw Error(ErrorKind::invalid_model, "model: local_deterministic requires deterministic response rules");
    SourceModel m(ModelKind::local_deterministic);
    m.left_ = std::move(left);
    m.right_ = std::move(right);
    return m;
  }

  static SourceModel quantum_singlet() { return SourceModel(ModelKind::quantum_singlet); }

  static SourceModel discrete_table(TableModel t) {
    t.validate();
    SourceModel m(ModelKind::discrete_table);
    m.set_table(std::move(t));
    return m;
  }

  static SourceModel dependent_collectives(TableModel t) {
    t.validate();
    bool any = false;
    for (std::size_t l = 0; l < t.lambda_alphabet.size() && !any; ++l)
      for (std::size_t a = 0; a < t.left_settings.size() && !any; ++a)
        for (std::size_t b = 0; b < t.right_settings.size() && !any; ++b) any = !t.factorizes(l, a, b);
    if (!any)
      throw Error(ErrorKind::invalid_model,
                  "model: dependent_collectives requires a table that does not factorize for some (a, b, lambda)");
    SourceModel m(ModelKind::dependent_collectives);
    m.set_table(std::move(t));
    return m;
  }

  ModelKind kind() const noexcept { return kind_; }
  bool discrete_lambda() const noexcept { return table_.has_value(); }
  const TableModel& table() const {
    if (!table_) throw Error(ErrorKind::invalid_argument, "model has no tables");
    return *table_;
  }
  const ResponseRule& left_rule() const { return left_; }
  const ResponseRule& right_rule() const { return right_; }

  std::vector<double> default_left_settings() const {
    return table_ ? table_->left_settings : std::vector<double>{0.0, std::numbers::pi / 2};
  }
  std::vector<double> default_right_settings() const {
    return table_ ? table_->right_settings : std::vector<double>{std::numbers::pi / 4, 3 * std::numbers::pi / 4};
  }

  struct Sampled {
    double lambda = 0.0;
    SymbolId lambda_symbol = 0;
    Outcome left = Outcome::plus, right = Outcome::plus;
  };

  /// One trial. a_idx / b_idx index the model's table settings (table kinds only).
  Sampled sample(double a, double b, std::size_t a_idx, std::size_t b_idx, double u_lambda, double u_left,
                 double u_right) const {
    Sampled s;
    switch (kind_) {
      case ModelKind::local_deterministic:
        s.lambda = to_angle(u_lambda);
        s.left = left_.map(a, s.lambda, u_left);
        s.right = right_.map(b, s.lambda, u_right);
        break;
      case ModelKind::quantum_singlet: {
        s.lambda = to_angle(u_lambda);
        s.left = s.lambda < std::numbers::pi ? Outcome::plus : Outcome::minus;
        const double p_opposite = (1.0 + std::cos(a - b)) / 2.0;
        s.right = u_right < p_opposite ? flip(s.left) : s.left;
        break;
      }
      case ModelKind::dependent_collectives:
      case ModelKind::discrete_table: {
        std::size_t l = 0;
        while (l + 1 < lambda_cdf_.size() && !(u_lambda < lambda_cdf_[l])) ++l;
        s.lambda_symbol = static_cast<SymbolId>(l);
        const auto& c = cells_[table_->index(l, a_idx, b_idx)];
        s.left = u_left < c.left_plus ? Outcome::plus : Outcome::minus;
        const double pb = s.left == Outcome::plus ? c.right_plus_given_left_plus : c.right_plus_given_left_minus;
        s.right = u_right < pb ? Outcome::plus : Outcome::minus;
        break;
      }
    }
    return s;
  }

 private:
  explicit SourceModel(ModelKind k) : kind_(k) {}

  static double to_angle(double u) {
    const double x = kTwoPi * u;
    return x < kTwoPi ? x : std::nextafter(kTwoPi, 0.0);
  }

  struct CellSampler {
    double left_plus = 0, right_plus_given_left_plus = 0, right_plus_given_left_minus = 0;
  };

  void set_table(TableModel t) {
    Rational acc = 0;
    lambda_cdf_.clear();
    for (const auto& p : t.lambda_probabilities) {
      acc += p;
      lambda_cdf_.push_back(acc.convert_to<double>());
    }
    // Last category with positive mass absorbs u close to 1.
    for (std::size_t i = lambda_cdf_.size(); i-- > 0;)
      if (t.lambda_probabilities[i] > 0) {
        lambda_cdf_[i] = 2.0;
        break;
      }
    cells_.clear();
    for (const auto& p : t.joint) {
      CellSampler c;
      const Rational pa = TableModel::left_plus(p);
      c.left_plus = pa == 1 ? 2.0 : pa.convert_to<double>();
      if (pa > 0) c.right_plus_given_left_plus = conditional(p[0], pa);
      if (pa < 1) c.right_plus_given_left_minus = conditional(p[2], 1 - pa);
      cells_.push_back(c);
    }
    table_ = std::move(t);
  }

  // Probabilities equal to 1 map to 2.0 so that u < p holds for every u in [0, 1).
  static double conditional(const Rational& joint, const Rational& marginal) {
    const Rational q = joint / marginal;
    return q == 1 ? 2.0 : q.convert_to<double>();
  }

  ModelKind kind_;
  ResponseRule left_, right_;
  std::optional<TableModel> table_;
  std::vector<double> lambda_cdf_;
  std::vector<CellSampler> cells_;
};

/// Setting device of one wing. The chooser sees only the trial index and its
/// own stream, never lambda.
class SettingPolicy {
 public:
  enum class Kind { fixed, uniform, cyclic };

  static SettingPolicy fixed(double setting) { return SettingPolicy(Kind::fixed, {setting}); }
  static SettingPolicy uniform(std::vector<double> settings) { return SettingPolicy(Kind::uniform, std::move(settings)); }
  static SettingPolicy cyclic(std::vector<double> settings) { return SettingPolicy(Kind::cyclic, std::move(settings)); }

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& settings() const noexcept { return settings_; }

  /// Index into settings() for 1-based trial j.
  std::size_t choose(std::uint64_t j, Stream& own_stream) const {
    switch (kind_) {
      case Kind::fixed: return 0;
      case Kind::uniform: return own_stream.below(settings_.size());
      case Kind::cyclic: return static_cast<std::size_t>((j - 1) % settings_.size());
    }
    return 0;
  }

 private:
  SettingPolicy(Kind k, std::vector<double> s) : kind_(k), settings_(std::move(s)) {
    if (settings_.empty()) throw Error(ErrorKind::invalid_argument, "setting policy needs at least one setting");
    for (double v : settings_)
      if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "setting policy: non-finite setting");
  }

  Kind kind_;
  std::vector<double> settings_;
};

inline const char* to_string(SettingPolicy::Kind k) {
  switch (k) {
    case SettingPolicy::Kind::fixed: return "fixed";
    case SettingPolicy::Kind::uniform: return "uniform";
    case SettingPolicy::Kind::cyclic: return "cyclic";
  }
  return "?";
}

enum class LambdaBackend { continuous, discrete };

/// For the continuous backend `angle` is in [0, 2pi); for the discrete backend
/// `symbol` indexes the log's lambda alphabet.
struct HiddenVariable {
  double angle = 0.0;
  SymbolId symbol = 0;
};

/// Apparatus internal state: chosen setting plus the wing-local noise draw.
struct ApparatusState {
  double setting = 0.0;
  double noise = 0.0;
};

struct TrialRecord {
  std::uint64_t index = 0;
  HiddenVariable lambda;
  ApparatusState left, right;
  Outcome outcome_left = Outcome::plus;
  Outcome outcome_right = Outcome::plus;
};

struct TrialLog {
  LambdaBackend backend = LambdaBackend::continuous;
  std::optional<Alphabet> lambda_alphabet;  // discrete backend only
  bool has_noise = true;                    // false for logs read back from CSV
  std::optional<std::uint64_t> master_seed;
  std::vector<TrialRecord> records;

  std::size_t size() const noexcept { return records.size(); }
};

struct RunOptions {
  unsigned threads = 1;
};

namespace detail {

inline std::vector<std::size_t> map_settings(const std::vector<double>& policy, const std::vector<double>& model,
                                             const char* wing) {
  std::vector<std::size_t> out;
  for (double s : policy) {
    std::size_t i = 0;
    while (i < model.size() && !same_setting(s, model[i])) ++i;
    if (i == model.size())
      throw Error(ErrorKind::invalid_model, std::string("model: ") + wing + " setting " + format_double(s) +
                                                " has no table in the model");
    out.push_back(i);
  }
  return out;
}

}  // namespace detail

inline TrialLog run_experiment(const SourceModel& model, const SettingPolicy& left, const SettingPolicy& right,
                               std::uint64_t trials, std::uint64_t master_seed, const RunOptions& opts = {}) {
  if (trials == 0) throw Error(ErrorKind::invalid_argument, "trials must be >= 1");
  std::vector<std::size_t> left_idx(left.settings().size(), 0), right_idx(right.settings().size(), 0);
  if (model.discrete_lambda()) {
    left_idx = detail::map_settings(left.settings(), model.table().left_settings, "left");
    right_idx = detail::map_settings(right.settings(), model.table().right_settings, "right");
  }

  TrialLog log;
  log.master_seed = master_seed;
  if (model.discrete_lambda()) {
    log.backend = LambdaBackend::discrete;
    log.lambda_alphabet = model.table().lambda_alphabet;
  }
  log.records.resize(trials);

  const std::uint64_t chunks = (trials + kChunkSize - 1) / kChunkSize;
  detail::parallel_for(chunks, opts.threads, [&](std::size_t c) {
    Stream lambda_stream(master_seed, "lambda", c);
    Stream left_setting_stream(master_seed, "setting.left", c);
    Stream right_setting_stream(master_seed, "setting.right", c);
    Stream left_noise(master_seed, "noise.left", c);
    Stream right_noise(master_seed, "noise.right", c);
    const std::uint64_t begin = c * kChunkSize;
    const std::uint64_t end = std::min<std::uint64_t>(begin + kChunkSize, trials);
    for (std::uint64_t i = begin; i < end; ++i) {
      const std::uint64_t j = i + 1;
      const double u_lambda = lambda_stream.uniform();
      const std::size_t ia = left.choose(j, left_setting_stream);
      const std::size_t ib = right.choose(j, right_setting_stream);
      const double u_left = left_noise.uniform();
      const double u_right = right_noise.uniform();
      const double a = left.settings()[ia], b = right.settings()[ib];
      const auto s = model.sample(a, b, left_idx[ia], right_idx[ib], u_lambda, u_left, u_right);
      auto& r = log.records[i];
      r.index = j;
      r.lambda = {s.lambda, s.lambda_symbol};
      r.left = {a, u_left};
      r.right = {b, u_right};
      r.outcome_left = s.left;
      r.outcome_right = s.right;
    }
  });
  return log;
}

}  // namespace bellfreq
