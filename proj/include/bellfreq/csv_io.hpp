#pragma once

// CSV formats.
//
// Trial log:
//   # bellfreq <version> seed=<master seed> config=<config hash> lambda=continuous
//   j,lambda,setting_left,setting_right,outcome_left,outcome_right
//   1,4.71238898038469,0,0.7853981633974483,-1,1
//
// The comment line is optional on input. For the discrete backend it reads
// lambda=discrete:<sym>;<sym>;... and lambda cells hold symbols. Reals are
// printed in shortest round-trip form. Outcomes are -1 or 1.
//
// Collective: header "index,symbol", 1-based index.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bellfreq/bell_analysis.hpp"
#include "bellfreq/detail/format.hpp"
#include "bellfreq/version.hpp"

namespace bellfreq {

inline constexpr std::string_view kTrialLogHeader = "j,lambda,setting_left,setting_right,outcome_left,outcome_right";

struct LogMetadata {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_hash;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline void write_trial_log_csv(std::ostream& os, const TrialLog& log, const LogMetadata& meta = {}) {
  using detail::format_double;
  os << "# bellfreq " << kVersion;
  if (auto seed = meta.seed ? meta.seed : log.master_seed) os << " seed=" << *seed;
  if (meta.config_hash) os << " config=" << *meta.config_hash;
  if (log.backend == LambdaBackend::discrete) {
    os << " lambda=discrete:";
    const auto& syms = log.lambda_alphabet->symbols();
    for (std::size_t i = 0; i < syms.size(); ++i) os << (i ? ";" : "") << syms[i];
  } else {
    os << " lambda=continuous";
  }
  os << '\n' << kTrialLogHeader << '\n';
  std::string line;
  for (const auto& r : log.records) {
    line.clear();
    line += std::to_string(r.index);
    line += ',';
    line += log.backend == LambdaBackend::discrete ? log.lambda_alphabet->symbol(r.lambda.symbol)
                                                   : format_double(r.lambda.angle);
    line += ',';
    line += format_double(r.left.setting);
    line += ',';
    line += format_double(r.right.setting);
    line += ',';
    line += std::to_string(value(r.outcome_left));
    line += ',';
    line += std::to_string(value(r.outcome_right));
    line += '\n';
    os << line;
  }
}

struct ParsedTrialLog {
  TrialLog log;
  LogMetadata meta;
};

/// Parses a trial log; the first malformed row raises ErrorKind::parse naming
/// the data row and file line.
inline ParsedTrialLog read_trial_log_csv(std::istream& is) {
  ParsedTrialLog out;
  out.log.has_noise = false;
  std::optional<std::vector<std::string>> declared_lambda;
  bool lambda_kind_known = false;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t row = 0;
  std::vector<std::string> discovered;  // discrete symbols by first appearance

  const auto fail = [&](const std::string& msg) -> Error {
    return Error(ErrorKind::parse, "row " + std::to_string(row) + " (line " + std::to_string(line_no) + "): " + msg);
  };

  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (!header_seen) {
      if (view.empty()) continue;
      if (view.front() == '#') {
        for (auto tok : detail::split(view.substr(1), ' ')) {
          if (tok.starts_with("seed=")) {
            out.meta.seed = detail::parse_integer<std::uint64_t>(tok.substr(5));
          } else if (tok.starts_with("config=")) {
            out.meta.config_hash = std::string(tok.substr(7));
          } else if (tok == "lambda=continuous") {
            lambda_kind_known = true;
          } else if (tok.starts_with("lambda=discrete:")) {
            lambda_kind_known = true;
            declared_lambda.emplace();
            for (auto s : detail::split(tok.substr(16), ';')) declared_lambda->emplace_back(s);
          }
        }
        continue;
      }
      if (view != kTrialLogHeader) throw fail("expected header '" + std::string(kTrialLogHeader) + "'");
      header_seen = true;
      continue;
    }
    if (view.empty()) continue;
    ++row;
    const auto cells = detail::split(view, ',');
    if (cells.size() != 6) throw fail("expected 6 columns, got " + std::to_string(cells.size()));
    TrialRecord r;
    const auto j = detail::parse_integer<std::uint64_t>(detail::trim(cells[0]));
    if (!j) throw fail("bad trial index");
    if (*j != row) throw fail("trial indices must be consecutive from 1");
    r.index = *j;

    const std::string_view lam = detail::trim(cells[1]);
    const auto lam_num = detail::parse_double(lam);
    if (row == 1 && !lambda_kind_known) {
      out.log.backend = lam_num ? LambdaBackend::continuous : LambdaBackend::discrete;
    } else if (row == 1) {
      out.log.backend = declared_lambda ? LambdaBackend::discrete : LambdaBackend::continuous;
    }
    if (out.log.backend == LambdaBackend::continuous) {
      if (!lam_num || !(*lam_num >= 0.0 && *lam_num < kTwoPi)) throw fail("lambda must be a real in [0, 2pi)");
      r.lambda.angle = *lam_num;
    } else {
      if (lam.empty() || lam_num) throw fail("discrete lambda must be a non-numeric symbol");
      auto& syms = declared_lambda ? *declared_lambda : discovered;
      auto it = std::find(syms.begin(), syms.end(), lam);
      if (it == syms.end()) {
        if (declared_lambda) throw fail("lambda symbol '" + std::string(lam) + "' not declared");
        syms.emplace_back(lam);
        it = syms.end() - 1;
      }
      r.lambda.symbol = static_cast<SymbolId>(it - syms.begin());
    }
    const auto a = detail::parse_double(detail::trim(cells[2]));
    const auto b = detail::parse_double(detail::trim(cells[3]));
    if (!a || !std::isfinite(*a)) throw fail("bad setting_left");
    if (!b || !std::isfinite(*b)) throw fail("bad setting_right");
    r.left.setting = *a;
    r.right.setting = *b;
    const auto parse_outcome = [&](std::string_view s, const char* name) {
      const auto v = detail::parse_integer<int>(detail::trim(s));
      if (!v || (*v != 1 && *v != -1)) throw fail(std::string(name) + " must be -1 or 1");
      return *v == 1 ? Outcome::plus : Outcome::minus;
    };
    r.outcome_left = parse_outcome(cells[4], "outcome_left");
    r.outcome_right = parse_outcome(cells[5], "outcome_right");
    out.log.records.push_back(r);
  }
  if (!header_seen) {
    row = 0;
    throw fail("missing header");
  }
  if (out.log.backend == LambdaBackend::discrete) {
    auto& syms = declared_lambda ? *declared_lambda : discovered;
    out.log.lambda_alphabet = Alphabet(syms.empty() ? std::vector<std::string>{"l0"} : syms);
  }
  out.log.master_seed = out.meta.seed;
  return out;
}

inline void write_collective_csv(std::ostream& os, const Collective& c) {
  os << "index,symbol\n";
  for (std::size_t i = 0; i < c.size(); ++i) os << (i + 1) << ',' << c.label_at(i) << '\n';
}

/// Reads a collective; without a declared alphabet the symbols are taken in
/// order of first appearance.
inline Collective read_collective_csv(std::istream& is, std::optional<Alphabet> alphabet = std::nullopt) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> labels;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header) {
      if (view != "index,symbol")
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected header 'index,symbol'");
      header = true;
      continue;
    }
    const auto cells = detail::split(view, ',');
    if (cells.size() != 2 || detail::parse_integer<std::uint64_t>(cells[0]) != labels.size() + 1)
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": malformed collective row");
    labels.emplace_back(cells[1]);
  }
  if (!alphabet) {
    std::vector<std::string> syms;
    for (const auto& l : labels)
      if (std::find(syms.begin(), syms.end(), l) == syms.end()) syms.push_back(l);
    if (syms.empty()) throw Error(ErrorKind::parse, "collective without samples needs a declared alphabet");
    alphabet = Alphabet(std::move(syms));
  }
  return Collective::from_symbols(std::move(*alphabet), labels);
}

/// Deviation matrix: first row is the column labels, then one row per s1.
inline void write_deviation_matrix_csv(std::ostream& os, const IndependenceReport& r) {
  os << "s1";
  for (const auto& c : r.col_labels) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < r.row_labels.size(); ++i) {
    os << r.row_labels[i];
    for (double d : r.deviation_matrix[i]) os << ',' << detail::format_double(d);
    os << '\n';
  }
}

/// Flat per-bin deviations: bin,a,b,A,B,deviation (scored and skipped cells).
inline void write_factorability_csv(std::ostream& os, const FactorabilityReport& r) {
  os << "bin,a,b,A,B,deviation\n";
  const auto emit = [&](const FactorabilityCell& c) {
    static constexpr const char* kSigns[4][2] = {{"1", "1"}, {"1", "-1"}, {"-1", "1"}, {"-1", "-1"}};
    for (std::size_t i = 0; i < 4; ++i)
      os << c.bin << ',' << detail::format_double(c.a) << ',' << detail::format_double(c.b) << ',' << kSigns[i][0]
         << ',' << kSigns[i][1] << ',' << detail::format_double(c.deviations[i]) << '\n';
  };
  for (const auto& c : r.cells) emit(c);
  for (const auto& c : r.skipped) emit(c);
}

}  // namespace bellfreq
