#pragma once

// Command-line front end: simulate, analyze, counterexample.
//
// Exit codes: 0 success, 1 a requested --assert-* check failed, 2 usage or
// configuration error, 3 I/O or parse error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bellfreq.hpp"

namespace bellfreq::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kUsage = 2, kIo = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline std::vector<double> parse_angle_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_angle(item));
    } catch (const Error& e) {
      throw UsageError(field + ": " + e.what());
    }
  }
  if (out.empty()) throw UsageError(field + ": expected a comma-separated list of angles");
  return out;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::string(detail::trim(item)));
  return out;
}

inline std::string digest(std::string_view bytes) { return detail::hex64(fnv1a64(bytes)); }

// ---- simulate ------------------------------------------------------------

struct WingConfig {
  std::string policy = "uniform";
  std::optional<std::vector<double>> settings;
};

struct RunConfig {
  std::optional<json> model;  // kind name, path, or model document
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::size_t bins = kDefaultLambdaBins;
  std::uint64_t min_bin_count = kDefaultMinBinCount;
  IndependenceThresholds tolerances;
  WingConfig left, right;
  std::optional<std::string> out;
  std::optional<std::string> config_out;
  unsigned threads = 1;
};

inline IndependenceThresholds tolerances_from_json(const json& j, IndependenceThresholds th) {
  if (j.contains("dependent_sigmas")) th.dependent_sigmas = j.at("dependent_sigmas").get<double>();
  if (j.contains("independent_sigmas")) th.independent_sigmas = j.at("independent_sigmas").get<double>();
  if (j.contains("p_dependent")) th.p_dependent = j.at("p_dependent").get<double>();
  if (j.contains("p_independent")) th.p_independent = j.at("p_independent").get<double>();
  return th;
}

inline json tolerances_to_json(const IndependenceThresholds& th) {
  return {{"dependent_sigmas", th.dependent_sigmas},
          {"independent_sigmas", th.independent_sigmas},
          {"p_dependent", th.p_dependent},
          {"p_independent", th.p_independent}};
}

inline void apply_config_file(RunConfig& cfg, const json& j) {
  try {
    if (j.contains("model")) cfg.model = j.at("model");
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::uint64_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("bins")) cfg.bins = j.at("bins").get<std::size_t>();
    if (j.contains("min_bin_count")) cfg.min_bin_count = j.at("min_bin_count").get<std::uint64_t>();
    if (j.contains("tolerances")) cfg.tolerances = tolerances_from_json(j.at("tolerances"), cfg.tolerances);
    for (auto [key, wing] : {std::pair{"left", &cfg.left}, std::pair{"right", &cfg.right}}) {
      if (!j.contains(key)) continue;
      const auto& w = j.at(key);
      if (w.contains("policy")) wing->policy = w.at("policy").get<std::string>();
      if (w.contains("settings")) {
        std::vector<double> s;
        for (const auto& a : w.at("settings")) s.push_back(angle_from_json(a));
        wing->settings = std::move(s);
      }
    }
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

inline SourceModel resolve_model(const json& spec) {
  try {
    if (spec.is_string()) {
      const auto s = spec.get<std::string>();
      if (s == "local_deterministic" || s == "quantum_singlet") return model_from_json(json{{"kind", s}});
      if (s == "discrete_table" || s == "dependent_collectives")
        throw UsageError("model: kind '" + s + "' needs a model document (pass a JSON file)");
      if (!std::filesystem::exists(s)) throw UsageError("model: unknown kind or missing file '" + s + "'");
      return model_from_json(read_json_file(s));
    }
    if (spec.is_object()) return model_from_json(spec);
  } catch (const Error& e) {
    throw UsageError(e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("model: ") + e.what());
  }
  throw UsageError("model: expected a kind name, file path, or object");
}

inline SettingPolicy make_policy(const WingConfig& w, const std::vector<double>& settings, const std::string& wing) {
  if (w.policy == "uniform") return SettingPolicy::uniform(settings);
  if (w.policy == "cyclic") return SettingPolicy::cyclic(settings);
  if (w.policy == "fixed") {
    if (settings.size() != 1) throw UsageError(wing + ".settings: fixed policy takes exactly one setting");
    return SettingPolicy::fixed(settings.front());
  }
  throw UsageError(wing + ".policy: expected uniform, cyclic or fixed");
}

struct Materialized {
  SourceModel model;
  SettingPolicy left, right;
  json config;  // everything that determines the log and default analyses
  std::string hash;
};

inline Materialized materialize(const RunConfig& cfg) {
  if (!cfg.model) throw UsageError("model: required");
  if (cfg.trials == 0) throw UsageError("trials: must be >= 1");
  if (cfg.bins == 0) throw UsageError("bins: must be >= 1");
  SourceModel model = resolve_model(*cfg.model);
  const auto left_settings = cfg.left.settings.value_or(model.default_left_settings());
  const auto right_settings = cfg.right.settings.value_or(model.default_right_settings());
  auto left = make_policy(cfg.left, left_settings, "left");
  auto right = make_policy(cfg.right, right_settings, "right");
  json config = {{"model", model_to_json(model)},
                 {"left", {{"policy", cfg.left.policy}, {"settings", left_settings}}},
                 {"right", {{"policy", cfg.right.policy}, {"settings", right_settings}}},
                 {"trials", cfg.trials},
                 {"seed", cfg.seed},
                 {"bins", cfg.bins},
                 {"min_bin_count", cfg.min_bin_count},
                 {"tolerances", tolerances_to_json(cfg.tolerances)},
                 {"chunk_size", kChunkSize}};
  const std::string hash = digest(config.dump());
  return {std::move(model), std::move(left), std::move(right), std::move(config), hash};
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.out) throw UsageError("out: required");
  auto m = materialize(cfg);
  TrialLog log;
  try {
    log = run_experiment(m.model, m.left, m.right, cfg.trials, cfg.seed, {cfg.threads});
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::ostringstream csv;
  write_trial_log_csv(csv, log, {cfg.seed, m.hash});
  write_file(*cfg.out, csv.str());
  const std::string echo_path = cfg.config_out.value_or(*cfg.out + ".config.json");
  json echo = {{"tool_version", kVersion},
               {"master_seed", cfg.seed},
               {"config", m.config},
               {"config_hash", m.hash},
               {"outputs", {{"log", *cfg.out}, {"config_echo", echo_path}}}};
  write_file(echo_path, echo.dump(2) + "\n");
  out << "wrote " << cfg.trials << " trials to " << *cfg.out << " (seed " << cfg.seed << ", config " << m.hash
      << ")\n";
  return kOk;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeOptions {
  std::string log_path;
  std::optional<std::string> spec_path;
  std::optional<std::string> chsh;
  bool factorability = false;
  bool wing_dependence = false;
  bool freedom_of_choice = false;
  std::optional<std::string> independence;
  std::optional<std::string> stability;
  std::optional<std::string> unconditional;
  std::optional<std::size_t> bins;
  std::optional<std::uint64_t> min_bin_count;
  std::size_t min_subseq = 100;
  std::optional<std::string> out;
  std::optional<std::string> factorability_csv;
  std::optional<double> assert_chsh_bound;
  bool assert_independent = false;
  bool assert_dependent = false;
  unsigned threads = 1;
};

inline json parse_fields(const json& j, const char* what) {
  if (j.is_string()) return split_list(j.get<std::string>());
  if (j.is_array()) return j;
  throw UsageError(std::string(what) + ": expected a field list");
}

/// Flags are folded into the spec document, so the report echoes one spec.
inline json build_spec(const AnalyzeOptions& o) {
  json spec = json::object();
  if (o.spec_path) {
    spec = read_json_file(*o.spec_path);
    if (!spec.is_object()) throw UsageError("spec: expected a JSON object");
  }
  if (o.chsh) {
    const auto a = parse_angle_list(*o.chsh, "chsh");
    if (a.size() != 4) throw UsageError("chsh: expected a,a',b,b'");
    spec["chsh"] = {{"a", a[0]}, {"a_prime", a[1]}, {"b", a[2]}, {"b_prime", a[3]}};
  }
  if (o.factorability && !spec.contains("factorability")) spec["factorability"] = json::object();
  if (o.wing_dependence && !spec.contains("wing_dependence")) spec["wing_dependence"] = json::object();
  if (o.freedom_of_choice && !spec.contains("freedom_of_choice")) spec["freedom_of_choice"] = json::object();
  if (o.independence) {
    const auto colon = o.independence->find(':');
    if (colon == std::string::npos) throw UsageError("independence: expected FIELDS:FIELDS");
    spec["independence"] = {{"first", split_list(o.independence->substr(0, colon))},
                            {"second", split_list(o.independence->substr(colon + 1))}};
  }
  if (o.stability) spec["stability"] = {{"projection", split_list(*o.stability)}};
  if (o.unconditional) {
    const auto a = parse_angle_list(*o.unconditional, "unconditional");
    if (a.size() != 2) throw UsageError("unconditional: expected a,b");
    spec["unconditional"] = {{"a", a[0]}, {"b", a[1]}};
  }
  return spec;
}

inline int cmd_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err) {
  if (o.assert_independent && o.assert_dependent)
    throw UsageError("--assert-independent and --assert-dependent are exclusive");
  json spec = build_spec(o);
  static const std::vector<std::string> known = {"chsh",         "factorability", "wing_dependence", "freedom_of_choice",
                                                 "independence", "stability",     "unconditional"};
  for (const auto& [key, _] : spec.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw UsageError("spec: unknown analysis '" + key + "'");

  const std::string text = read_file(o.log_path);
  std::istringstream in(text);
  ParsedTrialLog parsed;
  try {
    parsed = read_trial_log_csv(in);
  } catch (const Error& e) {
    throw IoError(o.log_path + ": " + e.what());
  }
  const TrialLog& log = parsed.log;
  if (log.size() == 0 && !spec.empty()) throw UsageError("log: no trials");

  const auto angle = [](const json& j, const char* key) {
    if (!j.contains(key)) throw UsageError(std::string("chsh.") + key + ": required");
    return angle_from_json(j.at(key));
  };
  const auto opt_size = [](const json& j, const char* key, std::size_t fallback) {
    return j.contains(key) ? j.at(key).get<std::size_t>() : fallback;
  };
  const std::size_t bins = o.bins.value_or(kDefaultLambdaBins);
  const std::uint64_t min_count = o.min_bin_count.value_or(kDefaultMinBinCount);

  json analyses = json::object();
  std::vector<std::string> failures;
  std::optional<Verdict> independence_verdict;
  try {
    if (spec.contains("chsh")) {
      const auto& c = spec["chsh"];
      auto r = chsh(log, angle(c, "a"), angle(c, "a_prime"), angle(c, "b"), angle(c, "b_prime"));
      analyses["chsh"] = r;
      if (o.assert_chsh_bound && std::abs(r.S) > *o.assert_chsh_bound)
        failures.push_back("|S| = " + detail::format_double(std::abs(r.S)) + " exceeds bound " +
                           detail::format_double(*o.assert_chsh_bound));
    } else if (o.assert_chsh_bound) {
      throw UsageError("--assert-chsh-bound needs a chsh analysis");
    }
    if (spec.contains("factorability")) {
      const auto& f = spec["factorability"];
      auto r = factorability_check(log, opt_size(f, "bins", bins), opt_size(f, "min_count", min_count));
      analyses["factorability"] = r;
      if (o.factorability_csv) {
        std::ostringstream csv;
        write_factorability_csv(csv, r);
        write_file(*o.factorability_csv, csv.str());
      }
    }
    if (spec.contains("wing_dependence"))
      analyses["wing_dependence"] = wing_dependence_demo(log, opt_size(spec["wing_dependence"], "bins", bins));
    if (spec.contains("freedom_of_choice"))
      analyses["freedom_of_choice"] = freedom_of_choice_check(log, opt_size(spec["freedom_of_choice"], "bins", bins));
    if (spec.contains("independence")) {
      const auto& s = spec["independence"];
      if (!s.contains("first") || !s.contains("second")) throw UsageError("independence: first and second required");
      const std::size_t b = opt_size(s, "bins", bins);
      const auto first = Projection::parse(parse_fields(s["first"], "independence.first"), b);
      const auto second = Projection::parse(parse_fields(s["second"], "independence.second"), b);
      const auto cc = combine(extract_collective(log, first), extract_collective(log, second));
      CollectiveTestOptions copts;
      copts.min_length = opt_size(s, "min_length", o.min_subseq);
      copts.threads = o.threads;
      const auto event = event_independence_test(cc);
      const auto coll = collective_independence_test(cc, copts);
      independence_verdict = event.verdict;
      analyses["independence"] = {{"first", s["first"]},
                                  {"second", s["second"]},
                                  {"event", event},
                                  {"dependence_metric", dependence_metric(cc)},
                                  {"collective", coll}};
    }
    if (spec.contains("stability")) {
      const auto& s = spec["stability"];
      const auto proj = Projection::parse(parse_fields(s.value("projection", json("outcome_left")), "stability"), bins);
      const auto c = extract_collective(log, proj);
      const auto family = builtin_family(c.alphabet());
      analyses["stability"] = stability_report(c, family, opt_size(s, "min_subseq", o.min_subseq));
    }
    if (spec.contains("unconditional")) {
      const auto& u = spec["unconditional"];
      analyses["unconditional"] =
          unconditional_factorization(log, angle_from_json(u.at("a")), angle_from_json(u.at("b")));
    }
  } catch (const Error& e) {
    throw UsageError(e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("spec: ") + e.what());
  }

  if (o.assert_independent || o.assert_dependent) {
    if (!independence_verdict) throw UsageError("--assert-independent/--assert-dependent need an independence analysis");
    const Verdict want = o.assert_independent ? Verdict::independent : Verdict::dependent;
    if (*independence_verdict != want)
      failures.push_back(std::string("independence verdict is ") + to_string(*independence_verdict) + ", expected " +
                         to_string(want));
  }

  json report = {{"tool_version", kVersion},
                 {"master_seed", parsed.meta.seed ? json(*parsed.meta.seed) : json(nullptr)},
                 {"config_hash", parsed.meta.config_hash ? json(*parsed.meta.config_hash) : json(nullptr)},
                 {"log", {{"trials", log.size()},
                          {"lambda", log.backend == LambdaBackend::discrete ? "discrete" : "continuous"},
                          {"digest", digest(text)}}},
                 {"spec", spec},
                 {"analyses", analyses}};
  const std::string body = report.dump(2) + "\n";
  if (o.out)
    write_file(*o.out, body);
  else
    out << body;
  for (const auto& f : failures) err << "assertion failed: " << f << "\n";
  return failures.empty() ? kOk : kAssertionFailed;
}

// ---- counterexample ------------------------------------------------------

struct CounterexampleOptions {
  std::string alphabet = "2,2";
  std::size_t max_period = 16;
  std::size_t repetitions = 60;
  std::optional<std::string> out;
};

inline int cmd_counterexample(const CounterexampleOptions& o, std::ostream& out) {
  const auto sizes = split_list(o.alphabet);
  if (sizes.size() != 2) throw UsageError("alphabet: expected two sizes, e.g. 2,2");
  CounterexampleBounds bounds;
  const auto k1 = detail::parse_integer<std::size_t>(sizes[0]);
  const auto k2 = detail::parse_integer<std::size_t>(sizes[1]);
  if (!k1 || !k2) throw UsageError("alphabet: sizes must be integers");
  bounds.left_size = *k1;
  bounds.right_size = *k2;
  bounds.max_period = o.max_period;
  bounds.repetitions = o.repetitions;
  std::optional<NumberplayWitness> w;
  try {
    w = find_numberplay_counterexample(bounds);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::string body;
  if (w) {
    json j = {{"tool_version", kVersion},
              {"bounds", {{"alphabet_sizes", {bounds.left_size, bounds.right_size}},
                          {"max_period", bounds.max_period},
                          {"repetitions", bounds.repetitions},
                          {"min_deviation", "1/10"}}},
              {"witness", *w},
              {"verified", verify_witness(*w)}};
    body = j.dump(2) + "\n";
  } else {
    body = "none\n";
  }
  if (o.out)
    write_file(*o.out, body);
  else
    out << body;
  return kOk;
}

// ---- entry ---------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Frequency-probability toolkit for EPR-Bohm collectives", "bellfreq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig run_cfg;
  std::optional<std::string> config_path, model_flag;
  std::optional<std::uint64_t> seed_flag, trials_flag, min_count_flag;
  std::optional<std::size_t> bins_flag;
  std::optional<std::string> out_flag, left_settings, right_settings, left_policy, right_policy;
  auto* sim = app.add_subcommand("simulate", "Generate a trial log");
  sim->add_option("--config", config_path, "JSON run configuration");
  sim->add_option("--model", model_flag, "Model kind or model JSON file");
  sim->add_option("--seed", seed_flag, "Master seed");
  sim->add_option("--trials", trials_flag, "Number of trials");
  sim->add_option("--bins", bins_flag, "Lambda bins recorded for analysis");
  sim->add_option("--min-bin-count", min_count_flag, "Minimum conditional count per bin");
  sim->add_option("--left-settings", left_settings, "Left settings, e.g. 0,pi/2");
  sim->add_option("--right-settings", right_settings, "Right settings, e.g. pi/4,3pi/4");
  sim->add_option("--left-policy", left_policy, "uniform | cyclic | fixed");
  sim->add_option("--right-policy", right_policy, "uniform | cyclic | fixed");
  sim->add_option("--out", out_flag, "Trial log CSV path");
  sim->add_option("--config-out", run_cfg.config_out, "Config echo path (default <out>.config.json)");
  sim->add_option("--threads", run_cfg.threads, "Generation threads");

  AnalyzeOptions an;
  auto* ana = app.add_subcommand("analyze", "Analyze a trial log");
  ana->add_option("--log", an.log_path, "Trial log CSV")->required();
  ana->add_option("--spec", an.spec_path, "JSON analysis spec");
  ana->add_option("--chsh", an.chsh, "a,a',b,b'");
  ana->add_flag("--factorability", an.factorability);
  ana->add_flag("--wing-dependence", an.wing_dependence);
  ana->add_flag("--freedom-of-choice", an.freedom_of_choice);
  ana->add_option("--independence", an.independence, "FIELDS:FIELDS, e.g. outcome_left:outcome_right");
  ana->add_option("--stability", an.stability, "Projected fields, e.g. outcome_left");
  ana->add_option("--unconditional", an.unconditional, "a,b");
  ana->add_option("--bins", an.bins, "Lambda bins");
  ana->add_option("--min-bin-count", an.min_bin_count, "Minimum conditional count per bin");
  ana->add_option("--min-subseq", an.min_subseq, "Minimum subsequence length for selections");
  ana->add_option("--out", an.out, "Report path (default stdout)");
  ana->add_option("--factorability-csv", an.factorability_csv, "Per-bin deviation CSV path");
  ana->add_option("--assert-chsh-bound", an.assert_chsh_bound, "Exit 1 when |S| exceeds this bound");
  ana->add_flag("--assert-independent", an.assert_independent);
  ana->add_flag("--assert-dependent", an.assert_dependent);
  ana->add_option("--threads", an.threads, "Worker threads for selection subtests");

  CounterexampleOptions cx;
  auto* cex = app.add_subcommand("counterexample", "Search periodic pair sequences for factorization by arithmetic");
  cex->add_option("--alphabet", cx.alphabet, "Alphabet sizes, e.g. 2,2");
  cex->add_option("--max-period", cx.max_period, "Largest period searched (<= 24)");
  cex->add_option("--repetitions", cx.repetitions, "Pattern repetitions for evaluating selections");
  cex->add_option("--out", cx.out, "Witness JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*sim) {
      if (config_path) apply_config_file(run_cfg, read_json_file(*config_path));
      if (model_flag) run_cfg.model = json(*model_flag);
      if (seed_flag) run_cfg.seed = *seed_flag;
      if (trials_flag) run_cfg.trials = *trials_flag;
      if (bins_flag) run_cfg.bins = *bins_flag;
      if (min_count_flag) run_cfg.min_bin_count = *min_count_flag;
      if (out_flag) run_cfg.out = out_flag;
      if (left_settings) run_cfg.left.settings = parse_angle_list(*left_settings, "left.settings");
      if (right_settings) run_cfg.right.settings = parse_angle_list(*right_settings, "right.settings");
      if (left_policy) run_cfg.left.policy = *left_policy;
      if (right_policy) run_cfg.right.policy = *right_policy;
      return cmd_simulate(run_cfg, out);
    }
    if (*ana) return cmd_analyze(an, out, err);
    if (*cex) return cmd_counterexample(cx, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::parse || e.kind() == ErrorKind::io ? kIo : kUsage;
  }
  return kUsage;
}

}  // namespace bellfreq::cli
