#include <gtest/gtest.h>

#include <sstream>

#include "bellfreq.hpp"
#include "oracles.hpp"

using namespace bellfreq;

namespace {

Collective coin(std::size_t n, std::uint64_t seed, const Alphabet& alpha = Alphabet({"H", "T"})) {
  Stream rng(seed);
  std::vector<SymbolId> s(n);
  for (auto& x : s) x = static_cast<SymbolId>(rng.below(alpha.size()));
  return Collective(alpha, std::move(s));
}

Collective from(std::initializer_list<const char*> syms, const Alphabet& alpha) {
  std::vector<std::string> s(syms.begin(), syms.end());
  return Collective::from_symbols(alpha, s);
}

// Product-of-marginals check from the raw streams, without the library's table.
double raw_max_deviation(const Collective& x, const Collective& y) {
  const std::size_t n = x.size(), kx = x.alphabet().size(), ky = y.alphabet().size();
  std::vector<double> fx(kx), fy(ky), fxy(kx * ky);
  for (std::size_t j = 0; j < n; ++j) {
    fx[x[j]] += 1.0 / n;
    fy[y[j]] += 1.0 / n;
    fxy[x[j] * ky + y[j]] += 1.0 / n;
  }
  double m = 0;
  for (std::size_t i = 0; i < kx; ++i)
    for (std::size_t k = 0; k < ky; ++k) m = std::max(m, std::abs(fxy[i * ky + k] - fx[i] * fy[k]));
  return m;
}

}  // namespace

TEST(Combine, PairsByIndex) {
  const auto cc = combine(from({"A", "B"}, Alphabet({"A", "B"})), from({"X", "Y"}, Alphabet({"X", "Y"})));
  EXPECT_EQ(cc.tuple(0), (std::vector<SymbolId>{0, 0}));
  EXPECT_EQ(cc.tuple(1), (std::vector<SymbolId>{1, 1}));
  const auto view = cc.tuple_view();
  EXPECT_EQ(view.label_at(0), "A|X");
  EXPECT_EQ(view.label_at(1), "B|Y");
}

TEST(Combine, SelfPairingIsDiagonal) {
  const auto c = coin(100, 3);
  const auto cc = combine(c, c);
  for (std::size_t j = 0; j < c.size(); ++j) EXPECT_EQ(cc.tuple(j)[0], cc.tuple(j)[1]);
}

TEST(Combine, LengthMismatch) {
  try {
    combine(coin(10, 1), coin(11, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::length_mismatch);
  }
  EXPECT_THROW(combine(Collective(Alphabet({"a"}), {}), Collective(Alphabet({"a"}), {})), Error);
}

TEST(Combine, WingsOfOneLogAlignByTrial) {
  const auto log = run_experiment(SourceModel::quantum_singlet(), SettingPolicy::uniform({0.0, 1.0}),
                                  SettingPolicy::uniform({0.5, 2.0}), 500, 9);
  const auto cc =
      combine(extract_collective(log, {Field::outcome_left}), extract_collective(log, {Field::outcome_right}));
  for (std::size_t j = 0; j < log.size(); ++j) {
    EXPECT_EQ(cc.component(0).label_at(j), log.records[j].outcome_left == Outcome::plus ? "+1" : "-1");
    EXPECT_EQ(cc.component(1).label_at(j), log.records[j].outcome_right == Outcome::plus ? "+1" : "-1");
  }
}

TEST(EventIndependence, IndependentCoins) {
  const auto x = coin(100000, 101), y = coin(100000, 202);
  const auto r = event_independence_test(combine(x, y));
  EXPECT_NEAR(r.max_deviation, raw_max_deviation(x, y), 1e-12);
  EXPECT_EQ(r.verdict, Verdict::independent);
  EXPECT_EQ(r.degrees_of_freedom, 1U);
}

TEST(EventIndependence, SelfPairingIsDependent) {
  const auto c = coin(100000, 7);
  const auto r = event_independence_test(combine(c, c));
  EXPECT_EQ(r.verdict, Verdict::dependent);
  EXPECT_NEAR(r.max_deviation, 0.25, 0.01);
}

TEST(EventIndependence, ConstantsFactorize) {
  const Alphabet a({"a"}), b({"b", "c"});
  const auto r = event_independence_test(combine(Collective(a, std::vector<SymbolId>(50, 0)),
                                                 Collective(b, std::vector<SymbolId>(50, 1))));
  EXPECT_EQ(r.max_deviation, 0.0);
  EXPECT_TRUE(r.exact_factorization);
  EXPECT_EQ(r.verdict, Verdict::independent);
}

TEST(EventIndependence, VerdictFollowsRecordedRule) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto x = coin(2000, seed);
    Stream rng(seed + 1000);
    std::vector<SymbolId> ys(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) ys[j] = rng.bernoulli(0.02 * static_cast<double>(seed % 5)) ? x[j] : static_cast<SymbolId>(rng.below(2));
    const auto r = event_independence_test(combine(x, Collective(x.alphabet(), ys)));
    double m = 0;
    for (const auto& row : r.deviation_matrix)
      for (double d : row) m = std::max(m, d);
    EXPECT_EQ(m, r.max_deviation);
    const double sigma = std::sqrt(0.25 / 2000.0);
    Verdict expected = Verdict::inconclusive;
    if (r.max_deviation > 3 * sigma || r.p_value < 0.01)
      expected = Verdict::dependent;
    else if (r.max_deviation < sigma && r.p_value >= 0.05)
      expected = Verdict::independent;
    EXPECT_EQ(r.verdict, expected);
  }
}

TEST(EventIndependence, TranspositionInvariance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = coin(3000, seed, Alphabet({"a", "b", "c"}));
    const auto y = coin(3000, seed * 7 + 1);
    const auto r1 = event_independence_test(combine(x, y));
    const auto r2 = event_independence_test(combine(y, x));
    EXPECT_EQ(r1.max_deviation, r2.max_deviation);
    EXPECT_EQ(r1.verdict, r2.verdict);
    ASSERT_EQ(r1.deviation_matrix.size(), r2.deviation_matrix[0].size());
    for (std::size_t i = 0; i < r1.deviation_matrix.size(); ++i)
      for (std::size_t j = 0; j < r1.deviation_matrix[i].size(); ++j)
        EXPECT_EQ(r1.deviation_matrix[i][j], r2.deviation_matrix[j][i]);
  }
}

TEST(EventIndependence, PValueMatchesClosedFormForOneDegree) {
  // df = 1: p = erfc(sqrt(chi2 / 2))
  const auto x = coin(5000, 42), y = coin(5000, 43);
  const auto r = event_independence_test(combine(x, y));
  EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(r.chi_square / 2.0)), 1e-12);
}

TEST(EventIndependence, MoreThanTwoComponentsRejected) {
  const auto c = coin(10, 1);
  const CombinedCollective three({c, c, c});
  EXPECT_THROW(event_independence_test(three), Error);
}

TEST(DependenceMetric, Examples) {
  EXPECT_LE(dependence_metric(combine(coin(100000, 5), coin(100000, 6))), 0.005);
  std::vector<SymbolId> s(1000), t(1000);
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = static_cast<SymbolId>(j % 2);
    t[j] = 1 - s[j];
  }
  const Alphabet bin({"0", "1"});
  EXPECT_DOUBLE_EQ(dependence_metric(combine(Collective(bin, s), Collective(bin, t))), 0.25);
  EXPECT_EQ(dependence_metric(combine(Collective(bin, std::vector<SymbolId>(9, 1)), Collective(bin, std::vector<SymbolId>(9, 0)))), 0.0);
}

TEST(DependenceMetric, ZeroExactlyWhenRationalJointFactorizes) {
  // Exact factorization is decided with integer arithmetic; the metric must be
  // 0 exactly on those inputs and positive elsewhere.
  const Alphabet bin({"0", "1"});
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Stream rng(seed);
    const std::size_t n = 1 + rng.below(12);
    std::vector<SymbolId> s(n), t(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = static_cast<SymbolId>(rng.below(2));
      t[j] = static_cast<SymbolId>(rng.below(2));
    }
    const auto cc = combine(Collective(bin, s), Collective(bin, t));
    oracle::Q n11 = 0, n1_ = 0, n_1 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      n11 += (s[j] == 1 && t[j] == 1);
      n1_ += s[j] == 1;
      n_1 += t[j] == 1;
    }
    // 2x2 factorizes iff f11 = f1. f.1
    const bool factorizes = n11 / static_cast<long long>(n) == (n1_ / static_cast<long long>(n)) * (n_1 / static_cast<long long>(n));
    EXPECT_EQ(factorizes_exactly(cc), factorizes);
    EXPECT_EQ(dependence_metric(cc) == 0.0, factorizes);
  }
}

TEST(CollectiveIndependence, IndependentCoins) {
  const auto r = collective_independence_test(combine(coin(100000, 11), coin(100000, 12)));
  EXPECT_EQ(r.full.verdict, Verdict::independent);
  EXPECT_EQ(r.verdict, CollectiveVerdict::collective_independent);
  EXPECT_FALSE(r.breaking_selection.has_value());
}

TEST(CollectiveIndependence, SelfPairingFailsAtFullStage) {
  const auto c = coin(10000, 2);
  const auto r = collective_independence_test(combine(c, c));
  EXPECT_EQ(r.verdict, CollectiveVerdict::not_collective_independent);
  EXPECT_EQ(r.breaking_selection, "full");
}

TEST(CollectiveIndependence, CounterexampleIsEventButNotCollectiveIndependent) {
  const auto w = find_numberplay_counterexample({});
  ASSERT_TRUE(w.has_value());
  const auto r = collective_independence_test(witness_sequence(*w), CollectiveTestOptions{10});
  EXPECT_TRUE(r.full.exact_factorization);
  EXPECT_EQ(r.full.max_deviation, 0.0);
  EXPECT_EQ(r.full.verdict, Verdict::independent);
  EXPECT_EQ(r.verdict, CollectiveVerdict::not_collective_independent);
  ASSERT_TRUE(r.breaking_selection.has_value());
}

TEST(CollectiveIndependence, PrefixRulesDetectHiddenCoupling) {
  // x_j = y_j xor y_{j-1}: x is independent of y at every index, but once
  // y_{j-1} is known x_j is a function of y_j. The parity of x's prefix
  // count of T equals y_{j-1}, so c1:parity(T) sees it before the cross rules
  // do. The H count's parity also carries the parity of j, which hides it.
  const auto y = coin(50000, 31);
  std::vector<SymbolId> xs(y.size());
  xs[0] = y[0];
  for (std::size_t j = 1; j < y.size(); ++j) xs[j] = y[j] ^ y[j - 1];
  const auto r = collective_independence_test(combine(Collective(y.alphabet(), xs), y));
  EXPECT_EQ(r.full.verdict, Verdict::independent);
  EXPECT_EQ(r.verdict, CollectiveVerdict::not_collective_independent);
  ASSERT_TRUE(r.breaking_selection.has_value());
  EXPECT_EQ(*r.breaking_selection, "c1:parity(T)");
  std::size_t coupled = 0;
  for (const auto& s : r.subsequences)
    if (s.selection.rfind("c2:after(", 0) == 0 || s.selection == "c1:parity(T)") {
      ASSERT_TRUE(s.report.has_value());
      EXPECT_NEAR(s.report->max_deviation, 0.25, 0.01) << s.selection;
      EXPECT_EQ(s.report->verdict, Verdict::dependent) << s.selection;
      ++coupled;
    }
  EXPECT_EQ(coupled, 3U);
}

TEST(CollectiveIndependence, ImpliesFullEventIndependence) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto r = collective_independence_test(combine(coin(5000, seed), coin(5000, seed + 100)));
    if (r.verdict == CollectiveVerdict::collective_independent) {
      EXPECT_EQ(r.full.verdict, Verdict::independent);
    }
  }
}

TEST(CollectiveIndependence, SubsequencesSortedAndShortOnesSkipped) {
  const auto r = collective_independence_test(combine(coin(300, 1), coin(300, 2)), CollectiveTestOptions{100});
  for (std::size_t i = 1; i < r.subsequences.size(); ++i)
    EXPECT_LE(r.subsequences[i - 1].selection, r.subsequences[i].selection);
  EXPECT_FALSE(r.skipped.empty());  // stride(5,*) gives 60 pairs
  for (const auto& s : r.subsequences) EXPECT_EQ(s.skipped, s.length < 100) << s.selection;
}

TEST(CollectiveIndependence, ThreadCountDoesNotChangeReport) {
  const auto cc = combine(coin(20000, 5), coin(20000, 6));
  const json one = collective_independence_test(cc, CollectiveTestOptions{100, {}, 1});
  const json many = collective_independence_test(cc, CollectiveTestOptions{100, {}, 4});
  EXPECT_EQ(one.dump(), many.dump());
}

TEST(JointFamily, ContainsCrossRules) {
  const auto fam = joint_selection_family(Alphabet({"a", "b"}), Alphabet({"x", "y", "z"}));
  std::vector<std::string> names;
  for (const auto& s : fam) names.push_back(s.name());
  for (const char* n : {"c2:after(x)", "c2:after(z)", "c1:parity(b)", "stride(3,2)", "mask(24301)"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
}

TEST(JointFamily, CrossRuleReadsOtherComponent) {
  // pairs (a,x) (a,y) (b,x) (a,x): c2:after(y) keeps position 3 only
  const Alphabet a({"a", "b"}), b({"x", "y"});
  const auto cc = combine(from({"a", "a", "b", "a"}, a), from({"x", "y", "x", "x"}, b));
  const auto fam = joint_selection_family(cc, false);
  const auto it = std::find_if(fam.begin(), fam.end(), [](const auto& s) { return s.name() == "c2:after(y)"; });
  ASSERT_NE(it, fam.end());
  EXPECT_EQ(selected_positions(cc.tuple_view().samples(), *it), (std::vector<std::size_t>{2}));
}

TEST(Counterexample, PeriodOneHasNone) {
  CounterexampleBounds b;
  b.max_period = 1;
  EXPECT_FALSE(find_numberplay_counterexample(b).has_value());
}

TEST(Counterexample, PeriodTwoAgreesWithEnumeration) {
  CounterexampleBounds b;
  b.max_period = 2;
  const bool oracle_candidate = oracle::period_two_admits_candidate();
  EXPECT_FALSE(oracle_candidate);
  EXPECT_EQ(find_numberplay_counterexample(b).has_value(), oracle_candidate);
}

TEST(Counterexample, WitnessVerifies) {
  const auto w = find_numberplay_counterexample({});
  ASSERT_TRUE(w.has_value());
  EXPECT_TRUE(verify_witness(*w));
  EXPECT_TRUE(w->period_counts.factorizes_exactly());
  EXPECT_GE(w->deviation_num * 10, w->deviation_den);
  EXPECT_LE(w->period, 16U);
}

TEST(Counterexample, RecordedWitnessIsStable) {
  // Fixed by the deterministic search order: periods ascending, patterns in
  // lexicographic order of pair ids, family order as constructed.
  const auto w = find_numberplay_counterexample({});
  ASSERT_TRUE(w.has_value());
  const json j = *w;
  EXPECT_EQ(j["period"], 4);
  EXPECT_EQ(j["pattern"].dump(), "[[0,0],[0,1],[1,0],[1,1]]");
  EXPECT_EQ(j["selection"], "c1:after(0)");
  EXPECT_EQ(j["deviation"], "1/4");
}

TEST(Counterexample, SearchSpaceExceeded) {
  CounterexampleBounds b;
  b.max_period = 25;
  try {
    find_numberplay_counterexample(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::search_space_exceeded);
    EXPECT_NE(std::string(e.what()).find("search space exceeded"), std::string::npos);
  }
  CounterexampleBounds tight;
  tight.candidate_budget = 10;
  EXPECT_THROW(find_numberplay_counterexample(tight), Error);
  CounterexampleBounds bad;
  bad.left_size = 1;
  EXPECT_THROW(find_numberplay_counterexample(bad), Error);
}

TEST(Counterexample, TamperedWitnessFailsVerification) {
  auto w = *find_numberplay_counterexample({});
  auto broken = w;
  broken.pattern[0] = {1, 1};
  EXPECT_FALSE(verify_witness(broken));
  auto renamed = w;
  renamed.selection = "mask(24301)";
  EXPECT_FALSE(verify_witness(renamed));
}
