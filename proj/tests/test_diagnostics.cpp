#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bbayes/diagnostics.hpp"

using namespace bbayes;

namespace {

Eigen::MatrixXd iid_normal(Eigen::Index draws, Eigen::Index chains, std::uint64_t seed, double shift_per_chain = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(draws, chains);
  for (Eigen::Index c = 0; c < chains; ++c) {
    for (Eigen::Index d = 0; d < draws; ++d) m(d, c) = n01(rng) + shift_per_chain * static_cast<double>(c);
  }
  return m;
}

Eigen::MatrixXd ar1(Eigen::Index draws, Eigen::Index chains, double rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(draws, chains);
  const double innovation = std::sqrt(1 - rho * rho);
  for (Eigen::Index c = 0; c < chains; ++c) {
    double x = n01(rng);
    for (Eigen::Index d = 0; d < draws; ++d) {
      x = rho * x + innovation * n01(rng);
      m(d, c) = x;
    }
  }
  return m;
}

PosteriorDraws draws_from(const std::vector<std::vector<double>>& params, std::size_t chains) {
  PosteriorDraws d;
  d.chains = chains;
  d.draws = params.front().size() / chains;
  for (std::size_t j = 0; j < params.size(); ++j) d.param_names.push_back("p" + std::to_string(j));
  d.values.resize(chains * d.draws * params.size());
  d.stats.resize(chains * d.draws);
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t s = 0; s < d.draws; ++s) {
      for (std::size_t j = 0; j < params.size(); ++j) d.value(c, s, j) = params[j][c * d.draws + s];
    }
  }
  return d;
}

}  // namespace

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.055), 0.55);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(SplitChains, DropsMiddleOfOddChains) {
  Eigen::MatrixXd m(5, 1);
  m << 1, 2, 3, 4, 5;
  const auto s = split_chains(m);
  ASSERT_EQ(s.rows(), 2);
  ASSERT_EQ(s.cols(), 2);
  EXPECT_EQ(s(0, 0), 1);
  EXPECT_EQ(s(1, 1), 5);
}

TEST(RankNormalize, BlomOffsetAndTies) {
  Eigen::MatrixXd m(4, 1);
  m << 10, 30, 20, 20;
  const auto z = rank_normalize(m);
  const boost::math::normal_distribution<double> n01;
  EXPECT_NEAR(z(0, 0), boost::math::quantile(n01, (1 - 0.375) / 4.25), 1e-15);
  EXPECT_NEAR(z(1, 0), boost::math::quantile(n01, (4 - 0.375) / 4.25), 1e-15);
  EXPECT_EQ(z(2, 0), z(3, 0));
  EXPECT_NEAR(z(2, 0), boost::math::quantile(n01, (2.5 - 0.375) / 4.25), 1e-15);
}

// Direct textbook formula on split halves of a tiny hand-made matrix.
TEST(Rhat, BasicFormulaOnSmallChains) {
  Eigen::MatrixXd m(3, 2);
  m << 0.1, 1.0, 0.4, 1.3, 0.2, 0.9;
  const double n = 3;
  const double m0 = (0.1 + 0.4 + 0.2) / 3, m1 = (1.0 + 1.3 + 0.9) / 3;
  const double w0 = (std::pow(0.1 - m0, 2) + std::pow(0.4 - m0, 2) + std::pow(0.2 - m0, 2)) / 2;
  const double w1 = (std::pow(1.0 - m1, 2) + std::pow(1.3 - m1, 2) + std::pow(0.9 - m1, 2)) / 2;
  const double w = 0.5 * (w0 + w1);
  const double grand = 0.5 * (m0 + m1);
  const double b = n * (std::pow(m0 - grand, 2) + std::pow(m1 - grand, 2));
  EXPECT_NEAR(detail::rhat_basic(m), std::sqrt(((n - 1) / n * w + b / n) / w), 1e-14);
}

TEST(Rhat, IidChainsNearOne) {
  const auto m = iid_normal(1000, 4, 2024);
  const double r = split_rhat(m);
  EXPECT_GE(r, 0.999);
  EXPECT_LE(r, 1.01);
}

TEST(Rhat, MeanShiftDetected) {
  const auto m = iid_normal(1000, 2, 5, 5.0);
  EXPECT_GT(split_rhat(m), 1.5);
  // A shift inside each chain also shows up once chains are split.
  Eigen::MatrixXd drift = iid_normal(1000, 1, 6);
  drift.bottomRows(500).array() += 5.0;
  EXPECT_GT(split_rhat(drift), 1.5);
}

TEST(Rhat, DegenerateAndShortDraws) {
  try {
    split_rhat(Eigen::MatrixXd::Constant(100, 4, 1.25));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateDraws);
  }
  EXPECT_THROW(split_rhat(Eigen::MatrixXd::Random(3, 4)), Error);
}

TEST(Ess, IidCloseToDrawCount) {
  const auto m = iid_normal(1000, 4, 77);
  const double e = ess(m);
  EXPECT_GE(e, 3200);
  EXPECT_LE(e, 4800);
}

TEST(Ess, Ar1MatchesTheory) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto m = ar1(2500, 4, 0.9, seed);
    const double ratio = ess(m) / 10000.0;
    EXPECT_GE(ratio, 0.03) << seed;
    EXPECT_LE(ratio, 0.12) << seed;
  }
}

TEST(Ess, Degenerate) {
  try {
    ess(Eigen::MatrixXd::Constant(50, 2, -3.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateDraws);
  }
}

TEST(Summary, AllPositiveConstant) {
  const auto s = summarize_sample("attr33", std::vector<double>(400, 3.0), RopeSpec{});
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.pd, 1.0);
  EXPECT_EQ(s.rope_pct, 0.0);
  EXPECT_TRUE(s.significant);
  EXPECT_EQ(s.decision(), Decision::significant);
}

TEST(Summary, SymmetricInsideRope) {
  std::vector<double> v;
  for (int i = -50; i <= 50; ++i) v.push_back(0.001 * i);
  const auto s = summarize_sample("x", v, RopeSpec{});
  EXPECT_NEAR(s.pd, 0.5, 0.01);
  EXPECT_EQ(s.rope_pct, 100.0);
  EXPECT_FALSE(s.significant);
  EXPECT_EQ(s.decision(), Decision::practically_null);
}

TEST(Summary, EqualTailedInterval) {
  std::vector<double> v(1001);
  for (int i = 0; i <= 1000; ++i) v[static_cast<std::size_t>(i)] = i;
  std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
  const auto s = summarize_sample("x", v, RopeSpec{});
  EXPECT_DOUBLE_EQ(s.ci_low, 55.0);
  EXPECT_DOUBLE_EQ(s.ci_high, 945.0);
  EXPECT_DOUBLE_EQ(s.median, 500.0);
  EXPECT_LE(s.ci_low, s.median);
  EXPECT_LE(s.median, s.ci_high);
}

// Share of in-interval draws that also fall in the ROPE, counted by hand.
TEST(Summary, RopeShareMatchesCounting) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.15, 0.2);
  std::vector<double> v(4000);
  for (auto& x : v) x = n(rng);
  const RopeSpec rope{};
  const auto s = summarize_sample("x", v, rope);
  const double lo = quantile(v, 0.055), hi = quantile(v, 0.945);
  double in_ci = 0, both = 0;
  for (double x : v) {
    if (x >= lo && x <= hi) {
      ++in_ci;
      both += (x >= rope.low && x <= rope.high);
    }
  }
  EXPECT_NEAR(s.rope_pct, 100 * both / in_ci, 1e-12);
  EXPECT_EQ(s.decision(), Decision::undecided);
  EXPECT_FALSE(s.significant);
}

TEST(Summary, PdProperties) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.3, 1.0);
  std::vector<double> v(999);
  for (auto& x : v) x = n(rng);
  v[0] = 0.0;
  std::vector<double> neg(v.size());
  std::transform(v.begin(), v.end(), neg.begin(), [](double x) { return -x; });
  const auto a = summarize_sample("x", v, RopeSpec{});
  const auto b = summarize_sample("x", neg, RopeSpec{});
  EXPECT_GE(a.pd, 0.5);
  EXPECT_DOUBLE_EQ(a.pd, b.pd);
  EXPECT_DOUBLE_EQ(a.rope_pct, b.rope_pct);
  EXPECT_EQ(summarize_sample("z", std::vector<double>(10, 0.0), RopeSpec{}).pd, 0.5);
}

TEST(Summary, RopeOutsideGivesZero) {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(-2.0 - 0.01 * i);
  EXPECT_EQ(summarize_sample("x", v, RopeSpec{}).rope_pct, 0.0);
}

TEST(Summary, InvariantUnderPermutations) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> params(3, std::vector<double>(800));
  for (std::size_t j = 0; j < 3; ++j) {
    for (auto& x : params[j]) x = 0.2 * static_cast<double>(j) + 0.3 * n01(rng);
  }
  const auto base = summarize(draws_from(params, 4));

  // Draw order shuffled within each parameter and parameters reordered.
  auto shuffled = params;
  for (auto& p : shuffled) std::shuffle(p.begin(), p.end(), rng);
  std::reverse(shuffled.begin(), shuffled.end());
  const auto other = summarize(draws_from(shuffled, 4));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(base[j].rope_pct, other[2 - j].rope_pct);
    EXPECT_DOUBLE_EQ(base[j].median, other[2 - j].median);
    EXPECT_DOUBLE_EQ(base[j].pd, other[2 - j].pd);
  }

  // Swapping whole chains keeps every pooled summary.
  auto swapped = params;
  for (auto& p : swapped) std::rotate(p.begin(), p.begin() + 200, p.end());
  const auto rotated = summarize(draws_from(swapped, 4));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(base[j].ci_low, rotated[j].ci_low);
    EXPECT_DOUBLE_EQ(base[j].ci_high, rotated[j].ci_high);
    EXPECT_NEAR(base[j].rhat, rotated[j].rhat, 1e-12);
  }
}

TEST(Summary, DiagnosticsPerParameter) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> params(2, std::vector<double>(4000));
  for (auto& x : params[0]) x = n01(rng);
  for (std::size_t i = 0; i < 4000; ++i) params[1][i] = (i < 2000 ? 0.0 : 4.0) + n01(rng);
  const auto rows = summarize(draws_from(params, 4));
  EXPECT_LT(rows[0].rhat, 1.01);
  EXPECT_GT(rows[0].ess, 3000);
  EXPECT_GT(rows[1].rhat, 1.5);

  const auto constant = summarize(draws_from({std::vector<double>(40, 1.0)}, 2));
  EXPECT_TRUE(std::isnan(constant[0].rhat));
  EXPECT_THROW(summarize(PosteriorDraws{}), Error);
}

TEST(Narrative, PositiveSignificantWording) {
  auto s = summarize_sample("attr33", std::vector<double>(100, 9.18), RopeSpec{});
  s.rhat = 1.001;
  s.ess = 2182;
  const auto text = narrate(s);
  EXPECT_NE(text.find("probability of 100% of being positive"), std::string::npos) << text;
  EXPECT_NE(text.find("significant"), std::string::npos);
  EXPECT_NE(text.find("operating expenses / short-term liabilities"), std::string::npos);
  EXPECT_NE(text.find("ESS = 2182"), std::string::npos);
  EXPECT_NE(text.find("(converged)"), std::string::npos);
}

TEST(Narrative, NegativeAndUndecided) {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(-0.3 + 0.004 * i);
  const auto s = summarize_sample("attr42", v, RopeSpec{});
  const auto text = narrate(s);
  EXPECT_NE(text.find("of being negative"), std::string::npos) << text;
  EXPECT_NE(text.find("undecided"), std::string::npos);
  EXPECT_NE(text.find("not converged"), std::string::npos);
}

TEST(Render, MarkdownTableHasRowPerParameter) {
  std::vector<ParameterSummary> rows = {summarize_sample("(Intercept)", {1, 2, 3}, RopeSpec{}),
                                        summarize_sample("attr8", {-1, 0, 1}, RopeSpec{})};
  const auto md = render_summary_markdown(rows);
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 4);
  EXPECT_NE(md.find("89% CI"), std::string::npos);
  EXPECT_NE(md.find("[-0.181, 0.181]"), std::string::npos);
  EXPECT_NE(md.find("book value of equity / total liabilities"), std::string::npos);
}

TEST(RopeSpecTest, Validation) {
  EXPECT_THROW((RopeSpec{0.2, 0.1, 0.89}.validate()), Error);
  EXPECT_THROW((RopeSpec{-0.1, 0.1, 1.0}.validate()), Error);
  EXPECT_NEAR(RopeSpec{}.high, 0.1 * M_PI / std::sqrt(3.0), 1e-4);
}
