#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include "bbayes/diagnostics.hpp"
#include "bbayes/nuts.hpp"
#include "support.hpp"

using namespace bbayes;
using fixtures::GaussianTarget;
using fixtures::StdNormalTarget;

namespace {

auto normal_grad = [](const Eigen::VectorXd& q) -> Eigen::VectorXd { return -q; };

// Standard logistic density: skewless but clearly not Gaussian tails.
struct LogisticTarget {
  std::size_t dim() const { return 1; }
  double log_density_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    const double x = q[0];
    g.resize(1);
    g[0] = -std::tanh(0.5 * x);  // 1 - 2*sigmoid(x)
    return -std::abs(x) - 2.0 * std::log1p(std::exp(-std::abs(x)));
  }
};

// Finite at the very first evaluation only.
struct FiniteOnceTarget {
  mutable std::atomic<int> calls{0};
  std::size_t dim() const { return 2; }
  double log_density_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    g = -q;
    if (calls++ == 0) return -0.5 * q.squaredNorm();
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct NowhereFiniteTarget {
  std::size_t dim() const { return 3; }
  double log_density_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    g = Eigen::VectorXd::Zero(q.size());
    return -std::numeric_limits<double>::infinity();
  }
};

SamplerConfig config(std::size_t chains, std::size_t warmup, std::size_t draws, std::uint64_t seed) {
  SamplerConfig c;
  c.chains = chains;
  c.warmup = warmup;
  c.draws = draws;
  c.seed = seed;
  return c;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

template <typename Cdf>
double ks_distance(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST(Leapfrog, ZeroFieldLeavesPositionAlone) {
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(3, -1, 1);
  auto [q1, p1] = leapfrog(q, Eigen::VectorXd::Zero(3), 0.3,
                           [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); });
  EXPECT_EQ(q1, q);
  EXPECT_EQ(p1, Eigen::VectorXd::Zero(3));
}

TEST(Leapfrog, HandEvaluatedStep) {
  auto [q1, p1] = leapfrog(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1), 0.1, normal_grad);
  EXPECT_NEAR(q1[0], 0.995, 1e-15);
  EXPECT_NEAR(p1[0], -0.09975, 1e-15);
}

TEST(Leapfrog, Reversible) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(4, 4, [&] { return n01(rng); });
  const GaussianTarget target{Eigen::VectorXd::Zero(4), a * a.transpose() + Eigen::MatrixXd::Identity(4, 4)};
  auto grad = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
    Eigen::VectorXd g;
    target.log_density_and_gradient(q, g);
    return g;
  };
  const Eigen::VectorXd q0 = Eigen::VectorXd::NullaryExpr(4, [&] { return n01(rng); });
  const Eigen::VectorXd p0 = Eigen::VectorXd::NullaryExpr(4, [&] { return n01(rng); });
  auto [q1, p1] = leapfrog(q0, p0, 0.05, grad);
  auto [q2, p2] = leapfrog(q1, -p1, 0.05, grad);
  EXPECT_LT((q2 - q0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p2 + p0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Leapfrog, EnergyDriftSmallOnQuadratic) {
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(5, 5);
  prec(0, 1) = prec(1, 0) = 0.4;
  const GaussianTarget target{Eigen::VectorXd::Zero(5), prec};
  auto grad = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd { return -(prec * q); };
  auto energy = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
    return 0.5 * q.dot(prec * q) + 0.5 * p.squaredNorm();
  };
  for (double eps : {0.01, 0.005}) {
    Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(5, -1.5, 1.0);
    Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(5, 0.7, -0.4);
    const double h0 = energy(q, p);
    double worst = 0;
    for (int s = 0; s < 100; ++s) {
      std::tie(q, p) = leapfrog(q, p, eps, grad);
      worst = std::max(worst, std::abs(energy(q, p) - h0));
    }
    EXPECT_LT(worst, 1e-4) << eps;
  }
}

TEST(Leapfrog, NonFiniteGradientThrows) {
  auto bad = [](const Eigen::VectorXd& q) -> Eigen::VectorXd {
    return q[0] > 0.5 ? Eigen::VectorXd::Constant(1, std::nan("")) : Eigen::VectorXd(-q);
  };
  try {
    leapfrog(Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Constant(1, 5.0), 0.1, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteGradient);
  }
}

TEST(DualAveragingTest, FixedPointAtTarget) {
  DualAveraging da(0.3, 0.8);
  std::vector<double> steps;
  for (int i = 0; i < 1000; ++i) {
    da.update(0.8);
    steps.push_back(da.final_step());
  }
  for (std::size_t i = steps.size() - 100; i < steps.size(); ++i) {
    EXPECT_LT(std::abs(steps[i] / steps.back() - 1.0), 1e-3);
  }
  EXPECT_NEAR(da.current_step(), 3.0, 1e-12);  // mu = log(10 * eps0)
}

TEST(DualAveragingTest, GrowsWhenAlwaysAccepting) {
  DualAveraging da(0.1, 0.8);
  double prev = 0;
  for (int i = 0; i < 50; ++i) {
    const double s = da.update(1.0);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(DualAveragingTest, ShrinksWhenAlwaysRejecting) {
  DualAveraging da(1.0, 0.8);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const double s = da.update(0.0);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(Nuts, OneDimNormalCalibration) {
  const auto d = run_chains(StdNormalTarget{1}, config(1, 1000, 4000, 31));
  const auto xs = d.pooled(0);
  EXPECT_NEAR(mean_of(xs), 0.0, 0.05);
  EXPECT_NEAR(variance_of(xs), 1.0, 0.1);
}

TEST(Nuts, ZeroTreeDepthIsSingleStepMetropolis) {
  const StdNormalTarget target{2};
  NutsSampler<StdNormalTarget> sampler(target, 0);
  auto state = sampler.make_state(Eigen::VectorXd::Constant(2, 0.5));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    IterationStats st;
    state = sampler.transition(state, 1.3, rng, st);
    EXPECT_EQ(st.n_leapfrog, 1);
    EXPECT_EQ(st.tree_depth, 1);
    EXPECT_GE(st.accept_stat, 0.0);
    EXPECT_LE(st.accept_stat, 1.0);
  }
  auto cfg = config(2, 200, 300, 5);
  cfg.max_treedepth = 0;
  const auto d = run_chains(target, cfg);
  for (const auto& st : d.stats) EXPECT_EQ(st.n_leapfrog, 1);
}

TEST(Nuts, TreeDepthCapRespected) {
  auto cfg = config(1, 150, 200, 8);
  cfg.max_treedepth = 3;
  const auto d = run_chains(StdNormalTarget{20}, cfg);
  for (const auto& st : d.stats) {
    EXPECT_LE(st.tree_depth, 3);
    EXPECT_LE(st.n_leapfrog, 7);
  }
}

TEST(Nuts, CorrelatedGaussianMeans) {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(10, 10, [&] { return 0.35 * n01(rng); });
  const Eigen::MatrixXd cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(10, 10);
  Eigen::VectorXd mean(10);
  for (Eigen::Index i = 0; i < 10; ++i) mean[i] = static_cast<double>(i) - 4.5;
  const GaussianTarget target{mean, cov.inverse()};

  auto cfg = config(4, 1000, 1000, 77);
  cfg.init_radius = 2.0;
  const auto d = run_chains(target, cfg);
  for (std::size_t j = 0; j < 10; ++j) {
    const auto xs = d.pooled(j);
    const double sd = std::sqrt(variance_of(xs));
    const double n_eff = ess(d.parameter(j));
    const double mcse = sd / std::sqrt(n_eff);
    EXPECT_LT(std::abs(mean_of(xs) - mean[static_cast<Eigen::Index>(j)]), 3.0 * mcse) << j;
    EXPECT_NEAR(sd, std::sqrt(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))),
                0.15 * std::sqrt(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))))
        << j;
  }
}

TEST(Nuts, RealizedAcceptanceNearTarget) {
  for (double target_accept : {0.8, 0.9}) {
    auto cfg = config(4, 1000, 1000, 2);
    cfg.target_accept = target_accept;
    const auto d = run_chains(StdNormalTarget{5}, cfg);
    double sum = 0;
    for (const auto& st : d.stats) sum += st.accept_stat;
    const double realized = sum / static_cast<double>(d.stats.size());
    if (target_accept == 0.8) {
      EXPECT_GE(realized, 0.7);
      EXPECT_LE(realized, 0.9);
    } else {
      EXPECT_NEAR(realized, 0.9, 0.07);
    }
  }
}

TEST(Nuts, NoDivergencesOnSmoothTarget) {
  const auto d = run_chains(StdNormalTarget{2}, config(4, 1000, 1000, 99));
  for (auto n : d.divergences_per_chain()) EXPECT_EQ(n, 0u);
}

TEST(Nuts, DeterministicAcrossThreadCounts) {
  auto cfg = config(4, 200, 300, 555);
  cfg.threads = 1;
  const auto a = run_chains(StdNormalTarget{3}, cfg);
  const auto b = run_chains(StdNormalTarget{3}, cfg);
  cfg.threads = 4;
  const auto c = run_chains(StdNormalTarget{3}, cfg);
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(a == c);
  cfg.seed = 556;
  EXPECT_FALSE(a == run_chains(StdNormalTarget{3}, cfg));
}

TEST(Nuts, ChainsStartFromDistinctStreams) {
  const auto d = run_chains(StdNormalTarget{1}, config(4, 100, 5, 1));
  for (std::size_t c = 1; c < 4; ++c) EXPECT_NE(d.value(c, 0, 0), d.value(0, 0, 0));
}

TEST(Nuts, KolmogorovSmirnovOnOneDimTargets) {
  const auto normal = run_chains(StdNormalTarget{1}, config(4, 1000, 12500, 2718));
  const double d_normal =
      ks_distance(normal.pooled(0), [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  EXPECT_LT(d_normal, 0.02);

  const auto logistic = run_chains(LogisticTarget{}, config(4, 1000, 12500, 3141));
  const double d_logistic = ks_distance(logistic.pooled(0), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  EXPECT_LT(d_logistic, 0.02);
}

TEST(Nuts, StepSizeCollapseSurfacesAsChainFailure) {
  FiniteOnceTarget target;
  NutsSampler<FiniteOnceTarget> sampler(target, 10);
  const auto state = sampler.make_state(Eigen::VectorXd::Constant(2, 0.1));
  std::mt19937_64 rng(3);
  try {
    sampler.find_reasonable_step(state, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StepSizeCollapse);
  }

  FiniteOnceTarget fresh;
  try {
    run_chains(fresh, config(1, 100, 10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChainFailed);
    EXPECT_NE(std::string(e.what()).find("step size"), std::string::npos);
  }
}

TEST(Nuts, NonFiniteInitializationFails) {
  try {
    run_chains(NowhereFiniteTarget{}, config(2, 100, 10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChainFailed);
    EXPECT_NE(std::string(e.what()).find("100"), std::string::npos);
  }
}

TEST(SamplerConfigTest, Validation) {
  EXPECT_NO_THROW(SamplerConfig{}.validate());
  auto c = SamplerConfig{};
  c.warmup = 99;
  EXPECT_THROW(c.validate(), Error);
  c = SamplerConfig{};
  c.chains = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SamplerConfig{};
  c.target_accept = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = SamplerConfig{};
  c.draws = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Threads, ResolveRespectsJobsAndRequest) {
  EXPECT_EQ(resolve_threads(3, 10), 3u);
  EXPECT_EQ(resolve_threads(8, 2), 2u);
  EXPECT_GE(resolve_threads(0, 4), 1u);
}

TEST(Threads, ParallelForRethrowsLowestIndex) {
  try {
    parallel_for(6, 3, [](std::size_t i) {
      if (i == 2 || i == 4) throw Error(Errc::InvalidArgument, "job " + std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("job 2"), std::string::npos);
  }
}
