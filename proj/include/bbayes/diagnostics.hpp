#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bbayes/error.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

/// Region of practical equivalence. Default bounds are 0.1 * pi / sqrt(3),
/// one tenth of the standard logistic distribution's sd.
struct RopeSpec {
  double low = -0.1814;
  double high = 0.1814;
  double ci_level = 0.89;

  void validate() const {
    if (!(low < high)) throw Error(Errc::InvalidArgument, "ROPE low must be < high");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(Errc::InvalidArgument, "ci_level must lie in (0,1)");
  }
};

enum class Decision { significant, practically_null, undecided };

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::significant: return "significant";
    case Decision::practically_null: return "practically null";
    case Decision::undecided: return "undecided";
  }
  return "?";
}

/// ROPE decision: none of the CI inside the ROPE rejects the null, 97.5% or
/// more accepts it.
inline Decision rope_decision(double rope_pct) {
  if (rope_pct == 0.0) return Decision::significant;
  if (rope_pct >= 97.5) return Decision::practically_null;
  return Decision::undecided;
}

struct ParameterSummary {
  std::string name;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double pd = 0.0;
  double rope_pct = 0.0;
  double rhat = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
  bool significant = false;

  Decision decision() const { return rope_decision(rope_pct); }
};

// ---------------------------------------------------------------------------
// Quantiles and rank normalization
// ---------------------------------------------------------------------------

/// Linear interpolation between order statistics; `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw Error(Errc::EmptyDraws, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, prob);
}

/// Splits each chain in half (dropping the middle draw of odd-length chains),
/// doubling the chain count.
inline Eigen::MatrixXd split_chains(const Eigen::MatrixXd& draws) {
  const Eigen::Index n = draws.rows();
  const Eigen::Index half = n / 2;
  Eigen::MatrixXd out(half, 2 * draws.cols());
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    out.col(2 * c) = draws.col(c).head(half);
    out.col(2 * c + 1) = draws.col(c).tail(half);
  }
  return out;
}

/// Pooled ranks (ties averaged) mapped through the inverse normal CDF with
/// the Blom offset: z = Phi^-1((r - 3/8) / (S + 1/4)).
inline Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws) {
  const auto total = static_cast<std::size_t>(draws.size());
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  const double* data = draws.data();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data[a] < data[b]; });

  Eigen::MatrixXd z(draws.rows(), draws.cols());
  double* out = z.data();
  const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
  const double denom = static_cast<double>(total) + 0.25;
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j + 1 < total && data[order[j + 1]] == data[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double value = boost::math::quantile(std_normal, (avg_rank - 0.375) / denom);
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = value;
    i = j + 1;
  }
  return z;
}

namespace detail {

inline void check_chains(const Eigen::MatrixXd& draws) {
  if (draws.cols() < 1 || draws.rows() < 4) {
    throw Error(Errc::InvalidArgument, "need at least 4 draws per chain for split diagnostics");
  }
  if (!draws.allFinite()) throw Error(Errc::InvalidArgument, "draws contain non-finite values");
  if (draws.maxCoeff() == draws.minCoeff()) throw Error(Errc::DegenerateDraws, "all draws are identical");
}

/// Classic potential scale reduction over the given chains (columns).
inline double rhat_basic(const Eigen::MatrixXd& chains) {
  const auto n = static_cast<double>(chains.rows());
  const Eigen::VectorXd means = chains.colwise().mean().transpose();
  double w = 0.0;
  for (Eigen::Index c = 0; c < chains.cols(); ++c) {
    w += (chains.col(c).array() - means[c]).square().sum() / (n - 1.0);
  }
  w /= static_cast<double>(chains.cols());
  const double grand = means.mean();
  const double b = n * (means.array() - grand).square().sum() / static_cast<double>(chains.cols() - 1);
  return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

/// Biased (1/n) autocovariance of one chain at `lag`.
inline double autocovariance(const Eigen::VectorXd& centered, Eigen::Index lag) {
  const Eigen::Index n = centered.size();
  return centered.head(n - lag).dot(centered.tail(n - lag)) / static_cast<double>(n);
}

/// Multi-chain ESS with Geyer's initial positive and monotone sequence.
inline double ess_basic(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index m = chains.cols();
  const auto nd = static_cast<double>(n);

  Eigen::MatrixXd centered = chains;
  const Eigen::VectorXd chain_mean = chains.colwise().mean().transpose();
  for (Eigen::Index c = 0; c < m; ++c) centered.col(c).array() -= chain_mean[c];

  auto mean_acov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) s += autocovariance(centered.col(c), lag);
    return s / static_cast<double>(m);
  };

  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) {
    const double grand = chain_mean.mean();
    var_plus += (chain_mean.array() - grand).square().sum() / static_cast<double>(m - 1);
  }

  std::vector<double> rho(static_cast<std::size_t>(n) + 2, 0.0);
  Eigen::Index t = 0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[0] = rho_even;
  rho[1] = rho_odd;
  while (t < n - 5 && std::isfinite(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<std::size_t>(t)] = rho_even;
      rho[static_cast<std::size_t>(t + 1)] = rho_odd;
    }
  }
  const auto max_t = static_cast<std::size_t>(t);
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Initial monotone sequence.
  for (std::size_t k = 2; k + 2 <= max_t; k += 2) {
    if (rho[k] + rho[k + 1] > rho[k - 2] + rho[k - 1]) {
      rho[k] = 0.5 * (rho[k - 2] + rho[k - 1]);
      rho[k + 1] = rho[k];
    }
  }

  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + rho[max_t];
  for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace detail

/// Rank-normalized split-R-hat for one parameter (rows = draws, cols = chains).
inline double split_rhat(const Eigen::MatrixXd& draws) {
  detail::check_chains(draws);
  return detail::rhat_basic(rank_normalize(split_chains(draws)));
}

/// Bulk effective sample size for one parameter (rows = draws, cols = chains).
inline double ess(const Eigen::MatrixXd& draws) {
  detail::check_chains(draws);
  return detail::ess_basic(rank_normalize(split_chains(draws)));
}

// ---------------------------------------------------------------------------
// Posterior summaries
// ---------------------------------------------------------------------------

/// Median, equal-tailed CI, direction and ROPE share of a pooled sample.
/// R-hat and ESS are left NaN; they need the chain structure.
inline ParameterSummary summarize_sample(std::string name, std::vector<double> pooled, const RopeSpec& rope) {
  if (pooled.empty()) throw Error(Errc::EmptyDraws, "no draws for '" + name + "'");
  rope.validate();
  std::sort(pooled.begin(), pooled.end());
  ParameterSummary s;
  s.name = std::move(name);
  s.median = quantile_sorted(pooled, 0.5);
  const double tail = 0.5 * (1.0 - rope.ci_level);
  s.ci_low = quantile_sorted(pooled, tail);
  s.ci_high = quantile_sorted(pooled, 1.0 - tail);

  std::size_t pos = 0, neg = 0;
  std::size_t in_ci = 0, in_both = 0;
  for (double v : pooled) {
    pos += v > 0.0 ? 1 : 0;
    neg += v < 0.0 ? 1 : 0;
    if (v >= s.ci_low && v <= s.ci_high) {
      ++in_ci;
      if (v >= rope.low && v <= rope.high) ++in_both;
    }
  }
  const auto n = static_cast<double>(pooled.size());
  const auto zeros = static_cast<double>(pooled.size() - pos - neg);
  s.pd = (static_cast<double>(std::max(pos, neg)) + 0.5 * zeros) / n;
  s.rope_pct = in_ci ? 100.0 * static_cast<double>(in_both) / static_cast<double>(in_ci) : 0.0;
  s.significant = s.rope_pct == 0.0;
  return s;
}

/// One summary row per parameter, in parameter order.
inline std::vector<ParameterSummary> summarize(const PosteriorDraws& draws, const RopeSpec& rope = {}) {
  if (draws.total_draws() == 0 || draws.n_params() == 0) throw Error(Errc::EmptyDraws, "posterior has no draws");
  std::vector<ParameterSummary> out;
  for (std::size_t j = 0; j < draws.n_params(); ++j) {
    auto s = summarize_sample(draws.param_names[j], draws.pooled(j), rope);
    const Eigen::MatrixXd per_chain = draws.parameter(j);
    try {
      s.rhat = split_rhat(per_chain);
      s.ess = ess(per_chain);
    } catch (const Error&) {
      // Constant or too-short draws: diagnostics undefined, left NaN.
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt3(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// Two decimals, except whole numbers print bare ("100%", not "100.00%").
inline std::string pct2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s.size() > 3 && s.compare(s.size() - 3, 3, ".00") == 0) s.resize(s.size() - 3);
  return s + "%";
}

/// "attr33 (operating expenses / short-term liabilities)" for catalog ids.
inline std::string describe_param(const std::string& name) {
  if (auto idx = catalog_index(name)) {
    return name + " (" + std::string(kFeatureCatalog[*idx].description) + ")";
  }
  return name;
}

}  // namespace detail

/// Markdown table with the columns Parameter | Median | CI | pd | ROPE | % in ROPE | Rhat | ESS.
inline std::string render_summary_markdown(const std::vector<ParameterSummary>& rows, const RopeSpec& rope = {}) {
  const int level = static_cast<int>(std::lround(rope.ci_level * 100.0));
  std::string out = "| Parameter | Median | " + std::to_string(level) + "% CI | pd | " + std::to_string(level) +
                    "% ROPE | % in ROPE | Rhat | ESS | Decision |\n";
  out += "|---|---:|---|---:|---|---:|---:|---:|---|\n";
  const std::string rope_str = "[" + detail::fmt3(rope.low) + ", " + detail::fmt3(rope.high) + "]";
  for (const auto& r : rows) {
    out += "| " + detail::describe_param(r.name) + " | " + detail::fmt3(r.median) + " | [" + detail::fmt3(r.ci_low) +
           ", " + detail::fmt3(r.ci_high) + "] | " + detail::fmt3(r.pd) + " | " + rope_str + " | " +
           detail::fmt3(r.rope_pct) + " | " + detail::fmt3(r.rhat) + " | " + detail::fmt3(r.ess) + " | " +
           std::string(to_string(r.decision())) + " |\n";
  }
  return out;
}

/// One sentence per parameter: direction and its probability, the decision,
/// then the interval, ROPE share and convergence numbers.
inline std::string narrate(const ParameterSummary& s, const RopeSpec& rope = {}) {
  const bool positive = s.median >= 0.0;
  const int level = static_cast<int>(std::lround(rope.ci_level * 100.0));
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "The effect of %s has a probability of %s of being %s and is %s (median = %.2f, %d%% CI [%.2f, %.2f], "
                "%s in ROPE). Rhat = %.3f (%s), ESS = %.0f.",
                detail::describe_param(s.name).c_str(), detail::pct2(100.0 * s.pd).c_str(),
                positive ? "positive" : "negative", std::string(to_string(s.decision())).c_str(), s.median, level,
                s.ci_low, s.ci_high, detail::pct2(s.rope_pct).c_str(), s.rhat,
                std::isfinite(s.rhat) && s.rhat < 1.1 ? "converged" : "not converged", s.ess);
  return buf;
}

}  // namespace bbayes
