// Generates the synthetic train/test ARFF pair used when the public
// bankruptcy dataset is not available. Output is a pure function of --seed.
//
// Construction (all in standardized units, then mapped to raw ratio scales):
//   * twelve Model2 ratios: Gaussian with four correlated pairs, scaled per
//     row by a Student-t(5) mixing variable for heavy tails;
//   * risk score eta = z . b, default label prevalence 3% in the pool;
//   * five Model1 ratios: noisy, tanh-saturated proxies of the risk score;
//   * Altman inputs weakly tied to risk; every other ratio is noise;
//   * '?' cells only in ratios no model or baseline reads, since a median
//     fill inside a near-collinear pair would swamp the risk score;
//   * train rows are taken in pool order, test rows by weighted sampling
//     that leans towards harder cases (a mild covariate shift).

#include <CLI11.hpp>

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "bbayes/glm.hpp"
#include "bbayes/ingest.hpp"
#include "bbayes/preprocess.hpp"

namespace {

using bbayes::Cell;
using bbayes::RawTable;
using Rng = boost::random::mt19937_64;

struct Options {
  std::uint64_t seed = 5;
  std::size_t pool = 60000;
  std::size_t train_neg = 5487, train_pos = 113, test_neg = 2105, test_pos = 47;
  double prevalence = 0.03;
  double coef_scale = 1.2;
  double tail_df = 5.0;
  double proxy_corr = 0.95;
  double proxy_clip = 3.0;
  double shift_neg = 0.145, shift_pos = 0.35;
  double missing_rate = 0.004;
  std::string train_out = "data/surrogate_train.arff";
  std::string test_out = "data/surrogate_test.arff";
};

// Model2 ratios (catalog numbers) and their generating coefficients.
constexpr std::array<int, 12> kModel2 = {8, 10, 12, 20, 33, 40, 42, 46, 49, 59, 63, 64};
constexpr std::array<double, 12> kBeta = {-0.064, 0.036, 0.197, -0.197, 9.176, 2.720,
                                          -18.648, -4.337, 19.113, -0.189, -10.258, 0.102};
// (a, b, rho): column b is mixed with column a to correlation rho.
constexpr std::array<std::tuple<int, int, double>, 4> kPairs = {
    {{4, 10, 0.995}, {6, 8, 0.998}, {5, 7, 0.9}, {0, 1, 0.6}}};

constexpr std::array<int, 5> kModel1 = {5, 24, 25, 26, 34};
constexpr std::array<double, 5> kModel1Sign = {-1, -1, -1, -1, 1};

// Altman inputs other than attr8 (which is a Model2 ratio).
constexpr std::array<int, 4> kAltmanOther = {3, 6, 7, 9};

bool used_by_models(int attr) {
  return std::find(kModel2.begin(), kModel2.end(), attr) != kModel2.end() ||
         std::find(kModel1.begin(), kModel1.end(), attr) != kModel1.end() ||
         std::find(kAltmanOther.begin(), kAltmanOther.end(), attr) != kAltmanOther.end();
}

struct RawScale {
  double loc, scale;
};

RawScale raw_scale(int attr) {
  switch (attr) {
    case 3: return {0.05, 0.25};
    case 6: return {0.0, 0.2};
    case 7: return {0.03, 0.08};
    case 8: return {1.0, 0.9};
    case 9: return {0.55, 0.35};
    default: break;
  }
  const auto desc = bbayes::feature_description("attr" + std::to_string(attr));
  if (desc.find("365") != std::string_view::npos) return {70.0, 45.0};
  if (desc.find("logarithm") != std::string_view::npos) return {4.0, 0.8};
  if (desc.find("sales (n)") != std::string_view::npos) return {1.1, 0.3};
  return {0.3, 0.25};
}

double round_sig(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

void standardize(std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / n);
  for (double& x : v) x = (x - mean) / sd;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys).
std::vector<std::size_t> weighted_pick(const std::vector<std::size_t>& idx, const std::vector<double>& log_w,
                                       std::size_t n, Rng& rng) {
  boost::random::uniform_01<double> u;
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) keys.emplace_back(std::log(u(rng)) / std::exp(log_w[i]), idx[i]);
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(keys[i].second);
  return out;
}

int run(const Options& o) {
  Rng rng(o.seed);
  boost::random::normal_distribution<double> normal;
  boost::random::chi_squared_distribution<double> chi2(o.tail_df);
  boost::random::uniform_01<double> unif;
  const std::size_t N = o.pool;

  // columns[a-1] holds attribute a in standardized units.
  std::vector<std::vector<double>> columns(64, std::vector<double>(N));
  std::vector<std::vector<double>> g(12, std::vector<double>(N));
  std::vector<double> tail(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (auto& col : g) col[i] = normal(rng);
    tail[i] = std::sqrt(o.tail_df / chi2(rng));
  }
  for (auto [a, b, rho] : kPairs) {
    for (std::size_t i = 0; i < N; ++i) g[b][i] = rho * g[a][i] + std::sqrt(1 - rho * rho) * g[b][i];
  }
  std::vector<double> eta(N, 0.0);
  for (std::size_t j = 0; j < kModel2.size(); ++j) {
    auto& col = columns[kModel2[j] - 1];
    for (std::size_t i = 0; i < N; ++i) col[i] = g[j][i] * tail[i];
    auto zs = col;
    standardize(zs);
    // Only the large effects are inflated; the prior barely moves the small ones.
    const double beta = std::abs(kBeta[j]) > 1.0 ? o.coef_scale * kBeta[j] : kBeta[j];
    for (std::size_t i = 0; i < N; ++i) eta[i] += beta * zs[i];
  }

  auto prevalence_at = [&](double b0) {
    double s = 0.0;
    for (double e : eta) s += bbayes::sigmoid(b0 + e);
    return s / static_cast<double>(N);
  };
  double lo = -60.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (prevalence_at(mid) < o.prevalence ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);

  std::vector<double> lin(N);
  std::vector<int> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    lin[i] = b0 + eta[i];
    y[i] = unif(rng) < bbayes::sigmoid(lin[i]) ? 1 : 0;
  }

  auto risk = eta;
  standardize(risk);
  for (double& r : risk) r = o.proxy_clip * std::tanh(r / o.proxy_clip);
  const double proxy_noise = std::sqrt(1 - o.proxy_corr * o.proxy_corr);
  for (std::size_t j = 0; j < kModel1.size(); ++j) {
    auto& col = columns[kModel1[j] - 1];
    for (std::size_t i = 0; i < N; ++i) col[i] = kModel1Sign[j] * (o.proxy_corr * risk[i] + proxy_noise * normal(rng));
  }
  for (int a : kAltmanOther) {
    auto& col = columns[a - 1];
    for (std::size_t i = 0; i < N; ++i) col[i] = -0.3 * risk[i] + std::sqrt(0.91) * normal(rng);
  }
  for (int a = 1; a <= 64; ++a) {
    if (used_by_models(a)) continue;
    for (std::size_t i = 0; i < N; ++i) columns[a - 1][i] = normal(rng) * tail[i];
  }

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < N; ++i) (y[i] ? pos : neg).push_back(i);
  if (pos.size() < o.train_pos + o.test_pos || neg.size() < o.train_neg + o.test_neg) {
    std::cerr << "pool too small for the requested split sizes\n";
    return 1;
  }
  std::vector<std::size_t> train(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(o.train_neg));
  train.insert(train.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(o.train_pos));

  auto shifted = [&](const std::vector<std::size_t>& all, std::size_t skip, double slope, std::size_t n) {
    std::vector<std::size_t> rest(all.begin() + static_cast<std::ptrdiff_t>(skip), all.end());
    std::vector<double> log_w;
    for (auto i : rest) log_w.push_back(slope * std::clamp(lin[i], -30.0, 30.0));
    return weighted_pick(rest, log_w, n, rng);
  };
  auto test = shifted(neg, o.train_neg, o.shift_neg, o.test_neg);
  const auto test_pos = shifted(pos, o.train_pos, -o.shift_pos, o.test_pos);
  test.insert(test.end(), test_pos.begin(), test_pos.end());

  std::vector<std::string> names;
  for (int a = 1; a <= 64; ++a) names.push_back("Attr" + std::to_string(a));
  names.emplace_back("class");

  auto build = [&](std::vector<std::size_t> rows) {
    // Interleave classes the way an exported table would be ordered.
    for (std::size_t i = rows.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(unif(rng) * static_cast<double>(i));
      std::swap(rows[i - 1], rows[std::min(j, i - 1)]);
    }
    RawTable t(names);
    for (auto r : rows) {
      std::vector<Cell> row;
      for (int a = 1; a <= 64; ++a) {
        const auto sc = raw_scale(a);
        const double v = round_sig(sc.loc + sc.scale * columns[a - 1][r]);
        const bool drop = unif(rng) < o.missing_rate && !used_by_models(a);
        row.push_back(drop ? Cell{} : Cell{v});
      }
      row.emplace_back(static_cast<double>(y[r]));
      t.append_row(std::move(row));
    }
    return t;
  };

  for (auto [rows, path, rel] : {std::tuple{train, o.train_out, "surrogate-train"},
                                 std::tuple{test, o.test_out, "surrogate-test"}}) {
    const auto table = build(rows);
    std::ofstream f(path, std::ios::binary);
    if (!f) {
      std::cerr << "cannot write " << path << '\n';
      return 1;
    }
    f << "% Synthetic bankruptcy-ratio surrogate, seed " << o.seed << "\n";
    f << bbayes::write_arff(table, rel, {"class"});
    std::cout << path << ": " << table.n_rows() << " rows, " << table.missing_count() << " missing cells\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Generate the synthetic bankruptcy train/test surrogate"};
  app.add_option("--seed", o.seed, "Generator seed");
  app.add_option("--train-out", o.train_out, "Training ARFF path");
  app.add_option("--test-out", o.test_out, "Test ARFF path");
  app.add_option("--pool", o.pool, "Candidate firms drawn before splitting");
  app.add_option("--coef-scale", o.coef_scale, "Multiplier on the generating coefficients");
  app.add_option("--shift-neg", o.shift_neg, "Test-negative selection slope on the risk score");
  app.add_option("--shift-pos", o.shift_pos, "Test-positive selection slope on the risk score");
  app.add_option("--missing-rate", o.missing_rate, "Share of feature cells written as '?'");
  CLI11_PARSE(app, argc, argv);
  try {
    return run(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
