#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bbayes/error.hpp"
#include "bbayes/glm.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

// ---------------------------------------------------------------------------
// Posterior predictive classification
// ---------------------------------------------------------------------------

/// Monte Carlo posterior predictive: mean over pooled draws of sigmoid(eta).
inline Eigen::VectorXd posterior_predictive_prob(const PosteriorDraws& draws, const Eigen::MatrixXd& X_new) {
  if (static_cast<Eigen::Index>(draws.n_params()) != X_new.cols() + 1) {
    throw Error(Errc::DimensionMismatch, "draws have " + std::to_string(draws.n_params()) + " parameters, data has " +
                                             std::to_string(X_new.cols()) + " features");
  }
  if (draws.total_draws() == 0) throw Error(Errc::EmptyDraws, "posterior has no draws");
  const auto S = static_cast<Eigen::Index>(draws.total_draws());
  const auto p = static_cast<Eigen::Index>(draws.n_params());
  // values are stored draw-major, so this maps to a p x S column-major matrix.
  const Eigen::Map<const Eigen::MatrixXd> betas(draws.values.data(), p, S);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(X_new.rows());
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index s0 = 0; s0 < S; s0 += kBlock) {
    const Eigen::Index width = std::min(kBlock, S - s0);
    Eigen::MatrixXd eta = X_new * betas.block(1, s0, p - 1, width);
    eta.rowwise() += betas.row(0).segment(s0, width);
    for (Eigen::Index s = 0; s < width; ++s) {
      for (Eigen::Index i = 0; i < X_new.rows(); ++i) sums[i] += sigmoid(eta(i, s));
    }
  }
  return sums / static_cast<double>(S);
}

/// 1 iff prob > threshold; exact ties map to 0.
inline std::vector<int> classify(const Eigen::VectorXd& probs, double threshold = 0.5) {
  std::vector<int> out(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) out[static_cast<std::size_t>(i)] = probs[i] > threshold ? 1 : 0;
  return out;
}

inline std::vector<int> to_labels(const Eigen::VectorXd& y) {
  std::vector<int> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = y[i] != 0.0 ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tp = 0;
  int positive_label = 1;

  std::size_t total() const noexcept { return tn + fp + fn + tp; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Counts with `positive_label` as the positive class (1 = bankrupt).
inline ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& actual, int positive_label = 1) {
  if (pred.size() != actual.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(pred.size()) + " predictions for " +
                                          std::to_string(actual.size()) + " labels");
  }
  if (positive_label != 0 && positive_label != 1) throw Error(Errc::InvalidArgument, "positive_label must be 0 or 1");
  ConfusionMatrix cm;
  cm.positive_label = positive_label;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if ((pred[i] != 0 && pred[i] != 1) || (actual[i] != 0 && actual[i] != 1)) {
      throw Error(Errc::InvalidArgument, "labels must be 0/1 (row " + std::to_string(i) + ")");
    }
    const bool p = pred[i] == positive_label;
    const bool a = actual[i] == positive_label;
    if (p && a) ++cm.tp;
    else if (p) ++cm.fp;
    else if (a) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

/// Percentages. A zero denominator yields 0 and sets the matching flag.
struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

inline MetricSet metrics(const ConfusionMatrix& cm) {
  MetricSet m;
  const auto tp = static_cast<double>(cm.tp);
  if (cm.total() > 0) m.accuracy = 100.0 * static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) m.precision = 100.0 * tp / static_cast<double>(cm.tp + cm.fp);
  else m.precision_undefined = true;
  if (cm.tp + cm.fn > 0) m.recall = 100.0 * tp / static_cast<double>(cm.tp + cm.fn);
  else m.recall_undefined = true;
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else m.f1_undefined = true;
  return m;
}

// ---------------------------------------------------------------------------
// Expected log pointwise predictive density
// ---------------------------------------------------------------------------

struct ElpdResult {
  double elpd = 0.0;
  Eigen::VectorXd per_point;
  double se = 0.0;
  /// Held-out fold of every row; two results are comparable only if equal.
  std::vector<std::size_t> fold_of_row;
};

inline double log_mean_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum() / static_cast<double>(v.size()));
}

/// Per-row log((1/S) sum_s p(y_i | beta_s)) for held-out rows.
inline Eigen::VectorXd heldout_log_pred_density(const PosteriorDraws& draws, const Eigen::MatrixXd& X,
                                                const Eigen::VectorXd& y) {
  if (static_cast<Eigen::Index>(draws.n_params()) != X.cols() + 1 || X.rows() != y.size()) {
    throw Error(Errc::DimensionMismatch, "held-out data does not match the posterior dimensions");
  }
  const auto S = static_cast<Eigen::Index>(draws.total_draws());
  const auto p = static_cast<Eigen::Index>(draws.n_params());
  const Eigen::Map<const Eigen::MatrixXd> betas(draws.values.data(), p, S);
  Eigen::MatrixXd eta = X * betas.bottomRows(p - 1);
  eta.rowwise() += betas.row(0);
  Eigen::VectorXd out(X.rows());
  Eigen::VectorXd ll(S);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index s = 0; s < S; ++s) ll[s] = bernoulli_logit_lpmf(y[i], eta(i, s));
    out[i] = log_mean_exp(ll);
  }
  return out;
}

/// sqrt(n * sample variance).
inline double elpd_se(const Eigen::VectorXd& v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double var = (v.array() - v.mean()).square().sum() / (n - 1.0);
  return std::sqrt(n * var);
}

struct FoldFit {
  FoldSplit split;
  Scaler scaler;
  PosteriorDraws draws;
};

struct KFoldOptions {
  std::size_t k = 10;
  std::uint64_t fold_seed = 0;
  SamplerConfig sampler;
  /// Builds the prior for a given parameter count; defaults to Student-t(7, 0, 2.5).
  std::function<PriorSpec(std::size_t)> priors;
  bool keep_fits = false;
  /// Parallel folds; 0 follows resolve_threads.
  std::size_t threads = 0;
};

struct KFoldResult {
  ElpdResult elpd;
  std::vector<FoldFit> fits;
};

/// Sampler seed used for fold f.
inline std::uint64_t fold_sampler_seed(std::uint64_t seed, std::size_t fold) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(fold) + 1));
}

/// K-fold ELPD on unscaled data: each fold fits its own scaler on the
/// training rows, samples the posterior, then scores the held-out rows.
inline KFoldResult kfold_elpd(const LabeledMatrix& data, const KFoldOptions& opts) {
  const auto folds = stratified_kfold(data, opts.k, opts.fold_seed);
  const std::size_t n = static_cast<std::size_t>(data.rows());
  KFoldResult result;
  result.elpd.per_point = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  result.elpd.fold_of_row.assign(n, 0);
  std::vector<FoldFit> fits(folds.size());

  const std::size_t fold_threads = resolve_threads(opts.threads, folds.size());
  parallel_for(folds.size(), fold_threads, [&](std::size_t f) {
    try {
      const LabeledMatrix train_raw = data.subset(folds[f].train_idx);
      const LabeledMatrix held_raw = data.subset(folds[f].heldout_idx);
      Scaler scaler = fit_scaler(train_raw);
      const LabeledMatrix train = apply_scaler(scaler, train_raw);
      const LabeledMatrix held = apply_scaler(scaler, held_raw);
      const std::size_t p = static_cast<std::size_t>(train.cols() + 1);
      GlmModel model(train, opts.priors ? opts.priors(p) : PriorSpec::uniform(p));
      SamplerConfig cfg = opts.sampler;
      cfg.seed = fold_sampler_seed(opts.sampler.seed, f);
      if (fold_threads > 1) cfg.threads = 1;
      PosteriorDraws draws = run_chains(model, cfg);
      const Eigen::VectorXd lpd = heldout_log_pred_density(draws, held.X, held.y);
      for (std::size_t r = 0; r < folds[f].heldout_idx.size(); ++r) {
        const std::size_t row = folds[f].heldout_idx[r];
        result.elpd.per_point[static_cast<Eigen::Index>(row)] = lpd[static_cast<Eigen::Index>(r)];
        result.elpd.fold_of_row[row] = f;
      }
      fits[f] = FoldFit{folds[f], std::move(scaler), std::move(draws)};
    } catch (const Error& e) {
      throw Error(Errc::FoldFitFailed, "fold " + std::to_string(f) + ": " + e.what());
    }
  });

  result.elpd.elpd = result.elpd.per_point.sum();
  result.elpd.se = elpd_se(result.elpd.per_point);
  if (opts.keep_fits) result.fits = std::move(fits);
  return result;
}

struct ElpdDiff {
  double diff = 0.0;
  double se = 0.0;
};

/// a - b with the paired standard error.
inline ElpdDiff elpd_diff(const ElpdResult& a, const ElpdResult& b) {
  if (a.per_point.size() != b.per_point.size() || a.fold_of_row != b.fold_of_row) {
    throw Error(Errc::MisalignedFolds, "ELPD results were computed on different held-out rows");
  }
  return {a.elpd - b.elpd, elpd_se(a.per_point - b.per_point)};
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Classic Altman cut-offs; Z below the lower is distress, above the upper safe.
inline constexpr double kAltmanDistress = 1.81;
inline constexpr double kAltmanSafe = 2.99;

enum class AltmanZone { distress, grey, safe };

struct AltmanScore {
  double z = 0.0;
  int label = 0;
  AltmanZone zone = AltmanZone::safe;
};

/// Ratios used by the score, in order: attr3, attr6, attr7, attr8, attr9.
inline constexpr std::array<std::string_view, 5> kAltmanRatios = {"attr3", "attr6", "attr7", "attr8", "attr9"};

/// Z = 1.2 attr3 + 1.4 attr6 + 3.3 attr7 + 0.6 attr8 + 1.0 attr9, with book
/// equity (attr8) standing in for market value. Grey zone counts as label 0.
inline AltmanScore altman_zscore(const std::array<std::optional<double>, 5>& ratios) {
  static constexpr std::array<double, 5> weights = {1.2, 1.4, 3.3, 0.6, 1.0};
  AltmanScore s;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!ratios[i] || !std::isfinite(*ratios[i])) {
      throw Error(Errc::MissingRatio, std::string(kAltmanRatios[i]) + " is missing");
    }
    s.z += weights[i] * *ratios[i];
  }
  if (s.z < kAltmanDistress) {
    s.zone = AltmanZone::distress;
    s.label = 1;
  } else if (s.z < kAltmanSafe) {
    s.zone = AltmanZone::grey;
  }
  return s;
}

/// Scores every row of an unscaled table.
inline std::vector<AltmanScore> altman_scores(const RawTable& table) {
  std::array<std::size_t, 5> cols{};
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = detail::require_column(table, kAltmanRatios[i]);
  std::vector<AltmanScore> out;
  out.reserve(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    std::array<std::optional<double>, 5> ratios;
    for (std::size_t i = 0; i < cols.size(); ++i) ratios[i] = table.cell(r, cols[i]);
    try {
      out.push_back(altman_zscore(ratios));
    } catch (const Error& e) {
      throw Error(Errc::MissingRatio, "row " + std::to_string(r) + ": " + e.message());
    }
  }
  return out;
}

struct IrlsResult {
  ParamVector beta;
  int iterations = 0;
  bool converged = false;
  /// Some |coefficient| exceeded 1e3, or the fit saturated: likely separation.
  bool separation = false;
};

/// Maximum-likelihood logistic regression by Newton/IRLS. Converged once
/// max |delta beta| < tol; otherwise the last iterate comes back flagged.
inline IrlsResult irls_fit(const LabeledMatrix& data, int max_iter = 100, double tol = 1e-8) {
  data.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols() + 1;
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = data.X;

  IrlsResult res;
  res.beta = ParamVector::Zero(p);
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd eta = design * res.beta;
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd score = design.transpose() * (data.y - mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      // Weights vanish when the fitted probabilities saturate on separable data.
      if (it > 1 && (data.y - mu).cwiseAbs().maxCoeff() < 1e-6) {
        res.separation = true;
        break;
      }
      throw Error(Errc::SingularSystem, "weighted normal equations are singular at iteration " + std::to_string(it));
    }
    const Eigen::VectorXd delta = ldlt.solve(score);
    if (!delta.allFinite()) throw Error(Errc::SingularSystem, "non-finite Newton step at iteration " + std::to_string(it));
    res.beta += delta;
    res.iterations = it;
    if (res.beta.cwiseAbs().maxCoeff() > 1e3) res.separation = true;
    if (delta.cwiseAbs().maxCoeff() < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

/// Point-estimate class probabilities sigmoid(beta0 + x beta).
inline Eigen::VectorXd predict_prob(const ParamVector& beta, const Eigen::MatrixXd& X) {
  Eigen::VectorXd eta = (X * beta.tail(beta.size() - 1)).array() + beta[0];
  return eta.unaryExpr([](double t) { return sigmoid(t); });
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Classification outcome for one model on one dataset, both orientations.
struct EvalReport {
  std::string model;
  std::string dataset;
  double threshold = 0.5;
  /// Orientation feeding the headline metrics.
  int positive_label = 1;
  ConfusionMatrix bankrupt_positive;
  MetricSet bankrupt_positive_metrics;
  ConfusionMatrix nonbankrupt_positive;
  MetricSet nonbankrupt_positive_metrics;
  std::optional<ElpdResult> elpd;

  const ConfusionMatrix& headline_confusion() const {
    return positive_label == 1 ? bankrupt_positive : nonbankrupt_positive;
  }
  const MetricSet& headline_metrics() const {
    return positive_label == 1 ? bankrupt_positive_metrics : nonbankrupt_positive_metrics;
  }
};

inline EvalReport make_report(std::string model, std::string dataset, const std::vector<int>& pred,
                              const std::vector<int>& actual, double threshold, int positive_label) {
  EvalReport r;
  r.model = std::move(model);
  r.dataset = std::move(dataset);
  r.threshold = threshold;
  r.positive_label = positive_label;
  r.bankrupt_positive = confusion(pred, actual, 1);
  r.bankrupt_positive_metrics = metrics(r.bankrupt_positive);
  r.nonbankrupt_positive = confusion(pred, actual, 0);
  r.nonbankrupt_positive_metrics = metrics(r.nonbankrupt_positive);
  return r;
}

}  // namespace bbayes
