#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bbayes/error.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

/// Coefficients laid out as [intercept, coefficients in feature order].
using ParamVector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Logistic link
// ---------------------------------------------------------------------------

inline double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(sigmoid(t)) without cancellation for large |t|.
inline double log_sigmoid(double t) noexcept {
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

/// log(1 - sigmoid(t)).
inline double log1m_sigmoid(double t) noexcept { return log_sigmoid(-t); }

inline double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

/// Bernoulli log density of y in {0,1} given linear predictor eta.
inline double bernoulli_logit_lpmf(double y, double eta) noexcept {
  return y != 0.0 ? log_sigmoid(eta) : log1m_sigmoid(eta);
}

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

struct StudentT {
  double df = 7.0;
  double location = 0.0;
  double scale = 2.5;

  double log_density(double x) const noexcept {
    const double z = (x - location) / scale;
    return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi) -
           std::log(scale) - 0.5 * (df + 1.0) * std::log1p(z * z / df);
  }

  double d_log_density(double x) const noexcept {
    const double z = (x - location) / scale;
    return -(df + 1.0) * z / (df * scale * (1.0 + z * z / df));
  }
};

/// One Student-t per parameter, intercept first.
struct PriorSpec {
  std::vector<StudentT> params;

  static PriorSpec uniform(std::size_t n_params, StudentT t = {}) {
    return PriorSpec{std::vector<StudentT>(n_params, t)};
  }

  void validate() const {
    for (std::size_t j = 0; j < params.size(); ++j) {
      const auto& t = params[j];
      if (!(t.df > 0.0) || !(t.scale > 0.0) || !std::isfinite(t.location) || !std::isfinite(t.df) ||
          !std::isfinite(t.scale)) {
        throw Error(Errc::InvalidArgument, "prior " + std::to_string(j) + " needs df > 0 and scale > 0");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

namespace detail {

inline void check_dims(const ParamVector& beta, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (beta.size() != X.cols() + 1 || X.rows() != y.size()) {
    throw Error(Errc::DimensionMismatch, "beta has " + std::to_string(beta.size()) + " entries, X is " +
                                             std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                                             ", y has " + std::to_string(y.size()));
  }
}

inline Eigen::VectorXd linear_predictor(const ParamVector& beta, const Eigen::MatrixXd& X) {
  return (X * beta.tail(beta.size() - 1)).array() + beta[0];
}

}  // namespace detail

inline Eigen::VectorXd pointwise_log_lik(const ParamVector& beta, const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& y) {
  detail::check_dims(beta, X, y);
  const Eigen::VectorXd eta = detail::linear_predictor(beta, X);
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = bernoulli_logit_lpmf(y[i], eta[i]);
  return out;
}

inline double log_likelihood(const ParamVector& beta, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return pointwise_log_lik(beta, X, y).sum();
}

inline double log_likelihood(const ParamVector& beta, const LabeledMatrix& data) {
  return log_likelihood(beta, data.X, data.y);
}

inline double log_prior(const ParamVector& beta, const PriorSpec& priors) {
  if (static_cast<std::size_t>(beta.size()) != priors.params.size()) {
    throw Error(Errc::DimensionMismatch, "beta has " + std::to_string(beta.size()) + " entries, priors cover " +
                                             std::to_string(priors.params.size()));
  }
  double lp = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) lp += priors.params[static_cast<std::size_t>(j)].log_density(beta[j]);
  return lp;
}

/// Bernoulli-logit GLM with independent Student-t priors. Immutable once built;
/// every evaluation is const and safe to call from several chains at once.
class GlmModel {
 public:
  GlmModel(LabeledMatrix data, PriorSpec priors) : data_(std::move(data)), priors_(std::move(priors)) {
    data_.validate();
    priors_.validate();
    if (priors_.params.size() != static_cast<std::size_t>(data_.cols() + 1)) {
      throw Error(Errc::DimensionMismatch, "priors cover " + std::to_string(priors_.params.size()) +
                                               " parameters, model has " + std::to_string(data_.cols() + 1));
    }
    names_.push_back("(Intercept)");
    for (const auto& id : data_.feature_ids) names_.push_back(id);
  }

  /// Default Student-t(7, 0, 2.5) prior on every parameter.
  explicit GlmModel(LabeledMatrix data)
      : GlmModel(data, PriorSpec::uniform(static_cast<std::size_t>(data.cols() + 1))) {}

  std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.cols() + 1); }
  const LabeledMatrix& data() const noexcept { return data_; }
  const PriorSpec& priors() const noexcept { return priors_; }
  const std::vector<std::string>& param_names() const noexcept { return names_; }

  double log_density(const ParamVector& beta) const {
    return log_likelihood(beta, data_.X, data_.y) + log_prior(beta, priors_);
  }

  /// Value and gradient in one pass over the data.
  double log_density_and_gradient(const ParamVector& beta, Eigen::VectorXd& grad) const {
    detail::check_dims(beta, data_.X, data_.y);
    const Eigen::VectorXd eta = detail::linear_predictor(beta, data_.X);
    Eigen::VectorXd resid(eta.size());
    double lp = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      lp += bernoulli_logit_lpmf(data_.y[i], eta[i]);
      resid[i] = data_.y[i] - sigmoid(eta[i]);
    }
    grad.resize(beta.size());
    grad[0] = resid.sum();
    grad.tail(beta.size() - 1).noalias() = data_.X.transpose() * resid;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      const auto& prior = priors_.params[static_cast<std::size_t>(j)];
      lp += prior.log_density(beta[j]);
      grad[j] += prior.d_log_density(beta[j]);
    }
    return lp;
  }

 private:
  LabeledMatrix data_;
  PriorSpec priors_;
  std::vector<std::string> names_;
};

/// Unnormalized: log likelihood + log prior, evidence omitted.
inline double log_posterior(const ParamVector& beta, const GlmModel& model) { return model.log_density(beta); }

inline Eigen::VectorXd grad_log_posterior(const ParamVector& beta, const GlmModel& model) {
  Eigen::VectorXd g;
  model.log_density_and_gradient(beta, g);
  return g;
}

}  // namespace bbayes
