#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bbayes/preprocess.hpp"

namespace bbayes::fixtures {

/// Gaussian design with labels drawn from a logistic model.
inline LabeledMatrix random_logistic_problem(std::size_t n, std::size_t p, std::uint64_t seed,
                                             double coef_scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LabeledMatrix m{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)),
                  Eigen::VectorXd(static_cast<Eigen::Index>(n)), {}};
  for (std::size_t j = 0; j < p; ++j) m.feature_ids.push_back("attr" + std::to_string(j + 1));
  Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
  for (auto& b : beta) b = coef_scale * normal(rng);
  for (Eigen::Index i = 0; i < m.X.rows(); ++i) {
    double eta = 0.3;
    for (Eigen::Index j = 0; j < m.X.cols(); ++j) {
      m.X(i, j) = normal(rng);
      eta += beta[j] * m.X(i, j);
    }
    m.y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  return m;
}

/// Standard normal target in `dim` dimensions.
struct StdNormalTarget {
  std::size_t d = 1;
  std::size_t dim() const { return d; }
  double log_density_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    g = -q;
    return -0.5 * q.squaredNorm();
  }
};

/// Zero-mean Gaussian with precision matrix `precision`.
struct GaussianTarget {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  double log_density_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    const Eigen::VectorXd r = q - mean;
    g = -(precision * r);
    return -0.5 * r.dot(precision * r);
  }
};

}  // namespace bbayes::fixtures
