#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bbayes/error.hpp"
#include "bbayes/ingest.hpp"

namespace bbayes {

// ---------------------------------------------------------------------------
// Feature catalog
// ---------------------------------------------------------------------------

struct FeatureEntry {
  std::string_view id;
  std::string_view description;
};

/// The 64 financial ratios of the Polish-companies dataset, attr1..attr64.
inline constexpr std::array<FeatureEntry, 64> kFeatureCatalog = {{
#include "bbayes/feature_catalog.inc"
}};

/// Index into kFeatureCatalog for an id such as "attr33" or "Attr33".
inline std::optional<std::size_t> catalog_index(std::string_view id) {
  const std::string lower = detail::to_lower(id);
  for (std::size_t i = 0; i < kFeatureCatalog.size(); ++i) {
    if (kFeatureCatalog[i].id == lower) return i;
  }
  return std::nullopt;
}

inline std::string_view feature_description(std::string_view id) {
  auto idx = catalog_index(id);
  if (!idx) throw Error(Errc::UnknownFeature, "'" + std::string(id) + "' is not in the feature catalog");
  return kFeatureCatalog[*idx].description;
}

// ---------------------------------------------------------------------------
// Model definitions
// ---------------------------------------------------------------------------

enum class Preset { model1, model2, custom };

struct ModelSpec {
  std::string name;
  std::vector<std::string> feature_ids;
  Preset preset = Preset::custom;

  /// Normalizes ids to lowercase and checks them against the catalog.
  static ModelSpec custom(std::string name, const std::vector<std::string>& ids) {
    if (ids.empty()) throw Error(Errc::InvalidArgument, "model '" + name + "' has no features");
    ModelSpec spec{std::move(name), {}, Preset::custom};
    for (const auto& id : ids) {
      auto idx = catalog_index(id);
      if (!idx) throw Error(Errc::UnknownFeature, "'" + id + "' is not in the feature catalog");
      std::string canonical(kFeatureCatalog[*idx].id);
      if (std::find(spec.feature_ids.begin(), spec.feature_ids.end(), canonical) != spec.feature_ids.end()) {
        throw Error(Errc::InvalidArgument, "feature '" + canonical + "' listed twice");
      }
      spec.feature_ids.push_back(std::move(canonical));
    }
    return spec;
  }

  /// Ratios focused on total liabilities.
  static ModelSpec model1() {
    auto s = custom("model1", {"attr5", "attr24", "attr25", "attr26", "attr34"});
    s.preset = Preset::model1;
    return s;
  }

  /// Ratios focused mostly on short-term liabilities.
  static ModelSpec model2() {
    auto s = custom("model2", {"attr8", "attr10", "attr12", "attr20", "attr33", "attr40", "attr42", "attr46",
                               "attr49", "attr59", "attr63", "attr64"});
    s.preset = Preset::model2;
    return s;
  }

  static ModelSpec from_preset(std::string_view name) {
    if (name == "model1") return model1();
    if (name == "model2") return model2();
    throw Error(Errc::InvalidArgument, "unknown preset '" + std::string(name) + "' (expected model1|model2)");
  }
};

// ---------------------------------------------------------------------------
// Labeled design data
// ---------------------------------------------------------------------------

/// n x p ratios (no intercept column) with 0/1 labels.
struct LabeledMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> feature_ids;

  Eigen::Index rows() const noexcept { return X.rows(); }
  Eigen::Index cols() const noexcept { return X.cols(); }

  void validate() const {
    if (X.rows() != y.size()) {
      throw Error(Errc::DimensionMismatch, "X has " + std::to_string(X.rows()) + " rows, y has " +
                                               std::to_string(y.size()));
    }
    if (static_cast<std::size_t>(X.cols()) != feature_ids.size()) {
      throw Error(Errc::DimensionMismatch, "X has " + std::to_string(X.cols()) + " columns for " +
                                               std::to_string(feature_ids.size()) + " feature ids");
    }
    if (!X.allFinite()) throw Error(Errc::InvalidArgument, "X contains non-finite entries");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0 && y[i] != 1.0) {
        throw Error(Errc::InvalidArgument, "label at row " + std::to_string(i) + " is not 0/1");
      }
    }
  }

  LabeledMatrix subset(const std::vector<std::size_t>& idx) const {
    LabeledMatrix out{Eigen::MatrixXd(static_cast<Eigen::Index>(idx.size()), X.cols()),
                      Eigen::VectorXd(static_cast<Eigen::Index>(idx.size())), feature_ids};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(idx[r]);
      out.X.row(static_cast<Eigen::Index>(r)) = X.row(src);
      out.y[static_cast<Eigen::Index>(r)] = y[src];
    }
    return out;
  }
};

namespace detail {

inline std::size_t require_column(const RawTable& table, std::string_view id) {
  const std::string lower = to_lower(id);
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    if (to_lower(table.column_names()[c]) == lower) return c;
  }
  throw Error(Errc::UnknownFeature, "column '" + std::string(id) + "' not found in data");
}

}  // namespace detail

/// Selects feature columns (matched case-insensitively, so "attr33" finds
/// "Attr33") and the label column. The table must not contain MISSING cells
/// in the selected columns.
inline LabeledMatrix to_labeled_matrix(const RawTable& table, const std::vector<std::string>& feature_ids,
                                       std::string_view label_column = "class") {
  std::vector<std::size_t> cols;
  for (const auto& id : feature_ids) cols.push_back(detail::require_column(table, id));
  const std::size_t label = detail::require_column(table, label_column);

  const auto n = static_cast<Eigen::Index>(table.n_rows());
  LabeledMatrix m{Eigen::MatrixXd(n, static_cast<Eigen::Index>(cols.size())), Eigen::VectorXd(n), feature_ids};
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = table.cell(row, cols[j]);
      if (!cell) {
        throw Error(Errc::InvalidArgument, "missing value at row " + std::to_string(row) + " column '" +
                                               table.column_names()[cols[j]] + "'; impute first");
      }
      m.X(r, static_cast<Eigen::Index>(j)) = *cell;
    }
    const auto& y = table.cell(row, label);
    if (!y) throw Error(Errc::InvalidArgument, "missing label at row " + std::to_string(row));
    m.y[r] = *y;
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Standard scaling
// ---------------------------------------------------------------------------

struct Scaler {
  Eigen::VectorXd means;
  Eigen::VectorXd sds;
  std::vector<std::string> feature_ids;
};

/// Column means and sample (n-1) standard deviations.
inline Scaler fit_scaler(const LabeledMatrix& train) {
  const Eigen::Index n = train.rows();
  const Eigen::Index p = train.cols();
  if (n < 2) throw Error(Errc::InvalidArgument, "need at least 2 rows to fit a scaler");
  Scaler s{train.X.colwise().mean().transpose(), Eigen::VectorXd(p), train.feature_ids};
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ss = (train.X.col(j).array() - s.means[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      const std::string id = static_cast<std::size_t>(j) < train.feature_ids.size()
                                 ? train.feature_ids[static_cast<std::size_t>(j)]
                                 : "column " + std::to_string(j);
      throw Error(Errc::ZeroVarianceColumn, id + " has zero variance in the training data");
    }
    s.sds[j] = sd;
  }
  return s;
}

inline LabeledMatrix apply_scaler(const Scaler& scaler, const LabeledMatrix& data) {
  if (data.cols() != scaler.means.size()) {
    throw Error(Errc::DimensionMismatch, "scaler has " + std::to_string(scaler.means.size()) +
                                             " columns, data has " + std::to_string(data.cols()));
  }
  LabeledMatrix out = data;
  out.X = ((data.X.rowwise() - scaler.means.transpose()).array().rowwise() / scaler.sds.transpose().array())
              .matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Stratified folds
// ---------------------------------------------------------------------------

struct FoldSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> heldout_idx;
};

/// Shuffles each class with a seeded generator and deals the rows round-robin,
/// so per-class and total fold sizes differ by at most one.
inline std::vector<FoldSplit> stratified_kfold(const Eigen::VectorXd& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k must be at least 2");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    by_class[labels[i] != 0.0 ? 1 : 0].push_back(static_cast<std::size_t>(i));
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) {
      throw Error(Errc::TooFewClassMembers, "class " + std::to_string(c) + " has " +
                                                std::to_string(by_class[c].size()) + " rows for " +
                                                std::to_string(k) + " folds");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold_of(static_cast<std::size_t>(labels.size()));
  std::size_t counter = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto idx : members) fold_of[idx] = counter++ % k;
  }

  std::vector<FoldSplit> folds(k);
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].heldout_idx : folds[f].train_idx).push_back(i);
    }
  }
  return folds;
}

inline std::vector<FoldSplit> stratified_kfold(const LabeledMatrix& data, std::size_t k, std::uint64_t seed) {
  return stratified_kfold(data.y, k, seed);
}

}  // namespace bbayes
