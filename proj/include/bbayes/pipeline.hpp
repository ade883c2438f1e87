#pragma once

// End-to-end steps shared by the command-line tool and the acceptance run:
// load -> impute -> select features -> scale -> fit / evaluate / compare.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bbayes/config.hpp"
#include "bbayes/diagnostics.hpp"
#include "bbayes/evaluate.hpp"
#include "bbayes/glm.hpp"
#include "bbayes/ingest.hpp"
#include "bbayes/json_io.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

inline std::string read_text_file(const std::string& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) throw Error(Errc::IoError, "'" + path + "' is a directory");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(Errc::IoError, "write to '" + path.string() + "' failed");
}

/// Parses a data file in the configured format; errors are prefixed with the path.
inline RawTable load_table(const std::string& path, const RunConfig& cfg) {
  const std::string text = read_text_file(path);
  try {
    return cfg.format == "csv" ? parse_csv(text, cfg.csv_header) : parse_arff(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

struct PreparedData {
  ModelSpec spec;
  ImputationStats imputation;
  RawTable train_table;  // imputed, all columns
  std::optional<RawTable> test_table;
  LabeledMatrix train_unscaled;
  std::optional<LabeledMatrix> test_unscaled;
  Scaler scaler;
  LabeledMatrix train;  // standardized with the training scaler
  std::optional<LabeledMatrix> test;
};

namespace detail {

inline void require_labels(const RawTable& table, const std::string& label, const std::string& path) {
  const auto col = require_column(table, label);
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (!table.cell(r, col)) {
      throw Error(Errc::InvalidArgument, path + ": missing label in data row " + std::to_string(r + 1));
    }
  }
}

}  // namespace detail

/// Training data always; test data when `with_test`. Test rows reuse the
/// training imputation fills and scaler.
inline PreparedData prepare_data(const RunConfig& cfg, bool with_test) {
  if (cfg.train_path.empty()) throw Error(Errc::ConfigError, "no training data given (config key 'train')");
  PreparedData d;
  d.spec = cfg.model_spec();

  const RawTable train_raw = load_table(cfg.train_path, cfg);
  detail::require_labels(train_raw, cfg.label_column, cfg.train_path);
  std::tie(d.train_table, d.imputation) = impute_missing(train_raw, cfg.imputation);
  d.train_unscaled = to_labeled_matrix(d.train_table, d.spec.feature_ids, cfg.label_column);
  d.scaler = fit_scaler(d.train_unscaled);
  d.train = apply_scaler(d.scaler, d.train_unscaled);

  if (with_test) {
    if (cfg.test_path.empty()) throw Error(Errc::ConfigError, "no test data given (config key 'test')");
    const RawTable test_raw = load_table(cfg.test_path, cfg);
    if (test_raw.column_names() != train_raw.column_names()) {
      throw Error(Errc::DimensionMismatch, cfg.test_path + ": columns differ from the training file");
    }
    detail::require_labels(test_raw, cfg.label_column, cfg.test_path);
    d.test_table = impute_missing(test_raw, cfg.imputation, d.imputation).first;
    d.test_unscaled = to_labeled_matrix(*d.test_table, d.spec.feature_ids, cfg.label_column);
    d.test = apply_scaler(d.scaler, *d.test_unscaled);
  }
  return d;
}

inline GlmModel build_model(const RunConfig& cfg, const LabeledMatrix& train) {
  return GlmModel(train, cfg.priors(static_cast<std::size_t>(train.cols() + 1)));
}

inline PosteriorDraws fit_posterior(const RunConfig& cfg, const LabeledMatrix& train) {
  return run_chains(build_model(cfg, train), cfg.sampler_config());
}

inline std::vector<std::size_t> divergences_per_chain(const PosteriorDraws& draws) {
  std::vector<std::size_t> out(draws.chains, 0);
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t d = 0; d < draws.draws; ++d) out[c] += draws.stats[c * draws.draws + d].divergent ? 1 : 0;
  }
  return out;
}

/// Posterior-predictive classification of standardized data.
inline EvalReport evaluate_draws(const PosteriorDraws& draws, const LabeledMatrix& data, std::string model,
                                 std::string dataset, double threshold, int positive_label) {
  const Eigen::VectorXd probs = posterior_predictive_prob(draws, data.X);
  return make_report(std::move(model), std::move(dataset), classify(probs, threshold), to_labels(data.y), threshold,
                     positive_label);
}

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

/// K-fold ELPD of the configured model on its training data. Fold assignment
/// depends only on the labels, k and the seed, so two configs sharing those
/// are scored on the same held-out rows.
inline KFoldResult kfold_for(const RunConfig& cfg, std::size_t threads = 0) {
  const PreparedData d = prepare_data(cfg, false);
  KFoldOptions opts;
  opts.k = cfg.kfold_k;
  opts.fold_seed = cfg.seed.value_or(0);
  opts.sampler = cfg.sampler_config();
  opts.priors = [cfg](std::size_t n) { return cfg.priors(n); };
  opts.threads = threads;
  return kfold_elpd(d.train_unscaled, opts);
}

struct CompareRow {
  std::string model;
  double elpd = 0.0;
  double se = 0.0;
  /// Relative to the best model, so the best row reads 0.
  double elpd_diff = 0.0;
  double se_diff = 0.0;
};

/// Rows ordered best first.
inline std::vector<CompareRow> compare_models(const std::vector<std::pair<std::string, ElpdResult>>& results) {
  if (results.empty()) throw Error(Errc::InvalidArgument, "nothing to compare");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].second.elpd > results[best].second.elpd) best = i;
  }
  std::vector<CompareRow> rows;
  for (const auto& [name, e] : results) {
    CompareRow row{name, e.elpd, e.se, 0.0, 0.0};
    if (&e != &results[best].second) {
      const auto d = elpd_diff(e, results[best].second);
      row.elpd_diff = d.diff;
      row.se_diff = d.se;
    }
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.elpd > b.elpd; });
  return rows;
}

inline json compare_to_json(const std::vector<CompareRow>& rows, std::size_t k) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"model", r.model}, {"elpd_diff", r.elpd_diff}, {"se_diff", r.se_diff}, {"elpd", r.elpd}, {"se", r.se}});
  }
  return json{{"kfold_k", k}, {"models", arr}};
}

inline std::string compare_to_markdown(const std::vector<CompareRow>& rows, std::size_t k) {
  std::string out = "## " + std::to_string(k) + "-fold ELPD comparison\n\n";
  out += "| Model | ELPD difference | SE difference | ELPD | SE |\n|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out += "| " + r.model + " | " + detail::fmt3(r.elpd_diff) + " | " + detail::fmt3(r.se_diff) + " | " +
           detail::fmt3(r.elpd) + " | " + detail::fmt3(r.se) + " |\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct BaselineResults {
  IrlsResult irls;
  EvalReport irls_report;
  EvalReport altman_report;
  EvalReport constant_report;
};

/// IRLS on the configured features, Altman Z on the imputed test ratios, and
/// the classifier that always answers "not bankrupt".
inline BaselineResults run_baselines(const RunConfig& cfg, const PreparedData& d) {
  if (!d.test || !d.test_table) throw Error(Errc::InvalidArgument, "baselines need test data");
  BaselineResults b;
  const auto actual = to_labels(d.test->y);
  b.irls = irls_fit(d.train);
  b.irls_report = make_report("irls_" + d.spec.name, "test", classify(predict_prob(b.irls.beta, d.test->X), cfg.threshold),
                              actual, cfg.threshold, cfg.positive_label);
  std::vector<int> altman;
  for (const auto& s : altman_scores(*d.test_table)) altman.push_back(s.label);
  b.altman_report = make_report("altman_z", "test", altman, actual, cfg.threshold, cfg.positive_label);
  b.constant_report = make_report("constant_negative", "test", std::vector<int>(actual.size(), 0), actual,
                                  cfg.threshold, cfg.positive_label);
  return b;
}

}  // namespace bbayes
