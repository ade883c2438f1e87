#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "bbayes/diagnostics.hpp"
#include "bbayes/error.hpp"
#include "bbayes/evaluate.hpp"
#include "bbayes/ingest.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

using json = nlohmann::ordered_json;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Posterior draws
//
// {
//   "format": "bbayes.posterior_draws", "version": 1,
//   "param_names": [...], "chains": C, "draws": D,
//   "values": [C*D*P numbers, chain-major then draw then parameter],
//   "stats": {"divergent": [...], "tree_depth": [...], "n_leapfrog": [...],
//             "step_size": [...], "accept_stat": [...], "log_density": [...]}
// }
// Each stats array has C*D entries, chain-major.
// ---------------------------------------------------------------------------

inline constexpr const char* kDrawsFormat = "bbayes.posterior_draws";

inline json draws_to_json(const PosteriorDraws& d) {
  json stats;
  std::vector<int> divergent, depth, leapfrog;
  std::vector<double> step, accept, lp;
  for (const auto& s : d.stats) {
    divergent.push_back(s.divergent ? 1 : 0);
    depth.push_back(s.tree_depth);
    leapfrog.push_back(s.n_leapfrog);
    step.push_back(s.step_size);
    accept.push_back(s.accept_stat);
    lp.push_back(s.log_density);
  }
  stats["divergent"] = divergent;
  stats["tree_depth"] = depth;
  stats["n_leapfrog"] = leapfrog;
  stats["step_size"] = step;
  stats["accept_stat"] = accept;
  stats["log_density"] = lp;
  return json{{"format", kDrawsFormat}, {"version", 1},          {"param_names", d.param_names},
              {"chains", d.chains},     {"draws", d.draws},      {"values", d.values},
              {"stats", stats}};
}

inline PosteriorDraws draws_from_json(const json& j) {
  try {
    if (j.value("format", "") != kDrawsFormat) throw Error(Errc::SchemaMismatch, "not a posterior draws document");
    PosteriorDraws d;
    d.param_names = j.at("param_names").get<std::vector<std::string>>();
    d.chains = j.at("chains").get<std::size_t>();
    d.draws = j.at("draws").get<std::size_t>();
    d.values = j.at("values").get<std::vector<double>>();
    const std::size_t iters = d.chains * d.draws;
    if (d.values.size() != iters * d.param_names.size()) {
      throw Error(Errc::SchemaMismatch, "values has " + std::to_string(d.values.size()) + " entries, expected " +
                                            std::to_string(iters * d.param_names.size()));
    }
    const auto& st = j.at("stats");
    const auto divergent = st.at("divergent").get<std::vector<int>>();
    const auto depth = st.at("tree_depth").get<std::vector<int>>();
    const auto leapfrog = st.at("n_leapfrog").get<std::vector<int>>();
    const auto step = st.at("step_size").get<std::vector<double>>();
    const auto accept = st.at("accept_stat").get<std::vector<double>>();
    const auto lp = st.at("log_density").get<std::vector<double>>();
    for (std::size_t n : {divergent.size(), depth.size(), leapfrog.size(), step.size(), accept.size(), lp.size()}) {
      if (n != iters) throw Error(Errc::SchemaMismatch, "stats arrays must have chains*draws entries");
    }
    d.stats.resize(iters);
    for (std::size_t i = 0; i < iters; ++i) {
      d.stats[i] = IterationStats{divergent[i] != 0, depth[i], leapfrog[i], step[i], accept[i], lp[i]};
    }
    return d;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaMismatch, e.what());
  }
}

// ---------------------------------------------------------------------------
// Preprocessing artifacts
// ---------------------------------------------------------------------------

inline json scaler_to_json(const Scaler& s) {
  return json{{"feature_ids", s.feature_ids}, {"means", detail::to_std(s.means)}, {"sds", detail::to_std(s.sds)}};
}

inline Scaler scaler_from_json(const json& j) {
  try {
    Scaler s{detail::to_eigen(j.at("means").get<std::vector<double>>()),
             detail::to_eigen(j.at("sds").get<std::vector<double>>()),
             j.at("feature_ids").get<std::vector<std::string>>()};
    if (s.means.size() != s.sds.size() || static_cast<std::size_t>(s.means.size()) != s.feature_ids.size()) {
      throw Error(Errc::SchemaMismatch, "scaler arrays differ in length");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaMismatch, e.what());
  }
}

inline json imputation_to_json(const ImputationStats& s, const std::vector<std::string>& columns) {
  json fill = json::array();
  for (double v : s.per_column_fill) fill.push_back(detail::number_or_null(v));
  return json{{"strategy", std::string(to_string(s.strategy))},
              {"columns", columns},
              {"per_column_fill", fill},
              {"n_cells_imputed", s.n_cells_imputed},
              {"n_rows_dropped", s.n_rows_dropped}};
}

inline ImputationStats imputation_from_json(const json& j) {
  try {
    ImputationStats s;
    s.strategy = parse_impute_strategy(j.at("strategy").get<std::string>());
    for (const auto& v : j.at("per_column_fill")) s.per_column_fill.push_back(detail::number_or_nan(v));
    s.n_cells_imputed = j.at("n_cells_imputed").get<std::size_t>();
    s.n_rows_dropped = j.at("n_rows_dropped").get<std::size_t>();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaMismatch, e.what());
  }
}

inline json catalog_to_json() {
  json arr = json::array();
  for (const auto& e : kFeatureCatalog) arr.push_back({{"id", e.id}, {"description", e.description}});
  return arr;
}

// ---------------------------------------------------------------------------
// Summaries and reports
// ---------------------------------------------------------------------------

inline json summary_to_json(const std::vector<ParameterSummary>& rows, const RopeSpec& rope) {
  json params = json::array();
  for (const auto& r : rows) {
    params.push_back({{"name", r.name},
                      {"median", r.median},
                      {"ci_low", r.ci_low},
                      {"ci_high", r.ci_high},
                      {"pd", r.pd},
                      {"rope_pct", r.rope_pct},
                      {"rhat", detail::number_or_null(r.rhat)},
                      {"ess", detail::number_or_null(r.ess)},
                      {"significant", r.significant},
                      {"decision", std::string(to_string(r.decision()))}});
  }
  return json{{"rope", {{"low", rope.low}, {"high", rope.high}, {"ci_level", rope.ci_level}}}, {"parameters", params}};
}

inline json confusion_to_json(const ConfusionMatrix& cm) {
  return json{{"positive_label", cm.positive_label}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}};
}

inline json metrics_to_json(const MetricSet& m) {
  return json{{"accuracy", m.accuracy},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"precision_undefined", m.precision_undefined},
              {"recall_undefined", m.recall_undefined},
              {"f1_undefined", m.f1_undefined}};
}

inline json elpd_to_json(const ElpdResult& e) {
  return json{{"elpd", e.elpd}, {"se", e.se}, {"per_point", detail::to_std(e.per_point)}, {"fold_of_row", e.fold_of_row}};
}

inline ElpdResult elpd_from_json(const json& j) {
  try {
    ElpdResult e;
    e.elpd = j.at("elpd").get<double>();
    e.se = j.at("se").get<double>();
    e.per_point = detail::to_eigen(j.at("per_point").get<std::vector<double>>());
    e.fold_of_row = j.at("fold_of_row").get<std::vector<std::size_t>>();
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::SchemaMismatch, ex.what());
  }
}

/// {"model", "dataset", "settings", "headline", "bankrupt_positive",
///  "nonbankrupt_positive", "elpd"?}; each orientation has "confusion" and "metrics".
inline json report_to_json(const EvalReport& r) {
  json j{{"model", r.model},
         {"dataset", r.dataset},
         {"settings", {{"threshold", r.threshold}, {"positive_label", r.positive_label}}},
         {"headline", {{"confusion", confusion_to_json(r.headline_confusion())},
                       {"metrics", metrics_to_json(r.headline_metrics())}}},
         {"bankrupt_positive",
          {{"confusion", confusion_to_json(r.bankrupt_positive)}, {"metrics", metrics_to_json(r.bankrupt_positive_metrics)}}},
         {"nonbankrupt_positive",
          {{"confusion", confusion_to_json(r.nonbankrupt_positive)},
           {"metrics", metrics_to_json(r.nonbankrupt_positive_metrics)}}}};
  if (r.elpd) j["elpd"] = {{"elpd", r.elpd->elpd}, {"se", r.elpd->se}};
  return j;
}

inline std::string report_to_markdown(const EvalReport& r) {
  auto orientation = [&](const char* title, const ConfusionMatrix& cm, const MetricSet& m) {
    std::string s = std::string("### ") + title + "\n\n";
    // Rows/columns always read bankrupt = YES, whatever the positive label.
    const std::size_t true_no_pred_no = cm.positive_label == 1 ? cm.tn : cm.tp;
    const std::size_t true_no_pred_yes = cm.positive_label == 1 ? cm.fp : cm.fn;
    const std::size_t true_yes_pred_no = cm.positive_label == 1 ? cm.fn : cm.fp;
    const std::size_t true_yes_pred_yes = cm.positive_label == 1 ? cm.tp : cm.tn;
    s += "| | Predicted NO | Predicted YES |\n|---|---:|---:|\n";
    s += "| True NO | " + std::to_string(true_no_pred_no) + " | " + std::to_string(true_no_pred_yes) + " |\n";
    s += "| True YES | " + std::to_string(true_yes_pred_no) + " | " + std::to_string(true_yes_pred_yes) + " |\n\n";
    s += "| Accuracy | Precision | Recall | F1 |\n|---:|---:|---:|---:|\n";
    s += "| " + detail::fmt3(m.accuracy) + " | " + detail::fmt3(m.precision) + " | " + detail::fmt3(m.recall) +
         " | " + detail::fmt3(m.f1) + " |\n\n";
    return s;
  };
  std::string out = "## " + r.model + " on " + r.dataset + " (threshold " + detail::fmt3(r.threshold) +
                    ", headline positive label " + std::to_string(r.positive_label) + ")\n\n";
  out += orientation("Positive = bankrupt (1)", r.bankrupt_positive, r.bankrupt_positive_metrics);
  out += orientation("Positive = non-bankrupt (0)", r.nonbankrupt_positive, r.nonbankrupt_positive_metrics);
  if (r.elpd) out += "ELPD: " + detail::fmt3(r.elpd->elpd) + " (se " + detail::fmt3(r.elpd->se) + ")\n";
  return out;
}

}  // namespace bbayes
