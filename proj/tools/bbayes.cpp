// bbayes: Bayesian logistic GLM for bankruptcy prediction.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bbayes/bbayes.hpp"

namespace fs = std::filesystem;
using namespace bbayes;

namespace {

enum Exit { kOk = 0, kUserError = 1, kComputeError = 2 };

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::string> threshold;
  std::optional<int> positive_label;
};

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IoError, "SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

RunConfig load_config(const std::string& path, const GlobalFlags& flags, bool require_seed = true) {
  RunConfig cfg;
  if (!path.empty()) {
    const std::string text = read_text_file(path);
    try {
      cfg.load_text(text);
    } catch (const Error& e) {
      throw Error(e.code(), path + ": " + e.message());
    }
  }
  if (flags.seed) cfg.set("seed", std::to_string(*flags.seed));
  if (flags.preset) cfg.set("preset", *flags.preset);
  if (flags.format) cfg.set("format", *flags.format);
  if (flags.out) cfg.set("out", *flags.out);
  if (flags.threshold) cfg.set("threshold", *flags.threshold);
  if (flags.positive_label) cfg.set("positive_label", std::to_string(*flags.positive_label));
  cfg.validate(require_seed);
  return cfg;
}

json input_entry(const std::string& path) {
  return json{{"path", path}, {"sha256", sha256_hex(read_text_file(path))}};
}

/// Records what a command consumed so the run can be repeated exactly.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg)
      : start_(std::chrono::steady_clock::now()),
        doc_{{"format", "bbayes.run_manifest"},
             {"version", 1},
             {"tool_version", BBAYES_VERSION},
             {"command", std::move(command)},
             {"config", cfg.snapshot()},
             {"inputs", json::array()}} {}

  void add_input(const std::string& path) { doc_["inputs"].push_back(input_entry(path)); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write(const fs::path& path) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    doc_["duration_seconds"] = elapsed.count();
    write_text_file(path, doc_.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

void save_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::SchemaMismatch, path + ": file is empty");
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaMismatch, path + ": " + e.what());
  }
}

PosteriorDraws load_draws(const std::string& path) {
  try {
    return draws_from_json(parse_json_file(path));
  } catch (const Error& e) {
    if (e.message().rfind(path, 0) == 0) throw;
    throw Error(e.code(), path + ": " + e.message());
  }
}

// ---------------------------------------------------------------------------

int cmd_fit(const RunConfig& cfg) {
  Manifest manifest("fit", cfg);
  manifest.add_input(cfg.train_path);
  const PreparedData data = prepare_data(cfg, false);
  const PosteriorDraws draws = fit_posterior(cfg, data.train);

  const fs::path out = cfg.out_dir;
  std::vector<std::string> columns = data.train_table.column_names();
  const std::string draws_text = draws_to_json(draws).dump() + "\n";
  write_text_file(out / "draws.json", draws_text);
  save_json(out / "scaler.json", scaler_to_json(data.scaler));
  save_json(out / "imputation.json", imputation_to_json(data.imputation, columns));
  write_text_file(out / "config.txt", cfg.to_text());

  json chains = json::array();
  const auto div = divergences_per_chain(draws);
  std::size_t total_div = 0;
  for (std::size_t c = 0; c < div.size(); ++c) {
    chains.push_back({{"chain", c}, {"divergences", div[c]}});
    total_div += div[c];
  }
  manifest.set("chains", chains);
  manifest.set("outputs", json{{{"path", (out / "draws.json").string()}, {"sha256", sha256_hex(draws_text)}}});
  manifest.write(out / "manifest.json");

  std::cout << "fitted " << data.spec.name << ": " << draws.n_params() << " parameters, " << draws.chains
            << " chains x " << draws.draws << " draws, " << total_div << " divergent transitions\n"
            << "wrote " << (out / "draws.json").string() << '\n';
  return kOk;
}

int cmd_report(const RunConfig& cfg, const std::string& draws_path) {
  const PosteriorDraws draws = load_draws(draws_path);
  const auto rows = summarize(draws, cfg.rope);
  const fs::path out = cfg.out_dir;

  json j = summary_to_json(rows, cfg.rope);
  j["draws"] = draws_path;
  j["significant"] = json::array();
  for (const auto& r : rows) {
    if (r.significant && r.name != "(Intercept)") j["significant"].push_back(r.name);
  }
  json sentences = json::array();
  std::string md = "# Posterior summary\n\n" + render_summary_markdown(rows, cfg.rope) + "\n";
  for (const auto& r : rows) {
    const auto s = narrate(r, cfg.rope);
    sentences.push_back(s);
    md += "- " + s + "\n";
  }
  j["narrative"] = sentences;
  save_json(out / "summary.json", j);
  write_text_file(out / "summary.md", md);
  std::cout << md;
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& draws_path, const std::string& dataset) {
  Manifest manifest("evaluate", cfg);
  const PosteriorDraws draws = load_draws(draws_path);
  const fs::path art = fs::path(draws_path).parent_path();
  const Scaler scaler = scaler_from_json(parse_json_file((art / "scaler.json").string()));
  const ImputationStats imp = imputation_from_json(parse_json_file((art / "imputation.json").string()));

  const std::string& path = dataset == "train" ? cfg.train_path : cfg.test_path;
  if (path.empty()) throw Error(Errc::ConfigError, "no " + dataset + " data given (config key '" + dataset + "')");
  manifest.add_input(draws_path);
  manifest.add_input(path);
  const RawTable raw = load_table(path, cfg);
  const RawTable table = impute_missing(raw, imp.strategy, imp).first;
  const LabeledMatrix data = apply_scaler(scaler, to_labeled_matrix(table, scaler.feature_ids, cfg.label_column));
  if (draws.n_params() != scaler.feature_ids.size() + 1) {
    throw Error(Errc::DimensionMismatch, "draws and scaler describe different feature sets");
  }

  const std::string model = cfg.model_spec().name;
  const auto report = evaluate_draws(draws, data, model, dataset, cfg.threshold, cfg.positive_label);
  const fs::path out = cfg.out_dir;
  save_json(out / "evaluation.json", report_to_json(report));
  const std::string md = report_to_markdown(report);
  write_text_file(out / "evaluation.md", md);
  manifest.write(out / "evaluate.manifest.json");
  std::cout << md;
  return kOk;
}

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& others, const GlobalFlags& flags) {
  std::vector<RunConfig> configs{cfg};
  if (others.empty()) {
    // Default: the configured model against the other preset.
    RunConfig alt = cfg;
    alt.set("preset", cfg.model_spec().preset == Preset::model1 ? "model2" : "model1");
    configs.push_back(alt);
  } else {
    for (const auto& p : others) configs.push_back(load_config(p, flags));
  }
  Manifest manifest("compare", cfg);
  std::vector<std::pair<std::string, ElpdResult>> results;
  json per_model = json::array();
  for (const auto& c : configs) {
    manifest.add_input(c.train_path);
    const auto res = kfold_for(c);
    results.emplace_back(c.model_spec().name, res.elpd);
    per_model.push_back({{"model", c.model_spec().name}, {"config", c.snapshot()}});
  }
  const auto rows = compare_models(results);
  json j = compare_to_json(rows, cfg.kfold_k);
  j["pointwise"] = json::array();
  for (const auto& [name, e] : results) j["pointwise"].push_back({{"model", name}, {"elpd", elpd_to_json(e)}});
  manifest.set("models", per_model);

  const fs::path out = cfg.out_dir;
  save_json(out / "compare.json", j);
  const std::string md = compare_to_markdown(rows, cfg.kfold_k);
  write_text_file(out / "compare.md", md);
  manifest.write(out / "compare.manifest.json");
  std::cout << md;
  return kOk;
}

int cmd_baselines(const RunConfig& cfg) {
  Manifest manifest("baselines", cfg);
  manifest.add_input(cfg.train_path);
  manifest.add_input(cfg.test_path);
  const PreparedData data = prepare_data(cfg, true);
  const auto b = run_baselines(cfg, data);

  json irls{{"converged", b.irls.converged},
            {"iterations", b.irls.iterations},
            {"separation", b.irls.separation},
            {"coefficients", json::object()}};
  irls["coefficients"]["(Intercept)"] = b.irls.beta[0];
  for (std::size_t j = 0; j < data.spec.feature_ids.size(); ++j) {
    irls["coefficients"][data.spec.feature_ids[j]] = b.irls.beta[static_cast<Eigen::Index>(j + 1)];
  }
  json j{{"irls", irls},
         {"reports", json::array({report_to_json(b.irls_report), report_to_json(b.altman_report),
                                  report_to_json(b.constant_report)})}};
  const fs::path out = cfg.out_dir;
  save_json(out / "baselines.json", j);
  std::string md = "# Baselines\n\n";
  if (b.irls.separation) md += "IRLS flagged possible separation; its coefficients are not reliable.\n\n";
  md += report_to_markdown(b.irls_report) + report_to_markdown(b.altman_report) + report_to_markdown(b.constant_report);
  write_text_file(out / "baselines.md", md);
  manifest.write(out / "baselines.manifest.json");
  std::cout << md;
  return kOk;
}

int cmd_catalog(bool as_json) {
  if (as_json) {
    std::cout << catalog_to_json().dump(2) << '\n';
    return kOk;
  }
  std::cout << "| Id | Ratio |\n|---|---|\n";
  for (const auto& e : kFeatureCatalog) std::cout << "| " << e.id << " | " << e.description << " |\n";
  return kOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::NonFiniteGradient:
    case Errc::StepSizeCollapse:
    case Errc::ChainFailed:
    case Errc::FoldFitFailed:
    case Errc::SingularSystem:
    case Errc::DegenerateDraws:
      return kComputeError;
    default:
      return kUserError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian logistic GLM for bankruptcy prediction"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", BBAYES_VERSION);

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Configuration file (key = value lines)");
  app.add_option("--seed", flags.seed, "Random seed (overrides the config)");
  app.add_option("--preset", flags.preset, "Feature preset")->check(CLI::IsMember({"model1", "model2"}));
  app.add_option("--format", flags.format, "Data file format")->check(CLI::IsMember({"arff", "csv"}));
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--threshold", flags.threshold, "Classification threshold on the predictive mean");
  app.add_option("--positive-label", flags.positive_label, "Label treated as positive in headline metrics")
      ->check(CLI::IsMember({0, 1}));

  auto* fit = app.add_subcommand("fit", "Sample the posterior and write draws, scaler, imputation and manifest");
  std::string draws_path;
  auto* report = app.add_subcommand("report", "Summarize draws: medians, CI, pd, ROPE, Rhat, ESS and narrative");
  report->add_option("--draws", draws_path, "Draws file (default OUT/draws.json)");
  auto* evaluate = app.add_subcommand("evaluate", "Classify a dataset with the posterior predictive mean");
  std::string dataset = "test";
  evaluate->add_option("--draws", draws_path, "Draws file (default OUT/draws.json)");
  evaluate->add_option("--dataset", dataset, "Which configured dataset to score")->check(CLI::IsMember({"train", "test"}));
  auto* compare = app.add_subcommand("compare", "K-fold ELPD comparison of two or more models");
  std::vector<std::string> others;
  compare->add_option("--with", others, "Config file of a model to compare against (repeatable)");
  auto* baselines = app.add_subcommand("baselines", "IRLS, Altman Z and constant-negative baselines on test data");
  auto* catalog = app.add_subcommand("catalog", "Print the 64 financial ratios");
  bool catalog_json = false;
  catalog->add_flag("--json", catalog_json, "Emit JSON instead of markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUserError;
  }

  try {
    if (catalog->parsed()) return cmd_catalog(catalog_json);
    const bool samples = fit->parsed() || compare->parsed();
    const RunConfig cfg = load_config(flags.config_path, flags, samples);
    if (draws_path.empty()) draws_path = (fs::path(cfg.out_dir) / "draws.json").string();
    if (fit->parsed()) return cmd_fit(cfg);
    if (report->parsed()) return cmd_report(cfg, draws_path);
    if (evaluate->parsed()) return cmd_evaluate(cfg, draws_path, dataset);
    if (compare->parsed()) return cmd_compare(cfg, others, flags);
    if (baselines->parsed()) return cmd_baselines(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kComputeError;
  }
  return kUserError;
}
