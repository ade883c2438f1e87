#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bbayes/diagnostics.hpp"
#include "bbayes/error.hpp"
#include "bbayes/glm.hpp"
#include "bbayes/ingest.hpp"
#include "bbayes/nuts.hpp"
#include "bbayes/preprocess.hpp"

namespace bbayes {

/// Everything a CLI run depends on. Parsed from a flat `key = value` file
/// (`#` comments, blank lines ignored); command-line flags override keys.
struct RunConfig {
  std::string train_path;
  std::string test_path;
  std::string format = "arff";
  bool csv_header = true;
  std::string label_column = "class";
  std::string preset = "model2";
  std::vector<std::string> features;  // non-empty selects a custom model
  std::string model_name;
  StudentT prior{};
  std::optional<StudentT> intercept_prior;
  SamplerConfig sampler{};
  std::optional<std::uint64_t> seed;
  RopeSpec rope{};
  double threshold = 0.5;
  int positive_label = 1;
  std::size_t kfold_k = 10;
  ImputeStrategy imputation = ImputeStrategy::median;
  std::string out_dir = "out";

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "train",         "test",          "format",         "csv_header",     "label_column",
        "preset",        "features",      "model_name",     "prior_df",       "prior_location",
        "prior_scale",   "intercept_prior_df", "intercept_prior_location", "intercept_prior_scale",
        "chains",        "warmup",        "draws",          "target_accept",  "max_treedepth",
        "init_radius",   "seed",          "rope_low",       "rope_high",      "ci_level",
        "threshold",     "positive_label", "kfold_k",       "imputation",     "out"};
    return keys;
  }

  /// Applies one key; unknown keys and malformed values are ConfigErrors.
  void set(const std::string& key, const std::string& raw) {
    const std::string value(detail::trim(raw));
    auto as_double = [&]() {
      auto v = detail::parse_double(value);
      if (!v) throw Error(Errc::ConfigError, "key '" + key + "' expects a number, got '" + value + "'");
      return *v;
    };
    auto as_count = [&]() -> std::uint64_t {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(Errc::ConfigError, "key '" + key + "' expects a non-negative integer, got '" + value + "'");
      }
      return v;
    };
    auto ensure_intercept = [&]() -> StudentT& {
      if (!intercept_prior) intercept_prior = prior;
      return *intercept_prior;
    };

    if (key == "train") train_path = value;
    else if (key == "test") test_path = value;
    else if (key == "format") {
      if (value != "arff" && value != "csv") throw Error(Errc::ConfigError, "format must be arff or csv");
      format = value;
    } else if (key == "csv_header") {
      if (value != "true" && value != "false") throw Error(Errc::ConfigError, "csv_header must be true or false");
      csv_header = value == "true";
    } else if (key == "label_column") label_column = value;
    else if (key == "preset") {
      if (value != "model1" && value != "model2") throw Error(Errc::ConfigError, "preset must be model1 or model2");
      preset = value;
      features.clear();
    } else if (key == "features") {
      features.clear();
      for (auto tok : detail::split_commas(value)) {
        if (!tok.empty()) features.emplace_back(tok);
      }
    } else if (key == "model_name") model_name = value;
    else if (key == "prior_df") prior.df = as_double();
    else if (key == "prior_location") prior.location = as_double();
    else if (key == "prior_scale") prior.scale = as_double();
    else if (key == "intercept_prior_df") ensure_intercept().df = as_double();
    else if (key == "intercept_prior_location") ensure_intercept().location = as_double();
    else if (key == "intercept_prior_scale") ensure_intercept().scale = as_double();
    else if (key == "chains") sampler.chains = as_count();
    else if (key == "warmup") sampler.warmup = as_count();
    else if (key == "draws") sampler.draws = as_count();
    else if (key == "target_accept") sampler.target_accept = as_double();
    else if (key == "max_treedepth") sampler.max_treedepth = static_cast<int>(as_count());
    else if (key == "init_radius") sampler.init_radius = as_double();
    else if (key == "seed") seed = as_count();
    else if (key == "rope_low") rope.low = as_double();
    else if (key == "rope_high") rope.high = as_double();
    else if (key == "ci_level") rope.ci_level = as_double();
    else if (key == "threshold") threshold = as_double();
    else if (key == "positive_label") {
      const auto v = as_count();
      if (v > 1) throw Error(Errc::ConfigError, "positive_label must be 0 or 1");
      positive_label = static_cast<int>(v);
    } else if (key == "kfold_k") kfold_k = as_count();
    else if (key == "imputation") {
      try {
        imputation = parse_impute_strategy(value);
      } catch (const Error& e) {
        throw Error(Errc::ConfigError, e.message());
      }
    } else if (key == "out") out_dir = value;
    else throw Error(Errc::ConfigError, "unknown key '" + key + "'");
  }

  /// Parses `key = value` lines into this config.
  void load_text(std::string_view text) {
    const auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": expected 'key = value'");
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      try {
        set(key, std::string(line.substr(eq + 1)));
      } catch (const Error& e) {
        throw Error(Errc::ConfigError, "line " + std::to_string(i + 1) + ": " + e.message());
      }
    }
  }

  /// Cross-field checks. A seed is mandatory for anything that samples.
  void validate(bool require_seed = true) const {
    if (require_seed && !seed) throw Error(Errc::ConfigError, "a seed is required (config key 'seed' or --seed)");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::ConfigError, "threshold must lie in [0,1]");
    try {
      model_spec();
      sampler_config().validate();
      rope.validate();
      PriorSpec::uniform(1, prior).validate();
      if (intercept_prior) PriorSpec::uniform(1, *intercept_prior).validate();
    } catch (const Error& e) {
      throw Error(Errc::ConfigError, e.message());
    }
    if (kfold_k < 2) throw Error(Errc::ConfigError, "kfold_k must be >= 2");
  }

  ModelSpec model_spec() const {
    if (!features.empty()) return ModelSpec::custom(model_name.empty() ? "custom" : model_name, features);
    auto spec = ModelSpec::from_preset(preset);
    if (!model_name.empty()) spec.name = model_name;
    return spec;
  }

  PriorSpec priors(std::size_t n_params) const {
    auto spec = PriorSpec::uniform(n_params, prior);
    if (intercept_prior && n_params > 0) spec.params[0] = *intercept_prior;
    return spec;
  }

  SamplerConfig sampler_config() const {
    SamplerConfig c = sampler;
    c.seed = seed.value_or(0);
    return c;
  }

  /// Effective configuration as key/value pairs, for manifests.
  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> s = {
        {"train", train_path},
        {"test", test_path},
        {"format", format},
        {"csv_header", csv_header ? "true" : "false"},
        {"label_column", label_column},
        {"preset", features.empty() ? preset : "custom"},
        {"model_name", model_spec().name},
        {"prior_df", detail::format_double(prior.df)},
        {"prior_location", detail::format_double(prior.location)},
        {"prior_scale", detail::format_double(prior.scale)},
        {"chains", std::to_string(sampler.chains)},
        {"warmup", std::to_string(sampler.warmup)},
        {"draws", std::to_string(sampler.draws)},
        {"target_accept", detail::format_double(sampler.target_accept)},
        {"max_treedepth", std::to_string(sampler.max_treedepth)},
        {"init_radius", detail::format_double(sampler.init_radius)},
        {"seed", seed ? std::to_string(*seed) : ""},
        {"rope_low", detail::format_double(rope.low)},
        {"rope_high", detail::format_double(rope.high)},
        {"ci_level", detail::format_double(rope.ci_level)},
        {"threshold", detail::format_double(threshold)},
        {"positive_label", std::to_string(positive_label)},
        {"kfold_k", std::to_string(kfold_k)},
        {"imputation", std::string(to_string(imputation))},
        {"out", out_dir},
    };
    std::string feats;
    for (const auto& f : model_spec().feature_ids) feats += (feats.empty() ? "" : ",") + f;
    s["features"] = feats;
    if (intercept_prior) {
      s["intercept_prior_df"] = detail::format_double(intercept_prior->df);
      s["intercept_prior_location"] = detail::format_double(intercept_prior->location);
      s["intercept_prior_scale"] = detail::format_double(intercept_prior->scale);
    }
    return s;
  }

  /// Serialized in the same flat grammar, so a snapshot can be re-run.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : snapshot()) {
      if (k == "features" && features.empty()) continue;
      if (k == "preset" && !features.empty()) continue;
      if (k == "model_name" && model_name.empty()) continue;
      if (v.empty()) continue;
      os << k << " = " << v << '\n';
    }
    return os.str();
  }
};

}  // namespace bbayes
