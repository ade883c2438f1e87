#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "bbayes/error.hpp"

namespace bbayes {

/// Anything exposing an unnormalized log density and its gradient.
template <typename T>
concept LogDensityModel = requires(const T& t, const Eigen::VectorXd& q, Eigen::VectorXd& g) {
  { t.dim() } -> std::convertible_to<std::size_t>;
  { t.log_density_and_gradient(q, g) } -> std::convertible_to<double>;
};

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t warmup = 2000;
  std::size_t draws = 2000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 0;
  double init_radius = 2.0;
  /// Worker threads; 0 means min(chains, BB_THREADS or hardware concurrency).
  std::size_t threads = 0;

  void validate() const {
    if (chains < 1) throw Error(Errc::InvalidArgument, "chains must be >= 1");
    if (warmup < 100) throw Error(Errc::InvalidArgument, "warmup must be >= 100");
    if (draws < 1) throw Error(Errc::InvalidArgument, "draws must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0)) {
      throw Error(Errc::InvalidArgument, "target_accept must lie in (0,1)");
    }
    if (max_treedepth < 0) throw Error(Errc::InvalidArgument, "max_treedepth must be >= 0");
    if (!(init_radius > 0.0)) throw Error(Errc::InvalidArgument, "init_radius must be > 0");
  }
};

/// Per-iteration sampler statistics.
struct IterationStats {
  bool divergent = false;
  int tree_depth = 0;
  int n_leapfrog = 0;
  double step_size = 0.0;
  double accept_stat = 0.0;
  double log_density = 0.0;
};

/// Post-warmup draws, stored chain-major: value(chain, draw, param).
struct PosteriorDraws {
  std::size_t chains = 0;
  std::size_t draws = 0;
  std::vector<std::string> param_names;
  std::vector<double> values;
  std::vector<IterationStats> stats;

  std::size_t n_params() const noexcept { return param_names.size(); }

  double value(std::size_t c, std::size_t d, std::size_t j) const {
    return values[(c * draws + d) * n_params() + j];
  }
  double& value(std::size_t c, std::size_t d, std::size_t j) { return values[(c * draws + d) * n_params() + j]; }

  const IterationStats& stat(std::size_t c, std::size_t d) const { return stats[c * draws + d]; }

  /// draws x chains matrix for one parameter.
  Eigen::MatrixXd parameter(std::size_t j) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(chains));
    for (std::size_t c = 0; c < chains; ++c) {
      for (std::size_t d = 0; d < draws; ++d) m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = value(c, d, j);
    }
    return m;
  }

  /// All chains concatenated for one parameter.
  std::vector<double> pooled(std::size_t j) const {
    std::vector<double> out;
    out.reserve(chains * draws);
    for (std::size_t c = 0; c < chains; ++c) {
      for (std::size_t d = 0; d < draws; ++d) out.push_back(value(c, d, j));
    }
    return out;
  }

  /// Draw s of the pooled sample as a parameter vector.
  Eigen::VectorXd draw(std::size_t s) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n_params()));
    for (std::size_t j = 0; j < n_params(); ++j) v[static_cast<Eigen::Index>(j)] = values[s * n_params() + j];
    return v;
  }

  std::size_t total_draws() const noexcept { return chains * draws; }

  std::vector<std::size_t> divergences_per_chain() const {
    std::vector<std::size_t> out(chains, 0);
    for (std::size_t c = 0; c < chains; ++c) {
      for (std::size_t d = 0; d < draws; ++d) out[c] += stat(c, d).divergent ? 1 : 0;
    }
    return out;
  }

  bool operator==(const PosteriorDraws& o) const {
    if (chains != o.chains || draws != o.draws || param_names != o.param_names || values != o.values ||
        stats.size() != o.stats.size()) {
      return false;
    }
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto &a = stats[i], &b = o.stats[i];
      if (a.divergent != b.divergent || a.tree_depth != b.tree_depth || a.n_leapfrog != b.n_leapfrog ||
          a.step_size != b.step_size || a.accept_stat != b.accept_stat || a.log_density != b.log_density) {
        return false;
      }
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Leapfrog
// ---------------------------------------------------------------------------

/// One leapfrog step with identity mass matrix. `grad_fn(q)` returns the
/// gradient of the log density, so momentum moves against the potential.
template <typename GradFn>
std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
                                                     double step, GradFn&& grad_fn) {
  const Eigen::VectorXd g0 = grad_fn(position);
  if (!g0.allFinite()) throw Error(Errc::NonFiniteGradient, "gradient is not finite at the starting position");
  Eigen::VectorXd p = momentum + 0.5 * step * g0;
  Eigen::VectorXd q = position + step * p;
  const Eigen::VectorXd g1 = grad_fn(q);
  if (!g1.allFinite()) throw Error(Errc::NonFiniteGradient, "gradient is not finite after the position update");
  p += 0.5 * step * g1;
  return {std::move(q), std::move(p)};
}

// ---------------------------------------------------------------------------
// Step-size adaptation
// ---------------------------------------------------------------------------

/// Nesterov dual averaging of log step size toward a target acceptance rate.
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target_accept, double gamma = 0.05, double t0 = 10.0,
                double kappa = 0.75)
      : mu_(std::log(10.0 * initial_step)),
        target_(target_accept),
        gamma_(gamma),
        t0_(t0),
        kappa_(kappa),
        log_step_(std::log(initial_step)) {}

  /// Feeds one acceptance statistic; returns the step to use next.
  double update(double accept_stat) {
    ++m_;
    const double m = static_cast<double>(m_);
    const double w = 1.0 / (m + t0_);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_stat);
    log_step_ = mu_ - std::sqrt(m) / gamma_ * h_bar_;
    const double eta = std::pow(m, -kappa_);
    log_step_bar_ = eta * log_step_ + (1.0 - eta) * log_step_bar_;
    return std::exp(log_step_);
  }

  double current_step() const { return std::exp(log_step_); }
  /// The averaged iterate, frozen in after warmup.
  double final_step() const { return std::exp(log_step_bar_); }
  std::size_t iterations() const noexcept { return m_; }

 private:
  double mu_;
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double h_bar_ = 0.0;
  double log_step_;
  double log_step_bar_ = 0.0;
  std::size_t m_ = 0;
};

// ---------------------------------------------------------------------------
// No-U-Turn transition
// ---------------------------------------------------------------------------

/// Trajectory sampling: multinomial over states, weighted by exp(-H).
/// Divergence when the energy error exceeds kMaxEnergyError.
template <LogDensityModel Model>
class NutsSampler {
 public:
  static constexpr double kMaxEnergyError = 1000.0;

  struct State {
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::VectorXd grad;
    double log_density = 0.0;
  };

  NutsSampler(const Model& model, int max_treedepth) : model_(model), max_treedepth_(max_treedepth) {}

  /// Evaluates log density and gradient at q.
  State make_state(const Eigen::VectorXd& q) const {
    State s;
    s.q = q;
    s.p = Eigen::VectorXd::Zero(q.size());
    s.log_density = model_.log_density_and_gradient(q, s.grad);
    return s;
  }

  /// One NUTS update from `current` (whose q/grad/log_density are valid).
  template <typename Rng>
  State transition(const State& current, double step, Rng& rng, IterationStats& stats) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    State z0 = current;
    for (Eigen::Index i = 0; i < z0.p.size(); ++i) z0.p[i] = normal(rng);
    const double h0 = hamiltonian(z0);

    Trajectory traj;
    traj.h0 = h0;
    traj.step = step;

    State minus = z0;
    State plus = z0;
    State sample = z0;
    double log_sum_weight = 0.0;
    int depth = 0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    do {
      const bool forward = unif(rng) < 0.5;
      State& edge = forward ? plus : minus;
      State subtree_sample;
      State subtree_begin;
      double subtree_lsw = -std::numeric_limits<double>::infinity();
      const bool valid =
          build_tree(depth, edge, forward ? 1.0 : -1.0, traj, rng, subtree_sample, subtree_begin, subtree_lsw);
      ++depth;
      if (!valid) break;

      if (subtree_lsw > log_sum_weight) {
        sample = subtree_sample;
      } else if (unif(rng) < std::exp(subtree_lsw - log_sum_weight)) {
        sample = subtree_sample;
      }
      log_sum_weight = log_add_exp(log_sum_weight, subtree_lsw);

      if (is_u_turn(minus, plus)) break;
    } while (depth < max_treedepth_);

    stats.divergent = traj.divergent;
    stats.tree_depth = depth;
    stats.n_leapfrog = traj.n_leapfrog;
    stats.step_size = step;
    stats.accept_stat = traj.n_leapfrog > 0 ? traj.sum_metro_prob / traj.n_leapfrog : 0.0;
    stats.log_density = sample.log_density;
    return sample;
  }

  /// Doubling/halving heuristic: find a step where a single leapfrog's
  /// acceptance crosses 0.5. Throws StepSizeCollapse on underflow.
  template <typename Rng>
  double find_reasonable_step(const State& current, Rng& rng, double step = 1.0) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    State z = current;
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal(rng);
    const double h0 = hamiltonian(z);

    auto log_ratio = [&](double eps) {
      State trial = z;
      if (!step_in_place(trial, eps)) return -std::numeric_limits<double>::infinity();
      const double h = hamiltonian(trial);
      return std::isfinite(h) ? h0 - h : -std::numeric_limits<double>::infinity();
    };

    const double log_half = std::log(0.5);
    const int direction = log_ratio(step) > log_half ? 1 : -1;
    for (int iter = 0; iter < 2200; ++iter) {
      const double r = log_ratio(step);
      if (direction == 1 ? !(r > log_half) : (r > log_half)) break;
      step = direction == 1 ? step * 2.0 : step * 0.5;
      if (!(step >= std::numeric_limits<double>::min())) {
        throw Error(Errc::StepSizeCollapse, "step size underflowed while searching for an initial step");
      }
      if (step > 1e7) break;
    }
    return step;
  }

 private:
  struct Trajectory {
    double h0 = 0.0;
    double step = 0.0;
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
  };

  static double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  }

  static double hamiltonian(const State& s) { return -s.log_density + 0.5 * s.p.squaredNorm(); }

  /// Endpoint criterion: stop once either end's momentum points back across
  /// the span between the endpoints.
  static bool is_u_turn(const State& minus, const State& plus) {
    const Eigen::VectorXd span = plus.q - minus.q;
    return span.dot(minus.p) <= 0.0 || span.dot(plus.p) <= 0.0;
  }

  bool step_in_place(State& s, double eps) const {
    s.p += 0.5 * eps * s.grad;
    s.q += eps * s.p;
    s.log_density = model_.log_density_and_gradient(s.q, s.grad);
    if (!std::isfinite(s.log_density) || !s.grad.allFinite()) return false;
    s.p += 0.5 * eps * s.grad;
    return true;
  }

  /// Extends `edge` by 2^depth leapfrog steps in `direction`. On return
  /// `edge` is the new trajectory end, `begin` the first state visited.
  template <typename Rng>
  bool build_tree(int depth, State& edge, double direction, Trajectory& traj, Rng& rng, State& sample,
                  State& begin, double& log_sum_weight) const {
    if (depth == 0) {
      const bool finite = step_in_place(edge, direction * traj.step);
      ++traj.n_leapfrog;
      const double h = finite ? hamiltonian(edge) : std::numeric_limits<double>::infinity();
      if (!std::isfinite(h) || h - traj.h0 > kMaxEnergyError) {
        traj.divergent = true;
        return false;
      }
      const double log_w = traj.h0 - h;
      log_sum_weight = log_w;
      traj.sum_metro_prob += log_w > 0.0 ? 1.0 : std::exp(log_w);
      sample = edge;
      begin = edge;
      return true;
    }

    State left_sample;
    double left_lsw = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, edge, direction, traj, rng, left_sample, begin, left_lsw)) return false;

    State right_sample;
    State right_begin;
    double right_lsw = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, edge, direction, traj, rng, right_sample, right_begin, right_lsw)) return false;

    log_sum_weight = log_add_exp(left_lsw, right_lsw);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    sample = unif(rng) < std::exp(right_lsw - log_sum_weight) ? std::move(right_sample) : std::move(left_sample);

    return direction > 0 ? !is_u_turn(begin, edge) : !is_u_turn(edge, begin);
  }

  const Model& model_;
  int max_treedepth_;
};

// ---------------------------------------------------------------------------
// Multi-chain driver
// ---------------------------------------------------------------------------

/// Chain c draws from an mt19937_64 seeded with seed_seq{seed lo, seed hi, c}.
inline std::mt19937_64 chain_rng(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x6e757473u};
  return std::mt19937_64(seq);
}

/// Thread count for chains/folds: explicit request, else BB_THREADS, else
/// hardware concurrency; never more than `jobs`.
inline std::size_t resolve_threads(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("BB_THREADS")) {
      try {
        n = static_cast<std::size_t>(std::stoul(env));
      } catch (...) {
        n = 0;
      }
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs `job(i)` for i in [0, jobs) on up to `threads` workers. Exceptions are
/// captured per job; the lowest-index failure is rethrown.
template <typename Job>
void parallel_for(std::size_t jobs, std::size_t threads, Job&& job) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

template <typename Model>
std::vector<std::string> param_names_of(const Model& model) {
  if constexpr (requires { model.param_names(); }) {
    return model.param_names();
  } else {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < model.dim(); ++j) names.push_back("theta[" + std::to_string(j) + "]");
    return names;
  }
}

template <LogDensityModel Model>
void run_one_chain(const Model& model, const SamplerConfig& config, std::size_t chain, PosteriorDraws& out) {
  auto rng = chain_rng(config.seed, chain);
  const auto dim = static_cast<Eigen::Index>(model.dim());
  NutsSampler<Model> sampler(model, config.max_treedepth);
  std::uniform_real_distribution<double> init(-config.init_radius, config.init_radius);

  typename NutsSampler<Model>::State state;
  bool initialized = false;
  for (int attempt = 0; attempt < 100 && !initialized; ++attempt) {
    Eigen::VectorXd q(dim);
    for (Eigen::Index i = 0; i < dim; ++i) q[i] = init(rng);
    state = sampler.make_state(q);
    initialized = std::isfinite(state.log_density) && state.grad.allFinite();
  }
  if (!initialized) {
    throw Error(Errc::ChainFailed, "chain " + std::to_string(chain) +
                                       ": log density not finite at 100 initial points");
  }

  double step = sampler.find_reasonable_step(state, rng);
  DualAveraging adapt(step, config.target_accept);

  const std::size_t total = config.warmup + config.draws;
  for (std::size_t it = 0; it < total; ++it) {
    IterationStats st;
    state = sampler.transition(state, step, rng, st);
    if (it < config.warmup) {
      step = adapt.update(st.accept_stat);
      if (it + 1 == config.warmup) step = adapt.final_step();
      if (!(step >= std::numeric_limits<double>::min()) || !std::isfinite(step)) {
        throw Error(Errc::StepSizeCollapse, "chain " + std::to_string(chain) + ": step size collapsed at warmup iteration " +
                                                std::to_string(it));
      }
      continue;
    }
    const std::size_t d = it - config.warmup;
    for (Eigen::Index j = 0; j < dim; ++j) out.value(chain, d, static_cast<std::size_t>(j)) = state.q[j];
    out.stats[chain * config.draws + d] = st;
  }
}

}  // namespace detail

/// Runs `config.chains` independent NUTS chains. The result depends only on
/// (model, config); the thread schedule does not affect it.
template <LogDensityModel Model>
PosteriorDraws run_chains(const Model& model, const SamplerConfig& config) {
  config.validate();
  PosteriorDraws out;
  out.chains = config.chains;
  out.draws = config.draws;
  out.param_names = detail::param_names_of(model);
  out.values.assign(config.chains * config.draws * model.dim(), 0.0);
  out.stats.assign(config.chains * config.draws, IterationStats{});

  const std::size_t threads = resolve_threads(config.threads, config.chains);
  try {
    parallel_for(config.chains, threads, [&](std::size_t c) { detail::run_one_chain(model, config, c, out); });
  } catch (const Error& e) {
    if (e.code() == Errc::ChainFailed) throw;
    throw Error(Errc::ChainFailed, e.what());
  }
  return out;
}

}  // namespace bbayes
