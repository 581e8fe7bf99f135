#pragma once

// Inverse learning of heterogeneous states.
//
// From the stream of public-belief log-ratio matrices Lambda_i the estimator
// jointly tracks the combination matrix (a stochastic-gradient step on the
// one-step prediction residual, regressor centered over a window of M past
// matrices) and the expected log-likelihood ratio matrix (a batch average of
// the recursion residual over the last M steps). Pairwise informativeness and
// the optimal hypothesis sets follow from the latter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sociallearn/errors.hpp"
#include "sociallearn/forward.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/models.hpp"
#include "sociallearn/random.hpp"

namespace sociallearn {

struct InverseConfig {
  double step = 1e-3;       // learning rate of the combination-matrix update
  double delta = 0.1;       // adaptation parameter of the observed network
  std::size_t batch = 200;  // window size M
  double tol = 1e-6;        // relative change of A over M updates that counts as converged
  std::size_t max_iter = 0; // cap on consumed Lambda matrices, 0 = whole stream

  void validate() const {
    if (!(step >= 0.0) || !std::isfinite(step)) throw std::invalid_argument("inverse: step must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("inverse: delta must lie in (0, 1)");
    if (batch < 1) throw std::invalid_argument("inverse: batch M must be >= 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("inverse: tol must be >= 0");
  }

  /// Lambda matrices buffered before the first update; one more is needed to
  /// perform it.
  std::size_t warm_up() const noexcept { return batch + 1; }
};

/// Running estimates plus the Lambda window Lambda_{i-M-1} .. Lambda_i.
class InverseState {
 public:
  InverseState(std::size_t n_agents, std::size_t n_hypotheses, InverseConfig config)
      : config_(config), n_(n_agents), cols_(n_hypotheses - 1) {
    config_.validate();
    if (n_agents < 1 || n_hypotheses < 2) throw std::invalid_argument("inverse: need n >= 1 and H >= 2");
    const auto n = static_cast<Eigen::Index>(n_);
    a_est_ = Matrix::Constant(n, n, 1.0 / static_cast<double>(n_));
    l_est_ = Matrix::Zero(n, static_cast<Eigen::Index>(cols_));
    total_ = Matrix::Zero(n, static_cast<Eigen::Index>(cols_));
  }

  /// Overrides the default start (uniform 1/n matrix, zero log-ratios).
  void set_estimates(Matrix a0, Matrix l0) {
    if (a0.rows() != a_est_.rows() || a0.cols() != a_est_.cols() || l0.rows() != l_est_.rows() ||
        l0.cols() != l_est_.cols()) {
      throw std::invalid_argument("inverse: initial estimates have the wrong shape");
    }
    a_est_ = std::move(a0);
    l_est_ = std::move(l0);
  }

  /// Buffers Lambda_i. Once M+1 earlier matrices are available, runs the
  /// combination-matrix update followed by the log-likelihood update and
  /// returns true.
  bool push(const Matrix& lambda) {
    if (lambda.rows() != static_cast<Eigen::Index>(n_) || lambda.cols() != static_cast<Eigen::Index>(cols_)) {
      throw std::invalid_argument("inverse: Lambda has the wrong shape");
    }
    if (!lambda.allFinite()) throw NumericalError("inverse: non-finite Lambda entry");
    window_.push_back(lambda);
    total_ += lambda;
    if (window_.size() > capacity()) {
      total_ -= window_.front();
      window_.pop_front();
    }
    ++iteration_;
    if (++pushes_since_resum_ >= capacity()) resum();
    if (!warmed_up()) return false;
    update_combination();
    update_likelihoods();
    ++updates_;
    return true;
  }

  bool warmed_up() const noexcept { return window_.size() == capacity(); }

  /// A_i = A_{i-1} + mu (1-delta) (Lambda_{i-1} - M^-1 sum_{j=i-M}^{i-1} Lambda_{j-1})
  ///                 x (Lambda_i^T - (1-delta) Lambda_{i-1}^T A_{i-1} - delta L_{i-1}^T)
  void update_combination() {
    require_warm("combination-matrix update");
    const double d = config_.delta;
    const auto m = static_cast<double>(config_.batch);
    const Matrix& current = window_.back();
    const Matrix& previous = window_[config_.batch];
    const Matrix lagged_sum = total_ - window_[config_.batch] - window_.back();
    const Matrix centered = previous - lagged_sum / m;
    const Matrix residual = current - (1.0 - d) * a_est_.transpose() * previous - d * l_est_;
    a_est_.noalias() += config_.step * (1.0 - d) * centered * residual.transpose();
    if (!a_est_.allFinite()) throw NumericalError("inverse: combination estimate became non-finite");
  }

  /// L_i = delta^-1 M^-1 sum_{j=i-M+1}^{i} (Lambda_j - (1-delta) A_i^T Lambda_{j-1})
  void update_likelihoods() {
    require_warm("log-likelihood update");
    const double d = config_.delta;
    const auto m = static_cast<double>(config_.batch);
    const Matrix current_sum = total_ - window_[0] - window_[1];
    const Matrix previous_sum = total_ - window_[0] - window_.back();
    l_est_ = (current_sum - (1.0 - d) * a_est_.transpose() * previous_sum) / (d * m);
    if (!l_est_.allFinite()) throw NumericalError("inverse: log-likelihood estimate became non-finite");
  }

  const Matrix& combination_estimate() const noexcept { return a_est_; }
  const Matrix& likelihood_estimate() const noexcept { return l_est_; }
  const InverseConfig& config() const noexcept { return config_; }
  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t updates() const noexcept { return updates_; }
  std::size_t buffered() const noexcept { return window_.size(); }
  std::size_t num_agents() const noexcept { return n_; }
  std::size_t num_hypotheses() const noexcept { return cols_ + 1; }

 private:
  std::size_t capacity() const noexcept { return config_.batch + 2; }

  void require_warm(const char* what) const {
    if (!warmed_up()) {
      std::ostringstream os;
      os << what << " needs " << capacity() << " buffered Lambda matrices, have " << window_.size();
      throw StateError(os.str());
    }
  }

  // The sliding total is rebuilt periodically so add/subtract drift stays bounded.
  void resum() {
    total_.setZero();
    for (const auto& w : window_) total_ += w;
    pushes_since_resum_ = 0;
  }

  InverseConfig config_;
  std::size_t n_;
  std::size_t cols_;
  Matrix a_est_;
  Matrix l_est_;
  std::deque<Matrix> window_;
  Matrix total_;
  std::size_t pushes_since_resum_ = 0;
  std::size_t iteration_ = 0;
  std::size_t updates_ = 0;
};

/// Pairwise informativeness per agent: d_k(j1, j2) = L_k(j2) - L_k(j1) with an
/// implicit zero column for the reference hypothesis.
struct Informativeness {
  std::vector<Matrix> values;  // one H x H antisymmetric matrix per agent

  std::size_t num_agents() const noexcept { return values.size(); }
  double operator()(std::size_t agent, std::size_t j1, std::size_t j2) const {
    return values.at(agent)(static_cast<Eigen::Index>(j1), static_cast<Eigen::Index>(j2));
  }
};

inline Informativeness informativeness(const Matrix& l_est) {
  Informativeness d;
  const Eigen::Index hyps = l_est.cols() + 1;
  for (Eigen::Index k = 0; k < l_est.rows(); ++k) {
    Eigen::RowVectorXd full(hyps);
    full(0) = 0.0;
    full.tail(hyps - 1) = l_est.row(k);
    Matrix dk(hyps, hyps);
    for (Eigen::Index a = 0; a < hyps; ++a) {
      for (Eigen::Index b = 0; b < hyps; ++b) dk(a, b) = full(b) - full(a);
    }
    d.values.push_back(std::move(dk));
  }
  return d;
}

struct HypothesisEstimate {
  std::vector<std::vector<std::size_t>> sets;
  std::vector<bool> malicious;
  std::vector<std::vector<std::size_t>> positive_counts;
};

/// Theta_k = argmax_{j1} #{j2 : d_k(j1, j2) > 0}, keeping every maximizer.
/// An agent is flagged malicious when its set misses every state in
/// `majority_states` (no flags when that list is empty).
inline HypothesisEstimate estimate_hypothesis_sets(const Informativeness& d,
                                                   std::span<const std::size_t> majority_states = {}) {
  HypothesisEstimate out;
  for (const auto& dk : d.values) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(dk.rows()), 0);
    for (Eigen::Index a = 0; a < dk.rows(); ++a) {
      counts[static_cast<std::size_t>(a)] = static_cast<std::size_t>((dk.row(a).array() > 0.0).count());
    }
    std::size_t best = 0;
    for (auto c : counts) best = std::max(best, c);
    std::vector<std::size_t> set;
    for (std::size_t h = 0; h < counts.size(); ++h) {
      if (counts[h] == best) set.push_back(h);
    }
    bool flagged = !majority_states.empty();
    for (auto s : majority_states) {
      if (std::find(set.begin(), set.end(), s) != set.end()) flagged = false;
    }
    out.sets.push_back(std::move(set));
    out.malicious.push_back(flagged);
    out.positive_counts.push_back(std::move(counts));
  }
  return out;
}

/// Hypotheses contained in the largest number of estimated sets; used as the
/// majority reference when none is supplied.
inline std::vector<std::size_t> infer_majority_states(const HypothesisEstimate& est) {
  std::vector<std::size_t> hits;
  for (const auto& set : est.sets) {
    for (auto h : set) {
      if (h >= hits.size()) hits.resize(h + 1, 0);
      ++hits[h];
    }
  }
  std::vector<std::size_t> out;
  const std::size_t best = hits.empty() ? 0 : *std::max_element(hits.begin(), hits.end());
  for (std::size_t h = 0; h < hits.size(); ++h) {
    if (best > 0 && hits[h] == best) out.push_back(h);
  }
  return out;
}

/// Cosmetic report of A_est: entries clipped to [0, 1], columns renormalized.
/// Not used by the estimator itself.
inline Matrix project_left_stochastic(const Matrix& a_est) {
  Matrix p = a_est.cwiseMax(0.0).cwiseMin(1.0);
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    const double s = p.col(k).sum();
    if (s > 0.0) {
      p.col(k) /= s;
    } else {
      p.col(k).setConstant(1.0 / static_cast<double>(p.rows()));
    }
  }
  return p;
}

inline constexpr const char* kBoundResidualOrders = "O(mu/delta^2) + O(1/(delta^5 M^2))";

/// Leading term of the wrong-hypothesis probability bound for one agent.
struct ErrorBound {
  std::size_t agent = 0;
  std::size_t wrong = 0;
  std::size_t batch = 0;
  double value = 0.0;
  double trace_r = 0.0;
  std::string residual_orders = kBoundResidualOrders;
};

/// (4/M) Tr(R) sum_{t* in Theta_k*} 1 / KL(L_k(t*) || L_k(wrong)).
inline ErrorBound theorem1_bound(const LikelihoodModel& model, const AgentTruth& truth, std::size_t wrong,
                                 std::size_t batch, double trace_r) {
  model.check_index(wrong);
  if (batch < 1) throw std::invalid_argument("theorem1_bound: M must be >= 1");
  if (!(trace_r >= 0.0)) throw std::invalid_argument("theorem1_bound: Tr(R) must be >= 0");
  if (truth.in_optimal_set(wrong)) {
    std::ostringstream os;
    os << "agent " << model.agent_id() << ": hypothesis " << wrong
       << " is in the optimal set, the bound is undefined";
    throw DomainError(os.str());
  }
  double inverse_kl = 0.0;
  for (auto t : truth.optimal_set) {
    const double kl = kl_divergence(model, t, wrong);
    if (!(kl > 0.0)) throw DomainError("theorem1_bound: zero KL divergence to a wrong hypothesis");
    inverse_kl += 1.0 / kl;
  }
  ErrorBound e;
  e.agent = model.agent_id();
  e.wrong = wrong;
  e.batch = batch;
  e.trace_r = trace_r;
  e.value = 4.0 / static_cast<double>(batch) * trace_r * inverse_kl;
  return e;
}

/// Exact E||L_i - Lbar||^2 contribution of one categorical agent.
inline double exact_agent_trace_r(const LikelihoodModel& model, const AgentTruth& truth) {
  if (model.family() != Family::categorical) throw std::invalid_argument("exact Tr(R) needs a categorical model");
  const auto& pmfs = model.categorical_params().pmfs;
  const std::size_t hyps = model.num_hypotheses();
  const auto t = static_cast<Eigen::Index>(truth.true_state);
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(hyps - 1));
  for (std::size_t j = 1; j < hyps; ++j) {
    mean(static_cast<Eigen::Index>(j - 1)) =
        kl_divergence(model, truth.true_state, j) - kl_divergence(model, truth.true_state, 0);
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < pmfs.cols(); ++s) {
    const double p = pmfs(t, s);
    if (p <= 0.0) continue;
    for (std::size_t j = 1; j < hyps; ++j) {
      const double dev = log_likelihood_ratio(model, static_cast<Observation>(s), 0, j) -
                         mean(static_cast<Eigen::Index>(j - 1));
      total += p * dev * dev;
    }
  }
  return total;
}

struct TraceEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of E||L_i - Lbar||_F^2 with its standard error.
inline TraceEstimate sample_trace_r(std::span<const LikelihoodModel> models, std::span<const AgentTruth> truths,
                                    std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("sample_trace_r: samples must be >= 1");
  const Matrix mean = expected_log_ratio(models, truths);
  Rng rng = make_rng(seed);
  std::vector<Observation> obs(models.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < models.size(); ++k) obs[k] = sample_observation(models[k], truths[k].true_state, rng);
    const double v = (likelihood_ratios(models, obs).entries - mean).squaredNorm();
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double m = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sum_sq - n * m * m) / (n - 1.0)) : 0.0;
  return {m, std::sqrt(var / n)};
}

/// Tr(R) = E||L_i - Lbar||_F^2. Categorical agents are summed exactly over the
/// alphabet; the remaining agents are estimated by Monte Carlo.
inline double estimate_trace_r(std::span<const LikelihoodModel> models, std::span<const AgentTruth> truths,
                               std::size_t samples, std::uint64_t seed) {
  if (models.size() != truths.size()) throw std::invalid_argument("estimate_trace_r: models and truths differ");
  if (samples < 1) throw std::invalid_argument("estimate_trace_r: samples must be >= 1");
  double total = 0.0;
  std::vector<LikelihoodModel> sampled;
  std::vector<AgentTruth> sampled_truths;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].family() == Family::categorical) {
      total += exact_agent_trace_r(models[k], truths[k]);
    } else {
      sampled.push_back(models[k]);
      sampled_truths.push_back(truths[k]);
    }
  }
  if (!sampled.empty()) total += sample_trace_r(sampled, sampled_truths, samples, seed).value;
  return total;
}

/// Ground truth used only for diagnostics and labeling.
struct InverseReference {
  std::optional<Matrix> combination;
  std::optional<Matrix> expected_log_ratio;
  std::vector<std::size_t> majority_states;
};

struct InverseDiagnostics {
  std::vector<std::size_t> iteration;  // stream index of each update
  std::vector<double> step_change;     // ||A_i - A_{i-1}||_F
  std::vector<double> combination_error;
  std::vector<double> likelihood_error;

  std::size_t size() const noexcept { return step_change.size(); }
};

struct InverseResult {
  Matrix combination;
  Matrix log_likelihood;
  Informativeness informativeness;
  HypothesisEstimate hypotheses;
  InverseDiagnostics diagnostics;
  std::size_t consumed = 0;
  bool converged = false;
};

/// Drives InverseState over a stream, applying the stopping rule: stop when
/// the relative Frobenius change of A over the last M updates falls below
/// tol, or when max_iter Lambda matrices have been consumed.
class InverseRunner {
 public:
  InverseRunner(std::size_t n_agents, std::size_t n_hypotheses, InverseConfig config,
                InverseReference reference = {})
      : state_(n_agents, n_hypotheses, config), reference_(std::move(reference)) {}

  InverseState& state() noexcept { return state_; }
  const InverseState& state() const noexcept { return state_; }
  bool done() const noexcept { return done_; }

  /// Feeds one iteration of public beliefs (probabilities). Returns false once
  /// the stopping rule has fired; further input is ignored.
  bool consume_public_beliefs(const Matrix& psi) {
    if (done_) return false;
    return consume_lambda(lambda_from_beliefs(psi).entries);
  }

  bool consume_lambda(const Matrix& lambda) {
    if (done_) return false;
    const Matrix before = state_.combination_estimate();
    if (state_.push(lambda)) record(before);
    const auto& cfg = state_.config();
    if (cfg.max_iter != 0 && state_.iteration() >= cfg.max_iter) done_ = true;
    return !done_;
  }

  InverseResult finish() const {
    if (state_.updates() == 0) {
      std::ostringstream os;
      os << "inverse: stream supplied " << state_.iteration() << " iterations, at least "
         << state_.config().warm_up() + 1 << " are required (M = " << state_.config().batch << ")";
      throw InsufficientDataError(os.str());
    }
    InverseResult r;
    r.combination = state_.combination_estimate();
    r.log_likelihood = state_.likelihood_estimate();
    r.informativeness = informativeness(r.log_likelihood);
    r.hypotheses = estimate_hypothesis_sets(r.informativeness, reference_.majority_states);
    r.diagnostics = diagnostics_;
    r.consumed = state_.iteration();
    r.converged = converged_;
    return r;
  }

 private:
  void record(const Matrix& before) {
    const Matrix& a = state_.combination_estimate();
    diagnostics_.iteration.push_back(state_.iteration());
    diagnostics_.step_change.push_back((a - before).norm());
    if (reference_.combination) diagnostics_.combination_error.push_back((a - *reference_.combination).norm());
    if (reference_.expected_log_ratio) {
      diagnostics_.likelihood_error.push_back((state_.likelihood_estimate() - *reference_.expected_log_ratio).norm());
    }
    const auto& cfg = state_.config();
    if (state_.updates() % cfg.batch == 1 || cfg.batch == 1) {
      if (snapshot_) {
        const double scale = std::max(snapshot_->norm(), std::numeric_limits<double>::min());
        if ((a - *snapshot_).norm() / scale < cfg.tol) {
          converged_ = true;
          done_ = true;
        }
      }
      snapshot_ = a;
    }
  }

  InverseState state_;
  InverseReference reference_;
  InverseDiagnostics diagnostics_;
  std::optional<Matrix> snapshot_;
  bool converged_ = false;
  bool done_ = false;
};

/// Runs the estimator over recorded public beliefs (one n x H pmf matrix per
/// iteration).
inline InverseResult run_inverse(std::span<const Matrix> public_beliefs, const InverseConfig& config,
                                 InverseReference reference = {}) {
  config.validate();
  if (public_beliefs.empty()) {
    throw InsufficientDataError("inverse: empty belief stream");
  }
  const auto n = static_cast<std::size_t>(public_beliefs.front().rows());
  const auto hyps = static_cast<std::size_t>(public_beliefs.front().cols());
  if (public_beliefs.size() < config.warm_up() + 1) {
    std::ostringstream os;
    os << "inverse: stream has " << public_beliefs.size() << " iterations, at least " << config.warm_up() + 1
       << " are required (M = " << config.batch << ")";
    throw InsufficientDataError(os.str());
  }
  InverseRunner runner(n, hyps, config, std::move(reference));
  for (const auto& psi : public_beliefs) {
    if (!runner.consume_public_beliefs(psi)) break;
  }
  return runner.finish();
}

}  // namespace sociallearn
