#pragma once

// Adaptive social learning: local adaptive Bayesian update (public beliefs),
// geometric-average combination (private beliefs), argmax state estimates and
// the equivalent linear recursion on log-ratio matrices.
//
// Beliefs are held in the log domain; rows are normalized with a max-shifted
// log-sum-exp so losing hypotheses never underflow to zero.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sociallearn/errors.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/models.hpp"
#include "sociallearn/random.hpp"

namespace sociallearn {

/// Floor used when beliefs leave the log domain (trace recording, files).
inline constexpr double kBeliefFloor = 1e-300;

enum class BeliefInit { uniform, seeded_random_positive };

/// Log-domain private (mu) and public (psi) beliefs, one row per agent.
struct BeliefState {
  Matrix log_private;
  Matrix log_public;
  std::size_t iteration = 0;

  std::size_t num_agents() const noexcept { return static_cast<std::size_t>(log_private.rows()); }
  std::size_t num_hypotheses() const noexcept { return static_cast<std::size_t>(log_private.cols()); }
  Matrix private_beliefs() const { return log_private.array().exp().matrix(); }
  Matrix public_beliefs() const { return log_public.array().exp().matrix(); }
};

/// Subtracts each row's log-sum-exp so that exp(row) sums to one.
inline Matrix normalize_log_rows(Matrix m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
  return m;
}

inline BeliefState init_beliefs(std::size_t n, std::size_t hyps, BeliefInit mode = BeliefInit::uniform,
                                std::uint64_t seed = 0) {
  if (n < 1) throw std::invalid_argument("init_beliefs: need at least one agent");
  if (hyps < 2) throw std::invalid_argument("init_beliefs: need at least two hypotheses");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(hyps);
  Matrix p(rows, cols);
  if (mode == BeliefInit::uniform) {
    p.setConstant(1.0 / static_cast<double>(hyps));
  } else {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) p(r, c) = unit(rng);
      p.row(r) /= p.row(r).sum();
    }
  }
  BeliefState s;
  s.log_private = normalize_log_rows(p.array().log().matrix());
  s.log_public = s.log_private;
  return s;
}

/// Public beliefs psi_k(t) proportional to L_k(z_k|t)^delta * mu_k(t)^(1-delta),
/// returned in the log domain.
inline Matrix adapt_step(const BeliefState& beliefs, std::span<const Observation> observations,
                         std::span<const LikelihoodModel> models, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("adapt_step: delta must lie in (0, 1)");
  const std::size_t n = beliefs.num_agents();
  if (observations.size() != n || models.size() != n) {
    throw std::invalid_argument("adapt_step: one observation and one model per agent required");
  }
  Matrix out(beliefs.log_private.rows(), beliefs.log_private.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (models[k].num_hypotheses() != beliefs.num_hypotheses()) {
      throw std::invalid_argument("adapt_step: model hypothesis count does not match beliefs");
    }
    for (std::size_t h = 0; h < beliefs.num_hypotheses(); ++h) {
      const double ll = models[k].log_density(observations[k], h);
      if (!std::isfinite(ll)) {
        std::ostringstream os;
        os << "non-finite log-likelihood at agent " << k << ", hypothesis " << h;
        throw NumericalError(os.str());
      }
      const auto hh = static_cast<Eigen::Index>(h);
      out(kk, hh) = delta * ll + (1.0 - delta) * beliefs.log_private(kk, hh);
    }
  }
  return normalize_log_rows(std::move(out));
}

/// Geometric averaging: log mu_k = sum_l a_{lk} log psi_l, renormalized.
inline Matrix combine_step(const Matrix& log_public, const CombinationMatrix& a) {
  if (static_cast<std::size_t>(log_public.rows()) != a.size()) {
    throw std::invalid_argument("combine_step: belief rows do not match the combination matrix");
  }
  return normalize_log_rows(a.weights().transpose() * log_public);
}

struct StateEstimate {
  std::size_t index = 0;
  bool tie = false;

  friend bool operator==(const StateEstimate&, const StateEstimate&) = default;
};

/// Argmax over a belief row (pmf or log pmf). Ties resolve to the lowest index
/// and set `tie`.
inline StateEstimate estimate_state(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (row.size() == 0) throw std::invalid_argument("estimate_state: empty belief row");
  StateEstimate e;
  for (Eigen::Index h = 1; h < row.size(); ++h) {
    if (row(h) > row(static_cast<Eigen::Index>(e.index))) e.index = static_cast<std::size_t>(h);
  }
  const double best = row(static_cast<Eigen::Index>(e.index));
  e.tie = (row.array() == best).count() > 1;
  return e;
}

enum class RatioKind { belief, likelihood };

/// n x (H-1) matrix of log-ratios against the reference hypothesis 0.
struct LogRatioMatrix {
  Matrix entries;
  RatioKind kind = RatioKind::belief;
  std::size_t iteration = 0;
};

/// [Lambda]_{k,j} = log psi_k(0) - log psi_k(j) from log-domain beliefs.
inline LogRatioMatrix lambda_from_log_beliefs(const Matrix& log_psi, std::size_t iteration = 0) {
  if (log_psi.cols() < 2) throw std::invalid_argument("lambda_from_log_beliefs: need H >= 2");
  const Eigen::Index h1 = log_psi.cols() - 1;
  Matrix lam = log_psi.col(0).replicate(1, h1) - log_psi.rightCols(h1);
  if (!lam.allFinite()) throw NumericalError("non-finite belief log-ratio");
  return {std::move(lam), RatioKind::belief, iteration};
}

/// Same from beliefs given as probabilities; a zero entry is a numerical error.
inline LogRatioMatrix lambda_from_beliefs(const Matrix& psi, std::size_t iteration = 0) {
  for (Eigen::Index r = 0; r < psi.rows(); ++r) {
    for (Eigen::Index c = 0; c < psi.cols(); ++c) {
      if (!(psi(r, c) > 0.0) || !std::isfinite(psi(r, c))) {
        std::ostringstream os;
        os << "public belief of agent " << r << " on hypothesis " << c << " is not positive";
        throw NumericalError(os.str());
      }
    }
  }
  return lambda_from_log_beliefs(psi.array().log().matrix(), iteration);
}

/// [L]_{k,j} = log L_k(z_k | 0) - log L_k(z_k | j).
inline LogRatioMatrix likelihood_ratios(std::span<const LikelihoodModel> models,
                                        std::span<const Observation> observations,
                                        std::size_t iteration = 0) {
  if (models.empty() || models.size() != observations.size()) {
    throw std::invalid_argument("likelihood_ratios: one observation per model required");
  }
  const std::size_t hyps = models.front().num_hypotheses();
  Matrix out(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(hyps - 1));
  for (std::size_t k = 0; k < models.size(); ++k) {
    for (std::size_t j = 1; j < hyps; ++j) {
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j - 1)) =
          log_likelihood_ratio(models[k], observations[k], 0, j);
    }
  }
  return {std::move(out), RatioKind::likelihood, iteration};
}

/// Lambda_i = (1 - delta) A^T Lambda_{i-1} + delta L_i.
inline LogRatioMatrix linear_recursion_step(const LogRatioMatrix& previous, const LogRatioMatrix& likelihood,
                                            const CombinationMatrix& a, double delta) {
  const auto n = static_cast<Eigen::Index>(a.size());
  if (previous.entries.rows() != n || likelihood.entries.rows() != n ||
      previous.entries.cols() != likelihood.entries.cols()) {
    throw std::invalid_argument("linear_recursion_step: shape mismatch");
  }
  Matrix next = (1.0 - delta) * a.weights().transpose() * previous.entries + delta * likelihood.entries;
  return {std::move(next), RatioKind::belief, likelihood.iteration};
}

/// One completed adapt + combine iteration.
struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<Observation> observations;
  Matrix log_public;
  Matrix log_private;
  LogRatioMatrix likelihood;
  std::vector<StateEstimate> estimates;  // argmax of private beliefs
};

/// Step-by-step simulator. Observations are drawn i.i.d. per agent from
/// L_k(. | true state of k) on a single seeded stream, agent order 0..n-1.
class SocialLearningSimulator {
 public:
  SocialLearningSimulator(CombinationMatrix a, std::vector<LikelihoodModel> models,
                          std::vector<std::size_t> true_states, double delta, std::uint64_t seed,
                          BeliefInit init = BeliefInit::uniform)
      : a_(std::move(a)),
        models_(std::move(models)),
        truths_(std::move(true_states)),
        delta_(delta),
        rng_(make_rng(seed)) {
    if (models_.size() != a_.size() || truths_.size() != a_.size()) {
      throw std::invalid_argument("simulator: need one model and one true state per agent");
    }
    if (!(delta_ > 0.0 && delta_ < 1.0)) throw std::invalid_argument("simulator: delta must lie in (0, 1)");
    const std::size_t hyps = models_.front().num_hypotheses();
    for (std::size_t k = 0; k < models_.size(); ++k) {
      if (models_[k].num_hypotheses() != hyps) throw std::invalid_argument("simulator: hypothesis counts differ");
      models_[k].check_index(truths_[k]);
    }
    state_ = init_beliefs(a_.size(), hyps, init, derive_seed(seed, 0xbe11ef));
    record_.observations.resize(a_.size());
    record_.estimates.resize(a_.size());
  }

  const IterationRecord& step() {
    const std::size_t i = state_.iteration + 1;
    try {
      for (std::size_t k = 0; k < models_.size(); ++k) {
        record_.observations[k] = sample_observation(models_[k], truths_[k], rng_);
      }
      state_.log_public = adapt_step(state_, record_.observations, models_, delta_);
      state_.log_private = combine_step(state_.log_public, a_);
      record_.likelihood = likelihood_ratios(models_, record_.observations, i);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(i) + ": " + e.what());
    }
    state_.iteration = i;
    record_.iteration = i;
    record_.log_public = state_.log_public;
    record_.log_private = state_.log_private;
    for (std::size_t k = 0; k < models_.size(); ++k) {
      record_.estimates[k] = estimate_state(state_.log_private.row(static_cast<Eigen::Index>(k)));
    }
    return record_;
  }

  const BeliefState& state() const noexcept { return state_; }
  const CombinationMatrix& combination() const noexcept { return a_; }
  const std::vector<LikelihoodModel>& models() const noexcept { return models_; }
  double delta() const noexcept { return delta_; }

 private:
  CombinationMatrix a_;
  std::vector<LikelihoodModel> models_;
  std::vector<std::size_t> truths_;
  double delta_;
  Rng rng_;
  BeliefState state_;
  IterationRecord record_;
};

struct RecordOptions {
  bool public_beliefs = true;
  bool log_ratios = true;
  bool observations = false;
  BeliefInit init = BeliefInit::uniform;
};

/// Recorded run. Index t of every vector holds iteration t + 1.
struct SimulationTrace {
  std::size_t num_agents = 0;
  std::size_t num_hypotheses = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::vector<Matrix> public_beliefs;     // psi, floored at kBeliefFloor
  std::vector<Matrix> lambdas;            // belief log-ratios
  std::vector<Matrix> likelihood_ratios;  // realized likelihood log-ratios
  std::vector<std::vector<Observation>> observations;
  std::vector<std::vector<StateEstimate>> estimates;

  std::size_t size() const noexcept { return estimates.size(); }
  bool empty() const noexcept { return estimates.empty(); }
};

/// Runs `iterations` adapt/combine rounds. Zero iterations gives an empty trace.
inline SimulationTrace run_simulation(const CombinationMatrix& a, const std::vector<LikelihoodModel>& models,
                                      const std::vector<std::size_t>& true_states, double delta,
                                      std::size_t iterations, std::uint64_t seed,
                                      const RecordOptions& record = {}) {
  if (!is_strongly_connected(a)) throw std::invalid_argument("run_simulation: graph is not strongly connected");
  SocialLearningSimulator sim(a, models, true_states, delta, seed, record.init);
  SimulationTrace trace;
  trace.num_agents = a.size();
  trace.num_hypotheses = models.front().num_hypotheses();
  trace.delta = delta;
  trace.seed = seed;
  trace.estimates.reserve(iterations);
  for (std::size_t t = 0; t < iterations; ++t) {
    const IterationRecord& r = sim.step();
    if (record.public_beliefs) {
      trace.public_beliefs.push_back(r.log_public.array().exp().max(kBeliefFloor).matrix());
    }
    if (record.log_ratios) {
      trace.lambdas.push_back(lambda_from_log_beliefs(r.log_public).entries);
      trace.likelihood_ratios.push_back(r.likelihood.entries);
    }
    if (record.observations) trace.observations.push_back(r.observations);
    trace.estimates.push_back(r.estimates);
  }
  return trace;
}

}  // namespace sociallearn
