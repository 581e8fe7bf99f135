#pragma once

// Hypothesis spaces and per-agent likelihood families. Two families are
// supported: categorical over a finite alphabet and scalar Gaussian with a
// per-hypothesis mean and shared variance. Observations are doubles; for the
// categorical family an observation is the integral symbol index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sociallearn/errors.hpp"
#include "sociallearn/random.hpp"

namespace sociallearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Observation = double;

/// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;
/// Two hypotheses are indistinguishable when their KL divergence is below this.
inline constexpr double kIndistinguishableKl = 1e-12;

class HypothesisSpace {
 public:
  explicit HypothesisSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw std::invalid_argument("hypothesis space needs at least 2 labels");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw std::invalid_argument("hypothesis labels must be distinct");
  }

  /// Labels "theta0" .. "theta{H-1}".
  static HypothesisSpace indexed(std::size_t count) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < count; ++i) labels.push_back("theta" + std::to_string(i));
    return HypothesisSpace(std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::invalid_argument("unknown hypothesis label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

 private:
  std::vector<std::string> labels_;
};

enum class Family { categorical, gaussian };

struct CategoricalParams {
  Matrix pmfs;  // H x S, row h is L(. | theta_h)
};

struct GaussianParams {
  Vector means;  // length H
  double variance = 1.0;
};

class LikelihoodModel {
 public:
  static LikelihoodModel categorical(std::size_t agent_id, Matrix pmfs) {
    if (pmfs.rows() < 2 || pmfs.cols() < 1) {
      throw std::invalid_argument("categorical model needs >= 2 hypotheses and >= 1 symbol");
    }
    for (Eigen::Index h = 0; h < pmfs.rows(); ++h) {
      if (!pmfs.row(h).allFinite() || (pmfs.row(h).array() < 0.0).any() ||
          std::abs(pmfs.row(h).sum() - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "agent " << agent_id << ": row " << h << " of categorical model is not a pmf";
        throw std::invalid_argument(os.str());
      }
    }
    return LikelihoodModel(agent_id, CategoricalParams{std::move(pmfs)});
  }

  static LikelihoodModel gaussian(std::size_t agent_id, Vector means, double variance) {
    if (means.size() < 2) throw std::invalid_argument("gaussian model needs >= 2 hypotheses");
    if (!means.allFinite()) throw std::invalid_argument("gaussian means must be finite");
    if (!(variance > 0.0) || !std::isfinite(variance)) {
      throw std::invalid_argument("gaussian variance must be positive");
    }
    return LikelihoodModel(agent_id, GaussianParams{std::move(means), variance});
  }

  std::size_t agent_id() const noexcept { return agent_id_; }
  Family family() const noexcept {
    return std::holds_alternative<CategoricalParams>(params_) ? Family::categorical : Family::gaussian;
  }
  std::size_t num_hypotheses() const noexcept {
    return std::visit(
        [](const auto& p) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(p)>, CategoricalParams>) {
            return static_cast<std::size_t>(p.pmfs.rows());
          } else {
            return static_cast<std::size_t>(p.means.size());
          }
        },
        params_);
  }
  const CategoricalParams& categorical_params() const { return std::get<CategoricalParams>(params_); }
  const GaussianParams& gaussian_params() const { return std::get<GaussianParams>(params_); }

  /// log L(obs | theta_h), probabilities floored at 1e-12.
  double log_density(Observation obs, std::size_t h) const {
    check_index(h);
    if (const auto* c = std::get_if<CategoricalParams>(&params_)) {
      const auto s = symbol_of(obs, static_cast<std::size_t>(c->pmfs.cols()));
      return std::log(std::max(c->pmfs(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(s)),
                               kProbabilityFloor));
    }
    const auto& g = std::get<GaussianParams>(params_);
    const double d = obs - g.means(static_cast<Eigen::Index>(h));
    return -0.5 * d * d / g.variance - 0.5 * std::log(2.0 * std::numbers::pi * g.variance);
  }

  void check_index(std::size_t h) const {
    if (h >= num_hypotheses()) {
      std::ostringstream os;
      os << "agent " << agent_id_ << ": hypothesis index " << h << " out of range";
      throw std::invalid_argument(os.str());
    }
  }

 private:
  LikelihoodModel(std::size_t id, std::variant<CategoricalParams, GaussianParams> p)
      : agent_id_(id), params_(std::move(p)) {}

  static std::size_t symbol_of(Observation obs, std::size_t alphabet) {
    if (!(obs >= 0.0) || obs != std::floor(obs) || obs >= static_cast<double>(alphabet)) {
      std::ostringstream os;
      os << "observation " << obs << " is not a symbol of a " << alphabet << "-letter alphabet";
      throw std::invalid_argument(os.str());
    }
    return static_cast<std::size_t>(obs);
  }

  std::size_t agent_id_;
  std::variant<CategoricalParams, GaussianParams> params_;
};

/// I.i.d. draw from L(. | theta_state) using the caller's stream.
inline Observation sample_observation(const LikelihoodModel& model, std::size_t state, Rng& rng) {
  model.check_index(state);
  if (model.family() == Family::categorical) {
    const auto& pmfs = model.categorical_params().pmfs;
    const auto row = pmfs.row(static_cast<Eigen::Index>(state));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    Eigen::Index last_positive = 0;
    for (Eigen::Index s = 0; s < row.size(); ++s) {
      if (row(s) <= 0.0) continue;
      last_positive = s;
      cumulative += row(s);
      if (u < cumulative) return static_cast<Observation>(s);
    }
    return static_cast<Observation>(last_positive);
  }
  const auto& g = model.gaussian_params();
  std::normal_distribution<double> normal(g.means(static_cast<Eigen::Index>(state)), std::sqrt(g.variance));
  return normal(rng);
}

/// log L(obs | a) - log L(obs | b).
inline double log_likelihood_ratio(const LikelihoodModel& model, Observation obs, std::size_t a,
                                   std::size_t b) {
  if (a == b) {
    model.check_index(a);
    return 0.0;
  }
  const double r = model.log_density(obs, a) - model.log_density(obs, b);
  if (!std::isfinite(r)) {
    std::ostringstream os;
    os << "agent " << model.agent_id() << ": non-finite log-likelihood ratio for hypotheses " << a
       << " and " << b;
    throw NumericalError(os.str());
  }
  return r;
}

/// D_KL(L(a) || L(b)); exact summation for categorical, closed form for Gaussian.
inline double kl_divergence(const LikelihoodModel& model, std::size_t a, std::size_t b) {
  model.check_index(a);
  model.check_index(b);
  if (a == b) return 0.0;
  if (model.family() == Family::gaussian) {
    const auto& g = model.gaussian_params();
    const double d = g.means(static_cast<Eigen::Index>(a)) - g.means(static_cast<Eigen::Index>(b));
    return d * d / (2.0 * g.variance);
  }
  const auto& pmfs = model.categorical_params().pmfs;
  double kl = 0.0;
  for (Eigen::Index s = 0; s < pmfs.cols(); ++s) {
    const double p = pmfs(static_cast<Eigen::Index>(a), s);
    if (p <= 0.0) continue;
    const double q = std::max(pmfs(static_cast<Eigen::Index>(b), s), kProbabilityFloor);
    kl += p * (std::log(p) - std::log(q));
  }
  return std::max(kl, 0.0);
}

struct BoundConstant {
  double b = 0.0;  // +infinity when some family has unbounded log-ratios
  std::vector<std::string> warnings;
  bool finite() const noexcept { return std::isfinite(b); }
};

/// Largest |log L(z|t)/L(z|t')| over all agents, symbols and hypothesis pairs.
/// Gaussian families make the constant infinite and add a warning. A
/// categorical symbol that is impossible under one hypothesis but possible
/// under another raises AssumptionViolation.
inline BoundConstant check_bounded_likelihoods(std::span<const LikelihoodModel> models) {
  BoundConstant result;
  for (const auto& m : models) {
    if (m.family() == Family::gaussian) {
      result.b = std::numeric_limits<double>::infinity();
      result.warnings.push_back("agent " + std::to_string(m.agent_id()) +
                                ": gaussian likelihoods have unbounded log-ratios");
      continue;
    }
    const auto& pmfs = m.categorical_params().pmfs;
    for (Eigen::Index s = 0; s < pmfs.cols(); ++s) {
      const auto column = pmfs.col(s);
      const double hi = column.maxCoeff();
      const double lo = column.minCoeff();
      if (hi <= 0.0) continue;  // symbol outside every hypothesis' support
      if (lo <= 0.0) {
        std::ostringstream os;
        os << "agent " << m.agent_id() << ": symbol " << s
           << " has zero probability under some hypothesis but not all";
        throw AssumptionViolation(os.str());
      }
      result.b = std::max(result.b, std::log(hi) - std::log(lo));
    }
  }
  return result;
}

/// Hypotheses whose distribution equals that of `true_state` (KL < 1e-12).
inline std::vector<std::size_t> optimal_set(const LikelihoodModel& model, std::size_t true_state) {
  model.check_index(true_state);
  std::vector<std::size_t> out;
  for (std::size_t h = 0; h < model.num_hypotheses(); ++h) {
    if (h == true_state || kl_divergence(model, true_state, h) < kIndistinguishableKl) out.push_back(h);
  }
  return out;
}

struct AgentTruth {
  std::size_t true_state = 0;
  std::vector<std::size_t> optimal_set;

  bool in_optimal_set(std::size_t h) const {
    return std::find(optimal_set.begin(), optimal_set.end(), h) != optimal_set.end();
  }
};

inline AgentTruth make_truth(const LikelihoodModel& model, std::size_t true_state) {
  return AgentTruth{true_state, optimal_set(model, true_state)};
}

inline std::vector<AgentTruth> make_truths(std::span<const LikelihoodModel> models,
                                           std::span<const std::size_t> states) {
  if (models.size() != states.size()) {
    throw std::invalid_argument("one true state per agent model is required");
  }
  std::vector<AgentTruth> out;
  out.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) out.push_back(make_truth(models[k], states[k]));
  return out;
}

/// Expected log-likelihood ratio matrix: entry (k, j-1) is
/// KL(L_k(t*) || L_k(t_j)) - KL(L_k(t*) || L_k(t_0)), for j = 1..H-1.
inline Matrix expected_log_ratio(std::span<const LikelihoodModel> models,
                                 std::span<const AgentTruth> truths) {
  if (models.empty() || models.size() != truths.size()) {
    throw std::invalid_argument("expected_log_ratio: models and truths must be non-empty and aligned");
  }
  const std::size_t hyps = models.front().num_hypotheses();
  Matrix out(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(hyps - 1));
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].num_hypotheses() != hyps) {
      throw std::invalid_argument("all agents must share the hypothesis space");
    }
    const std::size_t t = truths[k].true_state;
    const double base = kl_divergence(models[k], t, 0);
    for (std::size_t j = 1; j < hyps; ++j) {
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j - 1)) =
          kl_divergence(models[k], t, j) - base;
    }
  }
  return out;
}

}  // namespace sociallearn
