#pragma once

// Randomized invariant checks shared by the unit tests and the acceptance binary.
// Each check returns how many instances it ran and the worst observed value.

#include <algorithm>
#include <cmath>
#include <random>

#include "sociallearn/forward.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/inverse.hpp"
#include "sociallearn/models.hpp"
#include "sociallearn/random.hpp"

namespace properties {

using namespace sociallearn;

struct Outcome {
  std::size_t cases = 0;
  double worst = 0.0;      // largest violation measure seen
  std::size_t failures = 0;
};

inline Matrix random_pmfs(std::size_t hyps, std::size_t symbols, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix p(static_cast<Eigen::Index>(hyps), static_cast<Eigen::Index>(symbols));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = u(rng);
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Connected ER graph with random size and edge probability.
inline CombinationMatrix random_graph(Rng& rng, std::size_t max_n = 20) {
  std::uniform_real_distribution<double> prob(0.15, 1.0);
  for (;;) {
    const std::size_t n = pick(rng, 2, max_n);
    try {
      return generate_erdos_renyi(n, prob(rng), rng());
    } catch (const GenerationError&) {
    }
  }
}

/// Every private and public belief row sums to one over random short runs.
inline Outcome belief_normalization(std::size_t cases, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> delta(0.01, 0.99);
  Outcome o;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto a = random_graph(rng, 12);
    const std::size_t hyps = pick(rng, 2, 5);
    std::vector<LikelihoodModel> models;
    std::vector<std::size_t> states;
    for (std::size_t k = 0; k < a.size(); ++k) {
      models.push_back(LikelihoodModel::categorical(k, random_pmfs(hyps, pick(rng, 2, 6), rng)));
      states.push_back(pick(rng, 0, hyps - 1));
    }
    SocialLearningSimulator sim(a, models, states, delta(rng), rng(), BeliefInit::seeded_random_positive);
    for (int i = 0; i < 60; ++i) {
      const auto& r = sim.step();
      const Eigen::VectorXd pub = r.log_public.array().exp().rowwise().sum();
      const Eigen::VectorXd pri = r.log_private.array().exp().rowwise().sum();
      o.worst = std::max({o.worst, (pub.array() - 1.0).abs().maxCoeff(), (pri.array() - 1.0).abs().maxCoeff()});
    }
    ++o.cases;
  }
  o.failures = o.worst <= 1e-10 ? 0 : 1;
  return o;
}

/// Generated combination matrices are nonnegative with unit column sums.
inline Outcome left_stochastic(std::size_t cases, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Outcome o;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto a = random_graph(rng, 40);
    const Matrix& w = a.weights();
    o.worst = std::max(o.worst, (w.colwise().sum().array() - 1.0).abs().maxCoeff());
    if ((w.array() < 0.0).any()) ++o.failures;
    ++o.cases;
  }
  if (o.worst > 1e-12) ++o.failures;
  return o;
}

/// d(j1, j2) == -d(j2, j1) bit for bit; worst is the count of mismatches.
inline Outcome antisymmetry(std::size_t cases, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 5.0);
  Outcome o;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = pick(rng, 1, 10);
    const std::size_t hyps = pick(rng, 2, 8);
    Matrix l(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(hyps - 1));
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      for (Eigen::Index k = 0; k < l.cols(); ++k) l(r, k) = normal(rng);
    }
    const auto d = informativeness(l);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t a = 0; a < hyps; ++a) {
        for (std::size_t b = 0; b < hyps; ++b) {
          if (d(k, a, b) != -d(k, b, a)) ++o.failures;
        }
      }
    }
    ++o.cases;
  }
  o.worst = static_cast<double>(o.failures);
  return o;
}

/// ||A u - u||_inf for the computed Perron vector, plus positivity and unit sum.
inline Outcome perron_residual(std::size_t cases, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Outcome o;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto a = random_graph(rng, 30);
    const Vector u = perron_vector(a).entries;
    o.worst = std::max(o.worst, (a.weights() * u - u).cwiseAbs().maxCoeff());
    if ((u.array() <= 0.0).any() || std::abs(u.sum() - 1.0) > 1e-12) ++o.failures;
    ++o.cases;
  }
  if (o.worst > 1e-10) ++o.failures;
  return o;
}

/// KL >= 0 for random categorical and Gaussian pairs; worst is the most
/// negative value seen (reported as a positive magnitude).
inline Outcome kl_nonnegative(std::size_t cases, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> mean(0.0, 3.0);
  std::uniform_real_distribution<double> var(0.05, 5.0);
  Outcome o;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t hyps = pick(rng, 2, 6);
    const auto cat = LikelihoodModel::categorical(0, random_pmfs(hyps, pick(rng, 2, 8), rng));
    Vector means(static_cast<Eigen::Index>(hyps));
    for (Eigen::Index h = 0; h < means.size(); ++h) means(h) = mean(rng);
    const auto gauss = LikelihoodModel::gaussian(0, means, var(rng));
    for (std::size_t a = 0; a < hyps; ++a) {
      for (std::size_t b = 0; b < hyps; ++b) {
        for (double kl : {kl_divergence(cat, a, b), kl_divergence(gauss, a, b)}) {
          if (!(kl >= 0.0)) {
            ++o.failures;
            o.worst = std::max(o.worst, -kl);
          }
        }
      }
    }
    ++o.cases;
  }
  return o;
}

}  // namespace properties
