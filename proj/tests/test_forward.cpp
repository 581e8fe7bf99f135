#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sociallearn/forward.hpp"
#include "test_support.hpp"

using namespace sociallearn;
using testing_support::diagonal_pmfs;
using testing_support::shared_categorical;
using testing_support::to_grid;
using testing_support::to_matrix;

namespace {

BeliefState from_pmf(const Matrix& p) {
  BeliefState s;
  s.log_private = p.array().log().matrix();
  s.log_public = s.log_private;
  return s;
}

Matrix row2(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

}  // namespace

TEST(InitBeliefs, UniformRows) {
  EXPECT_TRUE(init_beliefs(3, 2).private_beliefs().isApprox(Matrix::Constant(3, 2, 0.5), 1e-15));
  EXPECT_TRUE(init_beliefs(5, 4).private_beliefs().isApprox(Matrix::Constant(5, 4, 0.25), 1e-15));
}

TEST(InitBeliefs, SeededRandomIsReproducibleAndNormalized) {
  const auto a = init_beliefs(4, 3, BeliefInit::seeded_random_positive, 99);
  const auto b = init_beliefs(4, 3, BeliefInit::seeded_random_positive, 99);
  EXPECT_EQ(a.log_private, b.log_private);
  const Matrix p = a.private_beliefs();
  EXPECT_TRUE((p.array() > 0.0).all());
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(p.row(k).sum(), 1.0, 1e-12);
  EXPECT_NE(init_beliefs(4, 3, BeliefInit::seeded_random_positive, 100).log_private, a.log_private);
}

TEST(AdaptStep, UninformativeObservationKeepsUniform) {
  const std::vector<LikelihoodModel> ms{LikelihoodModel::categorical(0, Matrix::Constant(3, 2, 0.5))};
  const std::vector<Observation> obs{1.0};
  const Matrix psi = adapt_step(init_beliefs(1, 3), obs, ms, 0.3).array().exp().matrix();
  EXPECT_TRUE(psi.isApprox(Matrix::Constant(1, 3, 1.0 / 3.0), 1e-14));
}

TEST(AdaptStep, SquareRootOfLikelihoodRatio) {
  // L(z|0)/L(z|1) = 4 with delta = 0.5 and a uniform prior
  const std::vector<LikelihoodModel> ms{LikelihoodModel::categorical(0, diagonal_pmfs(2, 0.8))};
  const std::vector<Observation> obs{0.0};
  const Matrix psi = adapt_step(init_beliefs(1, 2), obs, ms, 0.5).array().exp().matrix();
  EXPECT_NEAR(psi(0, 0) / psi(0, 1), 2.0, 1e-14);
}

TEST(AdaptStep, ConcentratedPriorWithEqualLikelihoods) {
  const double eps = 1e-3;
  const double delta = 0.2;
  const std::vector<LikelihoodModel> ms{LikelihoodModel::categorical(0, Matrix::Constant(2, 2, 0.5))};
  const std::vector<Observation> obs{0.0};
  const Matrix psi = adapt_step(from_pmf(row2(1.0 - eps, eps)), obs, ms, delta).array().exp().matrix();
  const double x = std::pow(1.0 - eps, 1.0 - delta);
  const double y = std::pow(eps, 1.0 - delta);
  EXPECT_NEAR(psi(0, 0), x / (x + y), 1e-14);
  EXPECT_NEAR(psi(0, 1), y / (x + y), 1e-14);
}

TEST(AdaptStep, RejectsDeltaOutsideUnitInterval) {
  const std::vector<LikelihoodModel> ms{LikelihoodModel::categorical(0, diagonal_pmfs(2, 0.8))};
  const std::vector<Observation> obs{0.0};
  EXPECT_THROW(adapt_step(init_beliefs(1, 2), obs, ms, 0.0), std::invalid_argument);
  EXPECT_THROW(adapt_step(init_beliefs(1, 2), obs, ms, 1.0), std::invalid_argument);
}

TEST(CombineStep, IdenticalRowsAreFixed) {
  Matrix psi(3, 3);
  psi.rowwise() = Eigen::RowVector3d(0.2, 0.5, 0.3);
  const auto a = generate_erdos_renyi(3, 1.0, 0);
  const Matrix mu = combine_step(psi.array().log().matrix(), a).array().exp().matrix();
  EXPECT_TRUE(mu.isApprox(psi, 1e-14));
}

TEST(CombineStep, SingleAgentIsIdentity) {
  const auto a = CombinationMatrix::from_weights(Matrix::Ones(1, 1));
  const Matrix psi = row2(0.7, 0.3);
  EXPECT_TRUE(combine_step(psi.array().log().matrix(), a).array().exp().matrix().isApprox(psi, 1e-15));
}

TEST(CombineStep, SymmetricPairAveragesToUniform) {
  Matrix psi(2, 2);
  psi << 0.8, 0.2, 0.2, 0.8;
  const auto a = CombinationMatrix::from_weights(Matrix::Constant(2, 2, 0.5));
  const Matrix mu = combine_step(psi.array().log().matrix(), a).array().exp().matrix();
  EXPECT_TRUE(mu.isApprox(Matrix::Constant(2, 2, 0.5), 1e-14));
}

TEST(EstimateState, ArgmaxAndTies) {
  EXPECT_EQ(estimate_state(Eigen::RowVector2d(0.9, 0.1)), (StateEstimate{0, false}));
  EXPECT_EQ(estimate_state(Eigen::RowVector2d(0.5, 0.5)), (StateEstimate{0, true}));
  EXPECT_EQ(estimate_state(Eigen::RowVector3d(0.1, 0.2, 0.7)), (StateEstimate{2, false}));
}

TEST(LambdaFromBeliefs, DirectLogArithmetic) {
  EXPECT_TRUE(lambda_from_beliefs(Matrix::Constant(3, 4, 0.25)).entries.isZero(0.0));
  EXPECT_NEAR(lambda_from_beliefs(row2(0.8, 0.2)).entries(0, 0), std::log(4.0), 1e-15);
  Matrix r(1, 3);
  r << 0.25, 0.25, 0.5;
  const Matrix lam = lambda_from_beliefs(r).entries;
  EXPECT_NEAR(lam(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(lam(0, 1), std::log(0.5), 1e-15);
}

TEST(LambdaFromBeliefs, ZeroBeliefIsNumericalError) {
  EXPECT_THROW(lambda_from_beliefs(row2(1.0, 0.0)), NumericalError);
}

TEST(LinearRecursion, FullAdaptationAndZeroState) {
  const auto a = generate_erdos_renyi(3, 1.0, 0);
  Matrix l(3, 2);
  l << 1.0, -2.0, 0.5, 0.25, -1.0, 3.0;
  const LogRatioMatrix lik{l, RatioKind::likelihood, 1};
  const LogRatioMatrix zero{Matrix::Zero(3, 2), RatioKind::belief, 0};
  const LogRatioMatrix prev{Matrix::Constant(3, 2, 7.0), RatioKind::belief, 0};
  EXPECT_TRUE(linear_recursion_step(prev, lik, a, 1.0).entries.isApprox(l, 0.0));
  EXPECT_TRUE(linear_recursion_step(zero, lik, a, 0.3).entries.isApprox(0.3 * l, 1e-15));
}

TEST(LinearRecursion, ShapeMismatchIsContractError) {
  const auto a = generate_erdos_renyi(3, 1.0, 0);
  const LogRatioMatrix lik{Matrix::Zero(3, 2), RatioKind::likelihood, 1};
  const LogRatioMatrix bad{Matrix::Zero(2, 2), RatioKind::belief, 0};
  EXPECT_THROW(linear_recursion_step(bad, lik, a, 0.1), std::invalid_argument);
}

TEST(LinearRecursion, MatchesOneNonlinearStep) {
  Eigen::MatrixXi adj(3, 3);
  adj << 1, 1, 0, 1, 1, 1, 0, 1, 1;
  const auto a = averaging_rule(adj);
  Matrix pmfs(3, 3);
  pmfs << 0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5;
  const auto ms = shared_categorical(3, pmfs);
  const double delta = 0.35;
  const BeliefState start = init_beliefs(3, 3, BeliefInit::seeded_random_positive, 5);
  const std::vector<Observation> obs{0.0, 2.0, 1.0};

  BeliefState s = start;
  s.log_public = adapt_step(s, obs, ms, delta);
  s.log_private = combine_step(s.log_public, a);
  BeliefState next = s;
  next.log_public = adapt_step(s, obs, ms, delta);
  const LogRatioMatrix lam_prev = lambda_from_beliefs(s.public_beliefs());
  const LogRatioMatrix lam_next = lambda_from_beliefs(next.public_beliefs());
  const auto lik = likelihood_ratios(ms, obs);
  EXPECT_LE((linear_recursion_step(lam_prev, lik, a, delta).entries - lam_next.entries).norm(), 1e-10);
}

TEST(Simulation, NonlinearPathAgreesWithProbabilityDomainOracle) {
  const auto a = generate_erdos_renyi(4, 0.6, 21);
  const Matrix pmfs = diagonal_pmfs(3, 0.5);
  const auto ms = shared_categorical(4, pmfs);
  const std::vector<std::size_t> truth{0, 0, 1, 0};
  const double delta = 0.2;
  SocialLearningSimulator sim(a, ms, truth, delta, 8);
  oracle::Grid mu = oracle::zeros(4, 3);
  for (auto& row : mu) row.assign(3, 1.0 / 3.0);
  oracle::Grid psi;
  const auto grid_a = to_grid(a.weights());
  for (int i = 0; i < 40; ++i) {
    const auto& r = sim.step();
    oracle::Grid lik = oracle::zeros(4, 3);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t t = 0; t < 3; ++t) lik[k][t] = pmfs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r.observations[k]));
    }
    oracle::belief_round(grid_a, lik, delta, mu, psi);
    EXPECT_LE((r.log_public.array().exp().matrix() - to_matrix(psi)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.log_private.array().exp().matrix() - to_matrix(mu)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Simulation, SingleAgentReducesToScalarRecursion) {
  const auto a = CombinationMatrix::from_weights(Matrix::Ones(1, 1));
  const std::vector<LikelihoodModel> ms{LikelihoodModel::categorical(0, diagonal_pmfs(2, 0.7))};
  const double delta = 0.25;
  const auto trace = run_simulation(a, ms, {1}, delta, 200, 3);
  double lam = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    lam = (1.0 - delta) * lam + delta * trace.likelihood_ratios[t](0, 0);
    EXPECT_NEAR(trace.lambdas[t](0, 0), lam, 1e-10);
  }
}

TEST(Simulation, ZeroIterationsGiveEmptyTrace) {
  const auto a = generate_erdos_renyi(3, 1.0, 0);
  const auto trace = run_simulation(a, shared_categorical(3, diagonal_pmfs(2, 0.8)), {0, 0, 0}, 0.1, 0, 1);
  EXPECT_TRUE(trace.empty());
  EXPECT_TRUE(trace.public_beliefs.empty());
  EXPECT_EQ(trace.num_agents, 3u);
}

TEST(Simulation, SameSeedSameTrace) {
  const auto a = generate_erdos_renyi(5, 0.5, 2);
  const auto ms = shared_categorical(5, diagonal_pmfs(3, 0.6));
  const std::vector<std::size_t> truth{0, 1, 2, 0, 1};
  const auto t1 = run_simulation(a, ms, truth, 0.1, 50, 77);
  const auto t2 = run_simulation(a, ms, truth, 0.1, 50, 77);
  for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(t1.public_beliefs[t], t2.public_beliefs[t]);
}

TEST(Simulation, RejectsDisconnectedGraph) {
  const auto a = CombinationMatrix::from_weights(Matrix::Identity(2, 2));
  EXPECT_THROW(run_simulation(a, shared_categorical(2, diagonal_pmfs(2, 0.8)), {0, 0}, 0.1, 5, 1),
               std::invalid_argument);
}

TEST(Simulation, HomogeneousNetworkLearnsTruth) {
  const auto ms = shared_categorical(10, diagonal_pmfs(3, 0.6));
  ASSERT_GE(kl_divergence(ms[0], 0, 1), 0.3);
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = generate_erdos_renyi(10, 0.2, derive_seed(seed, 1));
    const auto trace = run_simulation(a, ms, std::vector<std::size_t>(10, 2), 0.1, 480, derive_seed(seed, 2));
    for (std::size_t t = 380; t < 480; ++t) {
      for (const auto& e : trace.estimates[t]) hits += e.index == 2 ? 1 : 0;
      total += 10;
    }
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.95);
}
