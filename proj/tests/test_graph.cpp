#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "sociallearn/graph.hpp"
#include "sociallearn/graph_io.hpp"
#include "test_support.hpp"

using namespace sociallearn;
using testing_support::to_grid;

namespace {

Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(ErdosRenyi, TwoNodesCompleteIsHalfMatrix) {
  const auto a = generate_erdos_renyi(2, 1.0, 123);
  EXPECT_TRUE(a.weights().isApprox(Matrix::Constant(2, 2, 0.5), 0.0));
}

TEST(ErdosRenyi, CompleteThreeNodesIsUniformThird) {
  const auto a = generate_erdos_renyi(3, 1.0, 9);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a(l, k), 1.0 / 3.0);
  }
}

TEST(ErdosRenyi, SparseTenNodeColumnsSumToOne) {
  for (std::uint64_t seed : {1u, 2u, 3u, 17u, 99u}) {
    const auto a = generate_erdos_renyi(10, 0.2, seed);
    ASSERT_EQ(a.size(), 10u);
    for (Eigen::Index k = 0; k < 10; ++k) EXPECT_NEAR(a.weights().col(k).sum(), 1.0, 1e-12);
    EXPECT_TRUE(oracle::strongly_connected(to_grid(a.weights())));
  }
}

TEST(ErdosRenyi, SameSeedSameMatrix) {
  EXPECT_EQ(generate_erdos_renyi(12, 0.3, 5).weights(), generate_erdos_renyi(12, 0.3, 5).weights());
}

TEST(ErdosRenyi, AveragingRuleAndSymmetricSupport) {
  const auto a = generate_erdos_renyi(8, 0.4, 77);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_GT(a(k, k), 0.0);
    for (std::size_t l = 0; l < 8; ++l) {
      EXPECT_EQ(a.has_edge(l, k), a.has_edge(k, l));
      if (a.has_edge(l, k)) EXPECT_DOUBLE_EQ(a(l, k), 1.0 / static_cast<double>(a.in_degree(k)));
    }
  }
}

TEST(ErdosRenyi, EmptyGraphFailsNamingParameters) {
  try {
    generate_erdos_renyi(5, 0.0, 31);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("n=5"), std::string::npos);
    EXPECT_NE(msg.find("p=0"), std::string::npos);
    EXPECT_NE(msg.find("seed=31"), std::string::npos);
  }
}

TEST(ErdosRenyi, RejectsInvalidArguments) {
  EXPECT_THROW(generate_erdos_renyi(1, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(generate_erdos_renyi(4, 1.5, 0), std::invalid_argument);
  EXPECT_THROW(generate_erdos_renyi(4, -0.1, 0), std::invalid_argument);
}

TEST(CombinationMatrixTest, RejectsBadColumns) {
  EXPECT_THROW(CombinationMatrix::from_weights(m2(0.5, 0.5, 0.6, 0.5)), std::invalid_argument);
  EXPECT_THROW(CombinationMatrix::from_weights(m2(1.2, 0.0, -0.2, 1.0)), std::invalid_argument);
  EXPECT_THROW(CombinationMatrix::from_weights(Matrix::Identity(2, 3)), std::invalid_argument);
  EXPECT_NO_THROW(CombinationMatrix::from_weights(m2(0.25, 1.0, 0.75, 0.0)));
}

TEST(StrongConnectivity, IdentityIsNot) {
  EXPECT_FALSE(is_strongly_connected(CombinationMatrix::from_weights(Matrix::Identity(3, 3))));
}

TEST(StrongConnectivity, CompleteAveragingIs) {
  EXPECT_TRUE(is_strongly_connected(CombinationMatrix::from_weights(Matrix::Constant(3, 3, 1.0 / 3.0))));
}

TEST(StrongConnectivity, TwoCycleWithoutSelfLoopsIsNot) {
  EXPECT_FALSE(is_strongly_connected(CombinationMatrix::from_weights(m2(0.0, 1.0, 1.0, 0.0))));
}

TEST(StrongConnectivity, DirectedRingWithOneSelfLoop) {
  Matrix w = Matrix::Zero(4, 4);
  w(0, 0) = 0.5;
  w(3, 0) = 0.5;
  w(0, 1) = 1.0;
  w(1, 2) = 1.0;
  w(2, 3) = 1.0;
  EXPECT_TRUE(is_strongly_connected(w));
  EXPECT_EQ(is_strongly_connected(w), oracle::strongly_connected(to_grid(w)));
}

TEST(Perron, SymmetricHalfMatrix) {
  const auto u = perron_vector(CombinationMatrix::from_weights(Matrix::Constant(2, 2, 0.5)));
  EXPECT_NEAR(u.entries(0), 0.5, 1e-12);
  EXPECT_NEAR(u.entries(1), 0.5, 1e-12);
}

TEST(Perron, DoublyStochasticIsUniform) {
  Matrix w(4, 4);
  w << 0.4, 0.3, 0.0, 0.3,  //
      0.3, 0.4, 0.3, 0.0,   //
      0.0, 0.3, 0.4, 0.3,   //
      0.3, 0.0, 0.3, 0.4;
  const auto u = perron_vector(CombinationMatrix::from_weights(w));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(u.entries(i), 0.25, 1e-12);
}

TEST(Perron, MatchesPowerIterationOracle) {
  Eigen::MatrixXi adj(3, 3);
  adj << 1, 1, 0,  //
      1, 1, 1,     //
      0, 1, 1;
  const auto a = averaging_rule(adj);
  const auto u = perron_vector(a);
  const auto ref = oracle::power_iteration(to_grid(a.weights()));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(u.entries(i), ref[static_cast<std::size_t>(i)], 1e-12);
  // degree-proportional for undirected averaging graphs: (2, 3, 2) / 7
  EXPECT_NEAR(u.entries(1), 3.0 / 7.0, 1e-12);
}

TEST(Perron, RejectsDisconnected) {
  EXPECT_THROW(perron_vector(CombinationMatrix::from_weights(Matrix::Identity(3, 3))), std::invalid_argument);
}

TEST(Centrality, MostNeighboursLowestIndexOnTies) {
  Eigen::MatrixXi adj(4, 4);
  adj << 1, 1, 0, 0,  //
      1, 1, 1, 1,     //
      0, 1, 1, 0,     //
      0, 1, 0, 1;
  EXPECT_EQ(most_central_agent(averaging_rule(adj)), 1u);
  EXPECT_EQ(most_central_agent(CombinationMatrix::from_weights(Matrix::Constant(3, 3, 1.0 / 3.0))), 0u);
}

TEST(GraphIo, CsvRoundTripIsExact) {
  const auto a = generate_erdos_renyi(7, 0.5, 4);
  std::stringstream ss;
  write_combination_csv(ss, a);
  EXPECT_EQ(read_combination_csv(ss).weights(), a.weights());
}

TEST(GraphIo, JsonRoundTripIsExact) {
  const auto a = generate_erdos_renyi(6, 0.5, 8);
  EXPECT_EQ(combination_from_json(combination_to_json(a)).weights(), a.weights());
}

TEST(GraphIo, MalformedInputIsDataError) {
  std::stringstream missing_header("0.5,0.5\n0.5,0.5\n");
  EXPECT_THROW(read_combination_csv(missing_header), DataError);
  std::stringstream bad_sum("# combination-matrix n=2\n0.5,0.5\n0.6,0.5\n");
  EXPECT_THROW(read_combination_csv(bad_sum), DataError);
  std::stringstream short_row("# combination-matrix n=2\n0.5\n0.5,0.5\n");
  EXPECT_THROW(read_combination_csv(short_row), DataError);
  EXPECT_THROW(load_combination_matrix("/nonexistent/graph.csv"), DataError);
}
