#pragma once

// Combination matrices over directed agent graphs: construction, validation,
// Erdos-Renyi generation with the averaging rule, strong connectivity and the
// Perron eigenvector.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sociallearn/errors.hpp"
#include "sociallearn/random.hpp"

namespace sociallearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kColumnSumTolerance = 1e-12;

/// Left-stochastic weighted adjacency. Entry (l, k) is the trust agent k puts
/// in agent l; a positive entry is the directed edge l -> k.
class CombinationMatrix {
 public:
  /// Validates and wraps `weights`. Throws std::invalid_argument when the
  /// matrix is not square, has entries outside [0, 1], or a column whose sum
  /// differs from 1 by more than 1e-12.
  static CombinationMatrix from_weights(Matrix weights) {
    if (weights.rows() == 0 || weights.rows() != weights.cols()) {
      throw std::invalid_argument("combination matrix must be square and non-empty");
    }
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
      for (Eigen::Index l = 0; l < weights.rows(); ++l) {
        const double w = weights(l, k);
        if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
          std::ostringstream os;
          os << "combination weight (" << l << "," << k << ") = " << w << " outside [0,1]";
          throw std::invalid_argument(os.str());
        }
      }
      const double s = weights.col(k).sum();
      if (std::abs(s - 1.0) > kColumnSumTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "column " << k << " of combination matrix sums to " << s << ", expected 1";
        throw std::invalid_argument(os.str());
      }
    }
    CombinationMatrix a;
    a.weights_ = std::move(weights);
    return a;
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.rows()); }
  const Matrix& weights() const noexcept { return weights_; }
  double operator()(std::size_t l, std::size_t k) const {
    return weights_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
  }
  bool has_edge(std::size_t from, std::size_t to) const { return (*this)(from, to) > 0.0; }

  /// |N_k|: agents with positive weight into k (self included when looped).
  std::size_t in_degree(std::size_t k) const {
    std::size_t d = 0;
    for (std::size_t l = 0; l < size(); ++l) d += has_edge(l, k) ? 1 : 0;
    return d;
  }

 private:
  CombinationMatrix() = default;
  Matrix weights_;
};

struct PerronVector {
  Vector entries;
};

namespace detail {

inline std::vector<bool> reachable(const Matrix& w, bool forward) {
  const auto n = static_cast<std::size_t>(w.rows());
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u = 0; u < n; ++u) {
      const double edge = forward ? w(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u))
                                  : w(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
      if (edge > 0.0 && !seen[u]) {
        seen[u] = true;
        stack.push_back(u);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// True iff every ordered pair is joined by a positive-weight directed path
/// and at least one self-loop carries positive weight.
inline bool is_strongly_connected(const Matrix& weights) {
  if (weights.rows() == 0 || weights.rows() != weights.cols()) return false;
  if (!(weights.diagonal().array() > 0.0).any()) return false;
  for (bool forward : {true, false}) {
    const auto seen = detail::reachable(weights, forward);
    for (bool s : seen) {
      if (!s) return false;
    }
  }
  return true;
}

inline bool is_strongly_connected(const CombinationMatrix& a) {
  return is_strongly_connected(a.weights());
}

/// Averaging rule: a_{lk} = 1/|N_k| for every l in N_k. `adjacency(l, k)`
/// nonzero marks l in N_k.
inline CombinationMatrix averaging_rule(const Eigen::MatrixXi& adjacency) {
  const Eigen::Index n = adjacency.rows();
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto degree = (adjacency.col(k).array() != 0).count();
    if (degree == 0) throw std::invalid_argument("averaging rule: node has no neighbours");
    for (Eigen::Index l = 0; l < n; ++l) {
      if (adjacency(l, k) != 0) w(l, k) = 1.0 / static_cast<double>(degree);
    }
  }
  return CombinationMatrix::from_weights(std::move(w));
}

inline constexpr int kGenerationRetries = 100;

/// Samples a symmetric Erdos-Renyi adjacency (each unordered pair present with
/// probability p, self-loops forced), applies the averaging rule and resamples
/// until the result is strongly connected. Deterministic in (n, p, seed).
inline CombinationMatrix generate_erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_erdos_renyi: n must be at least 2");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("generate_erdos_renyi: p must lie in [0, 1]");
  }
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto size = static_cast<Eigen::Index>(n);
  for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
    Eigen::MatrixXi adj = Eigen::MatrixXi::Identity(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      for (Eigen::Index j = i + 1; j < size; ++j) {
        if (unit(rng) < p) adj(i, j) = adj(j, i) = 1;
      }
    }
    CombinationMatrix a = averaging_rule(adj);
    if (is_strongly_connected(a)) return a;
  }
  std::ostringstream os;
  os << "Erdos-Renyi generation failed to produce a strongly connected graph after "
     << kGenerationRetries << " attempts (n=" << n << ", p=" << p << ", seed=" << seed << ")";
  throw GenerationError(os.str());
}

inline constexpr std::size_t kPerronIterationCap = 100000;

/// Power iteration u <- A u with sum normalization until ||A u - u||_inf <= tol.
inline PerronVector perron_vector(const CombinationMatrix& a, double tol = 1e-12) {
  if (!is_strongly_connected(a)) {
    throw std::invalid_argument("perron_vector: combination matrix is not strongly connected");
  }
  const Matrix& w = a.weights();
  Vector u = Vector::Constant(w.rows(), 1.0 / static_cast<double>(w.rows()));
  double residual = 0.0;
  for (std::size_t it = 0; it < kPerronIterationCap; ++it) {
    Vector next = w * u;
    next /= next.sum();
    residual = (w * next - next).cwiseAbs().maxCoeff();
    u = std::move(next);
    if (residual <= tol) return PerronVector{std::move(u)};
  }
  std::ostringstream os;
  os << "perron_vector did not converge in " << kPerronIterationCap
     << " iterations (residual " << residual << ")";
  throw ConvergenceError(os.str(), residual);
}

/// Index of the agent with the most in-neighbours; ties go to the lowest index.
/// This is the "central" agent used by the malicious-agent scenarios.
inline std::size_t most_central_agent(const CombinationMatrix& a) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < a.size(); ++k) {
    if (a.in_degree(k) > a.in_degree(best)) best = k;
  }
  return best;
}

}  // namespace sociallearn
