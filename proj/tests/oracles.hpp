#pragma once

// Reference computations for the tests. Written with plain loops over
// std::vector so they share no code path with the library.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid zeros(std::size_t r, std::size_t c) { return Grid(r, std::vector<double>(c, 0.0)); }

/// u <- W u, normalized to sum one, until the step changes nothing above tol.
inline std::vector<double> power_iteration(const Grid& w, double tol = 1e-14, std::size_t cap = 1000000) {
  const std::size_t n = w.size();
  std::vector<double> u(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < cap; ++it) {
    std::vector<double> next(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) next[r] += w[r][c] * u[c];
    }
    double s = 0.0;
    for (double v : next) s += v;
    double change = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      next[r] /= s;
      change = std::max(change, std::abs(next[r] - u[r]));
    }
    u = next;
    if (change < tol) break;
  }
  return u;
}

/// Transitive closure (Warshall) plus the self-loop condition.
inline bool strongly_connected(const Grid& w) {
  const std::size_t n = w.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  bool loop = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) reach[i][j] = w[i][j] > 0.0;
    loop = loop || w[i][i] > 0.0;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && !reach[i][j]) return false;
    }
  }
  return loop;
}

inline double kl_categorical(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

inline double normal_pdf(double x, double m, double var) {
  return std::exp(-(x - m) * (x - m) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Composite Simpson rule for KL(N(m1,var) || N(m2,var)) over +-30 sd.
inline double kl_gaussian_quadrature(double m1, double m2, double var, std::size_t panels = 200000) {
  const double sd = std::sqrt(var);
  const double lo = std::min(m1, m2) - 30.0 * sd;
  const double hi = std::max(m1, m2) + 30.0 * sd;
  const double h = (hi - lo) / static_cast<double>(panels);
  auto f = [&](double x) {
    const double p = normal_pdf(x, m1, var);
    if (p <= 0.0) return 0.0;
    const double lp = -(x - m1) * (x - m1) / (2.0 * var);
    const double lq = -(x - m2) * (x - m2) / (2.0 * var);
    return p * (lp - lq);
  };
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < panels; ++i) s += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// One adapt + combine round in the probability domain:
///   psi_k(t) ~ L_k(t)^delta mu_k(t)^(1-delta),  mu_k(t) ~ prod_l psi_l(t)^{a_lk}.
/// `lik[k][t]` holds the likelihood of agent k's observation under t.
inline void belief_round(const Grid& a, const Grid& lik, double delta, Grid& mu, Grid& psi) {
  const std::size_t n = mu.size();
  const std::size_t h = mu[0].size();
  psi = zeros(n, h);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < h; ++t) {
      psi[k][t] = std::pow(lik[k][t], delta) * std::pow(mu[k][t], 1.0 - delta);
      s += psi[k][t];
    }
    for (std::size_t t = 0; t < h; ++t) psi[k][t] /= s;
  }
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < h; ++t) {
      double prod = 1.0;
      for (std::size_t l = 0; l < n; ++l) prod *= std::pow(psi[l][t], a[l][k]);
      mu[k][t] = prod;
      s += prod;
    }
    for (std::size_t t = 0; t < h; ++t) mu[k][t] /= s;
  }
}

/// The estimator with the full Lambda history kept and every window sum
/// recomputed from its printed index range. lambda[i] is Lambda_i; updates
/// run for i = M+1 .. last, A first, then L with the new A.
struct NaiveInverse {
  Grid a;
  Grid l;
  std::size_t updates = 0;
};

inline NaiveInverse naive_inverse(const std::vector<Grid>& lambda, std::size_t m, double mu, double delta,
                                  Grid a0, Grid l0) {
  const std::size_t n = a0.size();
  const std::size_t c = l0[0].size();
  NaiveInverse st{std::move(a0), std::move(l0), 0};
  for (std::size_t i = m + 1; i < lambda.size(); ++i) {
    // centered regressor: Lambda_{i-1} - M^-1 sum_{j=i-M}^{i-1} Lambda_{j-1}
    Grid centered = lambda[i - 1];
    for (std::size_t j = i - m; j <= i - 1; ++j) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t q = 0; q < c; ++q) centered[r][q] -= lambda[j - 1][r][q] / static_cast<double>(m);
      }
    }
    // residual: Lambda_i - (1-delta) A^T Lambda_{i-1} - delta L
    Grid residual = zeros(n, c);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t q = 0; q < c; ++q) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += st.a[r][k] * lambda[i - 1][r][q];
        residual[k][q] = lambda[i][k][q] - (1.0 - delta) * acc - delta * st.l[k][q];
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t q = 0; q < c; ++q) acc += centered[r][q] * residual[k][q];
        st.a[r][k] += mu * (1.0 - delta) * acc;
      }
    }
    // L = (delta M)^-1 sum_{j=i-M+1}^{i} (Lambda_j - (1-delta) A^T Lambda_{j-1})
    Grid next = zeros(n, c);
    for (std::size_t j = i - m + 1; j <= i; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t q = 0; q < c; ++q) {
          double acc = 0.0;
          for (std::size_t r = 0; r < n; ++r) acc += st.a[r][k] * lambda[j - 1][r][q];
          next[k][q] += (lambda[j][k][q] - (1.0 - delta) * acc) / (delta * static_cast<double>(m));
        }
      }
    }
    st.l = next;
    ++st.updates;
  }
  return st;
}

/// E||L - Lbar||^2 for one categorical agent by enumerating the alphabet.
/// pmfs[t][s]; the reference hypothesis is row 0.
inline double trace_r_enumerated(const Grid& pmfs, std::size_t truth) {
  const std::size_t h = pmfs.size();
  const std::size_t s_count = pmfs[0].size();
  std::vector<double> mean(h, 0.0);
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t j = 1; j < h; ++j) mean[j] += pmfs[truth][s] * std::log(pmfs[0][s] / pmfs[j][s]);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t j = 1; j < h; ++j) {
      const double d = std::log(pmfs[0][s] / pmfs[j][s]) - mean[j];
      total += pmfs[truth][s] * d * d;
    }
  }
  return total;
}

}  // namespace oracle
