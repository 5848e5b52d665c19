#pragma once

#include <cstdint>
#include <vector>

#include "mksgd/types.hpp"

// Closed-form / brute-force oracles for the benchmark problems. These are
// deliberately written from scratch and share nothing with the manifold or
// optimizer code beyond plain matrix arithmetic, so they can stand as an
// independent check on it.

namespace mksgd::oracle {

struct EigenPair {
  double value;
  Vector vector;
};

/// Top-k eigenpairs of a symmetric matrix by shifted power iteration with
/// deflation. The shift makes the dominant eigenvalue the largest signed
/// one rather than the largest in magnitude.
std::vector<EigenPair> symmetric_top_eigen(const Matrix& m, int k,
                                           int max_iters = 100000,
                                           double tol = 1e-14);

double lambda_max(const Matrix& m);

struct SvdResult {
  Matrix u;        // m x n, orthonormal columns
  Vector sigma;    // n, non-negative, descending
  Matrix v;        // n x n orthogonal
};

/// One-sided Jacobi SVD of an m x n matrix (m >= n): right rotations until
/// the columns are mutually orthogonal, then U = AV / sigma.
SvdResult jacobi_svd(const Matrix& a, int max_sweeps = 60, double tol = 1e-13);

/// Orthogonal Procrustes minimizer of ||P w - Q||_F over square orthogonal
/// w via the SVD of P'Q: w* = U V'.
Matrix procrustes_optimum(const Matrix& p, const Matrix& q);

/// Best objective value found by restarted projected descent with
/// unit-column renormalization, for f given as a callable on matrices with
/// unit-norm columns. Used as the brute-force oracle for the oblique
/// off-diagonal problem.
template <typename F, typename G>
double restart_descent_best(F&& objective, G&& euclid_grad, int rows, int cols,
                            int restarts, int iters, double step,
                            std::uint64_t seed);

// Implementation of the template (kept header-only so tests can instantiate
// it with lambdas).
namespace detail {
Matrix random_unit_columns(int rows, int cols, std::uint64_t seed);
Matrix normalize_columns(const Matrix& m);
}  // namespace detail

template <typename F, typename G>
double restart_descent_best(F&& objective, G&& euclid_grad, int rows, int cols,
                            int restarts, int iters, double step,
                            std::uint64_t seed) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Matrix w = detail::random_unit_columns(rows, cols, seed + 7919ULL * r);
    double alpha = step;
    double fw = objective(w);
    for (int it = 0; it < iters; ++it) {
      const Matrix cand =
          detail::normalize_columns(w - alpha * euclid_grad(w));
      const double fc = objective(cand);
      if (fc <= fw) {
        w = cand;
        fw = fc;
      } else {
        alpha *= 0.5;  // crude backtracking; enough for an oracle
        if (alpha < 1e-14) break;
      }
    }
    best = std::min(best, fw);
  }
  return best;
}

}  // namespace mksgd::oracle
