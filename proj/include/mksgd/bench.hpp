#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mksgd/manifold.hpp"
#include "mksgd/sgd.hpp"
#include "mksgd/types.hpp"

namespace mksgd {

/// Canonical manifold optimization problem with an independently computed
/// optimum and a fixed on-manifold starting point.
struct BenchProblem {
  std::string name;
  ManifoldSpec spec;
  std::function<double(const KernelPoint&)> objective;
  std::function<Matrix(const KernelPoint&)> euclidean_gradient;
  double oracle_optimum = 0.0;
  std::uint64_t seed = 0;
  KernelPoint start;
};

struct ConvergenceReport {
  std::string problem;
  std::string family;
  std::uint64_t seed = 0;
  // per-iteration series (equal lengths)
  std::vector<double> loss;
  std::vector<double> grad_norm;
  std::vector<double> violation;
  std::vector<double> step_len;
  // verdicts, recomputed purely from the series + final iterate
  bool aborted = false;
  double oracle_optimum = 0.0;
  double final_loss = 0.0;
  double grad_norm_final = 0.0;  // min over the last 1% of iterations
  double gap_to_oracle = 0.0;
  bool schedule_satisfies_eq7 = false;
  long iters_to_gap_1e3 = -1;

  void finalize();
};

struct ConditionDiagnostics {
  bool compactness = false;        // max violation <= 1e-8
  bool gradient_bounded = false;   // finite, and <= clip bound when set
  bool schedule_ok = false;        // sum alpha = inf, sum alpha^2 < inf
  bool grad_trend = false;         // running-min grad drops >= 10x
  double max_violation = 0.0;
  double max_grad_norm = 0.0;
  double decile_ratio = 0.0;
  bool all_pass() const {
    return compactness && gradient_bounded && schedule_ok && grad_trend;
  }
};

/// f(w) = -w'Mw on the unit sphere; optimum -lambda_max(M) from the power
/// iteration oracle.
BenchProblem rayleigh_problem(int n, std::uint64_t seed);
BenchProblem rayleigh_problem_matrix(const Matrix& m, std::uint64_t seed);

/// f(w) = ||Pw - Q||_F^2 on the Stiefel manifold. For square shapes the
/// oracle is the closed-form Procrustes solution from the Jacobi SVD; the
/// starting point is drawn in the orthogonal-group component that contains
/// it (descent cannot cross components).
BenchProblem procrustes_problem(int a_rows, int b_cols, std::uint64_t seed);
BenchProblem procrustes_problem_matrices(const Matrix& p, const Matrix& q,
                                         std::uint64_t seed);

/// f(w) = sum of squared off-diagonals of w'Mw on the oblique manifold,
/// M symmetric positive definite; oracle from 100-restart projected descent.
BenchProblem oblique_diag_problem(int a_rows, int b_cols, std::uint64_t seed);

/// Tuned defaults that meet the convergence targets on the desk-scale
/// instances.
Hyperparams default_bench_hyper(const std::string& problem_name);

ConvergenceReport run_benchmark(const BenchProblem& problem,
                                const Hyperparams& hyper, long iters);

struct BaselineComparison {
  ConvergenceReport manifold;
  ConvergenceReport euclidean;  // ambient step + renormalization
};

BaselineComparison compare_euclidean_baseline(const BenchProblem& problem,
                                              const Hyperparams& hyper,
                                              long iters);

ConditionDiagnostics check_convergence_conditions(
    const ConvergenceReport& report, const Hyperparams& hyper);

}  // namespace mksgd
