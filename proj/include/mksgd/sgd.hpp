#pragma once

#include <optional>
#include <vector>

#include "mksgd/manifold.hpp"
#include "mksgd/types.hpp"

namespace mksgd {

enum class ScheduleKind { InverseTime, StepDecay, Constant };

const char* schedule_name(ScheduleKind k);

/// Step-size schedule alpha_t. Only InverseTime with lambda > 0 has a
/// divergent sum with a convergent square sum; the other kinds self-report
/// as non-convergent and the diagnostics make no convergence claim for them.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::InverseTime;
  double alpha0 = 0.1;
  double lambda = 1.0;     // InverseTime
  int drop_every = 1000;   // StepDecay
  double drop_factor = 0.5;

  double rate(long t) const;
  bool satisfies_robbins_monro() const;
  void validate() const;
};

struct Hyperparams {
  double theta_mu = 0.9;              // momentum coefficient
  double theta_e = 0.1;               // Euclidean gradient decay
  ScheduleSpec schedule;
  std::optional<double> grad_clip;    // Frobenius bound on raw gradients
  bool use_exp_map = false;           // geodesic step where closed form exists

  void validate() const;
};

/// Per-kernel ambient momentum buffers plus the shared sweep counter t.
/// One writer per kernel id; steps for distinct ids may run concurrently,
/// advance() is called once per sweep by the single orchestrating thread.
class RiemannianSgd {
 public:
  RiemannianSgd(Hyperparams hyper, int num_kernels);

  /// mu <- theta_mu * mu - theta_e * grad (gradient clipped first when a
  /// bound is configured). Returns and stores the new buffer.
  Matrix momentum_update(int kernel_id, const Matrix& grad_e);

  /// Current alpha_t.
  double learning_rate() const;

  /// One update of one kernel: momentum, tangent projection, schedule
  /// scaling, retraction (or exponential map when enabled and available).
  /// Halves the tangent step and retries on singular retractions, up to 5
  /// times. Does not advance t.
  KernelPoint step(int kernel_id, const KernelPoint& kernel,
                   const Matrix& grad_e);

  /// Euclidean twin of step() for unconstrained parameters: same momentum
  /// rule, ambient update value + alpha * mu.
  Matrix euclidean_step(int kernel_id, const Matrix& value,
                        const Matrix& grad_e);

  /// ||Pi_kernel(grad_e)||_F, the convergence diagnostic. Does not mutate
  /// state.
  double riemannian_grad_norm(const KernelPoint& kernel,
                              const Matrix& grad_e) const;

  /// End of a full sweep over all kernels: t <- t + 1.
  void advance() { ++t_; }

  long iteration() const { return t_; }
  const Hyperparams& hyper() const { return hyper_; }
  const Matrix& momentum(int kernel_id) const;
  void reset();

 private:
  Matrix clipped(const Matrix& grad_e) const;

  Hyperparams hyper_;
  long t_ = 0;
  std::vector<Matrix> momentum_;  // empty until first update, then A x B
};

/// alpha_t = g(t, Theta) as a free function.
double learning_rate(const ScheduleSpec& schedule, long t);

}  // namespace mksgd
