#include "mksgd/sgd.hpp"

#include <cmath>
#include <sstream>

namespace mksgd {

const char* schedule_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::InverseTime: return "inverse-time";
    case ScheduleKind::StepDecay: return "step-decay";
    case ScheduleKind::Constant: return "constant";
  }
  return "?";
}

double ScheduleSpec::rate(long t) const {
  switch (kind) {
    case ScheduleKind::InverseTime:
      return alpha0 / (1.0 + alpha0 * lambda * static_cast<double>(t));
    case ScheduleKind::StepDecay:
      return alpha0 * std::pow(drop_factor, static_cast<double>(t / drop_every));
    case ScheduleKind::Constant:
      return alpha0;
  }
  return alpha0;
}

bool ScheduleSpec::satisfies_robbins_monro() const {
  // 1/(1+ct) diverges in sum and converges in square sum; a geometric decay
  // or a constant rate fails one of the two conditions.
  return kind == ScheduleKind::InverseTime && lambda > 0.0;
}

void ScheduleSpec::validate() const {
  if (alpha0 <= 0.0) throw config_error("schedule: alpha0 must be positive");
  if (lambda < 0.0) throw config_error("schedule: lambda must be non-negative");
  if (kind == ScheduleKind::StepDecay) {
    if (drop_every < 1) throw config_error("schedule: drop_every must be >= 1");
    if (drop_factor <= 0.0 || drop_factor >= 1.0) {
      throw config_error("schedule: drop_factor must lie in (0,1)");
    }
  }
}

void Hyperparams::validate() const {
  if (theta_mu < 0.0 || theta_mu >= 1.0) {
    throw config_error("hyper: theta_mu must lie in [0,1)");
  }
  if (theta_e <= 0.0) throw config_error("hyper: theta_e must be positive");
  if (grad_clip && *grad_clip <= 0.0) {
    throw config_error("hyper: grad_clip must be positive when set");
  }
  schedule.validate();
}

double learning_rate(const ScheduleSpec& schedule, long t) {
  return schedule.rate(t);
}

RiemannianSgd::RiemannianSgd(Hyperparams hyper, int num_kernels)
    : hyper_(std::move(hyper)), momentum_(static_cast<size_t>(num_kernels)) {
  hyper_.validate();
}

Matrix RiemannianSgd::clipped(const Matrix& grad_e) const {
  if (!grad_e.allFinite()) {
    throw numeric_error("momentum_update: non-finite gradient entries");
  }
  if (hyper_.grad_clip) {
    const double n = grad_e.norm();
    if (n > *hyper_.grad_clip) return (*hyper_.grad_clip / n) * grad_e;
  }
  return grad_e;
}

Matrix RiemannianSgd::momentum_update(int kernel_id, const Matrix& grad_e) {
  Matrix& mu = momentum_.at(static_cast<size_t>(kernel_id));
  if (mu.size() == 0) {
    mu = Matrix::Zero(grad_e.rows(), grad_e.cols());
  } else if (mu.rows() != grad_e.rows() || mu.cols() != grad_e.cols()) {
    std::ostringstream os;
    os << "momentum_update: gradient " << grad_e.rows() << "x" << grad_e.cols()
       << " does not match buffer " << mu.rows() << "x" << mu.cols();
    throw shape_error(os.str());
  }
  mu = hyper_.theta_mu * mu - hyper_.theta_e * clipped(grad_e);
  return mu;
}

double RiemannianSgd::learning_rate() const { return hyper_.schedule.rate(t_); }

KernelPoint RiemannianSgd::step(int kernel_id, const KernelPoint& kernel,
                                const Matrix& grad_e) {
  const Matrix mu = momentum_update(kernel_id, grad_e);
  // mu already carries the descent sign from the momentum rule, so the
  // tangent step is +alpha * Pi(mu): exactly one net negation.
  TangentVector v = project_tangent(kernel, mu);
  v.value *= learning_rate();

  const bool geodesic =
      hyper_.use_exp_map && (kernel.spec.family == ManifoldFamily::Sphere ||
                             kernel.spec.family == ManifoldFamily::Oblique);
  for (int attempt = 0;; ++attempt) {
    try {
      return geodesic ? exp_map(kernel, v) : retract(kernel, v);
    } catch (const singular_step_error&) {
      if (attempt >= 5) throw;
      v.value *= 0.5;
    }
  }
}

Matrix RiemannianSgd::euclidean_step(int kernel_id, const Matrix& value,
                                     const Matrix& grad_e) {
  const Matrix mu = momentum_update(kernel_id, grad_e);
  return value + learning_rate() * mu;
}

double RiemannianSgd::riemannian_grad_norm(const KernelPoint& kernel,
                                           const Matrix& grad_e) const {
  return project_tangent(kernel, grad_e).value.norm();
}

const Matrix& RiemannianSgd::momentum(int kernel_id) const {
  return momentum_.at(static_cast<size_t>(kernel_id));
}

void RiemannianSgd::reset() {
  t_ = 0;
  for (Matrix& m : momentum_) m.resize(0, 0);
}

}  // namespace mksgd
