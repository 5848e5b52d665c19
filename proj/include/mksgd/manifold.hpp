#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "mksgd/errors.hpp"
#include "mksgd/types.hpp"

namespace mksgd {

enum class ManifoldFamily { Sphere, Oblique, Stiefel, SpecialOrthogonal };

const char* family_name(ManifoldFamily f);

/// Which submanifold an A x B kernel lives on, with constraint-check slack.
struct ManifoldSpec {
  ManifoldFamily family = ManifoldFamily::Sphere;
  int rows = 1;  // A
  int cols = 1;  // B
  double radius = 1.0;      // Sphere only
  double tolerance = 1e-8;  // validation slack
  double tangent_tolerance = 1e-10;

  ManifoldSpec() = default;
  ManifoldSpec(ManifoldFamily f, int a, int b, double r = 1.0);

  int intrinsic_dimension() const;

  bool operator==(const ManifoldSpec& o) const;
};

/// An A x B kernel tagged with the submanifold it lives on.
struct KernelPoint {
  ManifoldSpec spec;
  Matrix value;
};

/// Ambient matrix asserted to lie in the tangent space at `at`.
struct TangentVector {
  KernelPoint at;
  Matrix value;
};

struct ValidationResult {
  bool ok = false;
  double violation = 0.0;
};

/// Family constraint check. `violation` is the deviation norm of the
/// constraint's left hand side (e.g. ||w'w - I||_F on the Stiefel manifold).
ValidationResult validate_point(const KernelPoint& p);

/// Relative tangency defect of v at its base point: 0 for exact tangent
/// vectors, scaled so that it compares against spec.tangent_tolerance.
double tangent_violation(const TangentVector& v);

/// Orthogonal projection of an ambient matrix onto the tangent space at p.
/// Idempotent; output satisfies the TangentVector invariants.
TangentVector project_tangent(const KernelPoint& p, const Matrix& ambient);

/// First-order motion along v: normalization on the sphere/oblique, thin QR
/// with diag(R) > 0 on the Stiefel manifold, QR plus a determinant fix on
/// SO(n). Throws singular_step_error on degenerate input instead of
/// renormalizing it silently.
KernelPoint retract(const KernelPoint& p, const TangentVector& v);

/// Geodesic endpoint. Closed form (sin/cos) for sphere and oblique only;
/// Stiefel/SO(n) throw unsupported_map_error.
KernelPoint exp_map(const KernelPoint& p, const TangentVector& v);

/// Deterministic seeded point: i.i.d. standard normal entries pushed through
/// the family's normalization.
KernelPoint random_point(const ManifoldSpec& spec, std::uint64_t seed);

/// Riemannian metric inherited from the ambient Frobenius inner product.
double inner(const KernelPoint& p, const TangentVector& u,
             const TangentVector& w);

/// Closed-form geodesic distance; sphere and oblique only.
double geodesic_distance(const KernelPoint& p, const KernelPoint& q);

/// Nearest-in-family normalization of an arbitrary ambient matrix
/// (sphere: rescale, oblique: column rescale, Stiefel/SO(n): QR). Used for
/// initial values and for the Euclidean-SGD-plus-renormalization baseline.
Matrix renormalize(const ManifoldSpec& spec, const Matrix& m);

/// How often the SO(n) retraction had to flip a column sign to restore
/// det = +1. Expected to stay at zero for small steps.
std::int64_t so_det_fix_count();
void reset_so_det_fix_count();

namespace testhooks {
// Fault injection for the `check` command's negative control: when set, the
// sphere retraction skips its renormalization and closure checks must fail.
extern std::atomic<bool> sphere_skip_renormalize;
}  // namespace testhooks

}  // namespace mksgd
