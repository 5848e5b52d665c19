#include "mksgd/manifold.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mksgd {

namespace testhooks {
std::atomic<bool> sphere_skip_renormalize{false};
}

namespace {

std::atomic<std::int64_t> g_so_det_fixes{0};

void require_shape(const ManifoldSpec& spec, const Matrix& m,
                   const char* what) {
  if (m.rows() != spec.rows || m.cols() != spec.cols) {
    std::ostringstream os;
    os << what << ": expected " << spec.rows << "x" << spec.cols << " matrix, got "
       << m.rows() << "x" << m.cols();
    throw shape_error(os.str());
  }
}

void require_valid(const KernelPoint& p, const char* what) {
  ValidationResult v = validate_point(p);
  if (!v.ok) {
    std::ostringstream os;
    os << what << ": base point violates its " << family_name(p.spec.family)
       << " constraint by " << v.violation;
    throw constraint_error(os.str());
  }
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Thin QR with the diag(R) > 0 sign convention; deterministic and continuous
// near the base point. Throws when the input is numerically rank deficient.
Matrix thin_qr_positive(const Matrix& m) {
  const Eigen::Index a = m.rows(), b = m.cols();
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(a, b);
  Matrix r = qr.matrixQR().topLeftCorner(b, b).triangularView<Eigen::Upper>();
  const double scale = std::max(1.0, m.norm());
  for (Eigen::Index j = 0; j < b; ++j) {
    if (std::abs(r(j, j)) <= 1e-12 * scale) {
      throw singular_step_error("QR retraction: rank-deficient input");
    }
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

double column_distance(const Vector& a, const Vector& b) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  return std::acos(c);
}

Vector column_geodesic(const Vector& p, const Vector& v) {
  const double t = v.norm();
  if (t == 0.0) return p;
  return std::cos(t) * p + (std::sin(t) / t) * v;
}

}  // namespace

const char* family_name(ManifoldFamily f) {
  switch (f) {
    case ManifoldFamily::Sphere: return "sphere";
    case ManifoldFamily::Oblique: return "oblique";
    case ManifoldFamily::Stiefel: return "stiefel";
    case ManifoldFamily::SpecialOrthogonal: return "so";
  }
  return "?";
}

ManifoldSpec::ManifoldSpec(ManifoldFamily f, int a, int b, double r)
    : family(f), rows(a), cols(b), radius(r) {
  if (a < 1 || b < 1) throw config_error("manifold: rows/cols must be positive");
  if (r <= 0.0) throw config_error("manifold: radius must be positive");
  if (f == ManifoldFamily::Stiefel && a < b) {
    throw config_error("manifold: Stiefel requires rows >= cols");
  }
  if (f == ManifoldFamily::SpecialOrthogonal && a != b) {
    throw config_error("manifold: SO(n) requires a square shape");
  }
  if (intrinsic_dimension() < 1) {
    std::ostringstream os;
    os << "manifold: " << family_name(f) << "(" << a << "," << b
       << ") has intrinsic dimension " << intrinsic_dimension() << " < 1";
    throw config_error(os.str());
  }
}

int ManifoldSpec::intrinsic_dimension() const {
  switch (family) {
    case ManifoldFamily::Sphere: return rows * cols - 1;
    case ManifoldFamily::Oblique: return cols * (rows - 1);
    case ManifoldFamily::Stiefel: return rows * cols - cols * (cols + 1) / 2;
    case ManifoldFamily::SpecialOrthogonal: return rows * (rows - 1) / 2;
  }
  return 0;
}

bool ManifoldSpec::operator==(const ManifoldSpec& o) const {
  return family == o.family && rows == o.rows && cols == o.cols &&
         radius == o.radius && tolerance == o.tolerance &&
         tangent_tolerance == o.tangent_tolerance;
}

ValidationResult validate_point(const KernelPoint& p) {
  require_shape(p.spec, p.value, "validate_point");
  double violation = 0.0;
  switch (p.spec.family) {
    case ManifoldFamily::Sphere:
      violation = std::abs(p.value.norm() - p.spec.radius);
      break;
    case ManifoldFamily::Oblique: {
      Matrix g = p.value.transpose() * p.value;
      violation = (g.diagonal() - Vector::Ones(p.spec.cols)).norm();
      break;
    }
    case ManifoldFamily::Stiefel:
      violation = (p.value.transpose() * p.value -
                   Matrix::Identity(p.spec.cols, p.spec.cols))
                      .norm();
      break;
    case ManifoldFamily::SpecialOrthogonal: {
      const double orth = (p.value.transpose() * p.value -
                           Matrix::Identity(p.spec.cols, p.spec.cols))
                              .norm();
      const double det = std::abs(p.value.determinant() - 1.0);
      violation = std::max(orth, det);
      break;
    }
  }
  return {violation <= p.spec.tolerance, violation};
}

double tangent_violation(const TangentVector& v) {
  require_shape(v.at.spec, v.value, "tangent_violation");
  const double vn = v.value.norm();
  if (vn == 0.0) return 0.0;
  switch (v.at.spec.family) {
    case ManifoldFamily::Sphere:
      return std::abs((v.at.value.array() * v.value.array()).sum()) / vn;
    case ManifoldFamily::Oblique: {
      double worst = 0.0;
      for (Eigen::Index b = 0; b < v.value.cols(); ++b) {
        const double cn = v.value.col(b).norm();
        if (cn == 0.0) continue;
        worst = std::max(worst,
                         std::abs(v.at.value.col(b).dot(v.value.col(b))) / cn);
      }
      return worst;
    }
    case ManifoldFamily::Stiefel:
    case ManifoldFamily::SpecialOrthogonal:
      return sym(v.at.value.transpose() * v.value).norm() / vn;
  }
  return 0.0;
}

TangentVector project_tangent(const KernelPoint& p, const Matrix& ambient) {
  require_shape(p.spec, ambient, "project_tangent");
  require_valid(p, "project_tangent");
  Matrix out;
  switch (p.spec.family) {
    case ManifoldFamily::Sphere: {
      const double r2 = p.spec.radius * p.spec.radius;
      const double a = (p.value.array() * ambient.array()).sum() / r2;
      out = ambient - a * p.value;
      break;
    }
    case ManifoldFamily::Oblique: {
      out = ambient;
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        out.col(b) -= p.value.col(b).dot(ambient.col(b)) * p.value.col(b);
      }
      break;
    }
    case ManifoldFamily::Stiefel:
    case ManifoldFamily::SpecialOrthogonal:
      out = ambient - p.value * sym(p.value.transpose() * ambient);
      break;
  }
  return {p, std::move(out)};
}

KernelPoint retract(const KernelPoint& p, const TangentVector& v) {
  require_shape(p.spec, v.value, "retract");
  require_valid(p, "retract");
  const Matrix moved = p.value + v.value;
  Matrix out;
  switch (p.spec.family) {
    case ManifoldFamily::Sphere: {
      if (testhooks::sphere_skip_renormalize.load(std::memory_order_relaxed)) {
        out = moved;
        break;
      }
      const double n = moved.norm();
      if (n <= 1e-12 * std::max(1.0, p.spec.radius)) {
        throw singular_step_error("sphere retraction: step lands near origin");
      }
      out = (p.spec.radius / n) * moved;
      break;
    }
    case ManifoldFamily::Oblique: {
      out = moved;
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        const double n = out.col(b).norm();
        if (n <= 1e-12) {
          throw singular_step_error("oblique retraction: zero column");
        }
        out.col(b) /= n;
      }
      break;
    }
    case ManifoldFamily::Stiefel:
      out = thin_qr_positive(moved);
      break;
    case ManifoldFamily::SpecialOrthogonal: {
      out = thin_qr_positive(moved);
      if (out.determinant() < 0.0) {
        out.col(out.cols() - 1) = -out.col(out.cols() - 1);
        g_so_det_fixes.fetch_add(1, std::memory_order_relaxed);
      }
      break;
    }
  }
  return {p.spec, std::move(out)};
}

KernelPoint exp_map(const KernelPoint& p, const TangentVector& v) {
  require_shape(p.spec, v.value, "exp_map");
  require_valid(p, "exp_map");
  Matrix out;
  switch (p.spec.family) {
    case ManifoldFamily::Sphere: {
      const double t = v.value.norm();
      if (t == 0.0) {
        out = p.value;
      } else {
        const double s = t / p.spec.radius;
        out = std::cos(s) * p.value +
              (p.spec.radius * std::sin(s) / t) * v.value;
      }
      break;
    }
    case ManifoldFamily::Oblique: {
      out.resize(p.spec.rows, p.spec.cols);
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        out.col(b) = column_geodesic(p.value.col(b), v.value.col(b));
      }
      break;
    }
    default:
      throw unsupported_map_error(
          std::string("exp_map: no closed form for ") +
          family_name(p.spec.family));
  }
  return {p.spec, std::move(out)};
}

KernelPoint random_point(const ManifoldSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Matrix g(spec.rows, spec.cols);
  do {
    for (int i = 0; i < spec.rows; ++i) {
      for (int j = 0; j < spec.cols; ++j) g(i, j) = gauss(rng);
    }
  } while (g.norm() == 0.0);
  return {spec, renormalize(spec, g)};
}

double inner(const KernelPoint& p, const TangentVector& u,
             const TangentVector& w) {
  if (!(u.at.spec == p.spec) || !(w.at.spec == p.spec) ||
      u.at.value != p.value || w.at.value != p.value) {
    throw shape_error("inner: tangent vectors have different base points");
  }
  return (u.value.array() * w.value.array()).sum();
}

double geodesic_distance(const KernelPoint& p, const KernelPoint& q) {
  if (!(p.spec == q.spec)) {
    throw shape_error("geodesic_distance: mismatched manifold specs");
  }
  require_shape(p.spec, p.value, "geodesic_distance");
  require_shape(q.spec, q.value, "geodesic_distance");
  switch (p.spec.family) {
    case ManifoldFamily::Sphere: {
      const double r = p.spec.radius;
      const double c =
          std::clamp((p.value.array() * q.value.array()).sum() / (r * r), -1.0,
                     1.0);
      return r * std::acos(c);
    }
    case ManifoldFamily::Oblique: {
      double sq = 0.0;
      for (Eigen::Index b = 0; b < p.value.cols(); ++b) {
        const double d = column_distance(p.value.col(b), q.value.col(b));
        sq += d * d;
      }
      return std::sqrt(sq);
    }
    default:
      throw unsupported_map_error(
          std::string("geodesic_distance: no closed form for ") +
          family_name(p.spec.family));
  }
}

Matrix renormalize(const ManifoldSpec& spec, const Matrix& m) {
  require_shape(spec, m, "renormalize");
  switch (spec.family) {
    case ManifoldFamily::Sphere: {
      const double n = m.norm();
      if (n <= 1e-12) throw singular_step_error("renormalize: zero matrix");
      return (spec.radius / n) * m;
    }
    case ManifoldFamily::Oblique: {
      Matrix out = m;
      for (Eigen::Index b = 0; b < out.cols(); ++b) {
        const double n = out.col(b).norm();
        if (n <= 1e-12) throw singular_step_error("renormalize: zero column");
        out.col(b) /= n;
      }
      return out;
    }
    case ManifoldFamily::Stiefel:
      return thin_qr_positive(m);
    case ManifoldFamily::SpecialOrthogonal: {
      Matrix out = thin_qr_positive(m);
      if (out.determinant() < 0.0) {
        out.col(out.cols() - 1) = -out.col(out.cols() - 1);
      }
      return out;
    }
  }
  throw config_error("renormalize: unknown family");
}

std::int64_t so_det_fix_count() {
  return g_so_det_fixes.load(std::memory_order_relaxed);
}

void reset_so_det_fix_count() {
  g_so_det_fixes.store(0, std::memory_order_relaxed);
}

}  // namespace mksgd
