#include "mksgd/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mksgd/errors.hpp"

namespace mksgd::oracle {

namespace detail {

Matrix random_unit_columns(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    double sq;
    do {
      sq = 0.0;
      for (int i = 0; i < rows; ++i) {
        m(i, j) = gauss(rng);
        sq += m(i, j) * m(i, j);
      }
    } while (sq == 0.0);
    m.col(j) /= std::sqrt(sq);
  }
  return m;
}

Matrix normalize_columns(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (n <= 1e-300) throw numeric_error("oracle: zero column");
    out.col(j) /= n;
  }
  return out;
}

}  // namespace detail

std::vector<EigenPair> symmetric_top_eigen(const Matrix& m, int k,
                                           int max_iters, double tol) {
  if (m.rows() != m.cols()) {
    throw shape_error("symmetric_top_eigen: matrix must be square");
  }
  const int n = static_cast<int>(m.rows());
  // Gershgorin bound; shifting by it pushes every eigenvalue above zero so
  // power iteration locks onto the largest signed one.
  double bound = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += std::abs(m(i, j));
    bound = std::max(bound, row);
  }
  Matrix work = m + (bound + 1.0) * Matrix::Identity(n, n);

  std::vector<EigenPair> out;
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> gauss;
  for (int pair = 0; pair < std::min(k, n); ++pair) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = gauss(rng);
    // make the start orthogonal to already-found vectors
    for (const EigenPair& e : out) v -= e.vector.dot(v) * e.vector;
    v.normalize();
    double mu = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      Vector next = work * v;
      for (const EigenPair& e : out) next -= e.vector.dot(next) * e.vector;
      const double nn = next.norm();
      if (nn == 0.0) break;
      next /= nn;
      mu = next.dot(work * next);
      if ((work * next - mu * next).norm() <= tol * std::abs(mu)) {
        v = next;
        break;
      }
      v = next;
    }
    out.push_back({mu - (bound + 1.0), v});
    // deflate
    work -= mu * v * v.transpose();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        work(i, j) = 0.5 * (work(i, j) + work(j, i));
      }
    }
  }
  return out;
}

double lambda_max(const Matrix& m) {
  return symmetric_top_eigen(m, 1).front().value;
}

SvdResult jacobi_svd(const Matrix& a, int max_sweeps, double tol) {
  const int mrows = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (mrows < n) throw shape_error("jacobi_svd: requires rows >= cols");
  Matrix u = a;                         // becomes A V
  Matrix v = Matrix::Identity(n, n);
  const double off_tol = tol * std::max(1.0, a.norm());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double app = u.col(p).squaredNorm();
        const double aqq = u.col(q).squaredNorm();
        const double apq = u.col(p).dot(u.col(q));
        if (std::abs(apq) <= off_tol * std::sqrt(std::max(app * aqq, 1e-300))) {
          continue;
        }
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < mrows; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  SvdResult r;
  r.sigma.resize(n);
  r.u = Matrix::Zero(mrows, n);
  r.v = v;
  for (int j = 0; j < n; ++j) {
    r.sigma(j) = u.col(j).norm();
    if (r.sigma(j) > 1e-300) {
      r.u.col(j) = u.col(j) / r.sigma(j);
    } else {
      r.u.col(j).setZero();
      r.u(j % mrows, j) = 1.0;
    }
  }
  // descending singular values
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return r.sigma(i) > r.sigma(j); });
  SvdResult sorted;
  sorted.sigma.resize(n);
  sorted.u.resize(mrows, n);
  sorted.v.resize(n, n);
  for (int j = 0; j < n; ++j) {
    sorted.sigma(j) = r.sigma(order[j]);
    sorted.u.col(j) = r.u.col(order[j]);
    sorted.v.col(j) = r.v.col(order[j]);
  }
  return sorted;
}

Matrix procrustes_optimum(const Matrix& p, const Matrix& q) {
  if (p.cols() != q.cols()) {
    throw shape_error("procrustes_optimum: requires square P'Q");
  }
  const Matrix cross = p.transpose() * q;
  const SvdResult svd = jacobi_svd(cross);
  return svd.u * svd.v.transpose();
}

}  // namespace mksgd::oracle
