#include "cldyn/types.hpp"

#include <cmath>

namespace cldyn {

Vector standard_normal_vector(Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

Matrix standard_normal_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

Vector random_unit_vector(Index n, Rng& rng) {
  for (;;) {
    Vector v = standard_normal_vector(n, rng);
    double nv = v.norm();
    if (nv > 1e-12) return v / nv;
  }
}

Matrix random_orthogonal(Index n, Rng& rng) {
  Matrix g = standard_normal_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // sign fix so the distribution is Haar
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

Matrix tangent_projector(const Vector& w) {
  Index n = w.size();
  return Matrix::Identity(n, n) - w * w.transpose();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace cldyn
