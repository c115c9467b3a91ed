#include "cldyn/core.hpp"

#include <doctest.h>

using namespace cldyn;

namespace {

Matrix stack(const Matrix& a, const Matrix& v) {
  Matrix s(a.rows() + v.rows(), a.cols());
  s << a, v;
  return s;
}

}  // namespace

TEST_CASE("uniform alpha values") {
  CHECK(uniform_alpha(2)(0, 1) == doctest::Approx(0.25));
  CHECK(uniform_alpha(3)(1, 2) == doctest::Approx(1.0 / 12.0));
  CHECK(uniform_alpha(3)(1, 1) == 0.0);
  CHECK_THROWS_AS(uniform_alpha(1), InvalidBatch);
  Matrix bad = Matrix::Ones(3, 3);
  CHECK_THROWS_AS(PairwiseImportance::from_matrix(bad), InvalidConfiguration);
}

TEST_CASE("covariance without augmentation is the rescaled sample covariance") {
  Rng rng = make_rng(7);
  Matrix x = standard_normal_matrix(3, 4, rng);
  Matrix c = contrastive_covariance(stack(x, x), uniform_alpha(3));
  Vector mean = x.colwise().mean();
  Matrix second = x.transpose() * x / 3.0;
  Matrix expected = 3.0 / 2.0 * (second - mean * mean.transpose());
  CHECK((c - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant rows give a zero covariance") {
  Matrix x = Matrix::Constant(8, 3, 1.5);
  CHECK(contrastive_covariance(x, uniform_alpha(4)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pairwise and moment paths agree") {
  Rng rng = make_rng(11);
  for (Index n : {2, 5, 40}) {
    Matrix a = standard_normal_matrix(2 * n, 3, rng);
    Matrix b = standard_normal_matrix(2 * n, 2, rng);
    Matrix p = contrastive_covariance_pairwise(a, b, uniform_alpha(n));
    Matrix m = contrastive_covariance_moment(a, b, n);
    CHECK((p - m).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + p.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("N=200 moment identity against a brute-force double sum") {
  Rng rng = make_rng(3);
  Matrix x = standard_normal_matrix(200, 3, rng);
  Matrix s = stack(x, x);
  Matrix brute = Matrix::Zero(3, 3);
  const double a = 1.0 / (2.0 * 200 * 199);
  for (Index i = 0; i < 200; ++i)
    for (Index j = 0; j < 200; ++j)
      if (i != j) {
        Vector d = x.row(i) - x.row(j);
        brute += a * d * d.transpose();
      }
  Matrix c = contrastive_covariance(s, uniform_alpha(200));
  CHECK((c - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-uniform alpha uses the pairwise sum") {
  Rng rng = make_rng(5);
  Matrix w = Matrix::Zero(3, 3);
  w(0, 1) = 0.2;
  w(1, 2) = 0.5;
  w(2, 0) = 0.1;
  Matrix x = standard_normal_matrix(6, 2, rng);
  Matrix expected = Matrix::Zero(2, 2);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      if (w(i, j) == 0.0) continue;
      Vector d = x.row(i) - x.row(j);
      expected += w(i, j) * d * d.transpose();
    }
  Vector r = w.rowwise().sum();
  for (Index i = 0; i < 3; ++i) {
    Vector d = x.row(i) - x.row(i + 3);
    expected -= r[i] * d * d.transpose();
  }
  Matrix c = contrastive_covariance(x, PairwiseImportance::from_matrix(w));
  CHECK((c - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contrastive_apply represents the covariance") {
  Rng rng = make_rng(9);
  for (Index n : {3, 300}) {
    Matrix a = standard_normal_matrix(2 * n, 4, rng);
    Matrix b = standard_normal_matrix(2 * n, 2, rng);
    Matrix q = contrastive_apply(b, uniform_alpha(n));
    Matrix c = contrastive_covariance(a, b, uniform_alpha(n));
    CHECK((a.transpose() * q - c).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("gating") {
  Vector x(2);
  x << 1.0, -2.0;
  Vector w(2);
  w << 1.0, 1.0;  // w.x = -1
  CHECK(gate(x, w, Activation::relu()).isZero());
  CHECK(gate(x, w, Activation::linear()) == x);
  Vector w0(2);
  w0 << 2.0, 1.0;  // w.x = 0
  CHECK(gate(x, w0, Activation::relu()).isZero());
  CHECK(Activation::parse("leaky_relu:0.1").derivative(-1.0) == doctest::Approx(0.1));
  CHECK(Activation::monomial(3).homogeneity_scale() == 3.0);
  CHECK_THROWS(Activation::parse("tanh"));
}

TEST_CASE("gated operator is PSD without augmentation") {
  Rng rng = make_rng(21);
  Matrix x = standard_normal_matrix(50, 5, rng);
  GatedOperator a = empirical_operator(PairedBatch(x, x), uniform_alpha(50), Activation::relu());
  for (int t = 0; t < 5; ++t) {
    Vector w = random_unit_vector(5, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a(w));
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("invalid batches") {
  CHECK_THROWS_AS(PairedBatch(Matrix::Zero(1, 2), Matrix::Zero(1, 2)), InvalidBatch);
  CHECK_THROWS_AS(PairedBatch(Matrix::Zero(3, 2), Matrix::Zero(3, 3)), InvalidBatch);
  CHECK_THROWS(contrastive_covariance(Matrix::Zero(5, 2), uniform_alpha(2)));
}
