#include "cldyn/genmodels.hpp"

#include <doctest.h>

#include <cmath>

using namespace cldyn;

TEST_CASE("degenerate categorical probabilities") {
  CategoricalModel m{OrthonormalDictionary::identity(3), Vector::Zero(3)};
  m.probs[0] = 1.0;
  Matrix x = sample_categorical(m, 20, 1);
  for (Index i = 0; i < x.rows(); ++i) CHECK(x.row(i).transpose() == m.dict.base.col(0));
}

TEST_CASE("categorical frequency within a binomial band") {
  CategoricalModel m{OrthonormalDictionary::identity(2), Vector(2)};
  m.probs << 0.3, 0.7;
  const Index n = 100000;
  std::vector<int> labels;
  Matrix x = sample_categorical(m, n, 2, &labels);
  double freq = (x.col(0).array() > 0.5).cast<double>().mean();
  CHECK(std::abs(freq - 0.3) < 3.0 * std::sqrt(0.21 / n));
  CHECK(labels.size() == std::size_t(n));
  CHECK(sample_categorical(m, 50, 9) == sample_categorical(m, 50, 9));
}

TEST_CASE("categorical probabilities must sum to one") {
  CategoricalModel m{OrthonormalDictionary::identity(2), Vector::Constant(2, 0.3)};
  CHECK_THROWS(sample_categorical(m, 5, 1));
}

TEST_CASE("summation latent moments") {
  SummationModel m{OrthonormalDictionary::identity(3), Vector(3)};
  m.q << 0.2, 0.5, 0.1;
  const Index n = 100000;
  Matrix y = sample_summation_latent(m, n, 4);
  for (Index j = 0; j < 3; ++j) {
    double mean = y.col(j).mean();
    double second = y.col(j).squaredNorm() / double(n);
    Eigen::ArrayXd sq = y.col(j).array().square();
    double sd2 = std::sqrt((sq - second).square().mean());
    CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
    CHECK(std::abs(second - 1.0) < 3.0 * sd2 / std::sqrt(double(n)) + 1e-12);
  }
  CHECK((y.col(1).array().abs() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("summation sample covariance is the identity on span(U)") {
  OrthonormalDictionary d = OrthonormalDictionary::random(5, 3, 8);
  SummationModel m{d, Vector::Constant(3, 0.3)};
  Matrix x = sample_summation(m, 100000, 5);
  Matrix cov = x.transpose() * x / double(x.rows());
  Matrix proj = d.base * d.base.transpose();
  CHECK((cov - proj).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("closed forms") {
  CategoricalModel c{OrthonormalDictionary::identity(2), Vector(2)};
  c.probs << 0.3, 0.7;
  Matrix a = analytic_A_categorical(c, 0);
  CHECK(a(0, 0) == doctest::Approx(0.21));
  CHECK(a.cwiseAbs().sum() == doctest::Approx(0.21));

  SummationModel s{OrthonormalDictionary::identity(3), Vector::Constant(3, 0.2)};
  Eigen::SelfAdjointEigenSolver<Matrix> es(analytic_A_summation(s, 0));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(0.64));
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.2));

  CHECK(summation_tie_threshold() == doctest::Approx(0.381966).epsilon(1e-6));
  SummationModel half{OrthonormalDictionary::identity(2), Vector::Constant(2, 0.5)};
  Matrix h = analytic_A_summation(half, 0);
  CHECK(h(0, 0) == doctest::Approx(0.25));
  CHECK(h(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("gated variance Monte-Carlo matches the closed forms") {
  CategoricalModel c{OrthonormalDictionary::identity(2), Vector(2)};
  c.probs << 0.3, 0.7;
  Matrix x = sample_categorical(c, 1000000, 12);
  GatedOperator a = empirical_operator(unaugmented_batch(x), uniform_alpha(x.rows()),
                                       Activation::relu());
  Matrix mc = a(c.dict.base.col(0));
  CHECK(std::abs(mc(0, 0) - 0.21) < 0.02 * 0.21);
}

TEST_CASE("population operator matches the summation closed form at u_m") {
  SummationModel s{OrthonormalDictionary::identity(4), Vector::Constant(4, 0.2)};
  GatedOperator pop = summation_population_operator(s);
  Matrix a = pop(s.dict.base.col(1));
  CHECK((a - analytic_A_summation(s, 1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spherical Gaussian pair coefficient") {
  Vector w = Vector::Unit(4, 0), wp = Vector::Unit(4, 1);
  PairCheck pc = spherical_gaussian_pair_check(w, wp, 1000000, 3);
  CHECK(pc.expected == doctest::Approx(0.25));
  CHECK(std::abs(pc.coefficient - 0.25) < 3.0 * pc.standard_error + 1e-12);
}
