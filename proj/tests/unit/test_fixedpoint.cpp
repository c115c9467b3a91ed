#include "cldyn/fixedpoint.hpp"
#include "cldyn/genmodels.hpp"

#include <doctest.h>

#include <cmath>

using namespace cldyn;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("power iteration on a constant operator") {
  auto tr = power_iterate(constant_operator(diag2(3, 1)), v2(0.6, 0.8), 1e-12, 500);
  CHECK(tr.converged);
  CHECK(std::abs(tr.limit[0]) == doctest::Approx(1.0));
  CHECK(std::abs(tr.limit[1]) < 1e-6);
  for (std::size_t t = 1; t < tr.c_values.size(); ++t) CHECK(tr.c_values[t] >= tr.c_values[t - 1] - 1e-15);
}

TEST_CASE("power iteration on the summation family") {
  SummationModel s{OrthonormalDictionary::identity(3), Vector::Constant(3, 0.2)};
  GatedOperator a = summation_population_operator(s);
  Vector w0(3);
  w0 << 0.9, std::sqrt(1 - 0.81) * 0.6, std::sqrt(1 - 0.81) * 0.8;
  auto tr = power_iterate(a, w0, 1e-12, 200);
  CHECK(tr.converged);
  CHECK(std::abs(tr.limit.dot(s.dict.base.col(0))) > 1 - 1e-10);
  // geometric decay of the discrepancy
  CHECK(tr.discrepancies.size() > 3);
  CHECK(tr.discrepancies[3] < tr.discrepancies[0]);
}

TEST_CASE("perturbed dictionary keeps a nearby fixed point") {
  OrthonormalDictionary d = OrthonormalDictionary::identity(3).perturbed(0.02, 5);
  SummationModel s{d, Vector::Constant(3, 0.2)};
  auto tr = power_iterate(summation_population_operator(s), Vector::Unit(3, 0), 1e-12, 200);
  CHECK(tr.converged);
  double c = std::abs(tr.limit[0]);
  CHECK(c > 0.99);
  CHECK(c < 1.0 - 1e-10);
}

TEST_CASE("certificate values") {
  CHECK(certificate_mu(1.0, 0.81, 0.1) == doctest::Approx(std::pow(0.1 / 0.81, 2)).epsilon(1e-9));
  CHECK(certificate_nu(0.1, 0.9, 0.5, 0.0, 3.0) == 0.0);

  SummationModel s{OrthonormalDictionary::identity(2), Vector::Constant(2, 0.1)};
  GatedOperator a = summation_population_operator(s);
  ConvergenceCertificate c = certificate(a, Vector::Unit(2, 0), {0.02, 0.05, 0.1}, 32, 1);
  CHECK(c.c0 == doctest::Approx(1.0));
  CHECK(c.certified);

  ConvergenceCertificate k = certificate(constant_operator(diag2(3, 1)), v2(0.6, 0.8), {0.5}, 16, 1);
  CHECK(k.nu_sup == 0.0);

  ConvergenceCertificate z = certificate(constant_operator(diag2(3, 1)), v2(0.0, 1.0), {0.5}, 16, 1);
  CHECK_FALSE(z.certified);
}

TEST_CASE("lipschitz and kappa estimates") {
  CHECK(estimate_lipschitz(constant_operator(diag2(2, 1)), 50, v2(1, 0), 0.0, 1) == 0.0);
  GatedOperator lin(2, [](const Vector& w) -> Matrix { return w[0] * Matrix::Identity(2, 2); });
  double L = estimate_lipschitz(lin, 1000, v2(1, 0), 0.0, 3);
  CHECK(L <= 1.0 + 1e-12);
  CHECK(L >= 0.9);

  CHECK(estimate_kappa(constant_operator(diag2(2, 1)), v2(1, 0), {0.1, 0.05}, 1) == 0.0);
  GatedOperator bent(2, [](const Vector& w) -> Matrix {
    Matrix m = diag2(2, 1);
    m(0, 1) = m(1, 0) = 0.1 * w[1];
    return m;
  });
  double k1 = estimate_kappa(bent, v2(1, 0), {0.1}, 2);
  double k2 = estimate_kappa(bent, v2(1, 0), {0.05}, 2);
  double k3 = estimate_kappa(bent, v2(1, 0), {0.025}, 2);
  CHECK(std::isfinite(k1));
  CHECK(std::max({k1, k2, k3}) <= 2.0 * std::min({k1, k2, k3}));
}

TEST_CASE("pd shift") {
  Matrix m = diag2(1, -2);
  GatedOperator s = pd_shift(constant_operator(m), 0.01);
  auto sp = symmetric_spectrum(s(v2(1, 0)));
  CHECK(sp.bottom() == doctest::Approx(0.01));
  CHECK(std::abs(sp.top_vector()[0]) == doctest::Approx(1.0));
}

TEST_CASE("sphere flow") {
  auto still = sphere_flow(constant_operator(diag2(3, 1)), v2(1, 0), 0.01, 100);
  for (const auto& w : still) CHECK((w - v2(1, 0)).norm() <= 1e-10);
  auto tr = sphere_flow(constant_operator(diag2(3, 1)), v2(0.6, 0.8), 0.01, 5000);
  CHECK(std::abs(tr.back()[0]) > 1 - 1e-6);
}

TEST_CASE("stability probe") {
  SummationModel s{OrthonormalDictionary::identity(3), Vector::Constant(3, 0.1)};
  GatedOperator a = summation_population_operator(s);
  CHECK(stability_probe(a, Vector::Unit(3, 0), 1e-3, 8, 0.05, 2000, 1) == 1.0);
  CHECK(stability_probe(a, Vector::Unit(3, 0), 0.0, 4, 0.05, 10, 1) == 1.0);
  Vector off(3);
  off << 0.6, 0.8, 0.0;
  CHECK_THROWS_AS(stability_probe(a, off, 1e-3, 4, 0.05, 10, 1), NotCriticalPoint);
}
