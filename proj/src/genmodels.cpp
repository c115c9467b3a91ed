#include "cldyn/genmodels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cldyn {

OrthonormalDictionary OrthonormalDictionary::identity(Index d) {
  return {Matrix::Identity(d, d), std::nullopt};
}

OrthonormalDictionary OrthonormalDictionary::random(Index d, Index m, std::uint64_t seed) {
  if (m > d) throw DimensionError("cannot fit more orthonormal columns than the dimension");
  Rng rng = make_rng(seed);
  Matrix q = random_orthogonal(d, rng);
  return {q.leftCols(m), std::nullopt};
}

OrthonormalDictionary OrthonormalDictionary::perturbed(double eps, std::uint64_t seed) const {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-eps, eps);
  Matrix e(base.rows(), base.cols());
  for (Index j = 0; j < e.cols(); ++j)
    for (Index i = 0; i < e.rows(); ++i) e(i, j) = u(rng);
  return {base, e};
}

Matrix OrthonormalDictionary::columns() const {
  return perturbation ? Matrix(base + *perturbation) : base;
}

void CategoricalModel::validate() const {
  if (probs.size() != dict.atoms())
    throw DimensionError("categorical model: probs size differs from dictionary atoms");
  if (probs.minCoeff() < 0.0) throw InvalidConfiguration("categorical probabilities must be >= 0");
  if (std::abs(probs.sum() - 1.0) > 1e-12)
    throw InvalidConfiguration("categorical probabilities must sum to 1");
}

void SummationModel::validate() const {
  if (q.size() != dict.atoms())
    throw DimensionError("summation model: q size differs from dictionary atoms");
  for (Index m = 0; m < q.size(); ++m)
    if (!(q[m] > 0.0 && q[m] < 1.0)) throw InvalidConfiguration("summation q must lie in (0,1)");
}

Matrix sample_categorical(const CategoricalModel& model, Index n, std::uint64_t seed,
                          std::vector<int>* labels) {
  model.validate();
  if (n < 1) throw InvalidConfiguration("sample count must be >= 1");
  Rng rng = make_rng(seed);
  std::discrete_distribution<int> pick(model.probs.data(), model.probs.data() + model.probs.size());
  Matrix u = model.dict.columns();
  Matrix out(n, u.rows());
  if (labels) labels->resize(n);
  for (Index i = 0; i < n; ++i) {
    int m = pick(rng);
    out.row(i) = u.col(m).transpose();
    if (labels) (*labels)[i] = m;
  }
  return out;
}

Matrix sample_categorical(const CategoricalModel& model, Index n, std::uint64_t seed) {
  return sample_categorical(model, n, seed, nullptr);
}

Matrix sample_summation_latent(const SummationModel& model, Index n, std::uint64_t seed) {
  model.validate();
  if (n < 1) throw InvalidConfiguration("sample count must be >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Index m = model.q.size();
  Matrix y(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < m; ++k) {
      double q = model.q[k];
      y(i, k) = u(rng) < q ? SummationModel::y_plus(q) : SummationModel::y_minus(q);
    }
  return y;
}

Matrix sample_summation(const SummationModel& model, Index n, std::uint64_t seed) {
  Matrix y = sample_summation_latent(model, n, seed);
  return y * model.dict.columns().transpose();
}

Matrix analytic_A_categorical(const CategoricalModel& model, Index m) {
  model.validate();
  if (!model.dict.exact())
    throw UnsupportedConfiguration("closed form requires an exactly orthonormal dictionary");
  if (m < 0 || m >= model.dict.atoms()) throw DimensionError("atom index out of range");
  double p = model.probs[m];
  Vector u = model.dict.base.col(m);
  return p * (1.0 - p) * u * u.transpose();
}

Matrix analytic_A_summation(const SummationModel& model, Index m) {
  model.validate();
  if (!model.dict.exact())
    throw UnsupportedConfiguration("closed form requires an exactly orthonormal dictionary");
  if (m < 0 || m >= model.dict.atoms()) throw DimensionError("atom index out of range");
  double q = model.q[m];
  Vector u = model.dict.base.col(m);
  Index d = u.size();
  Matrix uu = u * u.transpose();
  return (1.0 - q) * (1.0 - q) * uu + q * (Matrix::Identity(d, d) - uu);
}

double summation_tie_threshold() { return 0.5 * (3.0 - std::sqrt(5.0)); }

GatedOperator summation_population_operator(const SummationModel& model, const Activation& act) {
  model.validate();
  const Index m = model.q.size();
  if (m > 16) throw UnsupportedConfiguration("population enumeration limited to 16 latent atoms");
  const Index configs = Index(1) << m;
  auto xs = std::make_shared<Matrix>(configs, model.dict.dim());
  auto ps = std::make_shared<Vector>(configs);
  Matrix u = model.dict.columns();
  for (Index c = 0; c < configs; ++c) {
    Vector y(m);
    double p = 1.0;
    for (Index k = 0; k < m; ++k) {
      double q = model.q[k];
      bool up = (c >> k) & 1;
      y[k] = up ? SummationModel::y_plus(q) : SummationModel::y_minus(q);
      p *= up ? q : 1.0 - q;
    }
    xs->row(c) = (u * y).transpose();
    (*ps)[c] = p;
  }
  std::shared_ptr<const Matrix> cx = xs;
  std::shared_ptr<const Vector> cp = ps;
  return GatedOperator(model.dict.dim(), [cx, cp, act](const Vector& w) {
    Matrix g = gate_rows(*cx, w, act);
    Vector mean = g.transpose() * *cp;
    Matrix second = g.transpose() * cp->asDiagonal() * g;
    return Matrix(second - mean * mean.transpose());
  });
}

PairedBatch unaugmented_batch(const Matrix& samples) { return PairedBatch(samples, samples); }

PairCheck spherical_gaussian_pair_check(const Vector& w, const Vector& w_prime, Index n,
                                        std::uint64_t seed) {
  if (w.size() != w_prime.size()) throw DimensionError("pair check: w and w' sizes differ");
  if (w.size() < 2) throw DimensionError("pair check needs D >= 2");
  if (w.norm() < 1e-12 || w_prime.norm() < 1e-12)
    throw InvalidVector("pair check: zero-norm input");
  if (n < 2) throw InsufficientSamples("pair check needs at least 2 samples");
  Vector a = w.normalized();
  Vector b = w_prime.normalized();
  const Index d = a.size();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);

  Vector proj_b = b - a * a.dot(b);
  const double pb = proj_b.norm();
  Vector dir = pb > 1e-12 ? Vector(proj_b / pb) : Vector::Zero(d);

  // accumulate E[g1 (g2.b)] and the two means
  Vector cross = Vector::Zero(d), mean1 = Vector::Zero(d);
  double mean2b = 0.0, t_sum = 0.0, t_sq = 0.0;
  Vector x(d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) x[k] = g(rng);
    bool on1 = a.dot(x) > 0.0;
    double s2 = b.dot(x) > 0.0 ? b.dot(x) : 0.0;
    if (on1) {
      cross += x * s2;
      mean1 += x;
      double t = dir.dot(x) * s2;
      t_sum += t;
      t_sq += t * t;
    }
    mean2b += s2;
  }
  const double nn = double(n);
  cross /= nn;
  mean1 /= nn;
  mean2b /= nn;
  Vector ab = cross - mean1 * mean2b;
  Vector projected = ab - a * a.dot(ab);

  double theta = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  PairCheck out;
  out.expected = (std::numbers::pi - theta) / (2.0 * std::numbers::pi);
  out.discrepancy = (projected - out.expected * proj_b).norm();
  if (pb > 1e-12) {
    out.coefficient = projected.dot(dir) / pb;
    double mt = t_sum / nn;
    double var = std::max(0.0, t_sq / nn - mt * mt);
    out.standard_error = std::sqrt(var / nn) / pb;
  } else {
    out.coefficient = out.expected;
  }
  return out;
}

}  // namespace cldyn
