#include "cldyn/core.hpp"

#include <cmath>
#include <sstream>

namespace cldyn {

PairedBatch::PairedBatch(Matrix anchors_, Matrix views_)
    : anchors(std::move(anchors_)), views(std::move(views_)) {
  validate();
}

void PairedBatch::validate() const {
  if (anchors.rows() != views.rows() || anchors.cols() != views.cols())
    throw InvalidBatch("anchors and views must have identical shape");
  if (anchors.rows() < 2) throw InvalidBatch("a paired batch needs at least 2 pairs");
}

Matrix PairedBatch::stacked() const {
  Matrix s(2 * n(), dim());
  s.topRows(n()) = anchors;
  s.bottomRows(n()) = views;
  return s;
}

PairwiseImportance PairwiseImportance::uniform(Index n) {
  if (n < 2) throw InvalidBatch("uniform alpha needs N >= 2, got " + std::to_string(n));
  PairwiseImportance a;
  a.n_ = n;
  a.uniform_ = true;
  a.value_ = 1.0 / (2.0 * double(n) * double(n - 1));
  return a;
}

PairwiseImportance PairwiseImportance::from_matrix(const Matrix& weights) {
  if (weights.rows() != weights.cols()) throw DimensionError("alpha must be square");
  if (weights.rows() < 2) throw InvalidBatch("alpha needs N >= 2");
  for (Index i = 0; i < weights.rows(); ++i) {
    if (weights(i, i) != 0.0) throw InvalidConfiguration("alpha diagonal must be zero");
    for (Index j = 0; j < weights.cols(); ++j)
      if (!(weights(i, j) >= 0.0)) throw InvalidConfiguration("alpha entries must be >= 0");
  }
  PairwiseImportance a;
  a.n_ = weights.rows();
  a.uniform_ = false;
  a.weights_ = weights;
  return a;
}

PairwiseImportance uniform_alpha(Index n) { return PairwiseImportance::uniform(n); }

double PairwiseImportance::operator()(Index i, Index j) const {
  if (uniform_) return i == j ? 0.0 : value_;
  return weights_(i, j);
}

Matrix PairwiseImportance::weights() const {
  if (!uniform_) return weights_;
  Matrix w = Matrix::Constant(n_, n_, value_);
  w.diagonal().setZero();
  return w;
}

Vector PairwiseImportance::row_sums() const {
  if (uniform_) return Vector::Constant(n_, value_ * double(n_ - 1));
  return weights_.rowwise().sum();
}

namespace {

void check_shapes(const Matrix& a, const Matrix& b, Index n) {
  if (a.rows() != b.rows())
    throw DimensionError("contrastive covariance: a and b row counts differ");
  if (a.rows() != 2 * n)
    throw DimensionError("contrastive covariance: expected " + std::to_string(2 * n) +
                         " rows (2N), got " + std::to_string(a.rows()));
}

}  // namespace

Matrix contrastive_covariance_pairwise(const Matrix& a, const Matrix& b,
                                       const PairwiseImportance& alpha) {
  const Index n = alpha.n();
  check_shapes(a, b, n);
  auto A = a.topRows(n);
  auto B = b.topRows(n);
  Matrix W = alpha.weights();
  Vector r = W.rowwise().sum();
  Vector c = W.colwise().sum().transpose();

  // sum_ij alpha_ij (a_i - a_j)(b_i - b_j)^T expanded into weighted Gram products
  Matrix out = A.transpose() * (r + c).asDiagonal() * B;
  out.noalias() -= A.transpose() * (W + W.transpose()) * B;

  Matrix da = A - a.bottomRows(n);
  Matrix db = B - b.bottomRows(n);
  out.noalias() -= da.transpose() * r.asDiagonal() * db;
  return out;
}

Matrix contrastive_covariance_moment(const Matrix& a, const Matrix& b, Index n) {
  if (n < 2) throw InvalidBatch("moment form needs N >= 2");
  check_shapes(a, b, n);
  auto A = a.topRows(n);
  auto B = b.topRows(n);
  const double nn = double(n);
  Vector ma = A.colwise().mean().transpose();
  Vector mb = B.colwise().mean().transpose();
  Matrix out = (A.transpose() * B) / nn - ma * mb.transpose();
  out *= nn / (nn - 1.0);
  Matrix da = A - a.bottomRows(n);
  Matrix db = B - b.bottomRows(n);
  out.noalias() -= (da.transpose() * db) / (2.0 * nn);
  return out;
}

Matrix contrastive_apply(const Matrix& b, const PairwiseImportance& alpha) {
  const Index n = alpha.n();
  if (b.rows() != 2 * n)
    throw DimensionError("contrastive apply: expected " + std::to_string(2 * n) + " rows");
  auto B = b.topRows(n);
  Matrix db = B - b.bottomRows(n);
  Vector r = alpha.row_sums();
  Matrix out(2 * n, b.cols());
  if (alpha.is_uniform()) {
    Eigen::RowVectorXd total = B.colwise().sum();
    out.topRows(n) = (2.0 * alpha.uniform_value()) * ((double(n) * B).rowwise() - total);
  } else {
    Matrix W = alpha.weights();
    Matrix Ws = W + W.transpose();
    Vector deg = Ws.rowwise().sum();
    out.topRows(n) = deg.asDiagonal() * B;
    out.topRows(n).noalias() -= Ws * B;
  }
  out.topRows(n) -= r.asDiagonal() * db;
  out.bottomRows(n) = r.asDiagonal() * db;
  return out;
}

Matrix contrastive_covariance(const Matrix& a, const Matrix& b, const PairwiseImportance& alpha) {
  check_shapes(a, b, alpha.n());
  if (alpha.is_uniform() && alpha.n() > kExactSumMaxPairs)
    return contrastive_covariance_moment(a, b, alpha.n());
  return contrastive_covariance_pairwise(a, b, alpha);
}

Activation Activation::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw InvalidConfiguration("leaky relu slope must lie in (0,1)");
  return {Kind::LeakyReLU, slope, 1};
}

Activation Activation::monomial(int p) {
  if (p < 1) throw InvalidConfiguration("monomial power must be >= 1");
  return {Kind::Monomial, 0.0, p};
}

double Activation::value(double x) const {
  switch (kind) {
    case Kind::Linear: return x;
    case Kind::ReLU: return x > 0.0 ? x : 0.0;
    case Kind::LeakyReLU: return x > 0.0 ? x : slope * x;
    case Kind::Monomial: return std::pow(x, power);
  }
  return x;
}

double Activation::derivative(double x) const {
  switch (kind) {
    case Kind::Linear: return 1.0;
    case Kind::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Kind::LeakyReLU: return x > 0.0 ? 1.0 : slope;
    case Kind::Monomial: return power == 1 ? 1.0 : power * std::pow(x, power - 1);
  }
  return 1.0;
}

std::string Activation::name() const {
  switch (kind) {
    case Kind::Linear: return "linear";
    case Kind::ReLU: return "relu";
    case Kind::LeakyReLU: {
      std::ostringstream os;
      os.precision(17);
      os << "leaky_relu:" << slope;
      return os.str();
    }
    case Kind::Monomial: return "monomial:" + std::to_string(power);
  }
  return "?";
}

Activation Activation::parse(const std::string& s) {
  if (s == "linear") return linear();
  if (s == "relu") return relu();
  auto colon = s.find(':');
  std::string head = s.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : s.substr(colon + 1);
  try {
    if (head == "leaky_relu") return leaky_relu(arg.empty() ? 0.01 : std::stod(arg));
    if (head == "monomial") return monomial(arg.empty() ? 2 : std::stoi(arg));
  } catch (const std::logic_error&) {
    throw InvalidConfiguration("bad activation argument: " + s);
  }
  throw InvalidConfiguration("unknown activation: " + s);
}

Vector gate(const Vector& x, const Vector& w, const Activation& act) {
  if (x.size() != w.size()) throw DimensionError("gate: x and w sizes differ");
  return x * act.derivative(w.dot(x));
}

Matrix gate_rows(const Matrix& x, const Vector& w, const Activation& act) {
  if (x.cols() != w.size()) throw DimensionError("gate: sample dimension and w size differ");
  if (act.kind == Activation::Kind::Linear) return x;
  Vector z = x * w;
  Matrix out = x;
  for (Index i = 0; i < x.rows(); ++i) out.row(i) *= act.derivative(z[i]);
  return out;
}

Matrix GatedOperator::operator()(const Vector& w) const {
  if (!fn_) throw InvalidConfiguration("empty gated operator");
  if (w.size() != dim_)
    throw DimensionError("operator of dimension " + std::to_string(dim_) +
                         " evaluated at vector of size " + std::to_string(w.size()));
  return fn_(w);
}

GatedOperator empirical_operator(const PairedBatch& batch, const PairwiseImportance& alpha,
                                 const Activation& act) {
  batch.validate();
  if (alpha.n() != batch.n()) throw DimensionError("alpha size differs from batch pair count");
  auto rows = std::make_shared<const Matrix>(batch.stacked());
  auto al = std::make_shared<const PairwiseImportance>(alpha);
  return GatedOperator(batch.dim(), [rows, al, act](const Vector& w) {
    Matrix g = gate_rows(*rows, w, act);
    return contrastive_covariance(g, g, *al);
  });
}

GatedOperator constant_operator(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("constant operator must be square");
  auto m = std::make_shared<const Matrix>(a);
  return GatedOperator(a.rows(), [m](const Vector&) { return *m; });
}

}  // namespace cldyn
