#pragma once

#include "cldyn/types.hpp"

#include <functional>
#include <memory>

namespace cldyn {

// N anchors and their N augmented views; row i of views pairs with row i of anchors.
struct PairedBatch {
  Matrix anchors;
  Matrix views;

  PairedBatch() = default;
  PairedBatch(Matrix anchors_, Matrix views_);

  Index n() const { return anchors.rows(); }
  Index dim() const { return anchors.cols(); }
  // 2N x D, anchors first then views.
  Matrix stacked() const;
  void validate() const;
};

// alpha_ij weights. Uniform weights are stored implicitly so large N stays cheap.
class PairwiseImportance {
 public:
  static PairwiseImportance uniform(Index n);
  static PairwiseImportance from_matrix(const Matrix& weights);

  Index n() const { return n_; }
  bool is_uniform() const { return uniform_; }
  double uniform_value() const { return value_; }
  double operator()(Index i, Index j) const;
  Matrix weights() const;
  // sum_{j != i} alpha_ij for every i
  Vector row_sums() const;

 private:
  Index n_ = 0;
  bool uniform_ = true;
  double value_ = 0.0;
  Matrix weights_;
};

PairwiseImportance uniform_alpha(Index n);

// Batches above this pair count use the moment form when alpha is uniform.
inline constexpr Index kExactSumMaxPairs = 512;

// C_alpha[a, b] for stacked 2N-row samples (anchors first, then views).
Matrix contrastive_covariance(const Matrix& a, const Matrix& b, const PairwiseImportance& alpha);
inline Matrix contrastive_covariance(const Matrix& a, const PairwiseImportance& alpha) {
  return contrastive_covariance(a, a, alpha);
}

// Explicit evaluation paths, exposed for cross-checking.
Matrix contrastive_covariance_pairwise(const Matrix& a, const Matrix& b,
                                       const PairwiseImportance& alpha);
Matrix contrastive_covariance_moment(const Matrix& a, const Matrix& b, Index n);

// Q b such that C_alpha[a, b] = a^T (Q b) for every a; also half the gradient of
// tr C_alpha[b] with respect to the rows of b.
Matrix contrastive_apply(const Matrix& b, const PairwiseImportance& alpha);

struct Activation {
  enum class Kind { Linear, ReLU, LeakyReLU, Monomial };

  Kind kind = Kind::ReLU;
  double slope = 0.0;
  int power = 1;

  static Activation linear() { return {Kind::Linear, 0.0, 1}; }
  static Activation relu() { return {Kind::ReLU, 0.0, 1}; }
  static Activation leaky_relu(double slope);
  static Activation monomial(int p);

  double value(double x) const;
  double derivative(double x) const;
  // h'(x) x = scale * h(x); 1 except for monomials where it is p.
  double homogeneity_scale() const { return kind == Kind::Monomial ? power : 1.0; }
  std::string name() const;
  static Activation parse(const std::string& s);
};

Vector gate(const Vector& x, const Vector& w, const Activation& act);
// Gates every row of x by h'(row . w).
Matrix gate_rows(const Matrix& x, const Vector& w, const Activation& act);

// A(w), evaluated lazily; copies share read-only state and may be used from many threads.
class GatedOperator {
 public:
  using Fn = std::function<Matrix(const Vector&)>;

  GatedOperator() = default;
  GatedOperator(Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

  Matrix operator()(const Vector& w) const;
  Index dim() const { return dim_; }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  Index dim_ = 0;
  Fn fn_;
};

GatedOperator empirical_operator(const PairedBatch& batch, const PairwiseImportance& alpha,
                                 const Activation& act);
GatedOperator constant_operator(const Matrix& a);

}  // namespace cldyn
