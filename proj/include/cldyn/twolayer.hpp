#pragma once

#include "cldyn/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cldyn {

// W holds one filter per row, row index k*M + m. V is d_out x (K*M).
struct TwoLayerNet {
  Index K = 0, M = 0, d = 0, d_out = 0;
  Matrix W;
  Matrix V;
  Activation act = Activation::relu();

  // Gaussian init, filters renormalized, V scaled by 1/sqrt(KM). d_out <= 0 means K*M.
  static TwoLayerNet random(Index K, Index M, Index d, Index d_out, const Activation& act,
                            std::uint64_t seed);

  Index width() const { return K * M; }
  Index row(Index k, Index m) const { return k * M + m; }
  Vector filter(Index k, Index m) const { return W.row(row(k, m)).transpose(); }
  Matrix S() const { return V.transpose() * V; }
  void normalize_filters();
  void validate() const;
};

// anchors/views are N x (K*d); column block k holds receptive field k.
struct RFBatch {
  Matrix anchors;
  Matrix views;
  Index K = 0, d = 0;

  RFBatch() = default;
  RFBatch(Matrix anchors_, Matrix views_, Index K_, Index d_);
  Index n() const { return anchors.rows(); }
  Matrix stacked() const;
  void validate() const;
};

struct BNVariant {
  bool backprop_mean = true;
  bool backprop_var = false;
  double eps = 0.0;  // added to the batch variance; 0 keeps the strict zero-variance check
  std::string name() const;
};

struct ForwardResult {
  Matrix pre;   // 2N x KM pre-activations w_km . x_k
  Matrix h;     // 2N x KM activations before BN
  Matrix f1;    // after BN when enabled, otherwise equal to h
  Matrix f2;    // 2N x d_out
  Vector mu, sigma;
  bool bn = false;
};

ForwardResult forward(const TwoLayerNet& net, const RFBatch& batch,
                      const std::optional<BNVariant>& bn = std::nullopt);

struct NetGradients {
  Matrix dV;
  Matrix dW;
};

// Energy ascent direction (half the gradient of tr C_alpha[f2]).
NetGradients gradients(const TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                       const std::optional<BNVariant>& bn = std::nullopt, bool project = true);

// Chain rule from dL/df2 (2N x d_out) to the parameters, honouring the BN stop-gradient flags.
NetGradients backprop(const TwoLayerNet& net, const RFBatch& batch, const ForwardResult& fwd,
                      const Matrix& grad_f2, const std::optional<BNVariant>& bn = std::nullopt);

// 2N x (K*M*d): gated inputs x_k * h'(w_km . x_k), block km at columns km*d.
Matrix gated_inputs(const TwoLayerNet& net, const RFBatch& batch);

// Block form P_w [(S (x) 1 1^T) o C] w for a supplied covariance C of the gated inputs.
Matrix filter_rhs_from_covariance(const Matrix& W, const Matrix& S, const Matrix& C, Index d,
                                  bool project = true);

double energy(const TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
              const std::optional<BNVariant>& bn = std::nullopt);

// Fast top layer, analytic: V = v s^T with s the top eigenvector of C_alpha[f1] and |v| = 1.
void set_rank_one_top(TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                      const std::optional<BNVariant>& bn = std::nullopt);
// Fast top layer, iterative: V <- V + lr V C_alpha[f1] with Frobenius renormalization.
long iterate_top_layer(TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                       double lr, long max_steps, double tol,
                       const std::optional<BNVariant>& bn = std::nullopt);

using BatchSource = std::function<RFBatch(Rng&)>;

struct DynamicsResult {
  TwoLayerNet net;
  std::vector<double> energy;
};

DynamicsResult train_dynamics(TwoLayerNet net, const BatchSource& source, long steps, double lr,
                              bool normalize, const std::optional<BNVariant>& bn,
                              std::uint64_t seed);

// Latent variable z with C categories; RF k of a sample drawn from category c uses
// sampler(c, k, rng), independently across k.
struct ConditionalModel {
  Vector p;
  Index K = 0, d = 0;
  std::function<Vector(Index c, Index k, Rng&)> sampler;

  Index categories() const { return p.size(); }
  void validate() const;
  // n samples (n x K*d); labels filled when non-null.
  Matrix sample(Index n, Rng& rng, std::vector<int>* labels = nullptr) const;
  Matrix sample_category(Index c, Index n, Rng& rng) const;
  BatchSource batch_source(Index n) const;
};

// Each (c, k) draws one of `patterns` Gaussian prototype vectors (scaled by rf_scale[k]) plus
// isotropic noise of the given standard deviation.
ConditionalModel make_prototype_model(const Vector& p, Index K, Index d, Index patterns,
                                      double noise, std::uint64_t seed,
                                      const Vector& rf_scale = Vector());

struct VarianceDecomposition {
  std::vector<Matrix> L_blocks;
  std::vector<Vector> deltas;
  Vector weights;
  Matrix reassembled;
  Matrix direct;
  double residual = 0.0;  // max-abs entry of reassembled - direct
  double max_entry = 0.0;
};

VarianceDecomposition variance_decomposition(const ConditionalModel& model,
                                             const TwoLayerNet& net, Index n, std::uint64_t seed);

struct Rank1Eigen {
  double lambda = 0.0;
  Vector s;  // s_k = b_k / (Z (d_k - lambda))
  double Z = 0.0;
  bool degenerate = false;
};

Rank1Eigen rank1_top_eigen(const Vector& dvec, const Vector& b, double weight);

Vector decoupled_rhs(Index k, const Vector& w_k, const Matrix& L_k, const Vector& delta_k,
                     double s_k, double lambda, double d_k, double Z);

struct BNEffect {
  Vector d, sigma2, d_bn;
  double spread = 0.0;     // max d_k / min d_k
  double spread_bn = 0.0;  // max d_k^bn / min d_k^bn
};

BNEffect bn_statistics_effect(const ConditionalModel& model, const TwoLayerNet& net, Index n,
                              std::uint64_t seed);

void save_checkpoint(const TwoLayerNet& net, const std::string& path);
TwoLayerNet load_checkpoint(const std::string& path);

}  // namespace cldyn
