#pragma once

#include "cldyn/synthdata.hpp"
#include "cldyn/twolayer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cldyn {

struct LossConfig {
  enum class Kind { InfoNCE, Quadratic };
  Kind kind = Kind::InfoNCE;
  double tau = 0.5;
  double eps = 1.0;

  static LossConfig infonce(double tau = 0.5, double eps = 1.0) { return {Kind::InfoNCE, tau, eps}; }
  static LossConfig quadratic() { return {Kind::Quadratic, 0.5, 1.0}; }
  void validate() const;
  std::string name() const;
};

struct OptimConfig {
  double lr = 2e-3;
  double momentum = 0.9;
  double weight_decay = 5e-3;
  long steps = 5000;
  Index batch_size = 128;
  bool normalize_filters = false;  // renormalize every w_km after each step
  void validate() const;
};

struct LossValue {
  double value = 0.0;
  Matrix grad_anchors;
  Matrix grad_views;
};

// d^2 = |.|^2 / 2; negatives are all anchor-anchor pairs.
LossValue infonce_loss(const Matrix& f2_anchors, const Matrix& f2_views, double tau, double eps);
// -tr C_alpha[f] with uniform alpha.
LossValue quadratic_loss(const Matrix& f2_anchors, const Matrix& f2_views);
LossValue evaluate_loss(const LossConfig& loss, const Matrix& f2_anchors, const Matrix& f2_views);

struct FitResult {
  TwoLayerNet net;
  std::vector<double> loss;
};

FitResult fit(TwoLayerNet net, const GeneratorPool& pool, const TokenEmbedding& emb,
              const LossConfig& loss, const OptimConfig& optim,
              const std::optional<BNVariant>& bn, std::uint64_t seed);

void write_loss_curve(const std::vector<double>& loss, const std::string& path);

}  // namespace cldyn
