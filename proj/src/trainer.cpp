#include "cldyn/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace cldyn {

void LossConfig::validate() const {
  if (kind == Kind::InfoNCE) {
    if (!(tau > 0.0)) throw InvalidConfiguration("tau must be positive");
    if (!(eps >= 0.0)) throw InvalidConfiguration("eps must be >= 0");
  }
}

std::string LossConfig::name() const { return kind == Kind::InfoNCE ? "infonce" : "quadratic"; }

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidConfiguration("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfiguration("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw InvalidConfiguration("weight decay must be >= 0");
  if (steps < 0) throw InvalidConfiguration("steps must be >= 0");
  if (batch_size < 2) throw InvalidConfiguration("batch size must be >= 2");
}

namespace {

void check_pair(const Matrix& a, const Matrix& v) {
  if (a.rows() != v.rows() || a.cols() != v.cols())
    throw DimensionError("anchor and view representations differ in shape");
  if (a.rows() < 2) throw InvalidBatch("loss needs N >= 2");
}

}  // namespace

LossValue infonce_loss(const Matrix& f2_anchors, const Matrix& f2_views, double tau, double eps) {
  check_pair(f2_anchors, f2_views);
  if (!(tau > 0.0)) throw InvalidConfiguration("tau must be positive");
  if (!(eps >= 0.0)) throw InvalidConfiguration("eps must be >= 0");
  const Index n = f2_anchors.rows();
  const auto& A = f2_anchors;
  Matrix diff = A - f2_views;
  Vector dpos = 0.5 * diff.rowwise().squaredNorm();
  Matrix gram = A * A.transpose();
  Vector sq = gram.diagonal();

  Matrix p(n, n);
  Vector p0(n);
  double value = 0.0;
  for (Index i = 0; i < n; ++i) {
    double pos = -dpos[i] / tau;
    double m = eps > 0.0 ? pos : -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double dij = 0.5 * std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j));
      p(i, j) = -dij / tau;
      m = std::max(m, p(i, j));
    }
    double z = eps > 0.0 ? eps * std::exp(pos - m) : 0.0;
    for (Index j = 0; j < n; ++j)
      if (j != i) z += std::exp(p(i, j) - m);
    double logz = m + std::log(z);
    value += dpos[i] + tau * logz;
    p0[i] = eps > 0.0 ? std::exp(std::log(eps) + pos - logz) : 0.0;
    for (Index j = 0; j < n; ++j) p(i, j) = j == i ? 0.0 : std::exp(p(i, j) - logz);
  }
  Matrix ps = p + p.transpose();
  Vector deg = ps.rowwise().sum();
  LossValue out;
  out.value = value;
  Matrix pull = (Vector::Ones(n) - p0).asDiagonal() * diff;
  out.grad_anchors = pull - deg.asDiagonal() * A;
  out.grad_anchors.noalias() += ps * A;
  out.grad_views = -pull;
  return out;
}

LossValue quadratic_loss(const Matrix& f2_anchors, const Matrix& f2_views) {
  check_pair(f2_anchors, f2_views);
  const Index n = f2_anchors.rows();
  Matrix f(2 * n, f2_anchors.cols());
  f.topRows(n) = f2_anchors;
  f.bottomRows(n) = f2_views;
  PairwiseImportance alpha = uniform_alpha(n);
  LossValue out;
  out.value = -contrastive_covariance(f, f, alpha).trace();
  Matrix g = -2.0 * contrastive_apply(f, alpha);
  out.grad_anchors = g.topRows(n);
  out.grad_views = g.bottomRows(n);
  return out;
}

LossValue evaluate_loss(const LossConfig& loss, const Matrix& f2_anchors, const Matrix& f2_views) {
  loss.validate();
  if (loss.kind == LossConfig::Kind::InfoNCE)
    return infonce_loss(f2_anchors, f2_views, loss.tau, loss.eps);
  return quadratic_loss(f2_anchors, f2_views);
}

FitResult fit(TwoLayerNet net, const GeneratorPool& pool, const TokenEmbedding& emb,
              const LossConfig& loss, const OptimConfig& optim,
              const std::optional<BNVariant>& bn, std::uint64_t seed) {
  loss.validate();
  optim.validate();
  net.validate();
  if (net.K != pool.K || net.d != emb.dim())
    throw DimensionError("network layout does not match the pool/embedding");
  Rng rng = make_rng(seed);
  Matrix bufW = Matrix::Zero(net.W.rows(), net.W.cols());
  Matrix bufV = Matrix::Zero(net.V.rows(), net.V.cols());
  FitResult out;
  out.loss.reserve(optim.steps);
  const Index n = optim.batch_size;
  Matrix grad_f2;
  for (long t = 0; t < optim.steps; ++t) {
    LabeledBatch lb = make_batch(pool, emb, n, rng);
    ForwardResult fwd = forward(net, lb.batch, bn);
    LossValue lv = evaluate_loss(loss, fwd.f2.topRows(n), fwd.f2.bottomRows(n));
    if (!std::isfinite(lv.value)) throw DivergenceError("non-finite loss", t);
    out.loss.push_back(lv.value);
    grad_f2.resize(2 * n, net.d_out);
    grad_f2.topRows(n) = lv.grad_anchors;
    grad_f2.bottomRows(n) = lv.grad_views;
    NetGradients g = backprop(net, lb.batch, fwd, grad_f2, bn);
    if (optim.weight_decay > 0.0) {
      g.dW += optim.weight_decay * net.W;
      g.dV += optim.weight_decay * net.V;
    }
    if (t == 0) {
      bufW = g.dW;
      bufV = g.dV;
    } else {
      bufW = optim.momentum * bufW + g.dW;
      bufV = optim.momentum * bufV + g.dV;
    }
    net.W -= optim.lr * bufW;
    net.V -= optim.lr * bufV;
    if (optim.normalize_filters) net.normalize_filters();
  }
  if (!net.W.allFinite() || !net.V.allFinite())
    throw DivergenceError("non-finite weights after training", optim.steps);
  out.net = std::move(net);
  return out;
}

void write_loss_curve(const std::vector<double>& loss, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write loss curve: " + path);
  os.imbue(std::locale::classic());
  os << "step,loss\n" << std::setprecision(17);
  for (size_t i = 0; i < loss.size(); ++i) os << i << "," << loss[i] << "\n";
}

}  // namespace cldyn
