#include "cldyn/twolayer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cldyn {

TwoLayerNet TwoLayerNet::random(Index K, Index M, Index d, Index d_out, const Activation& act,
                                std::uint64_t seed) {
  if (K < 1 || M < 1 || d < 1) throw InvalidConfiguration("K, M, d must be positive");
  TwoLayerNet net;
  net.K = K;
  net.M = M;
  net.d = d;
  net.d_out = d_out > 0 ? d_out : K * M;
  net.act = act;
  Rng rng = make_rng(seed);
  net.W = standard_normal_matrix(K * M, d, rng);
  net.normalize_filters();
  net.V = standard_normal_matrix(net.d_out, K * M, rng) / std::sqrt(double(K * M));
  return net;
}

void TwoLayerNet::normalize_filters() {
  for (Index r = 0; r < W.rows(); ++r) {
    double n = W.row(r).norm();
    if (!(n > 1e-300)) throw DegenerateFilter("filter " + std::to_string(r) + " has zero norm");
    W.row(r) /= n;
  }
}

void TwoLayerNet::validate() const {
  if (W.rows() != K * M || W.cols() != d) throw DimensionError("W must be (K*M) x d");
  if (V.rows() != d_out || V.cols() != K * M) throw DimensionError("V must be d_out x (K*M)");
}

RFBatch::RFBatch(Matrix anchors_, Matrix views_, Index K_, Index d_)
    : anchors(std::move(anchors_)), views(std::move(views_)), K(K_), d(d_) {
  validate();
}

void RFBatch::validate() const {
  if (anchors.rows() != views.rows() || anchors.cols() != views.cols())
    throw InvalidBatch("anchors and views must have identical shape");
  if (anchors.cols() != K * d) throw DimensionError("batch width must equal K*d");
  if (anchors.rows() < 2) throw InvalidBatch("need at least 2 pairs");
}

Matrix RFBatch::stacked() const {
  Matrix s(2 * n(), anchors.cols());
  s.topRows(n()) = anchors;
  s.bottomRows(n()) = views;
  return s;
}

std::string BNVariant::name() const {
  std::string s = backprop_mean ? "mu" : "sg(mu)";
  s += backprop_var ? "+sigma" : "+sg(sigma)";
  return s;
}

namespace {

void check(const TwoLayerNet& net, const RFBatch& batch) {
  net.validate();
  batch.validate();
  if (batch.K != net.K || batch.d != net.d)
    throw DimensionError("batch receptive-field layout does not match the network");
}

Matrix preactivations(const TwoLayerNet& net, const Matrix& x) {
  Matrix pre(x.rows(), net.width());
  for (Index k = 0; k < net.K; ++k)
    pre.middleCols(k * net.M, net.M).noalias() =
        x.middleCols(k * net.d, net.d) * net.W.middleRows(k * net.M, net.M).transpose();
  return pre;
}

Matrix apply(const Matrix& z, const Activation& act, bool derivative) {
  Matrix out(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i)
      out(i, j) = derivative ? act.derivative(z(i, j)) : act.value(z(i, j));
  return out;
}

Vector project_out(const Vector& g, const Vector& w) {
  double nw2 = w.squaredNorm();
  if (!(nw2 > 0.0)) return g;
  return g - w * (w.dot(g) / nw2);
}

}  // namespace

ForwardResult forward(const TwoLayerNet& net, const RFBatch& batch,
                      const std::optional<BNVariant>& bn) {
  check(net, batch);
  ForwardResult r;
  Matrix x = batch.stacked();
  r.pre = preactivations(net, x);
  r.h = apply(r.pre, net.act, false);
  r.bn = bn.has_value();
  if (bn) {
    r.mu = r.h.colwise().mean().transpose();
    r.f1 = r.h.rowwise() - r.mu.transpose();
    r.sigma = (r.f1.colwise().squaredNorm() / double(r.h.rows())).transpose();
    r.sigma = (r.sigma.array() + bn->eps).sqrt().matrix();
    for (Index j = 0; j < r.sigma.size(); ++j) {
      if (!(r.sigma[j] >= 1e-12))
        throw DegenerateVariance("batch-norm node k=" + std::to_string(j / net.M) +
                                 " m=" + std::to_string(j % net.M) + " has zero variance");
      r.f1.col(j) /= r.sigma[j];
    }
  } else {
    r.f1 = r.h;
  }
  r.f2.noalias() = r.f1 * net.V.transpose();
  return r;
}

NetGradients backprop(const TwoLayerNet& net, const RFBatch& batch, const ForwardResult& fwd,
                      const Matrix& grad_f2, const std::optional<BNVariant>& bn) {
  check(net, batch);
  NetGradients g;
  g.dV.noalias() = grad_f2.transpose() * fwd.f1;
  Matrix g1 = grad_f2 * net.V;
  if (bn) {
    const double n2 = double(g1.rows());
    for (Index j = 0; j < g1.cols(); ++j) {
      auto col = g1.col(j);
      double mean_g = col.sum() / n2;
      double mean_gf = col.dot(fwd.f1.col(j)) / n2;
      if (bn->backprop_mean) col.array() -= mean_g;
      if (bn->backprop_var) col -= mean_gf * fwd.f1.col(j);
      col /= fwd.sigma[j];
    }
  }
  g1.array() *= apply(fwd.pre, net.act, true).array();
  Matrix x = batch.stacked();
  g.dW.resize(net.W.rows(), net.W.cols());
  for (Index k = 0; k < net.K; ++k)
    g.dW.middleRows(k * net.M, net.M).noalias() =
        g1.middleCols(k * net.M, net.M).transpose() * x.middleCols(k * net.d, net.d);
  return g;
}

Matrix gated_inputs(const TwoLayerNet& net, const RFBatch& batch) {
  check(net, batch);
  Matrix x = batch.stacked();
  Matrix pre = preactivations(net, x);
  Matrix out(x.rows(), net.width() * net.d);
  for (Index k = 0; k < net.K; ++k)
    for (Index m = 0; m < net.M; ++m) {
      Index km = net.row(k, m);
      for (Index i = 0; i < x.rows(); ++i)
        out.block(i, km * net.d, 1, net.d) =
            x.block(i, k * net.d, 1, net.d) * net.act.derivative(pre(i, km));
    }
  return out;
}

Matrix filter_rhs_from_covariance(const Matrix& W, const Matrix& S, const Matrix& C, Index d,
                                  bool project) {
  const Index km = W.rows();
  if (C.rows() != km * d || C.cols() != km * d) throw DimensionError("covariance must be KMd x KMd");
  if (S.rows() != km || S.cols() != km) throw DimensionError("S must be KM x KM");
  Matrix out = Matrix::Zero(km, d);
  for (Index a = 0; a < km; ++a) {
    Vector acc = Vector::Zero(d);
    for (Index b = 0; b < km; ++b)
      acc += S(a, b) * C.block(a * d, b * d, d, d) * W.row(b).transpose();
    out.row(a) = (project ? project_out(acc, W.row(a).transpose()) : acc).transpose();
  }
  return out;
}

NetGradients gradients(const TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                       const std::optional<BNVariant>& bn, bool project) {
  check(net, batch);
  if (alpha.n() != batch.n()) throw DimensionError("alpha size differs from batch pair count");
  ForwardResult fwd = forward(net, batch, bn);
  NetGradients g;
  g.dV = net.V * contrastive_covariance(fwd.f1, fwd.f1, alpha);

  Matrix S = net.S();
  Matrix hp = apply(fwd.pre, net.act, true);
  // sum_{k'm'} s_{km,k'm'} x~_{k'm'} . w_{k'm'} (scaled by 1/sigma under BN)
  Matrix z = bn ? fwd.f1 : Matrix(hp.cwiseProduct(fwd.pre));
  Matrix mixed = z * S;
  Matrix qm = contrastive_apply(mixed, alpha);

  Matrix x = batch.stacked();
  Matrix coef = qm.cwiseProduct(hp);
  if (bn) coef.array().rowwise() /= fwd.sigma.transpose().array();
  g.dW.resize(net.W.rows(), net.W.cols());
  for (Index k = 0; k < net.K; ++k)
    g.dW.middleRows(k * net.M, net.M).noalias() =
        coef.middleCols(k * net.M, net.M).transpose() * x.middleCols(k * net.d, net.d);

  if (bn && bn->backprop_var) {
    // d sigma / d w = (1 / (2N sigma)) sum_i (h_i - mu) x~_i
    const double n2 = double(x.rows());
    Matrix centered = fwd.h.rowwise() - fwd.mu.transpose();
    for (Index j = 0; j < net.width(); ++j) {
      Index k = j / net.M;
      Vector dsig = (x.middleCols(k * net.d, net.d).transpose() *
                     centered.col(j).cwiseProduct(hp.col(j))) /
                    (n2 * fwd.sigma[j]);
      double cf = fwd.f1.col(j).dot(qm.col(j));
      g.dW.row(j) -= (cf / fwd.sigma[j]) * dsig.transpose();
    }
  }
  if (project)
    for (Index r = 0; r < net.W.rows(); ++r)
      g.dW.row(r) = project_out(g.dW.row(r).transpose(), net.W.row(r).transpose()).transpose();
  return g;
}

double energy(const TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
              const std::optional<BNVariant>& bn) {
  ForwardResult fwd = forward(net, batch, bn);
  return contrastive_covariance(fwd.f2, fwd.f2, alpha).trace();
}

void set_rank_one_top(TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                      const std::optional<BNVariant>& bn) {
  ForwardResult fwd = forward(net, batch, bn);
  Matrix c = contrastive_covariance(fwd.f1, fwd.f1, alpha);
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  Vector s = es.eigenvectors().col(c.rows() - 1);
  Vector v = net.V * s;
  if (v.norm() < 1e-12) {
    v = Vector::Zero(net.d_out);
    v[0] = 1.0;
  }
  v.normalize();
  net.V = v * s.transpose();
}

long iterate_top_layer(TwoLayerNet& net, const RFBatch& batch, const PairwiseImportance& alpha,
                       double lr, long max_steps, double tol, const std::optional<BNVariant>& bn) {
  ForwardResult fwd = forward(net, batch, bn);
  Matrix c = contrastive_covariance(fwd.f1, fwd.f1, alpha);
  Matrix step = Matrix::Identity(c.rows(), c.cols()) + lr * c;
  net.V /= net.V.norm();
  for (long t = 0; t < max_steps; ++t) {
    Matrix next = net.V * step;
    next /= next.norm();
    double change = (next - net.V).norm();
    net.V = next;
    if (change < tol) return t + 1;
  }
  return max_steps;
}

DynamicsResult train_dynamics(TwoLayerNet net, const BatchSource& source, long steps, double lr,
                              bool normalize, const std::optional<BNVariant>& bn,
                              std::uint64_t seed) {
  if (!(lr > 0.0)) throw InvalidConfiguration("learning rate must be positive");
  Rng rng = make_rng(seed);
  DynamicsResult out;
  out.energy.reserve(steps);
  for (long t = 0; t < steps; ++t) {
    RFBatch batch = source(rng);
    PairwiseImportance alpha = uniform_alpha(batch.n());
    NetGradients g = gradients(net, batch, alpha, bn, normalize);
    out.energy.push_back(energy(net, batch, alpha, bn));
    net.W += lr * g.dW;
    net.V += lr * g.dV;
    if (!net.W.allFinite() || !net.V.allFinite())
      throw DivergenceError("non-finite weights during dynamics", t);
    if (normalize) net.normalize_filters();
  }
  out.net = std::move(net);
  return out;
}

void ConditionalModel::validate() const {
  if (p.size() < 1) throw InvalidConfiguration("conditional model needs at least one category");
  if (p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-12)
    throw InvalidConfiguration("category probabilities must be >= 0 and sum to 1");
  if (!sampler) throw InvalidConfiguration("conditional model has no sampler");
}

Matrix ConditionalModel::sample_category(Index c, Index n, Rng& rng) const {
  Matrix out(n, K * d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < K; ++k) out.block(i, k * d, 1, d) = sampler(c, k, rng).transpose();
  return out;
}

Matrix ConditionalModel::sample(Index n, Rng& rng, std::vector<int>* labels) const {
  validate();
  std::discrete_distribution<int> pick(p.data(), p.data() + p.size());
  Matrix out(n, K * d);
  if (labels) labels->resize(n);
  for (Index i = 0; i < n; ++i) {
    int c = pick(rng);
    if (labels) (*labels)[i] = c;
    for (Index k = 0; k < K; ++k) out.block(i, k * d, 1, d) = sampler(c, k, rng).transpose();
  }
  return out;
}

BatchSource ConditionalModel::batch_source(Index n) const {
  ConditionalModel self = *this;
  return [self, n](Rng& rng) {
    Matrix x = self.sample(n, rng);
    return RFBatch(x, x, self.K, self.d);
  };
}

ConditionalModel make_prototype_model(const Vector& p, Index K, Index d, Index patterns,
                                      double noise, std::uint64_t seed, const Vector& rf_scale) {
  if (patterns < 1) throw InvalidConfiguration("need at least one prototype per category");
  const Index C = p.size();
  Rng rng = make_rng(seed);
  auto protos = std::make_shared<std::vector<Matrix>>();
  for (Index c = 0; c < C; ++c)
    for (Index k = 0; k < K; ++k) {
      double scale = rf_scale.size() == K ? rf_scale[k] : 1.0;
      protos->push_back(scale * standard_normal_matrix(patterns, d, rng));
    }
  Vector scales = rf_scale.size() == K ? rf_scale : Vector::Ones(K);
  ConditionalModel m;
  m.p = p;
  m.K = K;
  m.d = d;
  m.sampler = [protos, K, d, patterns, noise, scales](Index c, Index k, Rng& r) {
    std::uniform_int_distribution<Index> pick(0, patterns - 1);
    Vector x = (*protos)[c * K + k].row(pick(r)).transpose();
    if (noise > 0.0) x += (noise * scales[k]) * standard_normal_vector(d, r);
    return x;
  };
  m.validate();
  return m;
}

namespace {

Matrix gated_rows(const TwoLayerNet& net, const Matrix& x) {
  Matrix pre = preactivations(net, x);
  Matrix out(x.rows(), net.width() * net.d);
  for (Index k = 0; k < net.K; ++k)
    for (Index m = 0; m < net.M; ++m) {
      Index km = net.row(k, m);
      for (Index i = 0; i < x.rows(); ++i)
        out.block(i, km * net.d, 1, net.d) =
            x.block(i, k * net.d, 1, net.d) * net.act.derivative(pre(i, km));
    }
  return out;
}

Matrix covariance(const Matrix& x, const Vector& mean) {
  Matrix c = x.rowwise() - mean.transpose();
  return (c.transpose() * c) / double(x.rows());
}

}  // namespace

VarianceDecomposition variance_decomposition(const ConditionalModel& model,
                                             const TwoLayerNet& net, Index n, std::uint64_t seed) {
  model.validate();
  net.validate();
  if (model.K != net.K || model.d != net.d) throw DimensionError("model layout differs from net");
  if (n < 2) throw InsufficientSamples("need at least 2 samples per category");
  const Index C = model.categories();
  const Index block = net.M * net.d;
  const Index full = net.width() * net.d;
  Rng rng = make_rng(seed);

  std::vector<Vector> means(C);
  VarianceDecomposition out;
  out.L_blocks.assign(net.K, Matrix::Zero(block, block));
  for (Index c = 0; c < C; ++c) {
    Matrix g = gated_rows(net, model.sample_category(c, n, rng));
    means[c] = g.colwise().mean().transpose();
    Matrix cov = covariance(g, means[c]);
    for (Index k = 0; k < net.K; ++k)
      out.L_blocks[k] += model.p[c] * cov.block(k * block, k * block, block, block);
  }
  out.weights = Vector::Zero(C);
  out.reassembled = Matrix::Zero(full, full);
  for (Index k = 0; k < net.K; ++k)
    out.reassembled.block(k * block, k * block, block, block) = out.L_blocks[k];
  for (Index c = 0; c < C; ++c) {
    double pc = model.p[c];
    Vector rest = Vector::Zero(full);
    if (1.0 - pc > 1e-15) {
      for (Index o = 0; o < C; ++o)
        if (o != c) rest += model.p[o] * means[o];
      rest /= (1.0 - pc);
      out.deltas.push_back(means[c] - rest);
    } else {
      out.deltas.push_back(Vector::Zero(full));
    }
    out.weights[c] = pc * (1.0 - pc) * (1.0 - pc);
    out.reassembled += out.weights[c] * out.deltas[c] * out.deltas[c].transpose();
  }

  Matrix g = gated_rows(net, model.sample(n * C, rng));
  out.direct = covariance(g, g.colwise().mean().transpose());
  out.residual = (out.reassembled - out.direct).cwiseAbs().maxCoeff();
  out.max_entry = out.direct.cwiseAbs().maxCoeff();
  return out;
}

Rank1Eigen rank1_top_eigen(const Vector& dvec, const Vector& b, double weight) {
  if (dvec.size() != b.size()) throw DimensionError("d and b sizes differ");
  if (dvec.size() < 1) throw DimensionError("empty rank-one problem");
  if (!(weight > 0.0)) throw InvalidConfiguration("rank-one weight must be positive");
  const Index K = dvec.size();
  Rank1Eigen out;
  if (b.cwiseAbs().maxCoeff() == 0.0) {
    Index arg;
    out.lambda = dvec.maxCoeff(&arg);
    out.s = Vector::Zero(K);
    out.s[arg] = 1.0;
    out.degenerate = true;
    return out;
  }
  // deflate exact ties: each distinct d value carries the combined b mass of its group
  std::map<double, std::vector<Index>> groups;
  for (Index k = 0; k < K; ++k) groups[dvec[k]].push_back(k);
  std::vector<double> gd, gb;
  std::vector<const std::vector<Index>*> members;
  for (const auto& [value, idx] : groups) {
    double mass = 0.0;
    for (Index k : idx) mass += b[k] * b[k];
    if (mass == 0.0) continue;
    gd.push_back(value);
    gb.push_back(std::sqrt(mass));
    members.push_back(&idx);
  }
  const double lo = *std::max_element(gd.begin(), gd.end());
  const double dmax = dvec.maxCoeff();
  const double bnorm2 = b.squaredNorm();
  // secular function in the shifted variable mu = lambda - lo
  auto secular = [&](double mu) {
    double s = 0.0;
    for (size_t g = 0; g < gd.size(); ++g) s += gb[g] * gb[g] / ((gd[g] - lo) - mu);
    return 1.0 + weight * s;
  };
  double a = 0.0, hi = (dmax - lo) + weight * bnorm2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (a + hi);
    if (mid <= a || mid >= hi) break;
    if (secular(mid) < 0.0)
      a = mid;
    else
      hi = mid;
  }
  const double mu = 0.5 * (a + hi);
  out.lambda = lo + mu;
  out.s = Vector::Zero(K);
  double z2 = 0.0;
  for (size_t g = 0; g < gd.size(); ++g) {
    double val = gb[g] / ((gd[g] - lo) - mu);
    for (Index k : *members[g]) {
      out.s[k] = val * b[k] / gb[g];
      z2 += out.s[k] * out.s[k];
    }
  }
  out.Z = std::sqrt(z2);
  out.s /= out.Z;
  return out;
}

Vector decoupled_rhs(Index k, const Vector& w_k, const Matrix& L_k, const Vector& delta_k,
                     double s_k, double lambda, double d_k, double Z) {
  if (!(lambda > d_k))
    throw SpectralOrdering("receptive field " + std::to_string(k) +
                           ": lambda must exceed d_k");
  if (!(Z > 0.0)) throw InvalidConfiguration("Z must be positive");
  if (L_k.rows() != w_k.size() || delta_k.size() != w_k.size())
    throw DimensionError("decoupled rhs: inconsistent sizes");
  Vector g = s_k * s_k * (L_k * w_k) + (delta_k.dot(w_k) / (Z * Z * (lambda - d_k))) * delta_k;
  return project_out(g, w_k);
}

BNEffect bn_statistics_effect(const ConditionalModel& model, const TwoLayerNet& net, Index n,
                              std::uint64_t seed) {
  model.validate();
  net.validate();
  if (net.M != 1) throw UnsupportedConfiguration("bn statistics need M = 1");
  if (n < 2) throw InsufficientSamples("need at least 2 samples per category");
  const Index C = model.categories();
  Rng rng = make_rng(seed);
  BNEffect out;
  out.d = Vector::Zero(net.K);
  Matrix means(C, net.K);
  for (Index c = 0; c < C; ++c) {
    Matrix f = apply(preactivations(net, model.sample_category(c, n, rng)), net.act, false);
    Vector mean = f.colwise().mean().transpose();
    means.row(c) = mean.transpose();
    Matrix centered = f.rowwise() - mean.transpose();
    out.d += model.p[c] * (centered.colwise().squaredNorm().transpose() / double(n));
  }
  Vector overall = means.transpose() * model.p;
  out.sigma2 = out.d;
  for (Index c = 0; c < C; ++c)
    out.sigma2 += model.p[c] * (means.row(c).transpose() - overall).cwiseAbs2();
  for (Index k = 0; k < net.K; ++k)
    if (!(out.sigma2[k] >= 1e-24))
      throw DegenerateVariance("receptive field " + std::to_string(k) + " has zero variance");
  out.d_bn = out.d.cwiseQuotient(out.sigma2);
  out.spread = out.d.maxCoeff() / out.d.minCoeff();
  out.spread_bn = out.d_bn.maxCoeff() / out.d_bn.minCoeff();
  return out;
}

}  // namespace cldyn
