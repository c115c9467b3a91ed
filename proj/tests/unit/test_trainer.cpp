#include "cldyn/checks.hpp"
#include "cldyn/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace cldyn;

TEST_CASE("infonce with identical representations") {
  for (double eps : {0.0, 1.0}) {
    Matrix f = Matrix::Constant(5, 3, 0.7);
    LossValue lv = infonce_loss(f, f, 0.5, eps);
    CHECK(lv.value == doctest::Approx(-0.5 * 5 * std::log(1.0 / (eps + 4.0))));
  }
}

TEST_CASE("infonce vanishes for perfectly separated pairs") {
  Matrix a(2, 1);
  a << 0.0, 50.0;
  LossValue lv = infonce_loss(a, a, 1.0, 1.0);
  CHECK(std::abs(lv.value) < 1e-12);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng = make_rng(3);
  Matrix a = standard_normal_matrix(5, 3, rng), v = standard_normal_matrix(5, 3, rng);
  LossValue lv = infonce_loss(a, v, 0.7, 1.0);
  const double h = 1e-5;
  double worst = 0.0, scale = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    Matrix p = a, m = a;
    p.data()[i] += h;
    m.data()[i] -= h;
    double fd = (infonce_loss(p, v, 0.7, 1.0).value - infonce_loss(m, v, 0.7, 1.0).value) / (2 * h);
    worst = std::max(worst, std::abs(fd - lv.grad_anchors.data()[i]));
    scale = std::max(scale, std::abs(fd));
  }
  CHECK(worst / scale < 1e-5);
  CHECK(loss_gradient_check(LossConfig::Kind::InfoNCE, 100, 1).max_rel_err < 1e-5);
  CHECK(loss_gradient_check(LossConfig::Kind::Quadratic, 100, 2).max_rel_err < 1e-5);
}

TEST_CASE("quadratic loss") {
  Matrix c = Matrix::Constant(4, 2, 3.0);
  CHECK(std::abs(quadratic_loss(c, c).value) < 1e-14);

  Rng rng = make_rng(4);
  Matrix f = standard_normal_matrix(6, 3, rng);
  Vector mean = f.colwise().mean();
  Matrix centered = f.rowwise() - mean.transpose();
  double trace_cov = centered.squaredNorm() / 6.0;
  CHECK(quadratic_loss(f, f).value == doctest::Approx(-6.0 / 5.0 * trace_cov));
}

TEST_CASE("configuration checks") {
  CHECK_THROWS_AS(LossConfig::infonce(0.0, 1.0).validate(), InvalidConfiguration);
  CHECK_THROWS_AS(LossConfig::infonce(0.5, -1.0).validate(), InvalidConfiguration);
  OptimConfig o;
  o.lr = 0.0;
  CHECK_THROWS_AS(o.validate(), InvalidConfiguration);
  o = OptimConfig{};
  o.momentum = 1.0;
  CHECK_THROWS_AS(o.validate(), InvalidConfiguration);
}

TEST_CASE("fit is deterministic and zero steps is the identity") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 1);
  TokenEmbedding emb = make_embedding(20, 20, 1.0);
  TwoLayerNet net = TwoLayerNet::random(10, 3, 20, 0, Activation::relu(), 2);
  OptimConfig o;
  o.steps = 20;
  o.batch_size = 16;
  FitResult a = fit(net, pool, emb, LossConfig::infonce(), o, std::nullopt, 5);
  FitResult b = fit(net, pool, emb, LossConfig::infonce(), o, std::nullopt, 5);
  CHECK(a.net.W == b.net.W);
  CHECK(a.net.V == b.net.V);
  CHECK(a.loss == b.loss);
  CHECK(a.loss.size() == 20);
  o.steps = 0;
  FitResult z = fit(net, pool, emb, LossConfig::infonce(), o, std::nullopt, 5);
  CHECK(z.net.W == net.W);
  CHECK(z.loss.empty());
}

TEST_CASE("loss trends down on the synthetic task") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 1);
  TokenEmbedding emb = make_embedding(20, 20, 1.0);
  TwoLayerNet net = TwoLayerNet::random(10, 3, 20, 0, Activation::relu(), 2);
  net.W *= 0.1;
  OptimConfig o;
  o.steps = 600;
  FitResult r = fit(net, pool, emb, LossConfig::infonce(0.5, 0.0), o, std::nullopt, 3);
  auto avg = [&](std::size_t lo) {
    return std::accumulate(r.loss.begin() + lo, r.loss.begin() + lo + 100, 0.0) / 100.0;
  };
  CHECK(avg(500) < avg(0));
}

TEST_CASE("mismatched network layout") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 1);
  TokenEmbedding emb = make_embedding(20, 20, 1.0);
  TwoLayerNet net = TwoLayerNet::random(9, 3, 20, 0, Activation::relu(), 2);
  CHECK_THROWS_AS(fit(net, pool, emb, LossConfig::infonce(), OptimConfig{}, std::nullopt, 1),
                  DimensionError);
}
