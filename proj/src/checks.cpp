#include "cldyn/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cldyn {

namespace {

SummationModel identity_summation(double q, Index dim) {
  return SummationModel{OrthonormalDictionary::identity(dim), Vector::Constant(dim, q)};
}

Vector basis(Index dim, Index i) {
  Vector e = Vector::Zero(dim);
  e[i] = 1.0;
  return e;
}

Index uniform_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

RFBatch random_rf_batch(Index n, Index K, Index d, double view_noise, Rng& rng) {
  Matrix a = standard_normal_matrix(n, K * d, rng);
  Matrix v = a + view_noise * standard_normal_matrix(n, K * d, rng);
  return RFBatch(a, v, K, d);
}

}  // namespace

SummationClosedFormCheck summation_closed_form_check(double q, Index dim, Index n,
                                                     std::uint64_t seed) {
  if (dim < 2) throw DimensionError("closed-form check needs dim >= 2");
  SummationModel model = identity_summation(q, dim);
  Matrix x = sample_summation(model, n, seed);
  Matrix g = gate_rows(x, basis(dim, 0), Activation::relu());
  Matrix c = contrastive_covariance(unaugmented_batch(g).stacked(), uniform_alpha(n));
  Matrix a = analytic_A_summation(model, 0);

  SummationClosedFormCheck out;
  out.q = q;
  out.mc_along = c(0, 0);
  out.mc_other = c.diagonal().tail(dim - 1).mean();
  out.analytic_along = a(0, 0);
  out.analytic_other = a(1, 1);
  out.rel_err_along = std::abs(out.mc_along - out.analytic_along) / out.analytic_along;
  out.rel_err_other = std::abs(out.mc_other - out.analytic_other) / out.analytic_other;
  return out;
}

double summation_gap(double q, Index dim) {
  if (dim < 2) throw DimensionError("gap needs dim >= 2");
  GatedOperator a = summation_population_operator(identity_summation(q, dim));
  Matrix m = a(basis(dim, 0));
  return m(0, 0) - m(1, 1);
}

std::vector<ModulationRow> modulation_grid(const std::vector<double>& eps_values,
                                           const std::vector<Index>& dims, Index draws,
                                           std::uint64_t seed) {
  std::vector<ModulationRow> rows;
  std::uint64_t sub = seed;
  for (double eps : eps_values)
    for (Index d : dims) {
      ModulationRow r;
      r.eps = eps;
      r.d = d;
      r.closed_form = modulation_probability(eps, d);
      r.mc = modulation_probability_mc(eps, d, draws, ++sub).mean;
      r.sigma = std::sqrt(r.closed_form * (1.0 - r.closed_form) / double(draws));
      rows.push_back(r);
    }
  return rows;
}

std::vector<BlowupRow> blowup_grid(const std::vector<double>& b_values,
                                   const std::vector<double>& y0_values, double dt) {
  std::vector<BlowupRow> rows;
  for (double b : b_values)
    for (double y0 : y0_values) {
      BlowupRow r;
      r.b = b;
      r.y0 = y0;
      r.formula = blowup_time(b, y0);
      Trajectory1D tr = simulate_1d(b, y0, dt, 2.0 * r.formula + 1.0, 1e9, 1e-5);
      r.blew_up = tr.blew_up;
      r.simulated = tr.blew_up ? tr.blowup_at : std::numeric_limits<double>::infinity();
      r.rel_err = std::abs(r.simulated - r.formula) / r.formula;
      rows.push_back(r);
    }
  return rows;
}

double psd_worst_ratio(Index instances, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < instances; ++i) {
    // a tenth of the draws exceed the pairwise cutoff to exercise the moment path
    Index n = i % 10 == 9 ? uniform_index(rng, kExactSumMaxPairs + 1, 700) : uniform_index(rng, 2, 60);
    Index d = uniform_index(rng, 1, 8);
    Matrix a = uniform_real(rng, 0.1, 10.0) * standard_normal_matrix(n, d, rng);
    if (d > 1 && i % 4 == 0) a.col(d - 1) = a.col(0);  // rank deficient
    Matrix c = contrastive_covariance(unaugmented_batch(a).stacked(), uniform_alpha(n));
    Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
    double top = es.eigenvalues().maxCoeff();
    double bottom = es.eigenvalues().minCoeff();
    worst = std::min(worst, bottom / std::max(top, std::numeric_limits<double>::min()));
  }
  return worst;
}

double colinearity_min_cos(Index instances, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = 1.0;
  for (Index i = 0; i < instances; ++i) {
    Index K = uniform_index(rng, 1, 4), M = uniform_index(rng, 2, 4), d = uniform_index(rng, 2, 6);
    Index d_out = uniform_index(rng, 1, 4);
    TwoLayerNet net = TwoLayerNet::random(K, M, d, d_out, Activation::linear(), rng());
    Vector v = standard_normal_vector(d_out, rng);
    Vector s = standard_normal_vector(K * M, rng);
    net.V = v * s.transpose();
    RFBatch batch = random_rf_batch(16, K, d, 0.3, rng);
    NetGradients g = gradients(net, batch, uniform_alpha(batch.n()), std::nullopt, false);
    for (Index k = 0; k < K; ++k)
      for (Index m = 0; m < M; ++m)
        for (Index m2 = m + 1; m2 < M; ++m2) {
          Vector a = g.dW.row(net.row(k, m)).transpose();
          Vector b = g.dW.row(net.row(k, m2)).transpose();
          double cs = std::abs(a.dot(b)) / (a.norm() * b.norm());
          worst = std::min(worst, cs);
        }
  }
  return worst;
}

double critical_path_max_grad(Index instances, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = 0.0;
  for (Index i = 0; i < instances; ++i) {
    Index K = uniform_index(rng, 1, 3), d = uniform_index(rng, 2, 5);
    TwoLayerNet net = TwoLayerNet::random(K, 2, d, 1, Activation::linear(), rng());
    // equal top weights on the pair and opposite filters: the RF contributes nothing to f
    for (Index k = 0; k < K; ++k) {
      double s = uniform_real(rng, 0.5, 2.0);
      net.V(0, net.row(k, 0)) = s;
      net.V(0, net.row(k, 1)) = s;
      net.W.row(net.row(k, 1)) = -net.W.row(net.row(k, 0));
    }
    RFBatch batch = random_rf_batch(24, K, d, 0.3, rng);
    PairwiseImportance alpha = uniform_alpha(batch.n());
    for (int step = 0; step <= 10; ++step) {
      double c = step / 10.0;
      TwoLayerNet mix = net;
      for (Index k = 0; k < K; ++k) {
        Vector w1 = net.W.row(net.row(k, 0)).transpose();
        Vector w2 = net.W.row(net.row(k, 1)).transpose();
        mix.W.row(net.row(k, 0)) = (c * w1 + (1.0 - c) * w2).transpose();
        mix.W.row(net.row(k, 1)) = (c * w2 + (1.0 - c) * w1).transpose();
      }
      NetGradients g = gradients(mix, batch, alpha, std::nullopt, false);
      double norm = std::sqrt(g.dW.squaredNorm() + g.dV.squaredNorm());
      worst = std::max(worst, norm);
    }
  }
  return worst;
}

Rank1Check rank1_solver_check(Index instances, Index max_k, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Rank1Check out;
  for (Index i = 0; i < instances; ++i) {
    Index K = uniform_index(rng, 1, max_k);
    Vector dvec(K), b = standard_normal_vector(K, rng);
    for (Index k = 0; k < K; ++k) {
      // occasional exact ties exercise the deflation path
      if (k > 0 && uniform_real(rng, 0.0, 1.0) < 0.2)
        dvec[k] = dvec[uniform_index(rng, 0, k - 1)];
      else
        dvec[k] = uniform_real(rng, 0.0, 2.0);
    }
    double weight = uniform_real(rng, 0.05, 1.0);
    Rank1Eigen r = rank1_top_eigen(dvec, b, weight);

    Matrix dense = Matrix(dvec.asDiagonal()) + weight * b * b.transpose();
    SymmetricSpectrum s = symmetric_spectrum(dense);
    out.max_rel_lambda_err =
        std::max(out.max_rel_lambda_err, std::abs(r.lambda - s.top()) / std::abs(s.top()));
    out.max_vector_err = std::max(out.max_vector_err, 1.0 - std::abs(r.s.dot(s.top_vector())));
    out.max_residual =
        std::max(out.max_residual, (dense * r.s - r.lambda * r.s).norm() / std::abs(r.lambda));
    if (r.lambda < dvec.maxCoeff()) ++out.floor_violations;
  }
  return out;
}

double decoupled_rhs_max_error(Index instances, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double worst = 0.0;
  for (Index i = 0; i < instances; ++i) {
    Index K = uniform_index(rng, 2, 5), d = uniform_index(rng, 2, 5);
    double p0 = uniform_real(rng, 0.1, 0.9);
    double weight = p0 * (1.0 - p0);
    std::vector<Matrix> L(K);
    Matrix W(K, d);
    Vector delta(K * d), dvec(K), b(K);
    for (Index k = 0; k < K; ++k) {
      Matrix a = standard_normal_matrix(d, d, rng);
      L[k] = a * a.transpose() / double(d);
      delta.segment(k * d, d) = standard_normal_vector(d, rng);
      Vector w = random_unit_vector(d, rng);
      W.row(k) = w.transpose();
      dvec[k] = w.dot(L[k] * w);
      b[k] = delta.segment(k * d, d).dot(w);
    }
    Rank1Eigen r = rank1_top_eigen(dvec, b, weight);

    Matrix C = weight * delta * delta.transpose();
    for (Index k = 0; k < K; ++k) C.block(k * d, k * d, d, d) += L[k];
    Matrix full = filter_rhs_from_covariance(W, r.s * r.s.transpose(), C, d, true);

    for (Index k = 0; k < K; ++k) {
      Vector dec = decoupled_rhs(k, W.row(k).transpose(), L[k], delta.segment(k * d, d), r.s[k],
                                 r.lambda, dvec[k], r.Z);
      worst = std::max(worst, (dec - full.row(k).transpose()).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

std::vector<CertifiedRun> certified_power_iteration(double q, Index dim,
                                                    const std::vector<double>& angles_deg,
                                                    std::uint64_t seed) {
  GatedOperator a = summation_population_operator(identity_summation(q, dim));
  Vector u = basis(dim, 0);
  Rng rng = make_rng(seed);
  std::vector<CertifiedRun> runs;
  for (double deg : angles_deg) {
    double th = deg * std::acos(-1.0) / 180.0;
    Vector w0 = std::cos(th) * u + std::sin(th) * random_tangent(u, rng);
    w0.normalize();
    CertifiedRun run;
    ConvergenceCertificate cert;
    std::uint64_t cert_seed = rng();
    try {
      cert = certificate(a, w0, {0.02, 0.05, 0.1, 0.2, 0.3, 0.5}, 64, cert_seed);
    } catch (const NotPositiveDefinite&) {
      // wide caps can reach probes where A is singular; such starts are simply not certified
      cert.c0 = std::abs(w0.dot(u));
    } catch (const DegenerateGap&) {
      cert.c0 = std::abs(w0.dot(u));
    }
    run.c0 = cert.c0;
    run.gamma = cert.gamma;
    run.certified = cert.certified;
    PowerIterationTrace tr = power_iterate(a, w0, 1e-13, 200);
    run.iterations = long(tr.discrepancies.size());
    run.c_monotone = true;
    for (std::size_t t = 1; t < tr.c_values.size(); ++t)
      if (tr.c_values[t] < tr.c_values[t - 1] - 1e-12) run.c_monotone = false;
    double lead = std::sqrt(2.0 * (1.0 + cert.gamma) * (1.0 - cert.c0));
    for (std::size_t t = 0; t < tr.discrepancies.size(); ++t) {
      double bound = lead * std::pow(cert.gamma, 0.5 * double(t));
      // below double resolution the bound carries no information
      if (bound < 1e-14) break;
      run.worst_bound_ratio = std::max(run.worst_bound_ratio, tr.discrepancies[t] / bound);
    }
    run.limit_in_cap = tr.limit.dot(w0) >= cert.cap_cos;
    runs.push_back(run);
  }
  return runs;
}

double summation_stability_fraction(double q, Index dim, double eps, Index directions,
                                    std::uint64_t seed) {
  GatedOperator a = summation_population_operator(identity_summation(q, dim));
  return stability_probe(a, basis(dim, 0), eps, directions, 0.05, 2000, seed);
}

LossGradCheck loss_gradient_check(LossConfig::Kind kind, Index instances, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  LossGradCheck out;
  out.instances = instances;
  const double eps_choices[] = {0.0, 0.5, 1.0};
  for (Index i = 0; i < instances; ++i) {
    Index n = uniform_index(rng, 2, 6), d_out = uniform_index(rng, 1, 4);
    Matrix a = standard_normal_matrix(n, d_out, rng);
    Matrix v = a + 0.5 * standard_normal_matrix(n, d_out, rng);
    LossConfig cfg = LossConfig::quadratic();
    if (kind == LossConfig::Kind::InfoNCE) {
      double tau = uniform_real(rng, 0.2, 2.0);
      cfg = LossConfig::infonce(tau, eps_choices[uniform_index(rng, 0, 2)]);
    }
    LossValue lv = evaluate_loss(cfg, a, v);
    double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), v.cwiseAbs().maxCoeff()));
    double h = 1e-4 * scale;
    double err = 0.0, ref = 0.0;
    for (int which = 0; which < 2; ++which) {
      Matrix& m = which == 0 ? a : v;
      const Matrix& an = which == 0 ? lv.grad_anchors : lv.grad_views;
      for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) {
          double keep = m(r, c);
          m(r, c) = keep + h;
          double up = evaluate_loss(cfg, a, v).value;
          m(r, c) = keep - h;
          double down = evaluate_loss(cfg, a, v).value;
          m(r, c) = keep;
          double fd = (up - down) / (2.0 * h);
          err = std::max(err, std::abs(fd - an(r, c)));
          ref = std::max(ref, std::abs(fd));
        }
    }
    // gradients below 1e-6 sit at the finite-difference roundoff floor; compare those absolutely
    out.max_rel_err = std::max(out.max_rel_err, err / std::max(ref, 1e-6));
  }
  return out;
}

ReassemblyCheck reassembly_check(Index n, std::uint64_t seed) {
  ReassemblyCheck out;
  Vector p3(3);
  p3 << 0.2, 0.3, 0.5;
  ConditionalModel m3 = make_prototype_model(p3, 4, 3, 2, 0.3, seed);
  TwoLayerNet net = TwoLayerNet::random(4, 1, 3, 0, Activation::relu(), seed + 1);
  VarianceDecomposition vd = variance_decomposition(m3, net, n, seed + 2);
  out.residual = vd.residual;
  out.band = 5.0 / std::sqrt(double(n)) * vd.max_entry;

  Vector p2(2);
  p2 << 0.4, 0.6;
  ConditionalModel m2 = make_prototype_model(p2, 4, 3, 2, 0.3, seed + 3);
  VarianceDecomposition v2 = variance_decomposition(m2, net, n, seed + 4);
  out.delta_antisymmetry = (v2.deltas[0] + v2.deltas[1]).norm() / v2.deltas[0].norm();
  return out;
}

}  // namespace cldyn
