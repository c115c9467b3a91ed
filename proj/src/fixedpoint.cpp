#include "cldyn/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cldyn {

namespace {

void check_unit(const Vector& w, const char* what) {
  if (std::abs(w.norm() - 1.0) > 1e-10)
    throw InvalidVector(std::string(what) + " must have unit norm");
}

std::string describe(const Vector& w) {
  std::ostringstream os;
  os.precision(6);
  os << "[";
  for (Index i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w[i];
  os << "]";
  return os.str();
}

}  // namespace

SymmetricSpectrum symmetric_spectrum(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  const Index n = a.rows();
  SymmetricSpectrum s;
  s.values = es.eigenvalues().reverse();
  s.vectors = es.eigenvectors().rowwise().reverse();
  (void)n;
  return s;
}

double spectral_norm(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

PowerIterationTrace power_iterate(const GatedOperator& a, const Vector& w0, double tol,
                                  long max_iter) {
  check_unit(w0, "w0");
  if (!(tol > 0.0)) throw InvalidConfiguration("tol must be positive");
  PowerIterationTrace tr;
  Vector w = w0;
  Vector prev = w0;
  tr.iterates.push_back(w);
  for (long t = 0;; ++t) {
    Matrix at = a(w);
    SymmetricSpectrum s = symmetric_spectrum(at);
    Vector phi = s.top_vector();
    if (phi.dot(prev) < 0) phi = -phi;
    tr.c_values.push_back(w.dot(phi));
    if (t >= max_iter) break;
    Vector img = at * w;
    double nimg = img.norm();
    if (!(nimg > 1e-300) || !std::isfinite(nimg)) {
      tr.limit = w;
      throw DegenerateOperator("A(w) w vanished at iteration " + std::to_string(t), tr);
    }
    Vector next = img / nimg;
    double disc = (next - w).norm();
    tr.discrepancies.push_back(disc);
    tr.iterates.push_back(next);
    prev = w;
    w = next;
    if (disc < tol) {
      tr.converged = true;
      Matrix af = a(w);
      SymmetricSpectrum sf = symmetric_spectrum(af);
      Vector pf = sf.top_vector();
      if (pf.dot(prev) < 0) pf = -pf;
      tr.c_values.push_back(w.dot(pf));
      break;
    }
  }
  tr.limit = w;
  return tr;
}

double certificate_c_gamma(double gamma) { return 2.0 * std::sqrt(gamma) / (1.0 + gamma); }

double certificate_cap_cos(double c0, double gamma) {
  double cg = certificate_c_gamma(gamma);
  return (c0 - cg) / (1.0 - cg);
}

double certificate_mu(double c, double lambda1, double lambda2) {
  if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
  double gap = lambda1 - lambda2;
  double r = 1.0 - gap / lambda1;
  return 0.5 * (1.0 + c) / (c * c) * r * r;
}

double certificate_nu(double mu, double c, double lambda_gap, double L, double kappa) {
  if (L == 0.0) return 0.0;
  double t = 1.0 + mu * c;
  return 2.0 * kappa * L * L * t + 2.0 * L / lambda_gap * std::sqrt(mu * t);
}

Vector random_tangent(const Vector& w, Rng& rng) {
  for (;;) {
    Vector g = standard_normal_vector(w.size(), rng);
    g -= w * w.dot(g);
    double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

Vector sample_cap_point(const Vector& center, double cap_cos, Rng& rng) {
  double c = std::clamp(cap_cos, -1.0, 1.0);
  double theta_max = std::acos(c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double theta = u(rng) * theta_max;
  Vector t = random_tangent(center, rng);
  Vector w = std::cos(theta) * center + std::sin(theta) * t;
  return w / w.norm();
}

double estimate_lipschitz(const GatedOperator& a, Index sample_count, const Vector& region_center,
                          double region_cos, std::uint64_t seed) {
  if (sample_count < 2) throw InvalidConfiguration("lipschitz estimate needs >= 2 samples");
  check_unit(region_center, "region center");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double theta_max = std::acos(std::clamp(region_cos, -1.0, 1.0));
  double best = 0.0;
  for (Index s = 0; s < sample_count; ++s) {
    Vector w = sample_cap_point(region_center, region_cos, rng);
    Vector w2;
    if (s % 2 == 0) {
      w2 = sample_cap_point(region_center, region_cos, rng);
    } else {
      // nearby partner at a log-uniform distance
      double r = std::pow(10.0, -3.0 + 3.0 * u(rng)) * std::max(theta_max, 1e-6);
      bool found = false;
      for (int attempt = 0; attempt < 8 && !found; ++attempt) {
        Vector t = random_tangent(w, rng);
        Vector cand = std::cos(r) * w + std::sin(r) * t;
        cand /= cand.norm();
        if (cand.dot(region_center) >= region_cos) {
          w2 = cand;
          found = true;
        }
      }
      if (!found) continue;
    }
    double dw = (w2 - w).norm();
    if (dw < 1e-14) continue;
    double da = spectral_norm(a(w2) - a(w));
    best = std::max(best, da / dw);
  }
  return best;
}

double estimate_kappa(const GatedOperator& a, const Vector& center,
                      const std::vector<double>& radii, std::uint64_t seed) {
  check_unit(center, "center");
  constexpr int kDirections = 8;
  Matrix a0 = a(center);
  SymmetricSpectrum s0 = symmetric_spectrum(a0);
  if (s0.gap() < 1e-10 * std::abs(s0.top()))
    throw DegenerateGap("top eigenvalue of A(center) is not distinct");
  const Index d = center.size();
  Vector phi = s0.top_vector();
  Rng rng = make_rng(seed);
  double scale = std::max(spectral_norm(a0), 1e-300);
  double best = 0.0;
  for (double r : radii) {
    for (int k = 0; k < kDirections; ++k) {
      Vector t = random_tangent(center, rng);
      Vector w = std::cos(r) * center + std::sin(r) * t;
      w /= w.norm();
      Matrix da = a(w) - a0;
      double nda = spectral_norm(da);
      if (nda <= 1e-14 * scale) continue;
      SymmetricSpectrum s1 = symmetric_spectrum(a0 + da);
      Vector phi1 = s1.top_vector();
      if (phi1.dot(phi) < 0) phi1 = -phi1;
      Vector dphi = Vector::Zero(d);
      Vector daphi = da * phi;
      for (Index j = 1; j < d; ++j) {
        double denom = s0.values[0] - s0.values[j];
        dphi += (s0.vectors.col(j).dot(daphi) / denom) * s0.vectors.col(j);
      }
      double resid = (phi1 - phi - dphi).norm();
      best = std::max(best, resid / (nda * nda));
    }
  }
  return best;
}

ConvergenceCertificate certificate(const GatedOperator& a, const Vector& w0,
                                   std::vector<double> gamma_grid, Index probe_count,
                                   std::uint64_t seed) {
  check_unit(w0, "w0");
  ConvergenceCertificate cert;
  Matrix a0 = a(w0);
  SymmetricSpectrum s0 = symmetric_spectrum(a0);
  if (!(s0.bottom() > 0.0))
    throw NotPositiveDefinite("A is not positive definite at probe w0 = " + describe(w0));
  if (s0.gap() < 1e-10 * s0.top()) throw DegenerateGap("top eigenvalue of A(w0) is not distinct");
  Vector phi0 = s0.top_vector();
  cert.c0 = std::abs(w0.dot(phi0));
  cert.lambda_gap = s0.gap();
  if (cert.c0 < 1e-12) {
    cert.reason = "c0 = 0: initial point is orthogonal to the top eigenvector";
    return cert;
  }
  std::sort(gamma_grid.begin(), gamma_grid.end());
  std::uint64_t sub = seed;
  for (double gamma : gamma_grid) {
    if (!(gamma > 0.0 && gamma < 1.0)) continue;
    ++sub;
    double cap = std::max(-1.0, certificate_cap_cos(cert.c0, gamma));
    double L = estimate_lipschitz(a, std::max<Index>(probe_count, 2), w0, cap, sub * 7919u + 1);
    double theta = std::acos(std::clamp(cap, -1.0, 1.0));
    double kappa = 0.0;
    if (theta > 0.0)
      kappa = estimate_kappa(a, w0, {theta, theta / 2.0, theta / 4.0}, sub * 7919u + 2);

    Rng rng = make_rng(sub * 7919u + 3);
    double mu_sup = 0.0, nu_sup = 0.0, gap_min = s0.gap();
    for (Index p = 0; p <= probe_count; ++p) {
      Vector w = p == 0 ? w0 : sample_cap_point(w0, cap, rng);
      SymmetricSpectrum s = p == 0 ? s0 : symmetric_spectrum(a(w));
      if (!(s.bottom() > 0.0))
        throw NotPositiveDefinite("A is not positive definite at probe " + describe(w));
      Vector phi = s.top_vector();
      if (phi.dot(w0) < 0) phi = -phi;
      double c = w.dot(phi);
      double gap = s.gap();
      gap_min = std::min(gap_min, gap);
      double mu = certificate_mu(c, s.top(), s.second());
      double nu = gap > 0.0 ? certificate_nu(mu, c, gap, L, kappa)
                            : std::numeric_limits<double>::infinity();
      mu_sup = std::max(mu_sup, mu);
      nu_sup = std::max(nu_sup, nu);
    }
    cert.L_hat = L;
    cert.kappa_hat = kappa;
    cert.mu_sup = mu_sup;
    cert.nu_sup = nu_sup;
    cert.lambda_gap = gap_min;
    cert.gamma = gamma;
    cert.cap_cos = cap;
    if (mu_sup + nu_sup <= gamma) {
      cert.certified = true;
      cert.basin_radius =
          std::sqrt(2.0 * (1.0 + gamma) * (1.0 - cert.c0)) / (1.0 - std::sqrt(gamma));
      cert.reason.clear();
      return cert;
    }
    cert.reason = "mu_sup + nu_sup exceeds every gamma in the grid";
  }
  return cert;
}

GatedOperator pd_shift(const GatedOperator& a, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidConfiguration("pd shift epsilon must be positive");
  return GatedOperator(a.dim(), [a, epsilon](const Vector& w) {
    Matrix m = a(w);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues()[0];
    m.diagonal().array() += epsilon - lmin;
    return m;
  });
}

std::vector<Vector> sphere_flow(const GatedOperator& a, const Vector& w0, double dt, long steps) {
  check_unit(w0, "w0");
  if (!(dt > 0.0)) throw InvalidConfiguration("dt must be positive");
  std::vector<Vector> traj;
  traj.reserve(steps + 1);
  Vector w = w0;
  traj.push_back(w);
  for (long t = 0; t < steps; ++t) {
    Vector g = a(w) * w;
    g -= w * w.dot(g);
    w += dt * g;
    w /= w.norm();
    traj.push_back(w);
  }
  return traj;
}

double stability_probe(const GatedOperator& a, const Vector& w_star, double eps, Index directions,
                       double dt, long steps, std::uint64_t seed) {
  check_unit(w_star, "w_star");
  if (directions < 1) throw InvalidConfiguration("need at least one probe direction");
  Matrix as = a(w_star);
  Vector g = as * w_star;
  g -= w_star * w_star.dot(g);
  double scale = spectral_norm(as);
  if (g.norm() > 1e-6 * scale)
    throw NotCriticalPoint("w_star is not a critical point: |P A w| = " + std::to_string(g.norm()));
  SymmetricSpectrum s = symmetric_spectrum(as);
  if (s.gap() < 1e-10 * std::abs(s.top()))
    throw DegenerateGap("top eigenvalue at w_star is not distinct");
  if (eps == 0.0) return 1.0;
  Rng rng = make_rng(seed);
  Index back = 0;
  for (Index k = 0; k < directions; ++k) {
    Vector u = random_tangent(w_star, rng);
    Vector w = std::sqrt(std::max(0.0, 1.0 - eps * eps)) * w_star + eps * u;
    w /= w.norm();
    std::vector<Vector> traj = sphere_flow(a, w, dt, steps);
    double angle = std::acos(std::clamp(traj.back().dot(w_star), -1.0, 1.0));
    if (angle <= eps / 2.0) ++back;
  }
  return double(back) / double(directions);
}

}  // namespace cldyn
