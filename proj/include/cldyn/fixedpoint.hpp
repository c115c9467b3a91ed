#pragma once

#include "cldyn/core.hpp"

#include <cstdint>
#include <vector>

namespace cldyn {

struct SymmetricSpectrum {
  Vector values;   // descending
  Matrix vectors;  // columns match values
  double top() const { return values[0]; }
  double second() const { return values.size() > 1 ? values[1] : 0.0; }
  double bottom() const { return values[values.size() - 1]; }
  double gap() const { return top() - second(); }
  Vector top_vector() const { return vectors.col(0); }
};

SymmetricSpectrum symmetric_spectrum(const Matrix& a);
double spectral_norm(const Matrix& symmetric);

struct PowerIterationTrace {
  std::vector<Vector> iterates;
  std::vector<double> discrepancies;
  std::vector<double> c_values;
  bool converged = false;
  Vector limit;
};

struct DegenerateOperator : Error {
  DegenerateOperator(const std::string& what, PowerIterationTrace t)
      : Error(what), trace(std::move(t)) {}
  PowerIterationTrace trace;
};

PowerIterationTrace power_iterate(const GatedOperator& a, const Vector& w0, double tol,
                                  long max_iter);

struct ConvergenceCertificate {
  double c0 = 0.0;
  double L_hat = 0.0;
  double kappa_hat = 0.0;
  double lambda_gap = 0.0;  // smallest gap seen over the probes
  double mu_sup = 0.0;
  double nu_sup = 0.0;
  double gamma = 1.0;
  double cap_cos = 1.0;  // B_gamma = { w : w.w0 >= cap_cos }
  double basin_radius = 0.0;
  bool certified = false;
  std::string reason;
};

// Cap threshold of B_gamma for a given c0.
double certificate_cap_cos(double c0, double gamma);
double certificate_c_gamma(double gamma);
// mu(w) from the top two eigenvalues and the alignment c.
double certificate_mu(double c, double lambda1, double lambda2);
double certificate_nu(double mu, double c, double lambda_gap, double L, double kappa);

ConvergenceCertificate certificate(const GatedOperator& a, const Vector& w0,
                                   std::vector<double> gamma_grid, Index probe_count,
                                   std::uint64_t seed);

double estimate_lipschitz(const GatedOperator& a, Index sample_count, const Vector& region_center,
                          double region_cos, std::uint64_t seed);

double estimate_kappa(const GatedOperator& a, const Vector& center,
                      const std::vector<double>& radii, std::uint64_t seed);

GatedOperator pd_shift(const GatedOperator& a, double epsilon);

std::vector<Vector> sphere_flow(const GatedOperator& a, const Vector& w0, double dt = 0.01,
                                long steps = 1000);

double stability_probe(const GatedOperator& a, const Vector& w_star, double eps, Index directions,
                       double dt, long steps, std::uint64_t seed);

// Uniform-angle point in the cap {w : w.center >= cap_cos}.
Vector sample_cap_point(const Vector& center, double cap_cos, Rng& rng);
Vector random_tangent(const Vector& w, Rng& rng);

}  // namespace cldyn
