#pragma once

// Numerical self-checks of the closed forms and structural identities. Each returns the raw
// measurements; callers decide what tolerance to hold them to.

#include "cldyn/analysis.hpp"
#include "cldyn/fixedpoint.hpp"
#include "cldyn/genmodels.hpp"
#include "cldyn/trainer.hpp"
#include "cldyn/twolayer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cldyn {

// Monte-Carlo ReLU-gated covariance at w = u_0 for the latent summation model (identity
// dictionary, every q equal) against the closed form.
struct SummationClosedFormCheck {
  double q = 0.0;
  double mc_along = 0.0, mc_other = 0.0;
  double analytic_along = 0.0, analytic_other = 0.0;
  double rel_err_along = 0.0, rel_err_other = 0.0;
};
SummationClosedFormCheck summation_closed_form_check(double q, Index dim, Index n,
                                                     std::uint64_t seed);

// lambda(u_0) - lambda(u_1) of the exact population operator at q, evaluated at w = u_0.
double summation_gap(double q, Index dim);

struct ModulationRow {
  double eps = 0.0;
  Index d = 0;
  double closed_form = 0.0;
  double mc = 0.0;
  double sigma = 0.0;  // binomial standard error at the closed-form probability
};
std::vector<ModulationRow> modulation_grid(const std::vector<double>& eps_values,
                                           const std::vector<Index>& dims, Index draws,
                                           std::uint64_t seed);

struct BlowupRow {
  double b = 0.0, y0 = 0.0;
  double formula = 0.0, simulated = 0.0, rel_err = 0.0;
  bool blew_up = false;
};
std::vector<BlowupRow> blowup_grid(const std::vector<double>& b_values,
                                   const std::vector<double>& y0_values, double dt);

// Worst min-eig / max-eig ratio of C_alpha over random unaugmented uniform-alpha batches.
double psd_worst_ratio(Index instances, std::uint64_t seed);

// Smallest pairwise |cos| between raw per-filter gradients within an RF, linear nets with a
// rank-one top layer.
double colinearity_min_cos(Index instances, std::uint64_t seed);

// Largest gradient norm along the 11-point convex path between a linear critical point with
// two distinct filters per RF and its filter-swapped copy.
double critical_path_max_grad(Index instances, std::uint64_t seed);

struct Rank1Check {
  double max_rel_lambda_err = 0.0;
  double max_vector_err = 0.0;  // 1 - |s . s_dense|
  double max_residual = 0.0;    // ||(D + w b b^T) s - lambda s|| / lambda
  Index floor_violations = 0;
};
Rank1Check rank1_solver_check(Index instances, Index max_k, std::uint64_t seed);

// Largest |decoupled - full| over constructed M=1, C=2 instances with a rank-one top layer.
double decoupled_rhs_max_error(Index instances, std::uint64_t seed);

struct CertifiedRun {
  double c0 = 0.0;
  double gamma = 0.0;
  bool certified = false;
  bool c_monotone = false;
  double worst_bound_ratio = 0.0;  // max_t discrepancy_t / bound_t
  bool limit_in_cap = false;
  long iterations = 0;
};
// Power iteration from starts at the given angles (degrees) around u_0 of the exact
// summation operator.
std::vector<CertifiedRun> certified_power_iteration(double q, Index dim,
                                                    const std::vector<double>& angles_deg,
                                                    std::uint64_t seed);

double summation_stability_fraction(double q, Index dim, double eps, Index directions,
                                    std::uint64_t seed);

struct LossGradCheck {
  double max_rel_err = 0.0;
  Index instances = 0;
};
LossGradCheck loss_gradient_check(LossConfig::Kind kind, Index instances, std::uint64_t seed);

struct ReassemblyCheck {
  double residual = 0.0;
  double band = 0.0;  // 5 n^{-1/2} max|entry|
  double delta_antisymmetry = 0.0;  // ||Delta(0) + Delta(1)|| / ||Delta(0)|| for C = 2
};
ReassemblyCheck reassembly_check(Index n, std::uint64_t seed);

}  // namespace cldyn
