#pragma once

#include "cldyn/core.hpp"
#include "cldyn/synthdata.hpp"
#include "cldyn/twolayer.hpp"

#include <cstdint>
#include <vector>

namespace cldyn {

struct MatchingReport {
  Vector chi_plus_per_rf;
  Vector chi_minus_per_rf;
  double chi_plus = 0.0;
  double chi_minus = 0.0;
};

// chi_minus keeps the 1/P prefactor even though it sums over d_tokens - P tokens.
MatchingReport matching_scores(const Matrix& W, Index K, Index M, const TokenEmbedding& emb,
                               const GeneratorPool& pool);
inline MatchingReport matching_scores(const TwoLayerNet& net, const TokenEmbedding& emb,
                                      const GeneratorPool& pool) {
  return matching_scores(net.W, net.K, net.M, emb, pool);
}

struct BasinReport {
  std::vector<double> frequency;  // per target, +/- target combined, over all trials
  double unassigned = 0.0;        // converged but not within angle_tol of any target
  double unconverged = 0.0;       // flow residual still above tolerance after max steps
  Index trials = 0;
};

BasinReport basin_estimate(const GatedOperator& a, const std::vector<Vector>& targets, Index trials,
                           double angle_tol, std::uint64_t seed, double dt = 0.01,
                           long max_steps = 20000, double residual_tol = 1e-6);

double blowup_time(double b, double y0);

struct Trajectory1D {
  std::vector<double> t;
  std::vector<double> y;
  bool blew_up = false;
  double blowup_at = 0.0;  // time the threshold was crossed
};

// Euler steps with the step capped so |dy| <= rel_cap * max(|y|, 1); stops once |y| exceeds
// the threshold.
Trajectory1D simulate_1d(double b, double y0, double dt, double t_max, double threshold = 1e6,
                         double rel_cap = 1e-4);

double modulation_probability(double eps, Index d);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

// Frequency of {Y_0 > 0, Y_0 + eps >= max_{l>0} Y_l} for i.i.d. U[-1,1] coordinates.
MonteCarloEstimate modulation_probability_mc(double eps, Index d, Index draws, std::uint64_t seed);

}  // namespace cldyn
