#pragma once

#include "cldyn/core.hpp"

#include <cmath>
#include <cstdint>
#include <vector>
#include <optional>

namespace cldyn {

struct OrthonormalDictionary {
  Matrix base;                      // D x M, orthonormal columns
  std::optional<Matrix> perturbation;

  static OrthonormalDictionary identity(Index d);
  // Random orthonormal D x M columns from the QR of a Gaussian matrix.
  static OrthonormalDictionary random(Index d, Index m, std::uint64_t seed);
  // Adds i.i.d. uniform [-eps, eps] entries; columns are not renormalized.
  OrthonormalDictionary perturbed(double eps, std::uint64_t seed) const;

  Matrix columns() const;
  Index dim() const { return base.rows(); }
  Index atoms() const { return base.cols(); }
  bool exact() const { return !perturbation.has_value(); }
};

struct CategoricalModel {
  OrthonormalDictionary dict;
  Vector probs;
  void validate() const;
};

struct SummationModel {
  OrthonormalDictionary dict;
  Vector q;
  void validate() const;

  static double y_plus(double q) { return std::sqrt((1.0 - q) / q); }
  static double y_minus(double q) { return -std::sqrt(q / (1.0 - q)); }
};

Matrix sample_categorical(const CategoricalModel& model, Index n, std::uint64_t seed);
// Also returns the sampled category of each row when labels is non-null.
Matrix sample_categorical(const CategoricalModel& model, Index n, std::uint64_t seed,
                          std::vector<int>* labels);
Matrix sample_summation(const SummationModel& model, Index n, std::uint64_t seed);
// Latent coordinates y (n x M) that produced a summation sample with the same seed.
Matrix sample_summation_latent(const SummationModel& model, Index n, std::uint64_t seed);

// ReLU-gated variance at w = u_m (0-based m).
Matrix analytic_A_categorical(const CategoricalModel& model, Index m);
Matrix analytic_A_summation(const SummationModel& model, Index m);

// q at which the two eigenvalues of the summation closed form tie.
double summation_tie_threshold();

// Exact population A(w) for the summation model by enumerating all 2^M latent sign
// patterns; works for perturbed dictionaries and arbitrary w.
GatedOperator summation_population_operator(const SummationModel& model,
                                            const Activation& act = Activation::relu());

// Batch with views identical to anchors (no augmentation).
PairedBatch unaugmented_batch(const Matrix& samples);

struct PairCheck {
  double discrepancy = 0.0;     // || P_w A w' - c(theta) P_w w' ||
  double coefficient = 0.0;     // least-squares fit of the projected coefficient
  double expected = 0.0;        // (pi - theta) / (2 pi)
  double standard_error = 0.0;  // of the fitted coefficient
};

PairCheck spherical_gaussian_pair_check(const Vector& w, const Vector& w_prime, Index n,
                                        std::uint64_t seed);

}  // namespace cldyn
