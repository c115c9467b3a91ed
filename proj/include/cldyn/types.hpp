#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace cldyn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CLDYN_ERROR(Name)                          \
  struct Name : Error {                            \
    using Error::Error;                            \
  }

CLDYN_ERROR(InvalidBatch);
CLDYN_ERROR(DimensionError);
CLDYN_ERROR(UnsupportedConfiguration);
CLDYN_ERROR(NotPositiveDefinite);
CLDYN_ERROR(DegenerateGap);
CLDYN_ERROR(NotCriticalPoint);
CLDYN_ERROR(DegenerateVariance);
CLDYN_ERROR(DomainError);
CLDYN_ERROR(InvalidConfiguration);
CLDYN_ERROR(InsufficientSamples);
CLDYN_ERROR(DegenerateFilter);
CLDYN_ERROR(InvalidVector);
CLDYN_ERROR(SpectralOrdering);
CLDYN_ERROR(FormatError);

#undef CLDYN_ERROR

// Raised when training or iteration produces non-finite state.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, long step_) : Error(what), step(step_) {}
  long step;
};

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

Vector standard_normal_vector(Index n, Rng& rng);
Matrix standard_normal_matrix(Index rows, Index cols, Rng& rng);
Vector random_unit_vector(Index n, Rng& rng);
Matrix random_orthogonal(Index n, Rng& rng);

// Projection onto the tangent space of the unit sphere at w.
Matrix tangent_projector(const Vector& w);
bool all_finite(const Matrix& m);

}  // namespace cldyn
