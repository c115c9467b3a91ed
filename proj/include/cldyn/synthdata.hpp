#pragma once

#include "cldyn/twolayer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cldyn {

struct TokenEmbedding {
  Matrix table;  // d_tokens x d, row a = u_a
  double zeta = 1.0;

  Index tokens() const { return table.rows(); }
  Index dim() const { return table.cols(); }
};

// Orthonormal directions (leading identity rows when basis_seed == 0, otherwise rows of a
// random orthogonal matrix); the first floor(d_tokens/2) token rows get norm zeta, the rest 1/zeta.
// With shuffle_seed != 0 the set of enlarged tokens is a seeded random choice.
TokenEmbedding make_embedding(Index d_tokens, Index d, double zeta, std::uint64_t basis_seed = 0,
                              std::uint64_t shuffle_seed = 0);

inline constexpr int kWildcard = -1;
inline constexpr Index kFixedPositions = 5;

struct GeneratorPool {
  Index G = 0, K = 0, P = 0, d_tokens = 0;
  std::vector<std::vector<int>> generators;      // G x K, kWildcard for '*'
  std::vector<std::vector<int>> candidate_sets;  // K x P, sorted

  bool in_candidates(Index k, int token) const;
  void validate() const;
};

GeneratorPool build_pool(Index G, Index K, Index P, Index d_tokens, std::uint64_t seed);

void write_pool(const GeneratorPool& pool, std::ostream& os);
void write_pool(const GeneratorPool& pool, const std::string& path);
GeneratorPool read_pool(std::istream& is);
GeneratorPool read_pool_file(const std::string& path);

struct TokenPair {
  std::vector<int> anchor;
  std::vector<int> view;
  int generator = 0;
};

TokenPair sample_tokens(const GeneratorPool& pool, Rng& rng);
Vector embed_tokens(const std::vector<int>& tokens, const TokenEmbedding& emb);

struct SamplePair {
  Vector x;
  Vector x_view;
  int generator = 0;
};

SamplePair sample_pair(const GeneratorPool& pool, const TokenEmbedding& emb, Rng& rng);

struct LabeledBatch {
  RFBatch batch;
  std::vector<int> labels;
};

LabeledBatch make_batch(const GeneratorPool& pool, const TokenEmbedding& emb, Index n, Rng& rng);
LabeledBatch make_batch(const GeneratorPool& pool, const TokenEmbedding& emb, Index n,
                        std::uint64_t seed);

}  // namespace cldyn
