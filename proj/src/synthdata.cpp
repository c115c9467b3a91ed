#include "cldyn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace cldyn {

TokenEmbedding make_embedding(Index d_tokens, Index d, double zeta, std::uint64_t basis_seed,
                              std::uint64_t shuffle_seed) {
  if (d < d_tokens) throw InvalidConfiguration("embedding dimension must be >= token count");
  if (!(zeta >= 1.0)) throw InvalidConfiguration("zeta must be >= 1");
  TokenEmbedding emb;
  emb.zeta = zeta;
  if (basis_seed == 0) {
    emb.table = Matrix::Identity(d_tokens, d);
  } else {
    Rng rng = make_rng(basis_seed);
    emb.table = random_orthogonal(d, rng).topRows(d_tokens);
  }
  std::vector<Index> order(d_tokens);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed != 0) {
    Rng rng = make_rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const Index big = d_tokens / 2;
  for (Index i = 0; i < d_tokens; ++i) emb.table.row(order[i]) *= i < big ? zeta : 1.0 / zeta;
  return emb;
}

bool GeneratorPool::in_candidates(Index k, int token) const {
  const auto& c = candidate_sets[k];
  return std::binary_search(c.begin(), c.end(), token);
}

void GeneratorPool::validate() const {
  if (K < kFixedPositions) throw InvalidConfiguration("pool needs K >= 5");
  if (P < 1 || P > d_tokens) throw InvalidConfiguration("need 1 <= P <= d_tokens");
  if (Index(generators.size()) != G || Index(candidate_sets.size()) != K)
    throw FormatError("pool sizes do not match header");
  for (Index k = 0; k < K; ++k) {
    if (Index(candidate_sets[k].size()) != P) throw FormatError("candidate set has wrong size");
    for (int t : candidate_sets[k])
      if (t < 0 || t >= d_tokens) throw FormatError("candidate token out of range");
  }
  for (const auto& g : generators) {
    if (Index(g.size()) != K) throw FormatError("generator has wrong length");
    Index fixed = 0;
    for (Index k = 0; k < K; ++k) {
      if (g[k] == kWildcard) continue;
      ++fixed;
      if (!in_candidates(k, g[k])) throw FormatError("fixed token outside its candidate set");
    }
    if (fixed != kFixedPositions) throw FormatError("generator must fix exactly 5 positions");
  }
}

GeneratorPool build_pool(Index G, Index K, Index P, Index d_tokens, std::uint64_t seed) {
  if (P > d_tokens) throw InvalidConfiguration("P must not exceed the token count");
  if (P < 1) throw InvalidConfiguration("P must be >= 1");
  if (K < kFixedPositions) throw InvalidConfiguration("sequence length K must be >= 5");
  if (G < 1) throw InvalidConfiguration("need at least one generator");
  Rng rng = make_rng(seed);
  GeneratorPool pool;
  pool.G = G;
  pool.K = K;
  pool.P = P;
  pool.d_tokens = d_tokens;
  std::vector<int> tokens(d_tokens);
  std::iota(tokens.begin(), tokens.end(), 0);
  for (Index k = 0; k < K; ++k) {
    std::shuffle(tokens.begin(), tokens.end(), rng);
    std::vector<int> set(tokens.begin(), tokens.begin() + P);
    std::sort(set.begin(), set.end());
    pool.candidate_sets.push_back(set);
  }
  std::vector<Index> positions(K);
  std::iota(positions.begin(), positions.end(), 0);
  pool.generators.assign(G, std::vector<int>(K, kWildcard));
  // slots[k] lists the generators that fix position k
  std::vector<std::vector<Index>> slots(K);
  for (Index g = 0; g < G; ++g) {
    std::shuffle(positions.begin(), positions.end(), rng);
    for (Index i = 0; i < kFixedPositions; ++i) slots[positions[i]].push_back(g);
  }
  // Each permitted token is emitted by at least one generator whenever the position has enough
  // fixed slots; otherwise a candidate could only ever show up through a wildcard and would be
  // indistinguishable from noise. Remaining slots pick uniformly.
  std::uniform_int_distribution<Index> pick(0, P - 1);
  for (Index k = 0; k < K; ++k) {
    auto& ks = slots[k];
    std::shuffle(ks.begin(), ks.end(), rng);
    std::vector<int> order = pool.candidate_sets[k];
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      int token = i < order.size() ? order[i] : pool.candidate_sets[k][pick(rng)];
      pool.generators[ks[i]][k] = token;
    }
  }
  return pool;
}

void write_pool(const GeneratorPool& pool, std::ostream& os) {
  os << "generator_pool v1\n";
  os << "G " << pool.G << "\nK " << pool.K << "\nP " << pool.P << "\nd_tokens " << pool.d_tokens
     << "\n";
  for (Index k = 0; k < pool.K; ++k) {
    os << "candidates " << k << ":";
    for (int t : pool.candidate_sets[k]) os << " " << t;
    os << "\n";
  }
  for (Index g = 0; g < pool.G; ++g) {
    os << "generator " << g << ":";
    for (int t : pool.generators[g]) {
      if (t == kWildcard)
        os << " *";
      else
        os << " " << t;
    }
    os << "\n";
  }
}

void write_pool(const GeneratorPool& pool, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write pool file: " + path);
  write_pool(pool, os);
}

namespace {

Index read_header(std::istream& is, const std::string& key) {
  std::string k;
  Index v = 0;
  if (!(is >> k >> v) || k != key) throw FormatError("pool file: expected '" + key + "'");
  return v;
}

std::vector<int> read_list(std::istream& is, const std::string& key, Index index, Index count) {
  std::string k, label;
  if (!(is >> k >> label) || k != key || label != std::to_string(index) + ":")
    throw FormatError("pool file: expected '" + key + " " + std::to_string(index) + ":'");
  std::vector<int> out;
  for (Index i = 0; i < count; ++i) {
    std::string tok;
    if (!(is >> tok)) throw FormatError("pool file: truncated " + key + " line");
    if (tok == "*") {
      out.push_back(kWildcard);
    } else {
      try {
        out.push_back(std::stoi(tok));
      } catch (const std::logic_error&) {
        throw FormatError("pool file: bad token '" + tok + "'");
      }
    }
  }
  return out;
}

}  // namespace

GeneratorPool read_pool(std::istream& is) {
  std::string magic, version;
  if (!(is >> magic >> version) || magic != "generator_pool" || version != "v1")
    throw FormatError("not a generator pool file");
  GeneratorPool pool;
  pool.G = read_header(is, "G");
  pool.K = read_header(is, "K");
  pool.P = read_header(is, "P");
  pool.d_tokens = read_header(is, "d_tokens");
  if (pool.G < 1 || pool.K < 1 || pool.P < 1 || pool.G > 1000000 || pool.K > 100000)
    throw FormatError("pool file: implausible header");
  for (Index k = 0; k < pool.K; ++k) pool.candidate_sets.push_back(read_list(is, "candidates", k, pool.P));
  for (Index g = 0; g < pool.G; ++g) pool.generators.push_back(read_list(is, "generator", g, pool.K));
  pool.validate();
  return pool;
}

GeneratorPool read_pool_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open pool file: " + path);
  return read_pool(is);
}

TokenPair sample_tokens(const GeneratorPool& pool, Rng& rng) {
  std::uniform_int_distribution<int> gen(0, int(pool.G) - 1);
  std::uniform_int_distribution<int> tok(0, int(pool.d_tokens) - 1);
  TokenPair p;
  p.generator = gen(rng);
  const auto& g = pool.generators[p.generator];
  p.anchor.resize(pool.K);
  p.view.resize(pool.K);
  for (Index k = 0; k < pool.K; ++k) {
    if (g[k] == kWildcard) {
      p.anchor[k] = tok(rng);
      p.view[k] = tok(rng);
    } else {
      p.anchor[k] = p.view[k] = g[k];
    }
  }
  return p;
}

Vector embed_tokens(const std::vector<int>& tokens, const TokenEmbedding& emb) {
  const Index d = emb.dim();
  Vector x(Index(tokens.size()) * d);
  for (size_t k = 0; k < tokens.size(); ++k) x.segment(Index(k) * d, d) = emb.table.row(tokens[k]).transpose();
  return x;
}

SamplePair sample_pair(const GeneratorPool& pool, const TokenEmbedding& emb, Rng& rng) {
  TokenPair t = sample_tokens(pool, rng);
  return {embed_tokens(t.anchor, emb), embed_tokens(t.view, emb), t.generator};
}

LabeledBatch make_batch(const GeneratorPool& pool, const TokenEmbedding& emb, Index n, Rng& rng) {
  if (n < 2) throw InvalidBatch("batch needs N >= 2");
  if (emb.tokens() != pool.d_tokens) throw DimensionError("embedding token count differs from pool");
  const Index d = emb.dim();
  Matrix a(n, pool.K * d), v(n, pool.K * d);
  LabeledBatch out;
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    TokenPair t = sample_tokens(pool, rng);
    for (Index k = 0; k < pool.K; ++k) {
      a.block(i, k * d, 1, d) = emb.table.row(t.anchor[k]);
      v.block(i, k * d, 1, d) = emb.table.row(t.view[k]);
    }
    out.labels[i] = t.generator;
  }
  out.batch = RFBatch(std::move(a), std::move(v), pool.K, d);
  return out;
}

LabeledBatch make_batch(const GeneratorPool& pool, const TokenEmbedding& emb, Index n,
                        std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return make_batch(pool, emb, n, rng);
}

}  // namespace cldyn
