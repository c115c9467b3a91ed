#include "cldyn/synthdata.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace cldyn;

TEST_CASE("default pool shape") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 1);
  CHECK(pool.generators.size() == 40);
  CHECK(pool.candidate_sets.size() == 10);
  for (const auto& c : pool.candidate_sets) CHECK(c.size() == 3);
  CHECK_NOTHROW(pool.validate());
  for (const auto& g : pool.generators) {
    int fixed = 0;
    for (int t : g) fixed += t != kWildcard;
    CHECK(fixed == 5);
  }
}

TEST_CASE("pool determinism") {
  GeneratorPool a = build_pool(40, 10, 5, 20, 7), b = build_pool(40, 10, 5, 20, 7);
  CHECK(a.generators == b.generators);
  CHECK(a.candidate_sets == b.candidate_sets);
  CHECK(build_pool(40, 10, 5, 20, 8).generators != a.generators);
}

TEST_CASE("every candidate is emitted when slots allow") {
  for (Index P : {3, 5, 10}) {
    GeneratorPool pool = build_pool(40, 10, P, 20, 11);
    std::vector<Index> slots(10, 0);
    std::vector<std::set<int>> used(10);
    for (const auto& g : pool.generators)
      for (Index k = 0; k < 10; ++k)
        if (g[k] != kWildcard) {
          ++slots[k];
          used[k].insert(g[k]);
        }
    for (Index k = 0; k < 10; ++k)
      if (slots[k] >= P) CHECK(Index(used[k].size()) == P);
  }
}

TEST_CASE("full candidate sets") {
  GeneratorPool pool = build_pool(10, 5, 20, 20, 2);
  for (const auto& c : pool.candidate_sets) CHECK(c.size() == 20);
  CHECK_THROWS_AS(build_pool(10, 5, 21, 20, 2), InvalidConfiguration);
  CHECK_THROWS_AS(build_pool(10, 4, 3, 20, 2), InvalidConfiguration);
}

TEST_CASE("pool file round trip") {
  GeneratorPool pool = build_pool(12, 6, 4, 20, 3);
  std::stringstream ss;
  write_pool(pool, ss);
  GeneratorPool back = read_pool(ss);
  CHECK(back.generators == pool.generators);
  CHECK(back.candidate_sets == pool.candidate_sets);
  std::stringstream junk("generator_pool v2\n");
  CHECK_THROWS_AS(read_pool(junk), FormatError);
}

TEST_CASE("embedding norms") {
  TokenEmbedding e = make_embedding(20, 20, 10.0);
  for (Index a = 0; a < 20; ++a)
    CHECK(e.table.row(a).norm() == doctest::Approx(a < 10 ? 10.0 : 0.1));
  TokenEmbedding r = make_embedding(6, 8, 1.0, 4);
  Matrix gram = r.table * r.table.transpose();
  CHECK((gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(make_embedding(20, 10, 1.0));
}

TEST_CASE("fixed positions agree between anchor and view") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 5);
  Rng rng = make_rng(6);
  for (int i = 0; i < 200; ++i) {
    TokenPair t = sample_tokens(pool, rng);
    const auto& g = pool.generators[t.generator];
    for (Index k = 0; k < 10; ++k)
      if (g[k] != kWildcard) {
        CHECK(t.anchor[k] == g[k]);
        CHECK(t.view[k] == g[k]);
      }
  }
  GeneratorPool rigid = pool;
  rigid.K = 5;
  rigid.generators.assign(1, {0, 1, 2, 0, 1});
  rigid.G = 1;
  for (auto& c : rigid.candidate_sets) c = {0, 1, 2};
  rigid.candidate_sets.resize(5);
  SamplePair sp = sample_pair(rigid, make_embedding(20, 20, 1.0), rng);
  CHECK(sp.x == sp.x_view);
}

TEST_CASE("batch layout") {
  GeneratorPool pool = build_pool(40, 10, 3, 20, 1);
  TokenEmbedding emb = make_embedding(20, 20, 1.0);
  LabeledBatch lb = make_batch(pool, emb, 128, 9);
  CHECK(lb.batch.anchors.rows() == 128);
  CHECK(lb.batch.anchors.cols() == 200);
  for (Index i = 0; i < 5; ++i)
    for (Index k = 0; k < 10; ++k) {
      Vector block = lb.batch.anchors.block(i, k * 20, 1, 20).transpose();
      bool hit = false;
      for (Index a = 0; a < 20; ++a) hit |= block == emb.table.row(a).transpose();
      CHECK(hit);
    }
  CHECK(make_batch(pool, emb, 16, 3).batch.anchors == make_batch(pool, emb, 16, 3).batch.anchors);
}
