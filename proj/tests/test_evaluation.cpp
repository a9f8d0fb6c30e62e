#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "fixtures.hpp"
#include "kgsq/evaluation.hpp"
#include "oracles.hpp"

using namespace kgsq;

namespace {

EmbeddingModel<double> zero_model(std::size_t n, std::size_t m, std::size_t d) {
  EmbeddingModel<double> model;
  model.head = RowMatrix<double>::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  model.tail = model.head;
  model.relation = RowMatrix<double>::Zero(static_cast<Eigen::Index>(2 * m), static_cast<Eigen::Index>(d));
  model.vocabulary = kgsq::testing::make_vocab(n, m);
  return model;
}

}  // namespace

TEST_CASE("a model that scores the truth strictly highest has mrr 1") {
  // head_i is one-hot(i); tail_j is one-hot(partner(j)) with unused slot 5.
  auto m = zero_model(5, 1, 6);
  for (int i = 0; i < 5; ++i) m.head(i, i) = 1;
  const int partner[5] = {5, 0, 5, 2, 5};
  for (int j = 0; j < 5; ++j) m.tail(j, partner[j]) = 1;
  m.relation.row(0).setOnes();

  const std::vector<Triple> test{{0, 1, 0}, {2, 3, 0}};
  const TripleSet known(test.begin(), test.end());
  const auto metrics = evaluate_link_prediction(m, test, known);
  CHECK(metrics.mrr == 1.0);
  CHECK(metrics.hits_at.at(1) == 1.0);
  CHECK(metrics.hits_at.at(10) == 1.0);
  CHECK(metrics.rankings == 4);
}

TEST_CASE("all-zero model ranks the truth last among unfiltered candidates") {
  const auto m = zero_model(5, 1, 3);
  const std::vector<Triple> test{{0, 1, 0}};
  const TripleSet known{{0, 1, 0}, {0, 2, 0}};
  // Tail side: candidates {0, 3, 4} survive the filter, so rank 4.
  // Head side: candidates {1, 2, 3, 4}, so rank 5.
  const auto metrics = evaluate_link_prediction(m, test, known);
  CHECK(metrics.mrr == doctest::Approx((1.0 / 4 + 1.0 / 5) / 2));
  CHECK(metrics.hits_at.at(1) == 0.0);
  CHECK(metrics.hits_at.at(3) == 0.0);
  CHECK(metrics.hits_at.at(10) == 1.0);
}

TEST_CASE("metrics equal a brute-force re-implementation") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<EntityId> e(0, 19);
  std::uniform_int_distribution<RelationId> r(0, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = kgsq::testing::random_model(20, 3, 8, rng);
    std::set<Triple> known;
    while (known.size() < 60) known.insert({e(rng), e(rng), r(rng)});
    std::vector<Triple> test(known.begin(), std::next(known.begin(), 15));
    const TripleSet known_set(known.begin(), known.end());

    const auto got = evaluate_link_prediction(m, test, known_set);
    const auto want = oracle::link_prediction(m, test, known);
    CHECK(got.rankings == want.rankings);
    CHECK(got.mrr == doctest::Approx(want.mrr).epsilon(1e-15));
    for (int k : {1, 3, 10}) CHECK(got.hits_at.at(k) == want.hits_at.at(k));
  }
}

TEST_CASE("evaluation preconditions") {
  const auto m = zero_model(3, 1, 2);
  CHECK_THROWS(evaluate_link_prediction(m, {}, {}));
  CHECK_THROWS(evaluate_link_prediction(m, {{0, 1, 1}}, {}));
}

TEST_CASE("float models evaluate the same ranking") {
  std::mt19937_64 rng(4);
  const auto m = kgsq::testing::random_model(12, 2, 8, rng);
  const std::vector<Triple> test{{0, 1, 0}, {3, 4, 1}, {5, 5, 0}};
  const TripleSet known(test.begin(), test.end());
  const auto f = m.cast<float>();
  const auto want = oracle::link_prediction(f, test, std::set<Triple>(test.begin(), test.end()));
  CHECK(evaluate_link_prediction(f, test, known).mrr == doctest::Approx(want.mrr));
}
