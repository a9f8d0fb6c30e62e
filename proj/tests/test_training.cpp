#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <set>

#include "fixtures.hpp"
#include "kgsq/training.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"

using namespace kgsq;
using kgsq::testing::random_batch;
using kgsq::testing::random_model;

namespace {

ModelConfig grid_config() {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 50;
  cfg.lr = 0.1;
  cfg.n_neg = 2;
  cfg.seed = 1;
  cfg.batch_size = 32;
  cfg.optimizer = Optimizer::adagrad;
  return cfg;
}

}  // namespace

TEST_CASE("zero model with no negatives has loss ln 2") {
  auto g = augment(kgsq::testing::graph_from_lines({"A\tr\tB"}));
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.n_neg = 0;
  auto m = init_model(g, cfg);
  m.head.setZero();
  m.tail.setZero();
  m.relation.setZero();
  SamplerState s(0);
  const std::vector<Triple> batch{{0, 1, 0}};
  const auto out = loss_and_grads(m, batch, s);
  CHECK(out.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(out.grads.head.size() == 1);
  CHECK(out.grads.head.at(0).isZero());
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const double err = kgsq::testing::random_gradient_trial(rng, trial);
    CHECK_MESSAGE(err <= 1e-4, "trial " << trial << " relative error " << err);
  }
}

TEST_CASE("gradients touch only referenced rows") {
  std::mt19937_64 rng(8);
  const auto m = random_model(20, 3, 8, rng);
  const std::vector<Triple> pos{{1, 2, 0}, {3, 4, 5}};
  const std::vector<Triple> neg{{7, 2, 0}, {1, 9, 0}};
  const auto out = batch_loss_and_grads(m, pos, neg);
  std::set<Eigen::Index> heads, tails, rels;
  for (const auto& [k, v] : out.grads.head) heads.insert(k);
  for (const auto& [k, v] : out.grads.tail) tails.insert(k);
  for (const auto& [k, v] : out.grads.relation) rels.insert(k);
  CHECK(heads == std::set<Eigen::Index>{1, 3, 7});
  CHECK(tails == std::set<Eigen::Index>{2, 4, 9});
  CHECK(rels == std::set<Eigen::Index>{0, 5});
}

TEST_CASE("duplicating every positive leaves the mean loss unchanged") {
  std::mt19937_64 rng(9);
  auto m = random_model(10, 2, 8, rng);
  m.config.l2 = 0.05;
  const auto pos = random_batch(6, 10, 4, rng);
  SamplerState s(1);
  const auto neg = sample_negatives(pos, 10, 2, s);
  auto pos2 = pos;
  pos2.insert(pos2.end(), pos.begin(), pos.end());
  auto neg2 = neg;
  neg2.insert(neg2.end(), neg.begin(), neg.end());
  CHECK(batch_loss_and_grads(m, pos2, neg2).loss == doctest::Approx(batch_loss_and_grads(m, pos, neg).loss).epsilon(1e-14));

  m.config.l2 = 0;
  SamplerState s0(1);
  const std::vector<Triple> none;
  CHECK(batch_loss_and_grads(m, pos2, none).loss == doctest::Approx(batch_loss_and_grads(m, pos, none).loss).epsilon(1e-14));
}

TEST_CASE("loss_and_grads is deterministic for a fixed sampler state") {
  std::mt19937_64 rng(10);
  auto m = random_model(10, 2, 8, rng);
  m.config.n_neg = 3;
  const auto pos = random_batch(5, 10, 4, rng);
  SamplerState a(77), b(77);
  CHECK(loss_and_grads(m, pos, a).loss == loss_and_grads(m, pos, b).loss);
}

TEST_CASE("empty batch is an error") {
  std::mt19937_64 rng(1);
  const auto m = random_model(3, 1, 2, rng);
  SamplerState s(0);
  CHECK_THROWS(loss_and_grads(m, std::vector<Triple>{}, s));
}

TEST_CASE("sample_negatives corrupts heads then tails") {
  SamplerState s(3);
  const std::vector<Triple> pos{{1, 2, 0}};
  const auto neg = sample_negatives(pos, 50, 3, s);
  REQUIRE(neg.size() == 6);
  for (int i = 0; i < 3; ++i) {
    CHECK(neg[i].tail == 2);
    CHECK(neg[i].relation == 0);
  }
  for (int i = 3; i < 6; ++i) {
    CHECK(neg[i].head == 1);
    CHECK(neg[i].relation == 0);
  }
}

TEST_CASE("training lowers the epoch loss on the grid fixture") {
  const auto g = augment(kgsq::testing::grid_graph());
  for (auto opt : {Optimizer::sgd, Optimizer::adagrad}) {
    auto cfg = grid_config();
    cfg.optimizer = opt;
    if (opt == Optimizer::sgd) cfg.lr = 1.0;
    std::vector<double> losses;
    const auto m = train(g, cfg, [&](std::size_t epoch, double loss) {
      CHECK(epoch == losses.size() + 1);
      losses.push_back(loss);
    });
    REQUIRE(losses.size() == 50);
    CHECK(losses.back() < losses.front());
    CHECK(m.all_finite());
  }
}

TEST_CASE("training raises the mean validity probability of training triples") {
  const auto g = augment(kgsq::testing::grid_graph());
  const auto cfg = grid_config();
  auto mean_prob = [&](const EmbeddingModel<double>& m) {
    double sum = 0;
    for (const auto& t : g.triples) sum += prob_valid(score_directed(m, t));
    return sum / static_cast<double>(g.triples.size());
  };
  CHECK(mean_prob(train(g, cfg)) > mean_prob(init_model(g, cfg)));
}

TEST_CASE("zero epochs returns the initial model") {
  const auto g = augment(kgsq::testing::grid_graph());
  auto cfg = grid_config();
  cfg.epochs = 0;
  const auto trained = train(g, cfg);
  const auto init = init_model(g, cfg);
  CHECK(trained.head == init.head);
  CHECK(trained.tail == init.tail);
  CHECK(trained.relation == init.relation);
}

TEST_CASE("training is bit-reproducible") {
  const auto g = augment(kgsq::testing::grid_graph());
  auto cfg = grid_config();
  cfg.epochs = 5;
  const auto a = train(g, cfg);
  const auto b = train(g, cfg);
  CHECK(std::memcmp(a.head.data(), b.head.data(), sizeof(double) * static_cast<std::size_t>(a.head.size())) == 0);
  CHECK(std::memcmp(a.tail.data(), b.tail.data(), sizeof(double) * static_cast<std::size_t>(a.tail.size())) == 0);
  CHECK(std::memcmp(a.relation.data(), b.relation.data(),
                    sizeof(double) * static_cast<std::size_t>(a.relation.size())) == 0);
}

TEST_CASE("a vanishing learning rate barely moves the parameters") {
  const auto g = augment(kgsq::testing::grid_graph());
  for (auto opt : {Optimizer::sgd, Optimizer::adagrad}) {
    auto cfg = grid_config();
    cfg.optimizer = opt;
    cfg.lr = 1e-12;
    cfg.epochs = 1;
    const auto trained = train(g, cfg);
    cfg.epochs = 0;
    const auto init = train(g, cfg);
    CHECK((trained.head - init.head).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((trained.tail - init.tail).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((trained.relation - init.relation).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("aggressive settings stay finite or abort with a diagnostic") {
  const auto g = augment(kgsq::testing::grid_graph());
  auto cfg = grid_config();
  cfg.epochs = 20;
  cfg.lr = 50.0;
  cfg.init_scale = 1.0;
  cfg.optimizer = Optimizer::sgd;
  try {
    const auto m = train(g, cfg);
    CHECK(m.all_finite());
  } catch (const TrainingError& e) {
    CHECK(e.epoch() >= 1);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("train requires an augmented graph") {
  const auto g = kgsq::testing::grid_graph();
  CHECK_THROWS(train(g, grid_config()));
}
