#include "kgsq/model.hpp"

#include <random>

namespace kgsq {

std::string to_string(Optimizer opt) {
  switch (opt) {
    case Optimizer::sgd:
      return "sgd";
    case Optimizer::adagrad:
      return "adagrad";
  }
  return "unknown";
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adagrad") return Optimizer::adagrad;
  throw Error("unknown optimizer '" + name + "' (expected sgd or adagrad)");
}

void ModelConfig::validate() const {
  if (dim < 1) throw Error("dim must be >= 1");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw Error("init_scale must be > 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error("lr must be > 0");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error("l2 must be >= 0");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
}

EmbeddingModel<double> init_model(const KnowledgeGraph& graph, const ModelConfig& config) {
  config.validate();
  if (!graph.augmented) throw Error("init_model expects an augmented graph");
  if (graph.vocabulary.entity_count() == 0) throw Error("init_model: empty vocabulary");

  const auto n = static_cast<Eigen::Index>(graph.vocabulary.entity_count());
  const auto m2 = static_cast<Eigen::Index>(graph.total_relation_count());
  const auto d = static_cast<Eigen::Index>(config.dim);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, config.init_scale);
  auto fill = [&](RowMatrix<double>& m, Eigen::Index rows) {
    m.resize(rows, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  };

  EmbeddingModel<double> model;
  fill(model.head, n);
  fill(model.tail, n);
  fill(model.relation, m2);
  model.config = config;
  model.vocabulary = graph.vocabulary;
  return model;
}

}  // namespace kgsq
