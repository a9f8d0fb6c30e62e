#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kgsq/graph.hpp"
#include "kgsq/model.hpp"

namespace kgsq::testing {

/// Vocabulary e0..e{n-1}, r0..r{m-1}.
inline Vocabulary make_vocab(std::size_t n, std::size_t m) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.add_entity("e" + std::to_string(i));
  for (std::size_t i = 0; i < m; ++i) v.add_relation("r" + std::to_string(i));
  return v;
}

/// Gaussian model with n entities, m original relations, dimension d.
template <typename Scalar = double>
EmbeddingModel<Scalar> random_model(std::size_t n, std::size_t m, std::size_t d, std::mt19937_64& rng,
                                    double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  auto fill = [&](RowMatrix<Scalar>& mat, std::size_t rows) {
    mat.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = static_cast<Scalar>(g(rng));
  };
  EmbeddingModel<Scalar> model;
  fill(model.head, n);
  fill(model.tail, n);
  fill(model.relation, 2 * m);
  model.vocabulary = make_vocab(n, m);
  model.config.dim = d;
  return model;
}

/// Model whose entries are small integers, so dot products and power-of-two
/// means are exact and ties are common.
template <typename Scalar = double>
EmbeddingModel<Scalar> integer_model(std::size_t n, std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-3, 3);
  auto model = random_model<Scalar>(n, m, d, rng);
  for (auto* mat : {&model.head, &model.tail, &model.relation}) {
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = static_cast<Scalar>(u(rng));
  }
  return model;
}

/// Model from explicit head rows; tail and relation rows are zero.
inline EmbeddingModel<double> model_from_rows(const std::vector<std::vector<double>>& rows) {
  EmbeddingModel<double> model;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  model.head.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) model.head(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  model.tail = RowMatrix<double>::Zero(n, d);
  model.relation = RowMatrix<double>::Zero(2, d);
  model.vocabulary = make_vocab(rows.size(), 1);
  model.config.dim = static_cast<std::size_t>(d);
  return model;
}

inline KnowledgeGraph graph_from_lines(const std::vector<std::string>& lines) {
  std::stringstream ss;
  for (const auto& l : lines) ss << l << '\n';
  return ingest_triples(ss);
}

inline std::string grid_name(int topic, int level) {
  return "t" + std::to_string(topic) + "_l" + std::to_string(level);
}

/// Synthetic separable graph: 5 topics x 8 levels plus 10 distractors.
/// same_topic links every ordered pair of distinct entities sharing a topic;
/// level_up links (t, l) -> (t, l + 1). Distractors form a ring under `near`.
inline std::string grid_triples_text() {
  std::ostringstream os;
  for (int t = 1; t <= 5; ++t) {
    for (int l = 1; l <= 8; ++l) {
      for (int l2 = 1; l2 <= 8; ++l2) {
        if (l2 != l) os << grid_name(t, l) << "\tsame_topic\t" << grid_name(t, l2) << '\n';
      }
      if (l < 8) os << grid_name(t, l) << "\tlevel_up\t" << grid_name(t, l + 1) << '\n';
    }
  }
  for (int i = 0; i < 10; ++i) {
    os << "d" << i << "\tnear\td" << (i + 1) % 10 << '\n';
    os << "d" << i << "\tnear\td" << (i + 3) % 10 << '\n';
  }
  return os.str();
}

inline std::string grid_types_text() {
  std::ostringstream os;
  for (int t = 1; t <= 5; ++t)
    for (int l = 1; l <= 8; ++l) os << grid_name(t, l) << "\titem\n";
  for (int i = 0; i < 10; ++i) os << "d" << i << "\tdistractor\n";
  return os.str();
}

inline KnowledgeGraph grid_graph() {
  std::istringstream triples(grid_triples_text());
  auto graph = ingest_triples(triples);
  std::istringstream types(grid_types_text());
  ingest_entity_types(types, graph);
  return graph;
}

}  // namespace kgsq::testing
