#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "kgsq/error.hpp"
#include "kgsq/graph.hpp"

namespace kgsq {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Optimizer { sgd, adagrad };

std::string to_string(Optimizer opt);
Optimizer parse_optimizer(const std::string& name);

struct ModelConfig {
  std::size_t dim = 32;
  double init_scale = 0.1;
  double lr = 0.1;
  std::size_t n_neg = 1;
  std::size_t epochs = 10;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::sgd;
  std::size_t batch_size = 64;

  /// Throws Error on dim = 0, non-positive lr / init_scale, negative l2, batch_size = 0.
  void validate() const;
};

/// CP embeddings of an augmented graph. `head` holds the head-role vector of
/// every entity, `tail` the tail-role vector, `relation` has 2M rows where
/// row r + M is the augmented inverse of relation r.
template <typename Scalar>
struct EmbeddingModel {
  RowMatrix<Scalar> head;
  RowMatrix<Scalar> tail;
  RowMatrix<Scalar> relation;
  ModelConfig config;
  Vocabulary vocabulary;

  Eigen::Index dim() const { return head.cols(); }
  Eigen::Index entity_count() const { return head.rows(); }
  Eigen::Index relation_count() const { return relation.rows(); }
  Eigen::Index original_relation_count() const { return relation.rows() / 2; }

  bool all_finite() const { return head.allFinite() && tail.allFinite() && relation.allFinite(); }

  template <typename Other>
  EmbeddingModel<Other> cast() const {
    EmbeddingModel<Other> out;
    out.head = head.template cast<Other>();
    out.tail = tail.template cast<Other>();
    out.relation = relation.template cast<Other>();
    out.config = config;
    out.vocabulary = vocabulary;
    return out;
  }
};

/// Gaussian(0, init_scale^2) entries from a generator seeded with config.seed.
EmbeddingModel<double> init_model(const KnowledgeGraph& graph, const ModelConfig& config);

/// Sum over d of a_d * b_d * c_d.
template <typename A, typename B, typename C>
typename A::Scalar trilinear(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                             const Eigen::MatrixBase<C>& c) {
  if (a.size() != b.size() || a.size() != c.size()) throw Error("trilinear: length mismatch");
  return (a.derived().array() * b.derived().array() * c.derived().array()).sum();
}

template <typename Scalar>
void check_triple(const EmbeddingModel<Scalar>& model, const Triple& t) {
  if (t.head >= model.entity_count() || t.tail >= model.entity_count()) {
    throw Error("triple entity id out of range");
  }
  if (t.relation >= model.relation_count()) throw Error("triple relation id out of range");
}

/// One directed CP term: <head[h], tail[t], relation[r]>. r may be augmented.
template <typename Scalar>
Scalar score_directed(const EmbeddingModel<Scalar>& model, const Triple& t) {
  check_triple(model, t);
  return trilinear(model.head.row(t.head), model.tail.row(t.tail), model.relation.row(t.relation));
}

/// Both directions of an original triple: score_directed(h,t,r) + score_directed(t,h,r+M).
template <typename Scalar>
Scalar score_full(const EmbeddingModel<Scalar>& model, const Triple& t) {
  const auto m = static_cast<RelationId>(model.original_relation_count());
  if (t.relation >= m) throw Error("score_full expects an original relation id");
  return score_directed(model, t) + score_directed(model, Triple{t.tail, t.head, t.relation + m});
}

/// Logistic function, split on sign so exp never overflows.
inline double prob_valid(double score) {
  if (std::isnan(score)) throw Error("prob_valid: NaN score");
  if (score >= 0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

/// -log(sigmoid(s)), stable for large |s|.
inline double neg_log_sigmoid(double s) {
  return std::log1p(std::exp(-std::abs(s))) + (s < 0 ? -s : 0.0);
}

}  // namespace kgsq
