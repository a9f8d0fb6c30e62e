#pragma once

// Semantic queries over head-role entity vectors. Tail-role vectors and
// relation vectors are never read here.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgsq/model.hpp"

namespace kgsq {

enum class Similarity { dot, cosine };

struct QuerySpec {
  EntityId anchor = 0;
  std::vector<EntityId> positives;
  std::vector<EntityId> negatives;
  std::size_t k = 10;
  std::optional<std::string> type_filter;
  /// Drop the anchor and every bias entity from the results.
  bool exclude = true;
  Similarity similarity = Similarity::dot;
};

struct RankedEntry {
  EntityId entity = 0;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedList {
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Dot product.
template <typename A, typename B>
typename A::Scalar sim(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw Error("sim: length mismatch");
  return a.derived().reshaped().dot(b.derived().reshaped());
}

/// Semantic direction a - b.
template <typename A, typename B>
Vector<typename A::Scalar> dir(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw Error("dir: length mismatch");
  return a.derived().reshaped() - b.derived().reshaped();
}

template <typename Scalar>
void check_entity(const EmbeddingModel<Scalar>& model, EntityId id) {
  if (static_cast<Eigen::Index>(id) >= model.entity_count()) {
    throw Error("entity id " + std::to_string(id) + " out of range");
  }
}

/// Component-wise mean of head-role rows. The empty set maps to the zero vector.
template <typename Scalar>
Vector<Scalar> mean_vector(const EmbeddingModel<Scalar>& model, std::span<const EntityId> ids) {
  Vector<Scalar> acc = Vector<Scalar>::Zero(model.dim());
  if (ids.empty()) return acc;
  for (EntityId id : ids) {
    check_entity(model, id);
    acc += model.head.row(id).transpose();
  }
  return acc / static_cast<Scalar>(ids.size());
}

struct RankOptions {
  std::size_t k = 10;
  std::optional<std::string> type_filter;
  Similarity similarity = Similarity::dot;
  std::vector<EntityId> excluded;
};

/// Exact top-k of sim(e_i, point) over all eligible entities. Ties resolve to
/// the smaller entity id.
template <typename Scalar>
RankedList rank_by_point(const EmbeddingModel<Scalar>& model, const Vector<Scalar>& point, const RankOptions& opts) {
  if (opts.k < 1) throw Error("k must be >= 1");
  if (point.size() != model.dim()) throw Error("query point has wrong dimension");
  const Eigen::Index n = model.entity_count();

  Vector<Scalar> scores = model.head * point;
  if (opts.similarity == Similarity::cosine) {
    const Scalar pn = point.norm();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar denom = model.head.row(i).norm() * pn;
      scores(i) = denom > Scalar(0) ? scores(i) / denom : Scalar(0);
    }
  }

  std::vector<bool> skip(static_cast<std::size_t>(n), false);
  for (EntityId id : opts.excluded) {
    if (static_cast<Eigen::Index>(id) < n) skip[id] = true;
  }
  std::vector<EntityId> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = static_cast<EntityId>(i);
    if (skip[id]) continue;
    if (opts.type_filter && model.vocabulary.type_of(id) != *opts.type_filter) continue;
    candidates.push_back(id);
  }

  const auto better = [&](EntityId a, EntityId b) {
    return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
  };
  const std::size_t k = std::min(opts.k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), better);

  RankedList out;
  out.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.entries.push_back({candidates[i], static_cast<double>(scores(candidates[i]))});
  }
  return out;
}

namespace detail {

template <typename Scalar>
void validate_spec(const EmbeddingModel<Scalar>& model, const QuerySpec& spec) {
  if (spec.k < 1) throw Error("k must be >= 1");
  check_entity(model, spec.anchor);
  for (EntityId id : spec.positives) check_entity(model, id);
  for (EntityId id : spec.negatives) check_entity(model, id);
}

template <typename Scalar>
RankOptions rank_options(const QuerySpec& spec) {
  RankOptions opts{spec.k, spec.type_filter, spec.similarity, {}};
  if (spec.exclude) {
    opts.excluded.push_back(spec.anchor);
    opts.excluded.insert(opts.excluded.end(), spec.positives.begin(), spec.positives.end());
    opts.excluded.insert(opts.excluded.end(), spec.negatives.begin(), spec.negatives.end());
  }
  return opts;
}

}  // namespace detail

/// Query point (mean(A) - mean(B)) + e. With empty biases this is e exactly.
template <typename Scalar>
Vector<Scalar> analogy_point(const EmbeddingModel<Scalar>& model, const QuerySpec& spec) {
  detail::validate_spec(model, spec);
  const Vector<Scalar> direction = mean_vector(model, std::span<const EntityId>(spec.positives)) -
                                   mean_vector(model, std::span<const EntityId>(spec.negatives));
  return direction + model.head.row(spec.anchor).transpose();
}

/// Entities closest to the anchor by sim(e_i, e).
template <typename Scalar>
RankedList similar_entities(const EmbeddingModel<Scalar>& model, const QuerySpec& spec) {
  if (!spec.positives.empty() || !spec.negatives.empty()) {
    throw Error("similar_entities takes no bias entities");
  }
  detail::validate_spec(model, spec);
  const Vector<Scalar> point = model.head.row(spec.anchor).transpose();
  return rank_by_point(model, point, detail::rank_options<Scalar>(spec));
}

/// Entities closest to mean(A) + e.
template <typename Scalar>
RankedList similar_with_bias(const EmbeddingModel<Scalar>& model, const QuerySpec& spec) {
  if (!spec.negatives.empty()) throw Error("similar_with_bias takes no negative bias");
  return rank_by_point(model, analogy_point(model, spec), detail::rank_options<Scalar>(spec));
}

/// Entities closest to mean(A) - mean(B) + e.
template <typename Scalar>
RankedList analogy_query(const EmbeddingModel<Scalar>& model, const QuerySpec& spec) {
  return rank_by_point(model, analogy_point(model, spec), detail::rank_options<Scalar>(spec));
}

template <typename Scalar>
struct BrowseStep {
  std::vector<EntityId> positives;
  std::vector<EntityId> negatives;
  std::size_t k = 10;
  std::optional<std::string> type_filter;
  RankedList results;
  /// Anchor vector before this step; restored verbatim by browse_back.
  Vector<Scalar> anchor_before;
};

/// Analogy browsing state. The anchor vector accumulates mean(A) - mean(B) of
/// every step taken.
template <typename Scalar>
struct BrowseSession {
  std::string session_id;
  EntityId origin = 0;
  Vector<Scalar> anchor_vector;
  std::vector<BrowseStep<Scalar>> trail;

  /// The origin plus every bias entity used so far.
  std::vector<EntityId> excluded() const {
    std::vector<EntityId> out{origin};
    for (const auto& s : trail) {
      out.insert(out.end(), s.positives.begin(), s.positives.end());
      out.insert(out.end(), s.negatives.begin(), s.negatives.end());
    }
    return out;
  }
};

template <typename Scalar>
BrowseSession<Scalar> browse_start(const EmbeddingModel<Scalar>& model, EntityId anchor, std::string session_id = {}) {
  if (model.entity_count() == 0) throw Error("browse_start: model has no entities");
  check_entity(model, anchor);
  BrowseSession<Scalar> session;
  session.session_id = std::move(session_id);
  session.origin = anchor;
  session.anchor_vector = model.head.row(anchor).transpose();
  return session;
}

/// Ranks sim(e_i, mean(A) - mean(B) + anchor), then moves the anchor to that
/// point. The session is untouched if any id is invalid.
template <typename Scalar>
RankedList browse_step(const EmbeddingModel<Scalar>& model, BrowseSession<Scalar>& session,
                       const std::vector<EntityId>& positives, const std::vector<EntityId>& negatives, std::size_t k,
                       const std::optional<std::string>& type_filter = std::nullopt,
                       Similarity similarity = Similarity::dot) {
  if (k < 1) throw Error("k must be >= 1");
  for (EntityId id : positives) check_entity(model, id);
  for (EntityId id : negatives) check_entity(model, id);

  const Vector<Scalar> direction = mean_vector(model, std::span<const EntityId>(positives)) -
                                   mean_vector(model, std::span<const EntityId>(negatives));
  Vector<Scalar> point = direction + session.anchor_vector;

  BrowseStep<Scalar> step{positives, negatives, k, type_filter, {}, session.anchor_vector};
  session.trail.push_back(std::move(step));
  RankOptions opts{k, type_filter, similarity, session.excluded()};
  try {
    session.trail.back().results = rank_by_point(model, point, opts);
  } catch (...) {
    session.trail.pop_back();
    throw;
  }
  session.anchor_vector = std::move(point);
  return session.trail.back().results;
}

/// Undoes the last step, restoring the stored anchor snapshot.
template <typename Scalar>
void browse_back(BrowseSession<Scalar>& session) {
  if (session.trail.empty()) throw Error("at session start");
  session.anchor_vector = std::move(session.trail.back().anchor_before);
  session.trail.pop_back();
}

}  // namespace kgsq
