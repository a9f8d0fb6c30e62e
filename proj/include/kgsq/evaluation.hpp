#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <unordered_set>
#include <vector>

#include "kgsq/model.hpp"

namespace kgsq {

using TripleSet = std::unordered_set<Triple, TripleHash>;

struct LinkPredictionMetrics {
  double mrr = 0.0;
  std::map<int, double> hits_at;
  /// Number of rankings averaged: two per test triple (tail side and head side).
  std::size_t rankings = 0;
};

inline constexpr std::array<int, 3> kHitsAt = {1, 3, 10};

namespace detail {

// 1 + number of unfiltered candidates scoring at least as high as the true
// entity. Ties count against the true entity.
template <typename Scores, typename Filtered>
std::size_t pessimistic_rank(const Scores& scores, EntityId truth, Filtered&& filtered) {
  const auto target = scores(truth);
  std::size_t rank = 1;
  for (Eigen::Index c = 0; c < scores.size(); ++c) {
    const auto cand = static_cast<EntityId>(c);
    if (cand == truth || filtered(cand)) continue;
    if (scores(c) >= target) ++rank;
  }
  return rank;
}

}  // namespace detail

/// Filtered ranking of test triples under score_full. For each (h, t, r) the
/// true tail is ranked against every entity with (h, r) fixed, and the true
/// head against every entity with (t, r) fixed. Candidates forming a triple in
/// `known` are skipped.
template <typename Scalar>
LinkPredictionMetrics evaluate_link_prediction(const EmbeddingModel<Scalar>& model, const std::vector<Triple>& test,
                                               const TripleSet& known) {
  if (test.empty()) throw Error("evaluate_link_prediction: empty test set");
  const auto m = static_cast<RelationId>(model.original_relation_count());

  LinkPredictionMetrics out;
  for (int k : kHitsAt) out.hits_at[k] = 0.0;
  double rr_sum = 0.0;
  auto record = [&](std::size_t rank) {
    rr_sum += 1.0 / static_cast<double>(rank);
    for (int k : kHitsAt) {
      if (rank <= static_cast<std::size_t>(k)) out.hits_at[k] += 1.0;
    }
    ++out.rankings;
  };

  for (const auto& t : test) {
    if (t.relation >= m) throw Error("evaluate_link_prediction: test triple uses an augmented relation");
    check_triple(model, t);
    const auto r = model.relation.row(t.relation);
    const auto ra = model.relation.row(t.relation + m);

    // score_full(h, c, r) = <h, c2, r> + <c, h2, ra>, over all c at once.
    {
      const Vector<Scalar> fwd = (model.head.row(t.head).array() * r.array()).transpose();
      const Vector<Scalar> bwd = (model.tail.row(t.head).array() * ra.array()).transpose();
      const Vector<Scalar> scores = model.tail * fwd + model.head * bwd;
      record(detail::pessimistic_rank(scores, t.tail, [&](EntityId c) {
        return known.count(Triple{t.head, c, t.relation}) != 0;
      }));
    }
    // score_full(c, t, r) = <c, t2, r> + <t, c2, ra>.
    {
      const Vector<Scalar> fwd = (model.tail.row(t.tail).array() * r.array()).transpose();
      const Vector<Scalar> bwd = (model.head.row(t.tail).array() * ra.array()).transpose();
      const Vector<Scalar> scores = model.head * fwd + model.tail * bwd;
      record(detail::pessimistic_rank(scores, t.head, [&](EntityId c) {
        return known.count(Triple{c, t.tail, t.relation}) != 0;
      }));
    }
  }

  const double n = static_cast<double>(out.rankings);
  out.mrr = rr_sum / n;
  for (auto& [k, v] : out.hits_at) v /= n;
  return out;
}

}  // namespace kgsq
