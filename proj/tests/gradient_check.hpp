#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "kgsq/training.hpp"
#include "oracles.hpp"

namespace kgsq::testing {

inline std::vector<Triple> random_batch(std::size_t size, std::size_t n, std::size_t m2, std::mt19937_64& rng) {
  std::uniform_int_distribution<EntityId> e(0, static_cast<EntityId>(n - 1));
  std::uniform_int_distribution<RelationId> r(0, static_cast<RelationId>(m2 - 1));
  std::vector<Triple> out;
  for (std::size_t i = 0; i < size; ++i) out.push_back({e(rng), e(rng), r(rng)});
  return out;
}

// ||analytic - central difference|| / max(norms), over every touched row.
inline double gradient_relative_error(EmbeddingModel<double> model, const std::vector<Triple>& pos,
                                      const std::vector<Triple>& neg, double eps = 1e-5) {
  const auto analytic = batch_loss_and_grads(model, pos, neg);
  double diff2 = 0, a2 = 0, f2 = 0;
  auto check_block = [&](RowMatrix<double>& params, const std::map<Eigen::Index, Vector<double>>& grads) {
    for (const auto& [row, g] : grads) {
      for (Eigen::Index d = 0; d < params.cols(); ++d) {
        const double saved = params(row, d);
        params(row, d) = saved + eps;
        const long double up = oracle::batch_loss(model, pos, neg);
        params(row, d) = saved - eps;
        const long double down = oracle::batch_loss(model, pos, neg);
        params(row, d) = saved;
        const double fd = static_cast<double>((up - down) / (2 * eps));
        diff2 += (g(d) - fd) * (g(d) - fd);
        a2 += g(d) * g(d);
        f2 += fd * fd;
      }
    }
  };
  check_block(model.head, analytic.grads.head);
  check_block(model.tail, analytic.grads.tail);
  check_block(model.relation, analytic.grads.relation);
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(f2), 1e-300});
}

/// One random finite-difference instance: N=20, M=3, D=8.
inline double random_gradient_trial(std::mt19937_64& rng, int trial) {
  auto m = random_model(20, 3, 8, rng, 0.5);
  m.config.l2 = trial % 2 == 0 ? 0.0 : 0.01;
  m.config.n_neg = static_cast<std::size_t>(1 + trial % 3);
  const auto pos = random_batch(static_cast<std::size_t>(1 + trial % 7), 20, 6, rng);
  SamplerState s(static_cast<std::uint64_t>(trial));
  const auto neg = sample_negatives(pos, 20, m.config.n_neg, s);
  return gradient_relative_error(m, pos, neg);
}

}  // namespace kgsq::testing
