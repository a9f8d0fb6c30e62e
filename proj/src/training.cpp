#include "kgsq/training.hpp"

#include <algorithm>
#include <cmath>

namespace kgsq {

namespace {

constexpr double kAdagradEps = 1e-10;
constexpr std::uint64_t kSamplerStream = 0x9e3779b97f4a7c15ULL;

Vector<double>& grad_row(std::map<Eigen::Index, Vector<double>>& rows, Eigen::Index idx, Eigen::Index dim) {
  auto [it, inserted] = rows.try_emplace(idx);
  if (inserted) it->second = Vector<double>::Zero(dim);
  return it->second;
}

void add_l2(std::map<Eigen::Index, Vector<double>>& rows, const RowMatrix<double>& params, double l2, double& loss) {
  for (auto& [idx, g] : rows) {
    const auto row = params.row(idx);
    loss += l2 * row.squaredNorm();
    g += 2.0 * l2 * row.transpose();
  }
}

struct AdagradState {
  RowMatrix<double> head, tail, relation;
};

// Returns false if any updated row is no longer finite.
bool apply_rows(RowMatrix<double>& params, RowMatrix<double>* accum,
                const std::map<Eigen::Index, Vector<double>>& grads, double lr) {
  bool finite = true;
  for (const auto& [idx, g] : grads) {
    if (accum) {
      auto acc = accum->row(idx);
      acc += g.transpose().cwiseAbs2();
      params.row(idx).array() -= lr * g.transpose().array() / (acc.array().sqrt() + kAdagradEps);
    } else {
      params.row(idx) -= lr * g.transpose();
    }
    finite = finite && params.row(idx).allFinite();
  }
  return finite;
}

}  // namespace

std::vector<Triple> sample_negatives(std::span<const Triple> positives, std::size_t n_entities, std::size_t n_neg,
                                     SamplerState& sampler) {
  std::vector<Triple> out;
  if (n_neg == 0) return out;
  if (n_entities == 0) throw Error("sample_negatives: no entities");
  out.reserve(positives.size() * 2 * n_neg);
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(n_entities - 1));
  for (const auto& p : positives) {
    for (std::size_t i = 0; i < n_neg; ++i) out.push_back({pick(sampler), p.tail, p.relation});
    for (std::size_t i = 0; i < n_neg; ++i) out.push_back({p.head, pick(sampler), p.relation});
  }
  return out;
}

LossAndGrads batch_loss_and_grads(const EmbeddingModel<double>& model, std::span<const Triple> positives,
                                  std::span<const Triple> negatives) {
  if (positives.empty()) throw Error("loss_and_grads: empty batch");
  const Eigen::Index dim = model.dim();
  const double n_terms = static_cast<double>(positives.size() + negatives.size());

  LossAndGrads out;
  auto accumulate = [&](const Triple& t, double label) {
    check_triple(model, t);
    const auto h = model.head.row(t.head);
    const auto tl = model.tail.row(t.tail);
    const auto r = model.relation.row(t.relation);
    const double s = (h.array() * tl.array() * r.array()).sum();
    if (!std::isfinite(s)) throw Error("non-finite score");
    // d/ds of -log sigma(s) is sigma(s) - 1; of -log sigma(-s) is sigma(s).
    out.loss += (label > 0 ? neg_log_sigmoid(s) : neg_log_sigmoid(-s)) / n_terms;
    const double g = (prob_valid(s) - label) / n_terms;
    grad_row(out.grads.head, t.head, dim).array() += g * (tl.array() * r.array()).transpose();
    grad_row(out.grads.tail, t.tail, dim).array() += g * (h.array() * r.array()).transpose();
    grad_row(out.grads.relation, t.relation, dim).array() += g * (h.array() * tl.array()).transpose();
  };
  for (const auto& t : positives) accumulate(t, 1.0);
  for (const auto& t : negatives) accumulate(t, 0.0);

  const double l2 = model.config.l2;
  if (l2 > 0.0) {
    add_l2(out.grads.head, model.head, l2, out.loss);
    add_l2(out.grads.tail, model.tail, l2, out.loss);
    add_l2(out.grads.relation, model.relation, l2, out.loss);
  }
  return out;
}

LossAndGrads loss_and_grads(const EmbeddingModel<double>& model, std::span<const Triple> positives,
                            SamplerState& sampler) {
  if (positives.empty()) throw Error("loss_and_grads: empty batch");
  const auto negatives =
      sample_negatives(positives, static_cast<std::size_t>(model.entity_count()), model.config.n_neg, sampler);
  return batch_loss_and_grads(model, positives, negatives);
}

EmbeddingModel<double> train(const KnowledgeGraph& graph, const ModelConfig& config, const ProgressSink& progress) {
  EmbeddingModel<double> model = init_model(graph, config);
  if (config.epochs == 0) return model;

  SamplerState sampler(config.seed ^ kSamplerStream);
  const std::span<const Triple> directed(graph.triples);
  std::vector<Triple> order(directed.begin(), directed.end());

  AdagradState state;
  const bool adagrad = config.optimizer == Optimizer::adagrad;
  if (adagrad) {
    state.head = RowMatrix<double>::Zero(model.head.rows(), model.dim());
    state.tail = RowMatrix<double>::Zero(model.tail.rows(), model.dim());
    state.relation = RowMatrix<double>::Zero(model.relation.rows(), model.dim());
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), sampler);
    double weighted_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const std::span<const Triple> batch(order.data() + start, len);
      LossAndGrads step;
      try {
        step = loss_and_grads(model, batch, sampler);
      } catch (const Error& e) {
        throw TrainingError(epoch, batch_no, e.what());
      }
      if (!std::isfinite(step.loss)) throw TrainingError(epoch, batch_no, "non-finite loss");
      weighted_loss += step.loss * static_cast<double>(len);

      bool finite = apply_rows(model.head, adagrad ? &state.head : nullptr, step.grads.head, config.lr);
      finite &= apply_rows(model.tail, adagrad ? &state.tail : nullptr, step.grads.tail, config.lr);
      finite &= apply_rows(model.relation, adagrad ? &state.relation : nullptr, step.grads.relation, config.lr);
      if (!finite) throw TrainingError(epoch, batch_no, "non-finite embedding entry after update");
    }
    if (progress) progress(epoch, weighted_loss / static_cast<double>(order.size()));
  }
  return model;
}

}  // namespace kgsq
