#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "kgsq/model.hpp"

namespace kgsq {

/// Gradient rows keyed by row index; only rows referenced by a batch appear.
struct SparseGradients {
  std::map<Eigen::Index, Vector<double>> head;
  std::map<Eigen::Index, Vector<double>> tail;
  std::map<Eigen::Index, Vector<double>> relation;
};

struct LossAndGrads {
  double loss = 0.0;
  SparseGradients grads;
};

using SamplerState = std::mt19937_64;

class TrainingError : public Error {
public:
  TrainingError(std::size_t epoch, std::size_t batch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// For each positive, n_neg copies with a uniformly drawn head, then n_neg
/// with a uniformly drawn tail. Corruptions may coincide with true triples.
std::vector<Triple> sample_negatives(std::span<const Triple> positives, std::size_t n_entities, std::size_t n_neg,
                                     SamplerState& sampler);

/// Mean binary cross-entropy over positives (label 1) and negatives (label 0),
/// each scored by one directed trilinear term, plus l2 times the squared norm
/// of every touched row.
LossAndGrads batch_loss_and_grads(const EmbeddingModel<double>& model, std::span<const Triple> positives,
                                  std::span<const Triple> negatives);

/// Samples negatives with `sampler`, then evaluates batch_loss_and_grads.
LossAndGrads loss_and_grads(const EmbeddingModel<double>& model, std::span<const Triple> positives,
                            SamplerState& sampler);

using ProgressSink = std::function<void(std::size_t epoch, double mean_loss)>;

/// Minibatch training on the directed (augmented) triples. Sequential, so the
/// result is a pure function of the graph and config.
EmbeddingModel<double> train(const KnowledgeGraph& graph, const ModelConfig& config,
                             const ProgressSink& progress = {});

}  // namespace kgsq
