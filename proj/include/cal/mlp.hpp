#pragma once

#include "cal/rng.hpp"
#include "cal/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace cal {

struct MlpConfig {
  Index input_dim = 0;
  Index hidden_dim = 300;
  int hidden_layers = 3;   // main classifier: 3, binary discriminator: 1
  int class_count = 2;
  double dropout = 0.3;    // inverted dropout after each hidden activation
};

/// Dense feed-forward classifier. Weight layer l maps in_l -> out_l via
/// x * weights[l] + biases[l]; hidden layers use ReLU, the output layer
/// feeds a row-wise softmax. Weights are column-major Kaiming-uniform
/// (bound sqrt(6 / fan_in)), biases start at zero.
struct MlpModel {
  MlpConfig cfg;
  std::vector<Matrix> weights;  // weights[l]: (in_l x out_l)
  std::vector<Vector> biases;   // biases[l]: out_l

  MlpModel(const MlpConfig& config, Rng& init_rng);

  Index input_dim() const { return cfg.input_dim; }
  Index representation_dim() const { return cfg.hidden_dim; }
  int layer_count() const { return static_cast<int>(weights.size()); }
};

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // decoupled: p <- p * (1 - lr * wd) - lr * update
};

struct AdamWState {
  AdamWConfig cfg;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long step = 0;

  AdamWState(const MlpModel& model, const AdamWConfig& config);
  void reset(const MlpModel& model);
};

enum class RunMode { Train, Eval };

struct ForwardResult {
  Matrix probs;   // rows sum to 1
  Matrix hidden;  // last hidden activations (post-ReLU), filled on request
};

/// Batched forward pass. Train mode applies inverted dropout and requires an
/// RNG; eval mode is deterministic. `hidden` is the learned representation of
/// the last hidden layer (extract it in eval mode).
ForwardResult forward(const MlpModel& model, MatrixRef features, RunMode mode,
                      Rng* rng = nullptr, bool want_hidden = false);

struct LayerGrads {
  Matrix weight;
  Vector bias;
};

/// Mean cross-entropy over the batch and its analytic gradients. A null
/// dropout RNG disables dropout (the gradient-check path); train_epoch passes
/// one so masks follow the training stream.
std::pair<double, std::vector<LayerGrads>> loss_and_gradients(
    const MlpModel& model, MatrixRef features, const std::vector<int>& labels,
    Rng* dropout_rng = nullptr);

/// Eval-mode mean cross-entropy (no dropout), for finite-difference probes.
double batch_loss(const MlpModel& model, MatrixRef features, const std::vector<int>& labels);

void adamw_step(MlpModel& model, AdamWState& opt, const std::vector<LayerGrads>& grads);

struct EpochDynamics {
  Vector gold_probability;            // p(model assigns to the gold label), end of epoch
  std::vector<std::uint8_t> correct;  // argmax prediction == gold, end of epoch
  double mean_loss = 0.0;
};

/// One shuffled pass of minibatch AdamW over the labeled set, followed by a
/// deterministic eval-mode pass that snapshots per-instance gold-label
/// probability and correctness (dropout off, so the snapshot carries no
/// sampling noise). `epoch_label` only decorates error messages.
EpochDynamics train_epoch(MlpModel& model, AdamWState& opt, MatrixRef features,
                          const std::vector<int>& labels, Index batch_size, Rng& rng,
                          int epoch_label = 0);

/// Mean predictive distribution over `passes` stochastic forward passes with
/// dropout left on.
Matrix mc_dropout_predict(const MlpModel& model, MatrixRef features, int passes, Rng& rng);

/// Re-initialize weights from the configured scheme and zero the optimizer.
/// Same RNG seed, same parameters, bit for bit.
void reset_parameters(MlpModel& model, AdamWState& opt, Rng& rng);

/// Row-wise argmax with ties broken toward the lowest class index.
std::vector<int> predict_labels(MatrixRef probs);

/// probs(i, labels[i]) for each row.
Vector gold_probabilities(MatrixRef probs, const std::vector<int>& labels);

Matrix softmax_rows(MatrixRef logits);

/// Shannon entropy per row, base-2 logarithm; zero-probability terms drop out.
Vector entropy_bits_rows(MatrixRef probs);

}  // namespace cal
