#include "cal/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cal {

namespace {

void validate_config(const MlpConfig& cfg) {
  if (cfg.input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
  if (cfg.hidden_dim < 1) throw std::invalid_argument("MlpConfig: hidden_dim must be >= 1");
  if (cfg.hidden_layers < 1) throw std::invalid_argument("MlpConfig: hidden_layers must be >= 1");
  if (cfg.class_count < 2) throw std::invalid_argument("MlpConfig: class_count must be >= 2");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("MlpConfig: dropout must lie in [0, 1)");
}

// Kaiming-uniform fan-in fill, column-major traversal so the draw order is
// pinned by the storage layout.
void init_layer(Matrix& w, Vector& b, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows()));
  for (Index j = 0; j < w.cols(); ++j)
    for (Index i = 0; i < w.rows(); ++i) w(i, j) = (2.0 * uniform01(rng) - 1.0) * bound;
  b.setZero();
}

void init_parameters(MlpModel& model, Rng& rng) {
  for (std::size_t l = 0; l < model.weights.size(); ++l)
    init_layer(model.weights[l], model.biases[l], rng);
}

// Scaled Bernoulli keep-mask: kept entries carry 1/(1-p) so eval needs no
// rescaling. Column-major traversal, same reason as init_layer.
Matrix dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) mask(i, j) = bernoulli(rng, p) ? 0.0 : scale;
  return mask;
}

struct ForwardCache {
  std::vector<Matrix> inputs;   // input fed to each weight layer
  std::vector<Matrix> preacts;  // pre-activation of each hidden layer
  std::vector<Matrix> masks;    // scaled dropout masks (empty when unused)
  Matrix last_hidden;           // post-ReLU, pre-dropout
  Matrix logits;
  Matrix probs;
};

ForwardCache forward_cached(const MlpModel& model, MatrixRef features, bool train_dropout,
                            Rng* rng) {
  if (features.cols() != model.cfg.input_dim)
    throw std::invalid_argument("forward: layer 0 expects " +
                                std::to_string(model.cfg.input_dim) + " input columns, got " +
                                std::to_string(features.cols()));
  const bool use_dropout = train_dropout && model.cfg.dropout > 0.0;
  if (use_dropout && rng == nullptr)
    throw std::invalid_argument("forward: train mode with dropout > 0 requires an RNG");

  const int layers = model.layer_count();
  ForwardCache cache;
  cache.inputs.resize(layers);
  cache.preacts.resize(layers - 1);
  cache.masks.resize(layers - 1);

  cache.inputs[0] = features;
  for (int l = 0; l < layers - 1; ++l) {
    cache.preacts[l] =
        (cache.inputs[l] * model.weights[l]).rowwise() + model.biases[l].transpose();
    Matrix activated = cache.preacts[l].cwiseMax(0.0);
    if (l == layers - 2) cache.last_hidden = activated;
    if (use_dropout) {
      cache.masks[l] = dropout_mask(activated.rows(), activated.cols(), model.cfg.dropout, *rng);
      activated = activated.cwiseProduct(cache.masks[l]);
    }
    cache.inputs[l + 1] = std::move(activated);
  }
  cache.logits =
      (cache.inputs[layers - 1] * model.weights[layers - 1]).rowwise() +
      model.biases[layers - 1].transpose();
  cache.probs = softmax_rows(cache.logits);
  return cache;
}

// Mean cross-entropy from logits via log-sum-exp; stays finite unless the
// logits themselves are not.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    const double lse = std::log((logits.row(i).array() - max).exp().sum()) + max;
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

void check_labels(const std::vector<int>& labels, Index rows, int classes) {
  if (static_cast<Index>(labels.size()) != rows)
    throw std::invalid_argument("labels/features row count mismatch");
  for (int y : labels)
    if (y < 0 || y >= classes) throw std::invalid_argument("label out of [0, class_count)");
}

}  // namespace

MlpModel::MlpModel(const MlpConfig& config, Rng& init_rng) : cfg(config) {
  validate_config(cfg);
  const int layers = cfg.hidden_layers + 1;
  weights.reserve(layers);
  biases.reserve(layers);
  Index in = cfg.input_dim;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    weights.emplace_back(in, cfg.hidden_dim);
    biases.emplace_back(cfg.hidden_dim);
    in = cfg.hidden_dim;
  }
  weights.emplace_back(in, static_cast<Index>(cfg.class_count));
  biases.emplace_back(static_cast<Index>(cfg.class_count));
  init_parameters(*this, init_rng);
}

AdamWState::AdamWState(const MlpModel& model, const AdamWConfig& config) : cfg(config) {
  reset(model);
}

void AdamWState::reset(const MlpModel& model) {
  m_weights.clear();
  v_weights.clear();
  m_biases.clear();
  v_biases.clear();
  for (int l = 0; l < model.layer_count(); ++l) {
    m_weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
    v_weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
    m_biases.push_back(Vector::Zero(model.biases[l].size()));
    v_biases.push_back(Vector::Zero(model.biases[l].size()));
  }
  step = 0;
}

ForwardResult forward(const MlpModel& model, MatrixRef features, RunMode mode, Rng* rng,
                      bool want_hidden) {
  ForwardCache cache = forward_cached(model, features, mode == RunMode::Train, rng);
  ForwardResult out;
  out.probs = std::move(cache.probs);
  if (want_hidden) out.hidden = std::move(cache.last_hidden);
  return out;
}

std::pair<double, std::vector<LayerGrads>> loss_and_gradients(const MlpModel& model,
                                                              MatrixRef features,
                                                              const std::vector<int>& labels,
                                                              Rng* dropout_rng) {
  check_labels(labels, features.rows(), model.cfg.class_count);
  ForwardCache cache = forward_cached(model, features, dropout_rng != nullptr, dropout_rng);
  const Index batch = features.rows();
  const int layers = model.layer_count();

  Matrix delta = cache.probs;
  for (Index i = 0; i < batch; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(batch);

  std::vector<LayerGrads> grads(layers);
  for (int l = layers - 1; l >= 0; --l) {
    grads[l].weight = cache.inputs[l].transpose() * delta;
    grads[l].bias = delta.colwise().sum();
    if (l > 0) {
      delta = delta * model.weights[l].transpose();
      if (cache.masks[l - 1].size() > 0) delta = delta.cwiseProduct(cache.masks[l - 1]);
      delta = delta.cwiseProduct((cache.preacts[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return {cross_entropy(cache.logits, labels), std::move(grads)};
}

double batch_loss(const MlpModel& model, MatrixRef features, const std::vector<int>& labels) {
  check_labels(labels, features.rows(), model.cfg.class_count);
  ForwardCache cache = forward_cached(model, features, false, nullptr);
  return cross_entropy(cache.logits, labels);
}

void adamw_step(MlpModel& model, AdamWState& opt, const std::vector<LayerGrads>& grads) {
  opt.step += 1;
  const auto& c = opt.cfg;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  for (int l = 0; l < model.layer_count(); ++l) {
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g.array().square().matrix();
      param = param * (1.0 - c.learning_rate * c.weight_decay) -
              c.learning_rate *
                  ((m / bias1).array() / ((v / bias2).array().sqrt() + c.epsilon)).matrix();
    };
    update(model.weights[l], opt.m_weights[l], opt.v_weights[l], grads[l].weight);
    update(model.biases[l], opt.m_biases[l], opt.v_biases[l], grads[l].bias);
  }
}

EpochDynamics train_epoch(MlpModel& model, AdamWState& opt, MatrixRef features,
                          const std::vector<int>& labels, Index batch_size, Rng& rng,
                          int epoch_label) {
  const Index n = features.rows();
  if (n == 0) throw std::invalid_argument("train_epoch: empty training set");
  if (batch_size < 1) throw std::invalid_argument("train_epoch: batch_size must be >= 1");
  check_labels(labels, n, model.cfg.class_count);

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle_in_place(order, rng);

  double loss_sum = 0.0;
  Index seen = 0;
  int batch_index = 0;
  for (Index start = 0; start < n; start += batch_size, ++batch_index) {
    const Index size = std::min(batch_size, n - start);
    Matrix batch(size, features.cols());
    std::vector<int> batch_labels(static_cast<std::size_t>(size));
    for (Index r = 0; r < size; ++r) {
      const Index src = order[static_cast<std::size_t>(start + r)];
      batch.row(r) = features.row(src);
      batch_labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(src)];
    }
    auto [loss, grads] = loss_and_gradients(model, batch, batch_labels, &rng);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_epoch: non-finite loss at epoch " +
                               std::to_string(epoch_label) + ", batch " +
                               std::to_string(batch_index));
    adamw_step(model, opt, grads);
    loss_sum += loss * static_cast<double>(size);
    seen += size;
  }

  // End-of-epoch snapshot in eval mode.
  ForwardResult eval = forward(model, features, RunMode::Eval);
  EpochDynamics dyn;
  dyn.gold_probability = gold_probabilities(eval.probs, labels);
  const std::vector<int> predicted = predict_labels(eval.probs);
  dyn.correct.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    dyn.correct[static_cast<std::size_t>(i)] =
        predicted[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  dyn.mean_loss = loss_sum / static_cast<double>(seen);
  return dyn;
}

Matrix mc_dropout_predict(const MlpModel& model, MatrixRef features, int passes, Rng& rng) {
  if (passes < 1) throw std::invalid_argument("mc_dropout_predict: passes must be >= 1");
  if (model.cfg.dropout == 0.0) return forward(model, features, RunMode::Eval).probs;
  Matrix sum;
  for (int pass = 0; pass < passes; ++pass) {
    ForwardResult out = forward(model, features, RunMode::Train, &rng);
    if (pass == 0)
      sum = std::move(out.probs);
    else
      sum += out.probs;
  }
  return sum / static_cast<double>(passes);
}

void reset_parameters(MlpModel& model, AdamWState& opt, Rng& rng) {
  init_parameters(model, rng);
  opt.reset(model);
}

std::vector<int> predict_labels(MatrixRef probs) {
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Index c = 1; c < probs.cols(); ++c)
      if (probs(i, c) > probs(i, best)) best = static_cast<int>(c);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

Vector gold_probabilities(MatrixRef probs, const std::vector<int>& labels) {
  Vector out(probs.rows());
  for (Index i = 0; i < probs.rows(); ++i) out(i) = probs(i, labels[static_cast<std::size_t>(i)]);
  return out;
}

Matrix softmax_rows(MatrixRef logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - max).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Vector entropy_bits_rows(MatrixRef probs) {
  Vector out(probs.rows());
  for (Index i = 0; i < probs.rows(); ++i) {
    double h = 0.0;
    for (Index c = 0; c < probs.cols(); ++c) {
      const double p = probs(i, c);
      if (p > 0.0) h -= p * std::log2(p);
    }
    out(i) = h;
  }
  return out;
}

}  // namespace cal
