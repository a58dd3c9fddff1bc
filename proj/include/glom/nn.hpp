#ifndef GLOM_NN_HPP
#define GLOM_NN_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "glom/arch.hpp"
#include "glom/autodiff.hpp"
#include "glom/checkpoint.hpp"
#include "glom/dataset.hpp"
#include "glom/error.hpp"
#include "glom/ops.hpp"
#include "glom/random.hpp"
#include "glom/tensor.hpp"

namespace glom {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double decay = 1e-6;  // lr_t = lr / (1 + decay * t)
  std::uint64_t seed = 0;
  bool augmentation = true;
  double l2_penalty = 1e-4;  // on conv/dense weights; 0 disables

  void validate() const {
    if (epochs < 1 || batch_size < 1)
      throw ParameterError("train config: epochs and batch size must be positive");
    if (learning_rate <= 0) throw ParameterError("train config: learning rate must be positive");
    if (decay < 0 || l2_penalty < 0)
      throw ParameterError("train config: decay and l2 must be non-negative");
  }
};

struct Model {
  ArchitectureSpec spec;
  std::map<std::string, Tensor> params;
  std::map<std::string, ops::BatchNormState> bn;
};

namespace nn_detail {

struct ParamSlot {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;      // 0: init to the constant below instead
  double constant = 0; // bias/shift 0, bn scale 1
};

// Walks the layer list and produces every parameter (and the bn layer names)
// in a fixed order; this order is also the checkpoint directory order.
struct Layout {
  std::vector<ParamSlot> params;
  std::vector<std::pair<std::string, int>> bn_layers;  // name, channels
  std::string last_dense;
};

inline Layout layout_of(const ArchitectureSpec& spec) {
  Layout lay;
  int channels = spec.input_channels;
  int features = 0;  // valid once flattened by global_avg_pool
  int conv_i = 0, bn_i = 0, fc_i = 0;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        const std::string name = "conv" + std::to_string(++conv_i);
        lay.params.push_back({name + ".weight",
                              {l.filters, channels, l.kernel, l.kernel},
                              channels * l.kernel * l.kernel, 0});
        channels = l.filters;
        break;
      }
      case LayerKind::batchnorm: {
        const std::string name = "bn" + std::to_string(++bn_i);
        lay.params.push_back({name + ".scale", {channels}, 0, 1.0});
        lay.params.push_back({name + ".shift", {channels}, 0, 0.0});
        lay.bn_layers.push_back({name, channels});
        break;
      }
      case LayerKind::global_avg_pool:
        features = channels;
        break;
      case LayerKind::dense: {
        const std::string name = "fc" + std::to_string(++fc_i);
        lay.params.push_back({name + ".weight", {l.filters, features}, features, 0});
        lay.params.push_back({name + ".bias", {l.filters}, 0, 0.0});
        features = l.filters;
        lay.last_dense = name;
        break;
      }
      default:
        break;
    }
  }
  return lay;
}

}  // namespace nn_detail

// Deterministic seed-driven initialization: fan-in-scaled uniform weights,
// zero biases/shifts, unit bn scales.
inline Model build_architecture(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec = spec;
  Rng rng(derive_seed(seed, 0x1217));
  const auto layout = nn_detail::layout_of(spec);
  for (const auto& slot : layout.params) {
    m.params[slot.name] =
        slot.fan_in > 0 ? Tensor::uniform_fan_in(slot.shape, slot.fan_in, rng)
                        : Tensor::full(slot.shape, slot.constant);
  }
  for (const auto& [name, channels] : layout.bn_layers)
    m.bn[name] = ops::BatchNormState::identity(channels);
  return m;
}

struct ForwardTape {
  NodeRef probs;
  NodeRef features;
  std::vector<std::pair<std::string, NodeRef>> params;  // layout order
};

// Single forward path used for training, evaluation, and extraction. In eval
// mode dropout is the identity and batchnorm uses running statistics.
inline ForwardTape forward_on(Graph& g, Model& model, const Tensor& batch,
                              ops::Mode mode, std::uint64_t dropout_seed = 0,
                              bool with_grad = false) {
  const auto& spec = model.spec;
  if (batch.rank() != 4 || batch.dim(1) != spec.input_channels ||
      batch.dim(2) != spec.input_size || batch.dim(3) != spec.input_size)
    throw DimensionError("forward: batch " + batch.shape_str() +
                         " does not match input [N," +
                         std::to_string(spec.input_channels) + "," +
                         std::to_string(spec.input_size) + "," +
                         std::to_string(spec.input_size) + "]");

  ForwardTape tape;
  auto param_ref = [&](const std::string& name) {
    NodeRef r = g.leaf(model.params.at(name), with_grad);
    tape.params.emplace_back(name, r);
    return r;
  };

  NodeRef cur = g.constant(batch);
  int conv_i = 0, bn_i = 0, fc_i = 0, layer_i = 0;
  for (const auto& l : spec.layers) {
    ++layer_i;
    switch (l.kind) {
      case LayerKind::conv: {
        NodeRef w = param_ref("conv" + std::to_string(++conv_i) + ".weight");
        cur = autodiff::conv2d(g, cur, w, l.stride, l.pad);
        break;
      }
      case LayerKind::batchnorm: {
        const std::string name = "bn" + std::to_string(++bn_i);
        NodeRef scale = param_ref(name + ".scale");
        NodeRef shift = param_ref(name + ".shift");
        cur = autodiff::batchnorm(g, cur, scale, shift, model.bn.at(name), mode);
        break;
      }
      case LayerKind::relu:
        cur = autodiff::relu(g, cur);
        break;
      case LayerKind::maxpool:
        cur = autodiff::maxpool2d(g, cur, l.window, l.stride);
        break;
      case LayerKind::dropout:
        cur = autodiff::dropout(g, cur, l.rate, mode,
                                derive_seed(dropout_seed, static_cast<std::uint64_t>(layer_i)));
        break;
      case LayerKind::global_avg_pool:
        cur = autodiff::global_avg_pool(g, cur);
        if (spec.feature_tap == FeatureTap::backbone) tape.features = cur;
        break;
      case LayerKind::dense: {
        const std::string name = "fc" + std::to_string(++fc_i);
        NodeRef w = param_ref(name + ".weight");
        NodeRef b = param_ref(name + ".bias");
        cur = autodiff::dense(g, cur, w, b);
        if (fc_i == 1 && spec.feature_tap == FeatureTap::first_fc)
          tape.features = cur;
        break;
      }
    }
  }
  if (spec.final_activation == FinalActivation::softmax) {
    cur = autodiff::softmax(g, cur);
  } else {
    cur = autodiff::two_class_probs(g, autodiff::sigmoid(g, cur));
  }
  tape.probs = cur;
  if (!tape.features.valid())
    throw ParameterError("forward: architecture has no feature tap point");
  return tape;
}

struct ForwardResult {
  Tensor probs;    // [N,K], rows sum to 1
  Tensor features; // [N,feature_dim]
};

inline ForwardResult forward(Model& model, const Tensor& batch, ops::Mode mode,
                             std::uint64_t dropout_seed = 0) {
  Graph g;
  auto tape = forward_on(g, model, batch, mode, dropout_seed, false);
  return {g.value(tape.probs), g.value(tape.features)};
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::map<std::string, std::vector<double>> m, v;
};

// Bias-corrected Adam with the configured 1/(1+decay*t) learning-rate decay.
inline void adam_step(std::map<std::string, Tensor>& params,
                      const std::map<std::string, Tensor>& grads,
                      AdamState& state, const TrainConfig& cfg) {
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double lr_t = cfg.learning_rate / (1.0 + cfg.decay * t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (!p.same_shape(g))
      throw DimensionError("adam: gradient shape mismatch for " + name);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), 0.0);
    if (v.empty()) v.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi))
        throw NumericError("adam: non-finite gradient in " + name);
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_t * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline ModelCheckpoint checkpoint_from_model(const Model& model, TrainMeta meta) {
  ModelCheckpoint ckpt;
  ckpt.spec = model.spec;
  ckpt.meta = std::move(meta);
  const auto layout = nn_detail::layout_of(model.spec);
  auto push = [&](const std::string& name, const Tensor& t) {
    NamedTensorF32 nt;
    nt.name = name;
    nt.shape = t.shape();
    nt.data.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      nt.data.push_back(static_cast<float>(t[i]));
    ckpt.tensors.push_back(std::move(nt));
  };
  for (const auto& slot : layout.params) push(slot.name, model.params.at(slot.name));
  for (const auto& [name, channels] : layout.bn_layers) {
    (void)channels;
    push(name + ".running_mean", model.bn.at(name).running_mean);
    push(name + ".running_var", model.bn.at(name).running_var);
  }
  return ckpt;
}

inline Model model_from_checkpoint(const ModelCheckpoint& ckpt) {
  Model m;
  m.spec = ckpt.spec;
  m.spec.validate();
  const auto layout = nn_detail::layout_of(m.spec);
  auto fetch = [&](const std::string& name, const std::vector<int>& shape) {
    const NamedTensorF32* t = ckpt.find(name);
    if (!t || t->shape != shape)
      throw CompatibilityError("checkpoint: tensor '" + name +
                               "' missing or mis-shaped");
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<double>(t->data[i]);
    return out;
  };
  for (const auto& slot : layout.params) m.params[slot.name] = fetch(slot.name, slot.shape);
  for (const auto& [name, channels] : layout.bn_layers) {
    ops::BatchNormState st{fetch(name + ".running_mean", {channels}),
                           fetch(name + ".running_var", {channels})};
    m.bn[name] = std::move(st);
  }
  return m;
}

struct EpochStats {
  double train_loss = 0;
  double train_acc = 0;
  double val_acc = 0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;

  bool operator==(const TrainingTrace&) const = default;
};

struct TrainResult {
  TrainingTrace trace;
  ModelCheckpoint best;
};

inline int argmax_row(const Tensor& probs, int row) {
  int best = 0;
  for (int k = 1; k < probs.dim(1); ++k)
    if (probs.at(row, k) > probs.at(row, best)) best = k;
  return best;
}

namespace nn_detail {

inline Tensor gather_batch(const LabeledImageSet& set,
                           const std::vector<int>& order, std::size_t from,
                           std::size_t count, std::vector<int>* labels) {
  const Tensor& first = set.samples[static_cast<std::size_t>(order[from])].image;
  Tensor batch({static_cast<int>(count), first.dim(0), first.dim(1), first.dim(2)});
  const std::size_t stride = first.size();
  for (std::size_t b = 0; b < count; ++b) {
    const Sample& s = set.samples[static_cast<std::size_t>(order[from + b])];
    if (!s.image.same_shape(first))
      throw DimensionError("train: inconsistent image shapes in the set");
    std::copy(s.image.data(), s.image.data() + stride,
              batch.data() + b * stride);
    if (labels) labels->push_back(s.label);
  }
  return batch;
}

}  // namespace nn_detail

inline double evaluate_accuracy(Model& model, const LabeledImageSet& set,
                                int batch_size = 32) {
  if (set.samples.empty()) throw DataError("evaluate: empty set");
  std::vector<int> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::size_t correct = 0;
  for (std::size_t at = 0; at < order.size();) {
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), order.size() - at);
    std::vector<int> labels;
    Tensor batch = nn_detail::gather_batch(set, order, at, take, &labels);
    ForwardResult r = forward(model, batch, ops::Mode::eval);
    for (std::size_t b = 0; b < take; ++b)
      if (argmax_row(r.probs, static_cast<int>(b)) == labels[b]) ++correct;
    at += take;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

// Mini-batch epochs over shuffled data; evaluates on val_set after every
// epoch and returns the checkpoint of the best validation accuracy (earliest
// epoch wins ties). Bit-reproducible for a fixed config.
inline TrainResult train(Model& model, const LabeledImageSet& train_set,
                         const LabeledImageSet& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.samples.empty() || val_set.samples.empty())
    throw DataError("train: empty training or validation set");
  const int K = model.spec.num_classes;
  for (const auto& s : train_set.samples)
    if (s.label < 0 || s.label >= K)
      throw DataError("train: label " + std::to_string(s.label) +
                      " outside [0," + std::to_string(K) + ")");

  Rng shuffle_rng(derive_seed(cfg.seed, 0x5affe));
  AdamState adam;
  TrainResult result;
  double best_acc = -1.0;

  const std::size_t n = train_set.size();
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t at = 0;
    int step = 0;
    while (at < n) {
      std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - at);
      // batchnorm needs at least two samples; fold a single straggler into
      // the previous batch instead
      if (n - at - take == 1) ++take;

      std::vector<int> labels;
      Tensor batch = nn_detail::gather_batch(train_set, order, at, take, &labels);

      Graph g;
      const std::uint64_t step_seed = derive_seed(
          cfg.seed, 0xD0 + (static_cast<std::uint64_t>(epoch) << 24) +
                        static_cast<std::uint64_t>(step));
      auto tape = forward_on(g, model, batch, ops::Mode::train, step_seed, true);
      if (!g.value(tape.probs).all_finite())
        throw NumericError("train: loss diverged (NaN/Inf) at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      NodeRef ce = autodiff::cross_entropy(g, tape.probs, labels);
      NodeRef loss = ce;
      if (cfg.l2_penalty > 0) {
        for (const auto& [name, ref] : tape.params) {
          if (name.ends_with(".weight"))
            loss = autodiff::add(
                g, loss,
                autodiff::scale(g, autodiff::sum(g, autodiff::square(g, ref)),
                                cfg.l2_penalty));
        }
      }
      const double ce_value = g.value(ce)[0];
      if (!std::isfinite(ce_value))
        throw NumericError("train: loss diverged (NaN/Inf) at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      g.backward(loss);

      std::map<std::string, Tensor> grads;
      for (const auto& [name, ref] : tape.params) grads[name] = g.grad(ref);
      adam_step(model.params, grads, adam, cfg);

      loss_sum += ce_value * static_cast<double>(take);
      const Tensor& probs = g.value(tape.probs);
      for (std::size_t b = 0; b < take; ++b)
        if (argmax_row(probs, static_cast<int>(b)) == labels[b]) ++correct;

      at += take;
      ++step;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    stats.val_acc = evaluate_accuracy(model, val_set, cfg.batch_size);
    result.trace.epochs.push_back(stats);

    if (stats.val_acc > best_acc) {
      best_acc = stats.val_acc;
      result.best = checkpoint_from_model(
          model, TrainMeta{epoch, cfg.seed, stats.val_acc, nlohmann::json::object()});
    }
  }
  return result;
}

// Eval-mode backbone pass; rows align with input order.
inline Tensor extract_features(const ModelCheckpoint& ckpt,
                               const LabeledImageSet& images,
                               int batch_size = 32) {
  Model model = model_from_checkpoint(ckpt);
  const int S = model.spec.input_size;
  for (const auto& s : images.samples)
    if (s.image.rank() != 3 || s.image.dim(0) != model.spec.input_channels ||
        s.image.dim(1) != S || s.image.dim(2) != S)
      throw CompatibilityError("extract_features: image " + s.id + " is " +
                               s.image.shape_str() + ", checkpoint expects [3," +
                               std::to_string(S) + "," + std::to_string(S) + "]");

  const int dim = model.spec.feature_dim();
  Tensor features({static_cast<int>(images.size()), dim});
  std::vector<int> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t at = 0; at < order.size();) {
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), order.size() - at);
    Tensor batch = nn_detail::gather_batch(images, order, at, take, nullptr);
    ForwardResult r = forward(model, batch, ops::Mode::eval);
    for (std::size_t b = 0; b < take; ++b)
      for (int d = 0; d < dim; ++d)
        features.at(static_cast<int>(at + b), d) = r.features.at(static_cast<int>(b), d);
    at += take;
  }
  return features;
}

// Transfers a binary architecture-4 checkpoint to a new class count: backbone
// and shared head layers are copied bit-exactly, the final classification
// layer is re-initialized.
inline Model adapt_head(const ModelCheckpoint& ckpt, int new_num_classes,
                        std::uint64_t seed) {
  if (ckpt.spec.id != 4)
    throw CompatibilityError("adapt_head: needs an architecture-4 checkpoint, got id " +
                             std::to_string(ckpt.spec.id));
  ArchitectureSpec spec = ArchitectureSpec::standard(
      4, new_num_classes, ckpt.spec.input_size, FinalActivation::softmax);
  spec.feature_tap = ckpt.spec.feature_tap;

  Model fresh = build_architecture(spec, seed);
  Model source = model_from_checkpoint(ckpt);
  const std::string last = nn_detail::layout_of(spec).last_dense;
  for (auto& [name, tensor] : fresh.params) {
    if (name.starts_with(last + ".")) continue;  // re-initialized head top
    const auto it = source.params.find(name);
    if (it == source.params.end() || !it->second.same_shape(tensor))
      throw CompatibilityError("adapt_head: cannot transfer tensor '" + name + "'");
    tensor = it->second;
  }
  fresh.bn = source.bn;
  return fresh;
}

}  // namespace glom

#endif  // GLOM_NN_HPP
