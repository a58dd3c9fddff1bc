#ifndef GLOM_ARCH_HPP
#define GLOM_ARCH_HPP

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "glom/error.hpp"

namespace glom {

enum class LayerKind {
  conv,
  batchnorm,
  relu,
  maxpool,
  dropout,
  global_avg_pool,
  dense
};

enum class FinalActivation { softmax, sigmoid };

// Where extract_features taps the network: the pooled backbone output
// (default) or the activation of the first fully-connected head layer.
enum class FeatureTap { backbone, first_fc };

struct LayerDesc {
  LayerKind kind;
  int filters = 0;  // conv: output channels; dense: output units
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int window = 2;   // maxpool window == stride
  double rate = 0;  // dropout

  bool operator==(const LayerDesc&) const = default;
};

// Ordered layer list for one of the four architecture ids, parameterized by
// input size. 224 is the production profile; 64 is the desk profile used by
// the fast end-to-end experiments (one pooling stage fewer on architecture 4).
struct ArchitectureSpec {
  int id = 4;
  int num_classes = 2;
  int input_size = 224;
  int input_channels = 3;
  std::vector<LayerDesc> layers;
  FinalActivation final_activation = FinalActivation::softmax;
  FeatureTap feature_tap = FeatureTap::backbone;

  static ArchitectureSpec standard(int id, int num_classes, int input_size = 224,
                                   FinalActivation act = FinalActivation::softmax);

  int conv_count() const { return count(LayerKind::conv); }
  int pool_count() const { return count(LayerKind::maxpool); }
  int fc_count() const { return count(LayerKind::dense); }

  // Channel width at the global-average-pool, i.e. the feature dimension.
  int backbone_dim() const {
    int channels = input_channels;
    for (const auto& l : layers) {
      if (l.kind == LayerKind::conv) channels = l.filters;
      if (l.kind == LayerKind::global_avg_pool) return channels;
    }
    throw ParameterError("architecture: no global_avg_pool layer");
  }

  int feature_dim() const {
    if (feature_tap == FeatureTap::backbone) return backbone_dim();
    for (const auto& l : layers)
      if (l.kind == LayerKind::dense) return l.filters;
    throw ParameterError("architecture: no dense layer to tap");
  }

  // Spatial size at the pool, for sanity checks.
  int final_spatial() const {
    int s = input_size;
    for (const auto& l : layers)
      if (l.kind == LayerKind::maxpool) s = (s - l.window) / l.stride + 1;
    return s;
  }

  void validate() const;

  nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);

  bool operator==(const ArchitectureSpec&) const = default;

 private:
  int count(LayerKind k) const {
    int n = 0;
    for (const auto& l : layers) n += (l.kind == k) ? 1 : 0;
    return n;
  }
};

namespace detail {

inline void push_conv_block(std::vector<LayerDesc>& layers, int filters,
                            bool pool, double pool_dropout) {
  layers.push_back({.kind = LayerKind::conv, .filters = filters});
  layers.push_back({.kind = LayerKind::batchnorm});
  layers.push_back({.kind = LayerKind::relu});
  if (pool) {
    layers.push_back({.kind = LayerKind::maxpool, .stride = 2, .window = 2});
    if (pool_dropout > 0)
      layers.push_back({.kind = LayerKind::dropout, .rate = pool_dropout});
  }
}

inline void push_head(std::vector<LayerDesc>& layers,
                      const std::vector<int>& widths, double head_dropout) {
  layers.push_back({.kind = LayerKind::global_avg_pool});
  if (head_dropout > 0)
    layers.push_back({.kind = LayerKind::dropout, .rate = head_dropout});
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers.push_back({.kind = LayerKind::dense, .filters = widths[i]});
    if (i + 1 < widths.size()) layers.push_back({.kind = LayerKind::relu});
  }
}

}  // namespace detail

inline ArchitectureSpec ArchitectureSpec::standard(int id, int num_classes,
                                                   int input_size,
                                                   FinalActivation act) {
  if (id < 1 || id > 4)
    throw ParameterError("architecture id must be 1..4, got " + std::to_string(id));
  if (input_size != 64 && input_size != 224)
    throw ParameterError("architecture input size must be 64 or 224");
  if (act == FinalActivation::sigmoid && (id != 1 || num_classes != 2))
    throw ParameterError("sigmoid head exists only for architecture 1, binary");

  ArchitectureSpec s;
  s.id = id;
  s.num_classes = num_classes;
  s.input_size = input_size;
  s.final_activation = act;

  const double pd = 0.25, hd = 0.5;
  switch (id) {
    case 1:
      for (int f : {16, 32, 64, 64})
        detail::push_conv_block(s.layers, f, true, pd);
      detail::push_head(s.layers,
                        {act == FinalActivation::sigmoid ? 1 : num_classes}, hd);
      break;
    case 2:
      for (int f : {16, 32, 64, 128})
        detail::push_conv_block(s.layers, f, true, pd);
      detail::push_head(s.layers, {64, num_classes}, hd);
      break;
    case 3: {
      const int filters[] = {16, 32, 32, 64, 128};
      for (int i = 0; i < 5; ++i)
        detail::push_conv_block(s.layers, filters[i], i < 4, pd);
      detail::push_head(s.layers, {64, num_classes}, hd);
      break;
    }
    case 4: {
      // 6 conv / 5 pool / 3 FC at 224 (final maps 7x7); the 64-pixel desk
      // profile drops to 4 pools so the last conv still sees 4x4 maps.
      const int filters[] = {16, 32, 32, 64, 64, 128};
      const int pools = (input_size == 224) ? 5 : 4;
      for (int i = 0; i < 6; ++i)
        detail::push_conv_block(s.layers, filters[i], i < pools, pd);
      detail::push_head(s.layers, {128, 64, num_classes}, hd);
      break;
    }
  }
  s.validate();
  return s;
}

inline void ArchitectureSpec::validate() const {
  std::vector<std::string> faults;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) faults.push_back(what);
  };
  expect(id >= 1 && id <= 4, "id outside 1..4");
  expect(num_classes == 2 || num_classes == 4, "num_classes must be 2 or 4");
  const int convs = conv_count(), pools = pool_count(), fcs = fc_count();
  if (id == 1 || id == 2) expect(convs == 4, "architecture " + std::to_string(id) + " needs 4 conv layers, has " + std::to_string(convs));
  if (id == 3) expect(convs == 5, "architecture 3 needs 5 conv layers, has " + std::to_string(convs));
  if (id == 4) {
    expect(convs == 6, "architecture 4 needs 6 conv layers, has " + std::to_string(convs));
    if (input_size == 224)
      expect(pools == 5, "architecture 4 needs 5 max-pool layers, has " + std::to_string(pools));
    expect(fcs == 3, "architecture 4 needs 3 fully-connected layers, has " + std::to_string(fcs));
    expect(final_activation == FinalActivation::softmax, "architecture 4 needs a softmax top");
    expect(backbone_dim() == 128, "architecture 4 backbone must emit 128 features, emits " + std::to_string(backbone_dim()));
  }
  if (final_activation == FinalActivation::sigmoid)
    expect(num_classes == 2, "sigmoid head requires binary classification");
  expect(final_spatial() >= 1, "pooling collapses the input below 1x1");
  if (!faults.empty()) {
    std::string msg = "invalid architecture:";
    for (const auto& f : faults) msg += " " + f + ";";
    throw ParameterError(msg);
  }
}

inline nlohmann::json ArchitectureSpec::to_json() const {
  static const char* kind_names[] = {"conv",    "batchnorm", "relu",
                                     "maxpool", "dropout",   "global_avg_pool",
                                     "dense"};
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json lj{{"kind", kind_names[static_cast<int>(l.kind)]}};
    switch (l.kind) {
      case LayerKind::conv:
        lj["filters"] = l.filters;
        lj["kernel"] = l.kernel;
        lj["stride"] = l.stride;
        lj["pad"] = l.pad;
        break;
      case LayerKind::maxpool:
        lj["window"] = l.window;
        lj["stride"] = l.stride;
        break;
      case LayerKind::dropout:
        lj["rate"] = l.rate;
        break;
      case LayerKind::dense:
        lj["units"] = l.filters;
        break;
      default:
        break;
    }
    layers_json.push_back(std::move(lj));
  }
  return nlohmann::json{
      {"id", id},
      {"num_classes", num_classes},
      {"input_size", input_size},
      {"input_channels", input_channels},
      {"final_activation",
       final_activation == FinalActivation::softmax ? "softmax" : "sigmoid"},
      {"feature_tap",
       feature_tap == FeatureTap::backbone ? "backbone" : "first_fc"},
      {"layers", std::move(layers_json)}};
}

inline ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  ArchitectureSpec s;
  s.id = j.at("id").get<int>();
  s.num_classes = j.at("num_classes").get<int>();
  s.input_size = j.at("input_size").get<int>();
  s.input_channels = j.at("input_channels").get<int>();
  s.final_activation = j.at("final_activation").get<std::string>() == "sigmoid"
                           ? FinalActivation::sigmoid
                           : FinalActivation::softmax;
  s.feature_tap = j.at("feature_tap").get<std::string>() == "first_fc"
                      ? FeatureTap::first_fc
                      : FeatureTap::backbone;
  for (const auto& lj : j.at("layers")) {
    const std::string kind = lj.at("kind").get<std::string>();
    LayerDesc l;
    if (kind == "conv") {
      l.kind = LayerKind::conv;
      l.filters = lj.at("filters").get<int>();
      l.kernel = lj.at("kernel").get<int>();
      l.stride = lj.at("stride").get<int>();
      l.pad = lj.at("pad").get<int>();
    } else if (kind == "batchnorm") {
      l.kind = LayerKind::batchnorm;
    } else if (kind == "relu") {
      l.kind = LayerKind::relu;
    } else if (kind == "maxpool") {
      l.kind = LayerKind::maxpool;
      l.window = lj.at("window").get<int>();
      l.stride = lj.at("stride").get<int>();
    } else if (kind == "dropout") {
      l.kind = LayerKind::dropout;
      l.rate = lj.at("rate").get<double>();
    } else if (kind == "global_avg_pool") {
      l.kind = LayerKind::global_avg_pool;
    } else if (kind == "dense") {
      l.kind = LayerKind::dense;
      l.filters = lj.at("units").get<int>();
    } else {
      throw FormatError("architecture: unknown layer kind '" + kind + "'");
    }
    s.layers.push_back(l);
  }
  return s;
}

}  // namespace glom

#endif  // GLOM_ARCH_HPP
