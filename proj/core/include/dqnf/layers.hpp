#pragma once

#include <string>
#include <vector>

namespace dqnf {

enum class LayerKind { dense, conv2d, maxpool2d, relu, sigmoid, flatten };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

/// One layer of a feed-forward chain. Only the fields relevant to `kind`
/// are meaningful; use the factory functions.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;

  // dense
  int in_features = 0;
  int out_features = 0;

  // conv2d
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;

  // maxpool2d (square window, stride == window)
  int pool = 0;

  static LayerSpec dense(int in_features, int out_features);
  static LayerSpec conv2d(int in_channels, int out_channels, int kernel, int stride = 1);
  static LayerSpec maxpool2d(int pool);
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec flatten();

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  bool operator==(const LayerSpec&) const = default;
};

using LayerChain = std::vector<LayerSpec>;

/// Per-sample output shape of every layer, given the per-sample input shape.
/// result[0] == input_shape, result[i+1] == output shape of layer i.
/// Throws std::invalid_argument naming the offending layer index on any
/// inconsistency.
std::vector<std::vector<int>> infer_shapes(const LayerChain& chain,
                                           const std::vector<int>& input_shape);

/// Number of learnable scalars in the chain.
long parameter_count(const LayerChain& chain);

/// Convolutional Q-network for grid observations: three conv layers
/// (16/32/64 channels, kernel 2, one 2x2 max-pool after the first), a
/// 64-unit hidden dense layer and a linear action-value head.
LayerChain grid_q_chain(int in_channels, int view, int actions, int hidden = 64);

/// Dense Q-network for bag-of-words observations.
LayerChain text_q_chain(int input_len, int actions, int hidden = 64);

/// Same trunk as `chain` with independent sigmoid heads on top; used for the
/// per-action validity classifier.
LayerChain with_sigmoid_head(LayerChain chain);

}  // namespace dqnf
