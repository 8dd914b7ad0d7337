#include "dqnf/layers.hpp"

#include <stdexcept>

#include "dqnf/tensor.hpp"

namespace dqnf {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::flatten: return "flatten";
  }
  throw std::invalid_argument("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "maxpool2d") return LayerKind::maxpool2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "sigmoid") return LayerKind::sigmoid;
  if (name == "flatten") return LayerKind::flatten;
  throw std::invalid_argument("unknown layer kind: " + name);
}

LayerSpec LayerSpec::dense(int in_features, int out_features) {
  if (in_features < 1 || out_features < 1)
    throw std::invalid_argument("dense: feature counts must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_features = in_features;
  s.out_features = out_features;
  return s;
}

LayerSpec LayerSpec::conv2d(int in_channels, int out_channels, int kernel, int stride) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1)
    throw std::invalid_argument("conv2d: sizes must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::maxpool2d(int pool) {
  if (pool < 1) throw std::invalid_argument("maxpool2d: pool must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::maxpool2d;
  s.pool = pool;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::sigmoid;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

namespace {

[[noreturn]] void shape_error(std::size_t layer_idx, const LayerSpec& spec,
                              const std::string& detail) {
  throw std::invalid_argument("layer " + std::to_string(layer_idx) + " (" +
                              layer_kind_name(spec.kind) + "): " + detail);
}

}  // namespace

std::vector<std::vector<int>> infer_shapes(const LayerChain& chain,
                                           const std::vector<int>& input_shape) {
  std::vector<std::vector<int>> shapes;
  shapes.reserve(chain.size() + 1);
  shapes.push_back(input_shape);
  std::vector<int> cur = input_shape;

  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& l = chain[i];
    switch (l.kind) {
      case LayerKind::dense: {
        if (cur.size() != 1)
          shape_error(i, l, "expected rank-1 input, got " + shape_to_string(cur));
        if (cur[0] != l.in_features)
          shape_error(i, l, "expected " + std::to_string(l.in_features) + " features, got " +
                              std::to_string(cur[0]));
        cur = {l.out_features};
        break;
      }
      case LayerKind::conv2d: {
        if (cur.size() != 3)
          shape_error(i, l, "expected [C,H,W] input, got " + shape_to_string(cur));
        if (cur[0] != l.in_channels)
          shape_error(i, l, "expected " + std::to_string(l.in_channels) + " channels, got " +
                              std::to_string(cur[0]));
        const int oh = (cur[1] - l.kernel) / l.stride + 1;
        const int ow = (cur[2] - l.kernel) / l.stride + 1;
        if (cur[1] < l.kernel || cur[2] < l.kernel || oh < 1 || ow < 1)
          shape_error(i, l, "kernel " + std::to_string(l.kernel) + " does not fit input " +
                              shape_to_string(cur));
        cur = {l.out_channels, oh, ow};
        break;
      }
      case LayerKind::maxpool2d: {
        if (cur.size() != 3)
          shape_error(i, l, "expected [C,H,W] input, got " + shape_to_string(cur));
        if (cur[1] % l.pool != 0 || cur[2] % l.pool != 0)
          shape_error(i, l, "pool " + std::to_string(l.pool) + " does not divide input " +
                              shape_to_string(cur));
        cur = {cur[0], cur[1] / l.pool, cur[2] / l.pool};
        break;
      }
      case LayerKind::relu:
      case LayerKind::sigmoid:
        break;  // shape preserved
      case LayerKind::flatten: {
        long n = 1;
        for (int d : cur) n *= d;
        cur = {static_cast<int>(n)};
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

long parameter_count(const LayerChain& chain) {
  long n = 0;
  for (const LayerSpec& l : chain) {
    if (l.kind == LayerKind::dense) {
      n += static_cast<long>(l.in_features) * l.out_features + l.out_features;
    } else if (l.kind == LayerKind::conv2d) {
      n += static_cast<long>(l.out_channels) * l.in_channels * l.kernel * l.kernel +
           l.out_channels;
    }
  }
  return n;
}

LayerChain grid_q_chain(int in_channels, int view, int actions, int hidden) {
  LayerChain c;
  c.push_back(LayerSpec::conv2d(in_channels, 16, 2));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::maxpool2d(2));
  c.push_back(LayerSpec::conv2d(16, 32, 2));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::conv2d(32, 64, 2));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::flatten());
  const auto shapes = infer_shapes(c, {in_channels, view, view});
  c.push_back(LayerSpec::dense(shapes.back()[0], hidden));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::dense(hidden, actions));
  return c;
}

LayerChain text_q_chain(int input_len, int actions, int hidden) {
  LayerChain c;
  c.push_back(LayerSpec::dense(input_len, hidden));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::dense(hidden, hidden));
  c.push_back(LayerSpec::relu());
  c.push_back(LayerSpec::dense(hidden, actions));
  return c;
}

LayerChain with_sigmoid_head(LayerChain chain) {
  chain.push_back(LayerSpec::sigmoid());
  return chain;
}

}  // namespace dqnf
