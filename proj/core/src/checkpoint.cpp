#include "dqnf/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace dqnf {

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = layer_kind_name(l.kind);
  switch (l.kind) {
    case LayerKind::dense:
      j["in_features"] = l.in_features;
      j["out_features"] = l.out_features;
      break;
    case LayerKind::conv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      break;
    case LayerKind::maxpool2d:
      j["pool"] = l.pool;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const LayerKind kind = layer_kind_from_name(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::dense:
      return LayerSpec::dense(j.at("in_features").get<int>(), j.at("out_features").get<int>());
    case LayerKind::conv2d:
      return LayerSpec::conv2d(j.at("in_channels").get<int>(), j.at("out_channels").get<int>(),
                               j.at("kernel").get<int>(), j.value("stride", 1));
    case LayerKind::maxpool2d:
      return LayerSpec::maxpool2d(j.at("pool").get<int>());
    case LayerKind::relu:
      return LayerSpec::relu();
    case LayerKind::sigmoid:
      return LayerSpec::sigmoid();
    case LayerKind::flatten:
      return LayerSpec::flatten();
  }
  throw std::invalid_argument("checkpoint: bad layer descriptor");
}

template <typename T>
json tensor_to_json(const std::string& name, const Tensor<T>& t) {
  json j;
  j["name"] = name;
  j["shape"] = t.shape;
  // stored as doubles; every float32 is exactly representable and casts back
  json data = json::array();
  for (T v : t.data) data.push_back(static_cast<double>(v));
  j["data"] = std::move(data);
  return j;
}

template <typename T>
Tensor<T> tensor_from_json(const json& j) {
  std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  const auto& data = j.at("data");
  std::vector<T> values;
  values.reserve(data.size());
  for (const auto& v : data) values.push_back(static_cast<T>(v.get<double>()));
  return Tensor<T>(std::move(shape), std::move(values));
}

}  // namespace

template <typename T>
std::string to_checkpoint_json(const LayerChain& chain, const NetworkParams<T>& params) {
  if (params.weights.size() != chain.size() || params.biases.size() != chain.size())
    throw std::invalid_argument("checkpoint: params do not match chain");
  json j;
  j["spec"] = json::array();
  for (const auto& l : chain) j["spec"].push_back(layer_to_json(l));
  j["seed"] = params.seed;
  j["tensors"] = json::array();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!chain[i].has_params()) continue;
    const std::string base = "layer" + std::to_string(i);
    j["tensors"].push_back(tensor_to_json(base + ".weight", params.weights[i]));
    j["tensors"].push_back(tensor_to_json(base + ".bias", params.biases[i]));
  }
  return j.dump();
}

template <typename T>
std::pair<LayerChain, NetworkParams<T>> from_checkpoint_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  LayerChain chain;
  for (const auto& lj : j.at("spec")) chain.push_back(layer_from_json(lj));

  NetworkParams<T> params;
  params.seed = j.at("seed").get<std::uint64_t>();
  params.weights.assign(chain.size(), Tensor<T>());
  params.biases.assign(chain.size(), Tensor<T>());
  for (const auto& tj : j.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const auto dot = name.find('.');
    if (dot == std::string::npos || name.rfind("layer", 0) != 0)
      throw std::invalid_argument("checkpoint: bad tensor name " + name);
    const std::size_t idx = std::stoul(name.substr(5, dot - 5));
    if (idx >= chain.size())
      throw std::invalid_argument("checkpoint: tensor " + name + " out of range");
    const std::string field = name.substr(dot + 1);
    if (field == "weight")
      params.weights[idx] = tensor_from_json<T>(tj);
    else if (field == "bias")
      params.biases[idx] = tensor_from_json<T>(tj);
    else
      throw std::invalid_argument("checkpoint: bad tensor name " + name);
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].has_params() && (params.weights[i].size() == 0 || params.biases[i].size() == 0))
      throw std::invalid_argument("checkpoint: missing tensors for layer " + std::to_string(i));
  }
  return {std::move(chain), std::move(params)};
}

template <typename T>
void save_checkpoint(const std::string& path, const LayerChain& chain,
                     const NetworkParams<T>& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << to_checkpoint_json(chain, params);
}

template <typename T>
std::pair<LayerChain, NetworkParams<T>> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_checkpoint_json<T>(ss.str());
}

namespace {

template <typename T>
void append_network_tensors(json& tensors, const std::string& prefix, const LayerChain& chain,
                            const NetworkParams<T>& params) {
  if (params.weights.size() != chain.size() || params.biases.size() != chain.size())
    throw std::invalid_argument("checkpoint: params do not match chain");
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!chain[i].has_params()) continue;
    const std::string base = prefix + ".layer" + std::to_string(i);
    tensors.push_back(tensor_to_json(base + ".weight", params.weights[i]));
    tensors.push_back(tensor_to_json(base + ".bias", params.biases[i]));
  }
}

template <typename T>
NetworkParams<T> extract_network(const json& j, const std::string& prefix, const LayerChain& chain,
                                 bool required) {
  NetworkParams<T> params;
  params.seed = j.at("seed").get<std::uint64_t>();
  params.weights.assign(chain.size(), Tensor<T>());
  params.biases.assign(chain.size(), Tensor<T>());
  bool any = false;
  for (const auto& tj : j.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    if (name.rfind(prefix + ".layer", 0) != 0) continue;
    any = true;
    const std::string rest = name.substr(prefix.size() + 6);  // after "<prefix>.layer"
    const auto dot = rest.find('.');
    if (dot == std::string::npos)
      throw std::invalid_argument("checkpoint: bad tensor name " + name);
    const std::size_t idx = std::stoul(rest.substr(0, dot));
    if (idx >= chain.size())
      throw std::invalid_argument("checkpoint: tensor " + name + " out of range");
    const std::string field = rest.substr(dot + 1);
    if (field == "weight")
      params.weights[idx] = tensor_from_json<T>(tj);
    else if (field == "bias")
      params.biases[idx] = tensor_from_json<T>(tj);
    else
      throw std::invalid_argument("checkpoint: bad tensor name " + name);
  }
  if (!any) {
    if (required)
      throw std::invalid_argument("checkpoint: missing tensors for network '" + prefix + "'");
    return params;
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].has_params() && (params.weights[i].size() == 0 || params.biases[i].size() == 0))
      throw std::invalid_argument("checkpoint: network '" + prefix + "' misses layer " +
                                  std::to_string(i));
  }
  return params;
}

}  // namespace

template <typename T>
std::string to_agent_checkpoint_json(const AgentCheckpoint<T>& ckpt) {
  json j;
  j["spec"] = json::array();
  for (const auto& l : ckpt.q_chain) j["spec"].push_back(layer_to_json(l));
  j["seed"] = ckpt.seed;
  j["precision"] = ckpt.precision;
  j["tensors"] = json::array();
  append_network_tensors(j["tensors"], "online", ckpt.q_chain, ckpt.online);
  append_network_tensors(j["tensors"], "target", ckpt.q_chain, ckpt.target);
  if (ckpt.has_classifier) {
    LayerChain cls_chain = with_sigmoid_head(ckpt.q_chain);
    append_network_tensors(j["tensors"], "classifier", cls_chain, ckpt.classifier);
  }
  return j.dump();
}

template <typename T>
AgentCheckpoint<T> agent_checkpoint_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  AgentCheckpoint<T> ckpt;
  for (const auto& lj : j.at("spec")) ckpt.q_chain.push_back(layer_from_json(lj));
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.precision = j.value("precision", "f32");
  ckpt.online = extract_network<T>(j, "online", ckpt.q_chain, true);
  ckpt.target = extract_network<T>(j, "target", ckpt.q_chain, true);
  LayerChain cls_chain = with_sigmoid_head(ckpt.q_chain);
  ckpt.classifier = extract_network<T>(j, "classifier", cls_chain, false);
  ckpt.has_classifier = ckpt.classifier.scalar_count() > 0;
  return ckpt;
}

template <typename T>
void save_agent_checkpoint(const std::string& path, const AgentCheckpoint<T>& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << to_agent_checkpoint_json(ckpt);
}

template <typename T>
AgentCheckpoint<T> load_agent_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return agent_checkpoint_from_json<T>(ss.str());
}

std::string checkpoint_precision(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str());
  return j.value("precision", "f32");
}

template std::string to_checkpoint_json<float>(const LayerChain&, const NetworkParams<float>&);
template std::string to_checkpoint_json<double>(const LayerChain&, const NetworkParams<double>&);
template std::pair<LayerChain, NetworkParams<float>> from_checkpoint_json<float>(
    const std::string&);
template std::pair<LayerChain, NetworkParams<double>> from_checkpoint_json<double>(
    const std::string&);
template void save_checkpoint<float>(const std::string&, const LayerChain&,
                                     const NetworkParams<float>&);
template void save_checkpoint<double>(const std::string&, const LayerChain&,
                                      const NetworkParams<double>&);
template std::pair<LayerChain, NetworkParams<float>> load_checkpoint<float>(const std::string&);
template std::pair<LayerChain, NetworkParams<double>> load_checkpoint<double>(const std::string&);
template std::string to_agent_checkpoint_json<float>(const AgentCheckpoint<float>&);
template std::string to_agent_checkpoint_json<double>(const AgentCheckpoint<double>&);
template AgentCheckpoint<float> agent_checkpoint_from_json<float>(const std::string&);
template AgentCheckpoint<double> agent_checkpoint_from_json<double>(const std::string&);
template void save_agent_checkpoint<float>(const std::string&, const AgentCheckpoint<float>&);
template void save_agent_checkpoint<double>(const std::string&, const AgentCheckpoint<double>&);
template AgentCheckpoint<float> load_agent_checkpoint<float>(const std::string&);
template AgentCheckpoint<double> load_agent_checkpoint<double>(const std::string&);

}  // namespace dqnf
