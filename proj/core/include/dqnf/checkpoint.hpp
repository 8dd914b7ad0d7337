#pragma once

#include <string>
#include <utility>

#include "dqnf/network.hpp"

namespace dqnf {

/// Network checkpoint document:
///   {"spec": [<layer descriptors>], "seed": <int>,
///    "tensors": [{"name": "layer<i>.weight"|"layer<i>.bias",
///                 "shape": [..], "data": [..]}, ...]}
/// Values round-trip exactly at the stored precision.
template <typename T>
std::string to_checkpoint_json(const LayerChain& chain, const NetworkParams<T>& params);

template <typename T>
std::pair<LayerChain, NetworkParams<T>> from_checkpoint_json(const std::string& json_text);

template <typename T>
void save_checkpoint(const std::string& path, const LayerChain& chain,
                     const NetworkParams<T>& params);

template <typename T>
std::pair<LayerChain, NetworkParams<T>> load_checkpoint(const std::string& path);

/// Full agent state in the same document shape, tensor names prefixed with
/// "online." / "target." / "classifier.". The single spec is the Q-chain;
/// the classifier chain is that chain plus a sigmoid head (parameterless,
/// so the tensors line up). "precision" records the training scalar type.
template <typename T>
struct AgentCheckpoint {
  LayerChain q_chain;
  std::uint64_t seed = 0;
  std::string precision = "f32";
  NetworkParams<T> online;
  NetworkParams<T> target;
  NetworkParams<T> classifier;
  bool has_classifier = false;
};

template <typename T>
std::string to_agent_checkpoint_json(const AgentCheckpoint<T>& ckpt);

template <typename T>
AgentCheckpoint<T> agent_checkpoint_from_json(const std::string& json_text);

template <typename T>
void save_agent_checkpoint(const std::string& path, const AgentCheckpoint<T>& ckpt);

template <typename T>
AgentCheckpoint<T> load_agent_checkpoint(const std::string& path);

/// Reads only the "precision" field ("f32" when absent), so callers can pick
/// the scalar type before a full load.
std::string checkpoint_precision(const std::string& path);

}  // namespace dqnf
