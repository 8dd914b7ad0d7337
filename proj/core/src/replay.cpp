#include "dqnf/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace dqnf {

template <typename T>
ReplayBuffer<T>::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(capacity_);
}

template <typename T>
void ReplayBuffer<T>::push(Transition<T> t) {
  if (!t.s || !t.s_next) throw std::invalid_argument("transition observations must be set");
  if (t.f == 1 && (t.r != 0.0 || t.s.get() != t.s_next.get())) {
    throw std::invalid_argument("rejected transition must keep reward 0 and an unchanged state");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
  ++pushed_;
}

template <typename T>
const Transition<T>& ReplayBuffer<T>::at(std::size_t i) const {
  if (i >= items_.size()) throw std::invalid_argument("replay index out of range");
  if (items_.size() < capacity_) return items_[i];
  return items_[(head_ + i) % capacity_];
}

template <typename T>
std::vector<const Transition<T>*> ReplayBuffer<T>::sample(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<const Transition<T>*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(&items_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items_.size())))]);
  }
  return out;
}

template <typename T>
Tensor<T> stack_batch(const std::vector<const Transition<T>*>& batch, bool next_obs) {
  if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
  const Tensor<T>& first = next_obs ? *batch[0]->s_next : *batch[0]->s;
  std::vector<int> shape;
  shape.reserve(first.shape.size() + 1);
  shape.push_back(static_cast<int>(batch.size()));
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor<T> out(std::move(shape));
  T* dst = out.ptr();
  for (const Transition<T>* t : batch) {
    const Tensor<T>& obs = next_obs ? *t->s_next : *t->s;
    if (!obs.same_shape(first)) throw std::invalid_argument("batch observations differ in shape");
    dst = std::copy(obs.data.begin(), obs.data.end(), dst);
  }
  return out;
}

template class ReplayBuffer<float>;
template class ReplayBuffer<double>;
template Tensor<float> stack_batch(const std::vector<const Transition<float>*>&, bool);
template Tensor<double> stack_batch(const std::vector<const Transition<double>*>&, bool);

}  // namespace dqnf
