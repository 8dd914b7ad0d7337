#pragma once

#include <memory>

#include "dqnf/env.hpp"

namespace dqnf {

/// One stored step. Observations are shared with the environment and other
/// transitions; a rejected action (f=1) stores the very same object for s
/// and s_next.
template <typename T>
struct Transition {
  std::shared_ptr<const Tensor<T>> s;
  int a = 0;
  double r = 0.0;
  std::shared_ptr<const Tensor<T>> s_next;
  bool done = false;
  int f = 0;
};

/// Fixed-capacity ring buffer with uniform sampling.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition<T> t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  long total_pushed() const { return pushed_; }

  /// i=0 is the oldest stored transition.
  const Transition<T>& at(std::size_t i) const;

  /// Uniform over current contents, independent draws (with replacement).
  std::vector<const Transition<T>*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot the next push overwrites once full
  long pushed_ = 0;
  std::vector<Transition<T>> items_;
};

/// Stacks the batch observations (s, or s_next when `next_obs`) into one
/// tensor with a leading batch dimension.
template <typename T>
Tensor<T> stack_batch(const std::vector<const Transition<T>*>& batch, bool next_obs);

}  // namespace dqnf
