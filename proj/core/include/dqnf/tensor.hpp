#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqnf {

/// Deterministic random source. std::mt19937_64 output is fully specified by
/// the standard; the draws below avoid std::uniform_*_distribution, whose
/// results are implementation-defined, so streams replay identically across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift reduction; the bias for
  /// n << 2^64 is far below anything a statistical test here can see.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    return static_cast<int>((static_cast<unsigned __int128>(eng_()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

/// Derives an independent stream seed from (seed, salt). splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Dense row-major tensor. The scalar type is float for training runs and
/// double for gradient-check / bit-exact-replay modes.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_size(shape), T(0));
  }

  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_size(shape) != data.size())
      throw std::invalid_argument("Tensor: data length does not match shape product");
  }

  static std::size_t checked_size(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 1) throw std::invalid_argument("Tensor: shape dimensions must be >= 1");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  /// Reinterprets the flat data under a new shape of equal element count.
  Tensor reshaped(std::vector<int> s) const {
    Tensor out;
    out.shape = std::move(s);
    if (checked_size(out.shape) != data.size())
      throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    out.data = data;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace dqnf
