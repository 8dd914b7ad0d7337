#include "dqnf/network.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace dqnf {

namespace {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Per-sample input rank committed by the chain's first shaped layer, or -1
// for chains of shape-preserving layers only.
int expected_input_rank(const LayerChain& chain) {
  for (const auto& l : chain) {
    switch (l.kind) {
      case LayerKind::dense: return 1;
      case LayerKind::conv2d:
      case LayerKind::maxpool2d: return 3;
      default: break;
    }
  }
  return -1;
}

template <typename T>
void validate_params(const LayerChain& chain, const NetworkParams<T>& params) {
  if (params.weights.size() != chain.size() || params.biases.size() != chain.size())
    throw std::invalid_argument("network params do not match chain length");
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& l = chain[i];
    const auto& w = params.weights[i].shape;
    const auto& b = params.biases[i].shape;
    bool ok = true;
    if (l.kind == LayerKind::dense) {
      ok = w == std::vector<int>{l.out_features, l.in_features} &&
           b == std::vector<int>{l.out_features};
    } else if (l.kind == LayerKind::conv2d) {
      ok = w == std::vector<int>{l.out_channels, l.in_channels, l.kernel, l.kernel} &&
           b == std::vector<int>{l.out_channels};
    } else {
      ok = w.empty() && b.empty();
    }
    if (!ok)
      throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                  layer_kind_name(l.kind) + "): parameter shape mismatch");
  }
}

template <typename T>
std::vector<int> batched_shape(int n, const std::vector<int>& sample) {
  std::vector<int> s;
  s.reserve(sample.size() + 1);
  s.push_back(n);
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

template <typename T>
NetworkParams<T> init_params(const LayerChain& chain, std::uint64_t seed) {
  NetworkParams<T> p;
  p.seed = seed;
  p.weights.resize(chain.size());
  p.biases.resize(chain.size());
  Rng rng(mix_seed(seed, 0x1e17));
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& l = chain[i];
    long fan_in = 0;
    if (l.kind == LayerKind::dense) {
      fan_in = l.in_features;
      p.weights[i] = Tensor<T>({l.out_features, l.in_features});
      p.biases[i] = Tensor<T>({l.out_features});
    } else if (l.kind == LayerKind::conv2d) {
      fan_in = static_cast<long>(l.in_channels) * l.kernel * l.kernel;
      p.weights[i] = Tensor<T>({l.out_channels, l.in_channels, l.kernel, l.kernel});
      p.biases[i] = Tensor<T>({l.out_channels});
    } else {
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    // draws happen in double so float and double nets from one seed agree
    for (T& v : p.weights[i].data) v = static_cast<T>(rng.uniform(-bound, bound));
    for (T& v : p.biases[i].data) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return p;
}

template <typename T>
Gradients<T> zero_gradients(const NetworkParams<T>& params) {
  Gradients<T> g;
  g.weights.reserve(params.weights.size());
  g.biases.reserve(params.biases.size());
  for (const auto& w : params.weights)
    g.weights.push_back(w.shape.empty() ? Tensor<T>() : Tensor<T>(w.shape));
  for (const auto& b : params.biases)
    g.biases.push_back(b.shape.empty() ? Tensor<T>() : Tensor<T>(b.shape));
  return g;
}

template <typename T>
Tensor<T> forward(const LayerChain& chain, const NetworkParams<T>& params,
                  const Tensor<T>& input, ForwardTrace<T>* trace) {
  validate_params(chain, params);

  const int er = expected_input_rank(chain);
  bool batched = false;
  if (er >= 0) {
    if (input.rank() == er + 1) {
      batched = true;
    } else if (input.rank() != er) {
      throw std::invalid_argument("layer 0 (" + layer_kind_name(chain.front().kind) +
                                  "): input rank " + std::to_string(input.rank()) +
                                  " does not match expected sample rank " + std::to_string(er));
    }
  }
  std::vector<int> sample_shape(input.shape.begin() + (batched ? 1 : 0), input.shape.end());
  const auto shapes = infer_shapes(chain, sample_shape);
  const int N = batched ? input.dim(0) : 1;

  ForwardTrace<T> local;
  ForwardTrace<T>& tr = trace ? *trace : local;
  tr.acts.assign(chain.size() + 1, Tensor<T>());
  tr.conv_cols.assign(chain.size(), Tensor<T>());
  tr.pool_argmax.assign(chain.size(), {});
  tr.batch = N;
  tr.batched_input = batched;
  tr.acts[0] = Tensor<T>(batched_shape<T>(N, sample_shape), input.data);

  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LayerSpec& l = chain[i];
    const std::vector<int>& in_s = shapes[i];
    const std::vector<int>& out_s = shapes[i + 1];
    const Tensor<T>& x = tr.acts[i];
    Tensor<T> y;

    switch (l.kind) {
      case LayerKind::dense: {
        const int in = l.in_features, out = l.out_features;
        y = Tensor<T>(batched_shape<T>(N, out_s));
        ConstMatMap<T> X(x.ptr(), N, in);
        ConstMatMap<T> W(params.weights[i].ptr(), out, in);
        MatMap<T> Y(y.ptr(), N, out);
        Y.noalias() = X * W.transpose();
        const T* b = params.biases[i].ptr();
        for (int n = 0; n < N; ++n) {
          T* yr = y.ptr() + static_cast<std::size_t>(n) * out;
          for (int o = 0; o < out; ++o) yr[o] += b[o];
        }
        break;
      }
      case LayerKind::conv2d: {
        const int C = l.in_channels, K = l.kernel, S = l.stride;
        const int H = in_s[1], W = in_s[2];
        const int OC = l.out_channels, OH = out_s[1], OW = out_s[2];
        const int P = OH * OW, CKK = C * K * K;
        const long NP = static_cast<long>(N) * P;

        Tensor<T> col({CKK, static_cast<int>(NP)});
        T* cp = col.ptr();
        const T* xp = x.ptr();
        for (int n = 0; n < N; ++n) {
          const T* xs = xp + static_cast<std::size_t>(n) * C * H * W;
          for (int c = 0; c < C; ++c) {
            const T* src = xs + static_cast<std::size_t>(c) * H * W;
            for (int kh = 0; kh < K; ++kh) {
              for (int kw = 0; kw < K; ++kw) {
                const int r = (c * K + kh) * K + kw;
                T* dst = cp + static_cast<std::size_t>(r) * NP + static_cast<std::size_t>(n) * P;
                int idx = 0;
                for (int oh = 0; oh < OH; ++oh) {
                  const T* row = src + (oh * S + kh) * W + kw;
                  for (int ow = 0; ow < OW; ++ow) dst[idx++] = row[ow * S];
                }
              }
            }
          }
        }

        Tensor<T> yall({OC, static_cast<int>(NP)});
        {
          ConstMatMap<T> Wm(params.weights[i].ptr(), OC, CKK);
          ConstMatMap<T> Cm(col.ptr(), CKK, NP);
          MatMap<T> Ym(yall.ptr(), OC, NP);
          Ym.noalias() = Wm * Cm;
        }
        y = Tensor<T>(batched_shape<T>(N, out_s));
        const T* bp = params.biases[i].ptr();
        for (int n = 0; n < N; ++n) {
          for (int oc = 0; oc < OC; ++oc) {
            const T* srow = yall.ptr() + static_cast<std::size_t>(oc) * NP +
                            static_cast<std::size_t>(n) * P;
            T* drow = y.ptr() + (static_cast<std::size_t>(n) * OC + oc) * P;
            const T bv = bp[oc];
            for (int p = 0; p < P; ++p) drow[p] = srow[p] + bv;
          }
        }
        tr.conv_cols[i] = std::move(col);
        break;
      }
      case LayerKind::maxpool2d: {
        const int C = in_s[0], H = in_s[1], W = in_s[2], P = l.pool;
        const int OH = out_s[1], OW = out_s[2];
        y = Tensor<T>(batched_shape<T>(N, out_s));
        auto& am = tr.pool_argmax[i];
        am.resize(static_cast<std::size_t>(N) * C * OH * OW);
        const T* xp = x.ptr();
        T* yp = y.ptr();
        std::size_t o = 0;
        for (int n = 0; n < N; ++n) {
          for (int c = 0; c < C; ++c) {
            const std::size_t plane = (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int oh = 0; oh < OH; ++oh) {
              for (int ow = 0; ow < OW; ++ow) {
                std::size_t best = plane + static_cast<std::size_t>(oh * P) * W + ow * P;
                T bv = xp[best];
                for (int kh = 0; kh < P; ++kh) {
                  for (int kw = 0; kw < P; ++kw) {
                    const std::size_t idx =
                        plane + static_cast<std::size_t>(oh * P + kh) * W + (ow * P + kw);
                    if (xp[idx] > bv) {  // ties keep the first index
                      bv = xp[idx];
                      best = idx;
                    }
                  }
                }
                yp[o] = bv;
                am[o] = static_cast<int>(best);
                ++o;
              }
            }
          }
        }
        break;
      }
      case LayerKind::relu: {
        y = Tensor<T>(x.shape);
        for (std::size_t j = 0; j < x.size(); ++j)
          y.data[j] = x.data[j] > T(0) ? x.data[j] : T(0);
        break;
      }
      case LayerKind::sigmoid: {
        y = Tensor<T>(x.shape);
        for (std::size_t j = 0; j < x.size(); ++j)
          y.data[j] = T(1) / (T(1) + std::exp(-x.data[j]));
        break;
      }
      case LayerKind::flatten: {
        y = x.reshaped(batched_shape<T>(N, out_s));
        break;
      }
    }
    tr.acts[i + 1] = std::move(y);
  }

  Tensor<T> out = tr.acts.back();
  if (!batched) out = out.reshaped(shapes.back());
  return out;
}

template <typename T>
Gradients<T> backward(const LayerChain& chain, const NetworkParams<T>& params,
                      const ForwardTrace<T>& trace, const Tensor<T>& output_grad,
                      Tensor<T>* input_grad) {
  validate_params(chain, params);
  if (trace.acts.size() != chain.size() + 1 || trace.conv_cols.size() != chain.size())
    throw std::invalid_argument("backward: trace does not match chain");
  const Tensor<T>& yact = trace.acts.back();
  if (output_grad.size() != yact.size())
    throw std::invalid_argument("backward: output gradient has " +
                                std::to_string(output_grad.size()) + " elements, traced output " +
                                std::to_string(yact.size()));

  Gradients<T> g = zero_gradients(params);
  const int N = trace.batch;
  Tensor<T> cur(yact.shape, output_grad.data);

  for (int li = static_cast<int>(chain.size()) - 1; li >= 0; --li) {
    const LayerSpec& l = chain[static_cast<std::size_t>(li)];
    const Tensor<T>& x = trace.acts[static_cast<std::size_t>(li)];
    const Tensor<T>& y = trace.acts[static_cast<std::size_t>(li) + 1];
    if (cur.size() != y.size())
      throw std::invalid_argument("backward: gradient size diverged at layer " +
                                  std::to_string(li));
    Tensor<T> dx;

    switch (l.kind) {
      case LayerKind::dense: {
        const int in = l.in_features, out = l.out_features;
        dx = Tensor<T>(x.shape);
        ConstMatMap<T> X(x.ptr(), N, in);
        ConstMatMap<T> W(params.weights[li].ptr(), out, in);
        ConstMatMap<T> dY(cur.ptr(), N, out);
        MatMap<T> dW(g.weights[li].ptr(), out, in);
        MatMap<T> dX(dx.ptr(), N, in);
        dW.noalias() = dY.transpose() * X;
        dX.noalias() = dY * W;
        T* db = g.biases[li].ptr();
        for (int n = 0; n < N; ++n) {
          const T* r = cur.ptr() + static_cast<std::size_t>(n) * out;
          for (int o = 0; o < out; ++o) db[o] += r[o];
        }
        break;
      }
      case LayerKind::conv2d: {
        const int C = l.in_channels, K = l.kernel, S = l.stride;
        const int H = x.dim(2), W = x.dim(3);
        const int OC = l.out_channels, OH = y.dim(2), OW = y.dim(3);
        const int P = OH * OW, CKK = C * K * K;
        const long NP = static_cast<long>(N) * P;
        const Tensor<T>& col = trace.conv_cols[static_cast<std::size_t>(li)];
        if (col.size() != static_cast<std::size_t>(CKK) * NP)
          throw std::invalid_argument("backward: missing conv trace at layer " +
                                      std::to_string(li));

        // gather dY into [OC, N*P]
        Tensor<T> dyall({OC, static_cast<int>(NP)});
        for (int n = 0; n < N; ++n) {
          for (int oc = 0; oc < OC; ++oc) {
            const T* srow = cur.ptr() + (static_cast<std::size_t>(n) * OC + oc) * P;
            T* drow = dyall.ptr() + static_cast<std::size_t>(oc) * NP +
                      static_cast<std::size_t>(n) * P;
            for (int p = 0; p < P; ++p) drow[p] = srow[p];
          }
        }

        {
          ConstMatMap<T> dY(dyall.ptr(), OC, NP);
          ConstMatMap<T> Cm(col.ptr(), CKK, NP);
          MatMap<T> dW(g.weights[li].ptr(), OC, CKK);
          dW.noalias() = dY * Cm.transpose();
          // plain left-to-right sum: Eigen's vectorized redux peels by the
          // runtime address, which reorders float adds between identical runs
          T* db = g.biases[li].ptr();
          const T* dyp = dyall.ptr();
          for (int oc = 0; oc < OC; ++oc) {
            T s = T(0);
            const T* row = dyp + static_cast<std::size_t>(oc) * NP;
            for (std::size_t p = 0; p < NP; ++p) s += row[p];
            db[oc] = s;
          }
        }

        Tensor<T> dcol({CKK, static_cast<int>(NP)});
        {
          ConstMatMap<T> Wm(params.weights[li].ptr(), OC, CKK);
          ConstMatMap<T> dY(dyall.ptr(), OC, NP);
          MatMap<T> dC(dcol.ptr(), CKK, NP);
          dC.noalias() = Wm.transpose() * dY;
        }

        dx = Tensor<T>(x.shape);
        T* dxp = dx.ptr();
        const T* dcp = dcol.ptr();
        for (int n = 0; n < N; ++n) {
          T* dxs = dxp + static_cast<std::size_t>(n) * C * H * W;
          for (int c = 0; c < C; ++c) {
            T* dst = dxs + static_cast<std::size_t>(c) * H * W;
            for (int kh = 0; kh < K; ++kh) {
              for (int kw = 0; kw < K; ++kw) {
                const int r = (c * K + kh) * K + kw;
                const T* src =
                    dcp + static_cast<std::size_t>(r) * NP + static_cast<std::size_t>(n) * P;
                int idx = 0;
                for (int oh = 0; oh < OH; ++oh) {
                  T* row = dst + (oh * S + kh) * W + kw;
                  for (int ow = 0; ow < OW; ++ow) row[ow * S] += src[idx++];
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::maxpool2d: {
        dx = Tensor<T>(x.shape);
        const auto& am = trace.pool_argmax[static_cast<std::size_t>(li)];
        if (am.size() != cur.size())
          throw std::invalid_argument("backward: missing pool trace at layer " +
                                      std::to_string(li));
        for (std::size_t j = 0; j < cur.size(); ++j)
          dx.data[static_cast<std::size_t>(am[j])] += cur.data[j];
        break;
      }
      case LayerKind::relu: {
        dx = Tensor<T>(x.shape);
        for (std::size_t j = 0; j < x.size(); ++j)
          dx.data[j] = x.data[j] > T(0) ? cur.data[j] : T(0);
        break;
      }
      case LayerKind::sigmoid: {
        dx = Tensor<T>(x.shape);
        for (std::size_t j = 0; j < x.size(); ++j)
          dx.data[j] = cur.data[j] * y.data[j] * (T(1) - y.data[j]);
        break;
      }
      case LayerKind::flatten: {
        dx = cur.reshaped(x.shape);
        break;
      }
    }
    cur = std::move(dx);
  }

  if (input_grad) {
    if (trace.batched_input) {
      *input_grad = std::move(cur);
    } else {
      std::vector<int> sample(cur.shape.begin() + 1, cur.shape.end());
      *input_grad = cur.reshaped(sample);
    }
  }
  return g;
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;

template NetworkParams<float> init_params<float>(const LayerChain&, std::uint64_t);
template NetworkParams<double> init_params<double>(const LayerChain&, std::uint64_t);
template Gradients<float> zero_gradients<float>(const NetworkParams<float>&);
template Gradients<double> zero_gradients<double>(const NetworkParams<double>&);
template Tensor<float> forward<float>(const LayerChain&, const NetworkParams<float>&,
                                      const Tensor<float>&, ForwardTrace<float>*);
template Tensor<double> forward<double>(const LayerChain&, const NetworkParams<double>&,
                                        const Tensor<double>&, ForwardTrace<double>*);
template Gradients<float> backward<float>(const LayerChain&, const NetworkParams<float>&,
                                          const ForwardTrace<float>&, const Tensor<float>&,
                                          Tensor<float>*);
template Gradients<double> backward<double>(const LayerChain&, const NetworkParams<double>&,
                                            const ForwardTrace<double>&, const Tensor<double>&,
                                            Tensor<double>*);

}  // namespace dqnf
