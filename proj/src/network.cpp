#include "psn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "psn/error.hpp"
#include "psn/rng.hpp"
#include "psn/simd/kernels.hpp"

namespace psn {
namespace {

const std::vector<std::uint32_t>& iota_cols(std::size_t n) {
  thread_local std::vector<std::uint32_t> cols;
  if (cols.size() < n) {
    const std::size_t old = cols.size();
    cols.resize(n);
    std::iota(cols.begin() + static_cast<std::ptrdiff_t>(old), cols.end(), static_cast<std::uint32_t>(old));
  }
  return cols;
}

// Softmax probabilities minus one-hot targets, divided by the batch size.
template <typename T>
Matrix<T> softmax_grad(const Matrix<T>& logits, std::span<const int> labels, double& loss) {
  const std::size_t classes = logits.rows();
  const std::size_t batch = logits.cols();
  Matrix<T> d(classes, batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    T mx = logits(0, b);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits(c, b));
    T sum{0};
    for (std::size_t c = 0; c < classes; ++c) {
      const T e = std::exp(logits(c, b) - mx);
      d(c, b) = e;
      sum += e;
    }
    const int y = labels[b];
    total += static_cast<double>(std::log(sum) + mx - logits(static_cast<std::size_t>(y), b));
    const T inv_b = T{1} / static_cast<T>(batch);
    for (std::size_t c = 0; c < classes; ++c) {
      d(c, b) = (d(c, b) / sum - (static_cast<int>(c) == y ? T{1} : T{0})) * inv_b;
    }
  }
  loss = total / static_cast<double>(batch);
  return d;
}

void check_labels(std::span<const int> labels, std::size_t batch, int classes) {
  if (labels.size() != batch) throw ValidationError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

template <typename T>
void check_finite(std::span<const T> v, const char* what, std::int64_t step) {
  for (T x : v) {
    if (!std::isfinite(x)) {
      throw DivergenceError(std::string("non-finite ") + what + " gradient at optimizer step " +
                            std::to_string(step));
    }
  }
}

template <typename T>
simd::AdamCoeffs<T> coeffs(const AdamConfig& cfg, std::int64_t t) {
  return {static_cast<T>(cfg.lr),
          static_cast<T>(cfg.beta1),
          static_cast<T>(cfg.beta2),
          static_cast<T>(cfg.eps),
          static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t))),
          static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)))};
}

}  // namespace

void NetworkSpec::validate() const {
  if (layer_dims.size() < 3) {
    throw ValidationError("network needs an input, at least one hidden layer and an output layer");
  }
  for (int d : layer_dims) {
    if (d < 1) throw ValidationError("layer dimensions must be positive");
  }
  if (layer_dims.back() < 1) throw ValidationError("network needs at least one class");
}

double init_std(int n_inputs, double realized_sparsity) {
  const double mean_fanin = (1.0 - realized_sparsity) * n_inputs;
  if (!(mean_fanin > 0.0)) throw ValidationError("mean fan-in must be positive");
  return std::sqrt(2.0 / mean_fanin);
}

template <typename T>
void Layer<T>::sync_mask() {
  row_ptr.assign(static_cast<std::size_t>(out) + 1, 0);
  cols.clear();
  if (!mask) {
    cols.reserve(static_cast<std::size_t>(out) * in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) cols.push_back(static_cast<std::uint32_t>(j));
      row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::uint32_t>(cols.size());
    }
    return;
  }
  if (mask->rows() != out || mask->cols() != in) {
    throw ValidationError("mask is " + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols()) +
                          " but layer is " + std::to_string(out) + "x" + std::to_string(in));
  }
  cols.reserve(static_cast<std::size_t>(mask->count()));
  for (int i = 0; i < out; ++i) {
    const auto bits = mask->row_bits(i);
    auto w = weight.row(static_cast<std::size_t>(i));
    for (int j = 0; j < in; ++j) {
      if (bits[static_cast<std::size_t>(j)]) {
        cols.push_back(static_cast<std::uint32_t>(j));
      } else {
        w[static_cast<std::size_t>(j)] = T{0};
      }
    }
    row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::uint32_t>(cols.size());
  }
}

template <typename T>
NetworkState<T> init_network(const NetworkSpec& spec, const std::vector<std::optional<SparseMask>>& masks,
                             std::uint64_t seed) {
  spec.validate();
  if (!masks.empty() && masks.size() != spec.num_hidden()) {
    throw ValidationError("expected " + std::to_string(spec.num_hidden()) + " hidden-layer masks, got " +
                          std::to_string(masks.size()));
  }
  NetworkState<T> state;
  state.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Layer<T> layer;
    layer.in = spec.layer_dims[l];
    layer.out = spec.layer_dims[l + 1];
    layer.hidden = spec.is_hidden(l);
    if (layer.hidden && !masks.empty() && masks[l]) layer.mask = masks[l];

    double realized = 0.0;
    if (layer.mask) {
      if (layer.mask->rows() != layer.out || layer.mask->cols() != layer.in) {
        throw ValidationError("mask for layer " + std::to_string(l) + " has shape " +
                              std::to_string(layer.mask->rows()) + "x" + std::to_string(layer.mask->cols()) +
                              ", expected " + std::to_string(layer.out) + "x" + std::to_string(layer.in));
      }
      realized = 1.0 - static_cast<double>(layer.mask->count()) / (static_cast<double>(layer.out) * layer.in);
    }
    const double sd = init_std(layer.in, realized);
    layer.weight = Matrix<T>(static_cast<std::size_t>(layer.out), static_cast<std::size_t>(layer.in));
    Rng rng = make_rng(seed, Stream::kWeights, l);
    std::normal_distribution<double> normal(0.0, sd);
    for (auto& w : layer.weight.storage()) w = static_cast<T>(normal(rng));
    layer.bias.assign(static_cast<std::size_t>(layer.out), T{0});
    if (layer.hidden) {
      layer.gain.assign(static_cast<std::size_t>(layer.out), T{1});
      layer.shift.assign(static_cast<std::size_t>(layer.out), T{0});
    }
    layer.sync_mask();

    layer.weight_m = Matrix<T>(layer.weight.rows(), layer.weight.cols());
    layer.weight_v = Matrix<T>(layer.weight.rows(), layer.weight.cols());
    layer.bias_m.assign(layer.bias.size(), T{0});
    layer.bias_v.assign(layer.bias.size(), T{0});
    layer.gain_m.assign(layer.gain.size(), T{0});
    layer.gain_v.assign(layer.gain.size(), T{0});
    layer.shift_m.assign(layer.shift.size(), T{0});
    layer.shift_v.assign(layer.shift.size(), T{0});
    state.layers.push_back(std::move(layer));
  }
  return state;
}

template <typename T>
ForwardCache<T> forward(const NetworkState<T>& state, Matrix<T> input) {
  if (input.rows() != static_cast<std::size_t>(state.spec.inputs())) {
    throw ValidationError("input has " + std::to_string(input.rows()) + " features, network expects " +
                          std::to_string(state.spec.inputs()));
  }
  if (input.cols() == 0) throw ValidationError("empty batch");
  for (T v : input.storage()) {
    if (!std::isfinite(v)) throw ValidationError("non-finite input feature");
  }
  const auto& k = simd::kernels<T>();
  const std::size_t batch = input.cols();

  ForwardCache<T> cache;
  cache.acts.push_back(std::move(input));
  for (const Layer<T>& layer : state.layers) {
    const Matrix<T>& x = cache.acts.back();
    const auto out = static_cast<std::size_t>(layer.out);
    Matrix<T> z(out, batch);
    for (std::size_t i = 0; i < out; ++i) {
      auto zr = z.row(i);
      std::fill(zr.begin(), zr.end(), layer.bias[i]);
      const auto cols = layer.active_cols(static_cast<int>(i));
      k.row_forward(batch, cols.size(), cols.data(), layer.weight.row(i).data(), x.data(), batch, zr.data());
    }
    if (!layer.hidden) {
      cache.logits = std::move(z);
      break;
    }

    // LayerNorm across features, independently per sample (column).
    std::vector<T> mean(batch, T{0});
    std::vector<T> var(batch, T{0});
    for (std::size_t i = 0; i < out; ++i) {
      const T* zr = z.row(i).data();
      for (std::size_t b = 0; b < batch; ++b) mean[b] += zr[b];
    }
    const T inv_n = T{1} / static_cast<T>(out);
    for (auto& m : mean) m *= inv_n;
    for (std::size_t i = 0; i < out; ++i) {
      const T* zr = z.row(i).data();
      for (std::size_t b = 0; b < batch; ++b) {
        const T d = zr[b] - mean[b];
        var[b] += d * d;
      }
    }
    std::vector<T> rstd(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      rstd[b] = T{1} / std::sqrt(var[b] * inv_n + static_cast<T>(kLayerNormEps));
    }
    Matrix<T> a(out, batch);
    for (std::size_t i = 0; i < out; ++i) {
      T* zr = z.row(i).data();
      T* ar = a.row(i).data();
      const T g = layer.gain[i];
      const T s = layer.shift[i];
      for (std::size_t b = 0; b < batch; ++b) {
        const T xh = (zr[b] - mean[b]) * rstd[b];
        zr[b] = xh;
        const T y = g * xh + s;
        ar[b] = y > T{0} ? y : T{0};
      }
    }
    cache.xhat.push_back(std::move(z));
    cache.rstd.push_back(std::move(rstd));
    cache.acts.push_back(std::move(a));
  }
  return cache;
}

template <typename T>
double cross_entropy(const Matrix<T>& logits, std::span<const int> labels) {
  check_labels(labels, logits.cols(), static_cast<int>(logits.rows()));
  double loss = 0.0;
  softmax_grad(logits, labels, loss);
  return loss;
}

template <typename T>
LossAndGrad<T> loss_and_backward(const NetworkState<T>& state, const ForwardCache<T>& cache,
                                 std::span<const int> labels, GradMode mode, bool input_grad) {
  const std::size_t batch = cache.batch();
  check_labels(labels, batch, state.spec.classes());
  const auto& k = simd::kernels<T>();

  LossAndGrad<T> result;
  result.grads.mode = mode;
  result.grads.layers.resize(state.layers.size());

  Matrix<T> dz = softmax_grad(cache.logits, labels, result.loss);
  for (std::size_t l = state.layers.size(); l-- > 0;) {
    const Layer<T>& layer = state.layers[l];
    const Matrix<T>& x = cache.acts[l];
    LayerGrad<T>& g = result.grads.layers[l];
    const auto out = static_cast<std::size_t>(layer.out);
    const auto in = static_cast<std::size_t>(layer.in);

    g.weight = Matrix<T>(out, in);
    g.bias.assign(out, T{0});
    const auto& all = iota_cols(in);
    for (std::size_t i = 0; i < out; ++i) {
      const T* dzr = dz.row(i).data();
      if (mode == GradMode::kFull) {
        k.row_grad(batch, in, all.data(), dzr, x.data(), batch, g.weight.row(i).data());
      } else {
        const auto cols = layer.active_cols(static_cast<int>(i));
        k.row_grad(batch, cols.size(), cols.data(), dzr, x.data(), batch, g.weight.row(i).data());
      }
      T s{0};
      for (std::size_t b = 0; b < batch; ++b) s += dzr[b];
      g.bias[i] = s;
    }

    if (l == 0 && !input_grad) break;
    Matrix<T> dx(in, batch);
    for (std::size_t i = 0; i < out; ++i) {
      const auto cols = layer.active_cols(static_cast<int>(i));
      k.row_backprop(batch, cols.size(), cols.data(), layer.weight.row(i).data(), dz.row(i).data(), dx.data(),
                     batch);
    }
    if (l == 0) {
      result.grads.input = std::move(dx);
      break;
    }

    // dx is dL/d(activation) of hidden layer l-1; undo ReLU and LayerNorm.
    const Layer<T>& prev = state.layers[l - 1];
    LayerGrad<T>& pg = result.grads.layers[l - 1];
    const Matrix<T>& act = cache.acts[l];
    const Matrix<T>& xhat = cache.xhat[l - 1];
    const std::vector<T>& rstd = cache.rstd[l - 1];
    const std::size_t width = static_cast<std::size_t>(prev.out);
    pg.gain.assign(width, T{0});
    pg.shift.assign(width, T{0});
    std::vector<T> mean_dxh(batch, T{0});
    std::vector<T> mean_dxh_xh(batch, T{0});
    for (std::size_t i = 0; i < width; ++i) {
      T* d = dx.row(i).data();
      const T* ar = act.row(i).data();
      const T* xh = xhat.row(i).data();
      T dgain{0}, dshift{0};
      const T gi = prev.gain[i];
      for (std::size_t b = 0; b < batch; ++b) {
        const T dy = ar[b] > T{0} ? d[b] : T{0};
        dgain += dy * xh[b];
        dshift += dy;
        const T dxh = dy * gi;
        d[b] = dxh;
        mean_dxh[b] += dxh;
        mean_dxh_xh[b] += dxh * xh[b];
      }
      pg.gain[i] = dgain;
      pg.shift[i] = dshift;
    }
    const T inv_n = T{1} / static_cast<T>(width);
    for (std::size_t b = 0; b < batch; ++b) {
      mean_dxh[b] *= inv_n;
      mean_dxh_xh[b] *= inv_n;
    }
    for (std::size_t i = 0; i < width; ++i) {
      T* d = dx.row(i).data();
      const T* xh = xhat.row(i).data();
      for (std::size_t b = 0; b < batch; ++b) d[b] = rstd[b] * (d[b] - mean_dxh[b] - xh[b] * mean_dxh_xh[b]);
    }
    dz = std::move(dx);
  }
  return result;
}

template <typename T>
void adam_step(NetworkState<T>& state, const Gradients<T>& grads, const AdamConfig& cfg) {
  if (grads.layers.size() != state.layers.size()) throw ValidationError("gradient/network layer mismatch");
  const std::int64_t t = state.step + 1;
  for (const auto& g : grads.layers) {
    check_finite<T>(g.bias, "bias", t);
    check_finite<T>(g.gain, "LayerNorm gain", t);
    check_finite<T>(g.shift, "LayerNorm shift", t);
  }
  const auto& k = simd::kernels<T>();
  const auto c = coeffs<T>(cfg, t);
  const T one{1};
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    Layer<T>& layer = state.layers[l];
    const LayerGrad<T>& g = grads.layers[l];
    if (layer.mask) {
      for (int i = 0; i < layer.out; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * layer.in;
        for (std::uint32_t j : layer.active_cols(i)) {
          const std::size_t p = base + j;
          const T gi = g.weight.data()[p];
          if (!std::isfinite(gi)) {
            throw DivergenceError("non-finite weight gradient at optimizer step " + std::to_string(t) +
                                  " (layer " + std::to_string(l) + ")");
          }
          T& m = layer.weight_m.data()[p];
          T& v = layer.weight_v.data()[p];
          m = c.beta1 * m + (one - c.beta1) * gi;
          v = c.beta2 * v + (one - c.beta2) * gi * gi;
          layer.weight.data()[p] -= c.lr * (m / c.correction1) / (std::sqrt(v / c.correction2) + c.eps);
        }
      }
    } else {
      check_finite<T>(g.weight.storage(), "weight", t);
      k.adam(layer.weight.size(), layer.weight.data(), g.weight.data(), layer.weight_m.data(),
             layer.weight_v.data(), c);
    }
    k.adam(layer.bias.size(), layer.bias.data(), g.bias.data(), layer.bias_m.data(), layer.bias_v.data(), c);
    if (layer.hidden) {
      k.adam(layer.gain.size(), layer.gain.data(), g.gain.data(), layer.gain_m.data(), layer.gain_v.data(), c);
      k.adam(layer.shift.size(), layer.shift.data(), g.shift.data(), layer.shift_m.data(), layer.shift_v.data(),
             c);
    }
  }
  state.step = t;
}

template <typename T>
Matrix<T> gather_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t dim = ds.dim();
  Matrix<T> x(dim, indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= ds.size()) throw ValidationError("batch index out of range");
    const auto row = ds.features.row(indices[b]);
    for (std::size_t d = 0; d < dim; ++d) x(d, b) = static_cast<T>(row[d]);
  }
  return x;
}

template <typename T>
double evaluate(const NetworkState<T>& state, const Dataset& ds, std::size_t chunk) {
  if (ds.size() == 0) throw ValidationError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t end = std::min(ds.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto cache = forward(state, gather_batch<T>(ds, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < cache.logits.rows(); ++c) {
        if (cache.logits(c, b) > cache.logits(best, b)) best = c;
      }
      if (static_cast<int>(best) == ds.labels[idx[b]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

template <typename T>
bool masks_respected(const NetworkState<T>& state) {
  for (const auto& layer : state.layers) {
    if (!layer.mask) continue;
    const auto bits = layer.mask->bits();
    const auto& w = layer.weight.storage();
    for (std::size_t p = 0; p < w.size(); ++p) {
      if (!bits[p] && w[p] != T{0}) return false;
    }
  }
  return true;
}

#define PSN_INSTANTIATE(T)                                                                                   \
  template struct Layer<T>;                                                                                   \
  template NetworkState<T> init_network<T>(const NetworkSpec&, const std::vector<std::optional<SparseMask>>&, \
                                           std::uint64_t);                                                    \
  template ForwardCache<T> forward<T>(const NetworkState<T>&, Matrix<T>);                                     \
  template double cross_entropy<T>(const Matrix<T>&, std::span<const int>);                                   \
  template LossAndGrad<T> loss_and_backward<T>(const NetworkState<T>&, const ForwardCache<T>&,               \
                                               std::span<const int>, GradMode, bool);                         \
  template void adam_step<T>(NetworkState<T>&, const Gradients<T>&, const AdamConfig&);                       \
  template Matrix<T> gather_batch<T>(const Dataset&, std::span<const std::size_t>);                          \
  template double evaluate<T>(const NetworkState<T>&, const Dataset&, std::size_t);                           \
  template bool masks_respected<T>(const NetworkState<T>&);

PSN_INSTANTIATE(float)
PSN_INSTANTIATE(double)

#undef PSN_INSTANTIATE

}  // namespace psn
