#pragma once

// Fixed-topology MLP: masked linear layers, LayerNorm -> ReLU on hidden
// layers, a dense affine output layer and softmax cross-entropy. Gradients are
// derived by hand. T is float for training and double for gradient checks.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "psn/data_io.hpp"
#include "psn/maskgen.hpp"
#include "psn/matrix.hpp"

namespace psn {

struct NetworkSpec {
  std::vector<int> layer_dims;  // input, hidden..., classes

  std::size_t num_layers() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
  std::size_t num_hidden() const { return num_layers() == 0 ? 0 : num_layers() - 1; }
  bool is_hidden(std::size_t layer) const { return layer + 1 < num_layers(); }
  int inputs() const { return layer_dims.front(); }
  int classes() const { return layer_dims.back(); }
  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct Layer {
  int in = 0;
  int out = 0;
  bool hidden = false;

  Matrix<T> weight;  // out x in
  std::vector<T> bias;
  std::vector<T> gain;   // LayerNorm, hidden only
  std::vector<T> shift;  // LayerNorm, hidden only
  std::optional<SparseMask> mask;

  // Active columns per row (CSR). All columns for dense layers.
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> cols;

  // Adam moments.
  Matrix<T> weight_m, weight_v;
  std::vector<T> bias_m, bias_v, gain_m, gain_v, shift_m, shift_v;

  std::span<const std::uint32_t> active_cols(int row) const {
    return {cols.data() + row_ptr[static_cast<std::size_t>(row)],
            row_ptr[static_cast<std::size_t>(row) + 1] - row_ptr[static_cast<std::size_t>(row)]};
  }
  std::size_t nonzeros() const { return cols.size(); }

  // Rebuild the CSR view after the mask changed and zero inactive weights.
  void sync_mask();
};

template <typename T>
struct NetworkState {
  NetworkSpec spec;
  std::vector<Layer<T>> layers;
  std::int64_t step = 0;
};

// Weight std for a layer: sqrt(2 / mean fan-in), using realized sparsity.
double init_std(int n_inputs, double realized_sparsity);

// `masks` has one entry per hidden layer (nullopt keeps it dense). Weights are
// N(0, 2/E[f]) per layer, biases and shifts 0, gains 1, masks applied.
template <typename T>
NetworkState<T> init_network(const NetworkSpec& spec, const std::vector<std::optional<SparseMask>>& masks,
                             std::uint64_t seed);

template <typename T>
struct ForwardCache {
  std::vector<Matrix<T>> acts;  // acts[l] is the input of layer l (features x batch)
  std::vector<Matrix<T>> xhat;  // normalized pre-activations of hidden layers
  std::vector<std::vector<T>> rstd;
  Matrix<T> logits;  // classes x batch
  std::size_t batch() const { return logits.cols(); }
};

// `input` is features x batch.
template <typename T>
ForwardCache<T> forward(const NetworkState<T>& state, Matrix<T> input);

enum class GradMode {
  kActive,  // weight gradients only at active positions, zero elsewhere
  kFull,    // gradients at every position, including masked-out ones
};

template <typename T>
struct LayerGrad {
  Matrix<T> weight;
  std::vector<T> bias, gain, shift;
};

template <typename T>
struct Gradients {
  std::vector<LayerGrad<T>> layers;
  GradMode mode = GradMode::kActive;
  std::optional<Matrix<T>> input;  // dL/dx, features x batch, on request
};

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Gradients<T> grads;
};

template <typename T>
LossAndGrad<T> loss_and_backward(const NetworkState<T>& state, const ForwardCache<T>& cache,
                                 std::span<const int> labels, GradMode mode = GradMode::kActive,
                                 bool input_grad = false);

// Mean softmax cross-entropy only.
template <typename T>
double cross_entropy(const Matrix<T>& logits, std::span<const int> labels);

// One Adam step with bias correction on active weights, biases and LayerNorm
// parameters. Masked-out weights stay exactly zero.
template <typename T>
void adam_step(NetworkState<T>& state, const Gradients<T>& grads, const AdamConfig& cfg);

// Gather samples into a features x batch block.
template <typename T>
Matrix<T> gather_batch(const Dataset& ds, std::span<const std::size_t> indices);

// Argmax accuracy, ties to the lowest class index.
template <typename T>
double evaluate(const NetworkState<T>& state, const Dataset& ds, std::size_t chunk = 500);

// True if every masked layer has zero weight wherever its mask is zero.
template <typename T>
bool masks_respected(const NetworkState<T>& state);

}  // namespace psn
