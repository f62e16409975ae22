#pragma once
// Post-hoc diagnostics over a gradient snapshot: hub/specialist gradient
// ratio, its correlation with fan-in CV, and activation parity.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "psn/network.hpp"

namespace psn {

// Neurons ranked by fan-in and split at the median. Fan-ins equal to the
// median go to the specialist group. Both lists are in neuron order.
struct HubSplit {
  std::vector<int> hubs;
  std::vector<int> specialists;
  double median = 0.0;
  bool degenerate() const { return hubs.empty() || specialists.empty(); }
};
HubSplit split_at_median(std::span<const int> fanin);

// A neuron's gradient magnitude is the L1 norm of its incoming weight
// gradient over active positions. Group values are means over neurons.
struct LayerGradientStats {
  std::size_t layer = 0;
  double hub_mean = 0.0;
  double spec_mean = 0.0;
  double ratio = 1.0;  // hub_mean / spec_mean
  // Per-weight mean |dL/dW| over active weights of each group, for reference.
  double hub_weight_mean = 0.0;
  double spec_weight_mean = 0.0;
  double fanin_cv = 0.0;
  std::size_t hub_count = 0;
  std::size_t spec_count = 0;
  bool degenerate = false;  // one group empty; ratio forced to 1
};

struct GradientHierarchyReport {
  std::vector<LayerGradientStats> layers;  // masked layers only
  std::int64_t batch_id = 0;
};

// Uses gradients at active positions only; masked-out positions never count.
template <typename T>
GradientHierarchyReport gradient_ratio(const NetworkState<T>& state, const Gradients<T>& grads,
                                       std::int64_t batch_id = 0);

// One forward-backward pass on `input` (features x batch).
template <typename T>
GradientHierarchyReport gradient_ratio(const NetworkState<T>& state, const Matrix<T>& input,
                                       std::span<const int> labels, std::int64_t batch_id = 0);

// Pearson r between fan-in CV and gradient ratio. Requires at least 5 pairs
// whose CVs span at least `min_cv_range`.
double cv_gradient_correlation(std::span<const std::pair<double, double>> cv_ratio, double min_cv_range = 1.0);

double pearson(std::span<const double> x, std::span<const double> y);

// Mean |post-ReLU activation| of hubs over specialists, per masked layer.
template <typename T>
std::vector<double> activation_parity(const NetworkState<T>& state, const Matrix<T>& input);

}  // namespace psn
