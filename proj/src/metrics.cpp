#include "psn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psn/error.hpp"

namespace psn {

HubSplit split_at_median(std::span<const int> fanin) {
  if (fanin.empty()) throw ValidationError("cannot split an empty fan-in vector");
  std::vector<int> sorted(fanin.begin(), fanin.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  HubSplit split;
  split.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (std::size_t i = 0; i < n; ++i) {
    (fanin[i] > split.median ? split.hubs : split.specialists).push_back(static_cast<int>(i));
  }
  return split;
}

template <typename T>
GradientHierarchyReport gradient_ratio(const NetworkState<T>& state, const Gradients<T>& grads, std::int64_t batch_id) {
  if (grads.layers.size() != state.layers.size()) throw ValidationError("gradient snapshot does not match network");
  GradientHierarchyReport report;
  report.batch_id = batch_id;
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const auto& layer = state.layers[l];
    if (!layer.mask) continue;
    const auto fanin = layer.mask->fanin();
    const auto split = split_at_median(fanin);
    LayerGradientStats st;
    st.layer = l;
    st.fanin_cv = fanin_stats(fanin).cv;
    auto group = [&](const std::vector<int>& rows, double& neuron_mean, double& weight_mean, std::size_t& count) {
      double sum = 0.0;
      std::size_t weights = 0;
      for (int r : rows) {
        for (std::uint32_t c : layer.active_cols(r)) {
          sum += std::abs(static_cast<double>(grads.layers[l].weight(static_cast<std::size_t>(r), c)));
          ++weights;
        }
      }
      count = rows.size();
      neuron_mean = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
      weight_mean = weights == 0 ? 0.0 : sum / static_cast<double>(weights);
    };
    group(split.hubs, st.hub_mean, st.hub_weight_mean, st.hub_count);
    group(split.specialists, st.spec_mean, st.spec_weight_mean, st.spec_count);
    st.degenerate = split.degenerate() || st.spec_mean == 0.0;
    st.ratio = st.degenerate ? 1.0 : st.hub_mean / st.spec_mean;
    report.layers.push_back(st);
  }
  return report;
}

template <typename T>
GradientHierarchyReport gradient_ratio(const NetworkState<T>& state, const Matrix<T>& input,
                                       std::span<const int> labels, std::int64_t batch_id) {
  if (input.cols() == 0) throw ValidationError("gradient ratio needs a nonempty batch");
  const auto lg = loss_and_backward(state, forward(state, input), labels, GradMode::kActive);
  return gradient_ratio(state, lg.grads, batch_id);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("pearson needs two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("correlation undefined: a series has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double cv_gradient_correlation(std::span<const std::pair<double, double>> cv_ratio, double min_cv_range) {
  if (cv_ratio.size() < 5) {
    throw ValidationError("CV-gradient correlation needs at least 5 configurations, got " +
                          std::to_string(cv_ratio.size()));
  }
  std::vector<double> cv, ratio;
  for (const auto& [c, r] : cv_ratio) {
    cv.push_back(c);
    ratio.push_back(r);
  }
  const auto [lo, hi] = std::minmax_element(cv.begin(), cv.end());
  if (*hi - *lo < min_cv_range) {
    std::ostringstream msg;
    msg << "CV range " << (*hi - *lo) << " is below the required " << min_cv_range;
    throw ValidationError(msg.str());
  }
  return pearson(cv, ratio);
}

template <typename T>
std::vector<double> activation_parity(const NetworkState<T>& state, const Matrix<T>& input) {
  const auto cache = forward(state, input);
  std::vector<double> out;
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const auto& layer = state.layers[l];
    if (!layer.mask) continue;
    const auto split = split_at_median(layer.mask->fanin());
    if (split.degenerate()) {
      out.push_back(1.0);
      continue;
    }
    const auto& act = cache.acts[l + 1];
    auto mean_abs = [&](const std::vector<int>& rows) {
      double sum = 0.0;
      for (int r : rows) {
        for (T v : act.row(static_cast<std::size_t>(r))) sum += std::abs(static_cast<double>(v));
      }
      return sum / static_cast<double>(rows.size() * act.cols());
    };
    out.push_back(mean_abs(split.hubs) / mean_abs(split.specialists));
  }
  return out;
}

template GradientHierarchyReport gradient_ratio(const NetworkState<float>&, const Gradients<float>&, std::int64_t);
template GradientHierarchyReport gradient_ratio(const NetworkState<double>&, const Gradients<double>&, std::int64_t);
template GradientHierarchyReport gradient_ratio(const NetworkState<float>&, const Matrix<float>&, std::span<const int>,
                                                std::int64_t);
template GradientHierarchyReport gradient_ratio(const NetworkState<double>&, const Matrix<double>&,
                                                std::span<const int>, std::int64_t);
template std::vector<double> activation_parity(const NetworkState<float>&, const Matrix<float>&);
template std::vector<double> activation_parity(const NetworkState<double>&, const Matrix<double>&);

}  // namespace psn
