#pragma once
// Dynamic sparse training: periodic magnitude drop and gradient grow under a
// cosine-decayed drop fraction, with ERK / uniform / lognormal starting masks.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psn/trainer.hpp"

namespace psn {

struct RigLInit {
  enum class Kind { kErk, kUniform, kLognormal };
  Kind kind = Kind::kErk;
  double target_ccv = 0.0;  // lognormal only

  // "erk", "uniform", "lognormal:<ccv>"
  static RigLInit parse(std::string_view text);
  std::string describe() const;
  bool operator==(const RigLInit&) const = default;
};

struct RigLConfig {
  double drop_fraction = 0.3;
  int update_period = 100;
  double schedule_end = 0.75;  // fraction of total steps
  RigLInit init;

  void validate() const;
};

// Per-hidden-layer densities for ERK: proportional to (n_in + n_out) /
// (n_in n_out), scaled to the global budget, capped at 1 by water-filling.
std::vector<double> erk_densities(const NetworkSpec& spec, double sparsity);

std::vector<SparseMask> init_rigl_masks(const RigLInit& init, const NetworkSpec& spec, double sparsity, int f_min,
                                        std::uint64_t seed);

// (alpha / 2)(1 + cos(pi step / t_end)) before t_end, 0 from t_end on.
double cosine_drop_fraction(std::int64_t step, std::int64_t t_end, double alpha);

struct RigLLayerUpdate {
  std::size_t layer = 0;
  std::vector<std::size_t> dropped;  // row-major positions
  std::vector<std::size_t> grown;
  bool clamped = false;  // fewer inactive positions than requested
};

// One topology update on every masked layer using unmasked gradients.
// Dropped and grown weights are zero afterwards with reset Adam moments.
template <typename T>
std::vector<RigLLayerUpdate> rigl_update(NetworkState<T>& state, const Gradients<T>& grads, double drop_fraction);

struct TopologySnapshot {
  std::int64_t step = 0;
  std::vector<std::size_t> layers;
  std::vector<std::vector<int>> fanin;
  std::vector<double> ccv;
  std::vector<long long> nonzeros;

  double mean_ccv() const;
};

TopologySnapshot snapshot(const NetworkState<float>& net);

struct RigLResult {
  RunRecord record;
  std::vector<TopologySnapshot> snapshots;  // at step 0, every update and the end
  int updates = 0;
};

RigLResult train_rigl(const TrainConfig& config, const RigLConfig& rigl, const DatasetPair& data,
                      NetworkState<float>* final_state = nullptr);

// Columns: step, layer, mean_fanin, ccv, nonzeros.
void write_topology_csv(std::ostream& out, const std::vector<TopologySnapshot>& snapshots);

}  // namespace psn
