#pragma once
// Fixed-mask training: allocation -> mask -> network, Adam over shuffled
// mini-batches, test accuracy after every epoch.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psn/data_io.hpp"
#include "psn/maskgen.hpp"
#include "psn/metrics.hpp"
#include "psn/network.hpp"
#include "psn/profiles.hpp"

namespace psn {

struct TrainConfig {
  std::string dataset = "mnist";
  std::vector<int> hidden = {1024, 1024};  // widths; input and class counts come from the data
  ProfileSpec profile;
  Spreading spreading = Spreading::kRandom;
  double sparsity = 0.9;
  int f_min = 1;
  int epochs = 5;
  int batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  // Epoch after which the gradient ratio is measured, on the first batch of
  // the following epoch's shuffle. -1 disables it.
  int gradient_ratio_epoch = 1;

  void validate() const;
  NetworkSpec network(int inputs, int classes) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double wall_ms = 0.0;  // cumulative since the run started
};

struct RunRecord {
  std::string config_hash;
  std::string trainer = "static";
  std::string dataset;
  std::string profile;
  std::string spreading;
  double target_sparsity = 0.0;
  int f_min = 1;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  double realized_sparsity = 0.0;               // over all masked weights
  std::vector<double> layer_realized_sparsity;  // per masked layer
  std::vector<double> fanin_ccv;                // per masked layer, at the end of training
  std::optional<GradientHierarchyReport> gradient;
  std::vector<double> losses;  // every optimizer step, for reproducibility checks
  double wall_ms = 0.0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Hooks for trainers that extend the static loop. `grad_mode` is queried
// before step t (1-based count after the step); `after_step` runs after the
// optimizer update with the gradients of that step.
struct TrainHooks {
  std::function<GradMode(std::int64_t next_step)> grad_mode;
  std::function<void(NetworkState<float>&, const Gradients<float>&, std::int64_t step)> after_step;
};

// Hidden-layer masks for a static run (one per hidden layer, layer index as
// the random stream).
std::vector<std::optional<SparseMask>> build_static_masks(const TrainConfig& config, const NetworkSpec& spec);

// Runs the loop on an initialized network. Fills epochs, losses, accuracy
// and gradient fields; the caller fills identification fields.
RunRecord run_training(const TrainConfig& config, const DatasetPair& data, NetworkState<float>& net,
                       const TrainHooks& hooks = {});

// `final_state`, when given, receives the trained network.
RunRecord train_static(const TrainConfig& config, const DatasetPair& data, NetworkState<float>* final_state = nullptr);

// Records the masks' realized sparsity and fan-in CCV into `record`.
void record_topology(const NetworkState<float>& net, RunRecord& record);

// Results table. One row per epoch.
void write_csv_header(std::ostream& out);
void write_csv_rows(std::ostream& out, const RunRecord& record);
inline constexpr const char* kCsvHeader =
    "dataset,profile,spreading,target_sparsity,realized_sparsity,f_min,seed,epoch,train_loss,test_accuracy,"
    "fanin_ccv_l1,fanin_ccv_l2,gradient_ratio_l1,gradient_ratio_l2,wall_ms";

}  // namespace psn
