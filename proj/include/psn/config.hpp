#pragma once
// Experiment configs: a JSON tree expanded into individual runs, and the
// stable digest that names each run.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "psn/rigl.hpp"
#include "psn/trainer.hpp"

namespace psn {

// One (config, seed) unit of work.
struct RunSpec {
  TrainConfig train;
  bool rigl = false;
  RigLConfig rigl_config;
  std::string hash;
};

struct ExperimentConfig {
  std::string dataset = "mnist";
  std::string data_dir;  // empty: $PSN_DATA_DIR
  std::vector<int> hidden = {1024, 1024};
  std::vector<ProfileSpec> profiles = {ProfileSpec{}};
  std::vector<Spreading> spreadings = {Spreading::kRandom};
  std::vector<double> sparsities = {0.9};
  int f_min = 1;
  std::vector<std::uint64_t> seeds = {42};
  int epochs = 5;
  int batch_size = 128;
  double lr = 1e-3;
  int gradient_ratio_epoch = 1;
  std::string trainer = "static";  // or "rigl"
  RigLConfig rigl;
  std::vector<RigLInit> rigl_inits = {RigLInit{}};
  std::string out = "results";

  // Throws ValidationError on the first violated precondition of any run.
  void validate() const;
  // Cartesian product, seeds innermost.
  std::vector<RunSpec> expand() const;
};

// Accepts scalar or list forms ("profile" / "profiles", "seed" / "seeds",
// ...). Unknown keys are rejected.
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Sorted keys, every number as a double.
nlohmann::json canonicalize(const nlohmann::json& j);
std::string canonical_hash(const nlohmann::json& j);  // 16 hex digits

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const RigLConfig& config);
// Digest of the full run description including the seed.
std::string config_hash(const TrainConfig& config, const RigLConfig* rigl = nullptr);

}  // namespace psn
