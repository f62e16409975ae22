// psn: command-line front end.
//
//   psn gen-mask --config mask.json --out fc1.mask
//   psn train --config run.json [--seed N] [--out DIR]
//   psn sweep --config grid.json [--jobs N] [--out DIR]
//   psn rigl-equilibrium --config rigl.json [--seed N] [--out DIR]
//
// Exit codes: 0 success, 2 invalid or infeasible configuration, 3 runtime
// failure (I/O, corrupt data, divergence, failed sweep runs).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "psn/checkpoint.hpp"
#include "psn/config.hpp"
#include "psn/error.hpp"
#include "psn/simd/kernels.hpp"
#include "psn/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace psn;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

struct MaskRequest {
  ProfileSpec profile;
  int inputs = 784;
  int outputs = 1024;
  double sparsity = 0.9;
  int f_min = 1;
  Spreading spreading = Spreading::kEven;
  std::uint64_t seed = 42;
};

MaskRequest parse_mask_request(const json& j) {
  static const std::set<std::string> known = {"profile", "inputs", "outputs", "sparsity", "f_min", "spreading", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown gen-mask key '" + key + "'");
  }
  MaskRequest r;
  try {
    if (j.contains("profile")) r.profile = parse_profile(j.at("profile").get<std::string>());
    r.inputs = j.value("inputs", r.inputs);
    r.outputs = j.value("outputs", r.outputs);
    r.sparsity = j.value("sparsity", r.sparsity);
    r.f_min = j.value("f_min", r.f_min);
    if (j.contains("spreading")) r.spreading = parse_spreading(j.at("spreading").get<std::string>());
    r.seed = j.value("seed", r.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed gen-mask config: ") + e.what());
  }
  return r;
}

int cmd_gen_mask(const MaskRequest& r, const fs::path& out) {
  const auto alloc = allocate_fanin(r.profile, r.inputs, r.outputs, r.sparsity, r.f_min, r.seed);
  const auto mask = build_mask(alloc, r.spreading, r.seed);
  const auto ms = mask_stats(mask);
  const auto fs_ = fanin_stats(alloc);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    std::ofstream f(out);
    if (!f) throw Error("cannot write " + out.string());
    write_mask(f, mask);
  }
  json side{{"profile", describe(r.profile)},
            {"spreading", std::string(to_string(r.spreading))},
            {"seed", r.seed},
            {"inputs", r.inputs},
            {"outputs", r.outputs},
            {"f_min", r.f_min},
            {"target_sparsity", r.sparsity},
            {"realized_sparsity", alloc.realized_sparsity},
            {"max_sparsity", max_sparsity(r.f_min, r.inputs)},
            {"fanin", {{"mean", fs_.mean}, {"std", fs_.std}, {"ccv", fs_.cv}, {"min", fs_.min}, {"max", fs_.max}}},
            {"fanout",
             {{"mean", ms.fanout_mean}, {"std", ms.fanout_std}, {"min", ms.fanout_min}, {"max", ms.fanout_max}}},
            {"dead_inputs", ms.dead_inputs}};
  const fs::path sidecar = out.string() + ".json";
  std::ofstream(sidecar) << side.dump(2) << '\n';
  std::cout << out.string() << ": " << r.outputs << "x" << r.inputs << ", CCV " << fs_.cv << ", realized sparsity "
            << alloc.realized_sparsity << ", dead inputs " << ms.dead_inputs << '\n';
  return 0;
}

ExperimentConfig load_with_overrides(const fs::path& config, std::optional<std::uint64_t> seed,
                                     const std::string& out) {
  json j = read_json(config);
  if (seed) {
    j.erase("seeds");
    j["seed"] = *seed;
  }
  if (!out.empty()) j["out"] = out;
  return parse_experiment(j);
}

DatasetPair load_data(const ExperimentConfig& exp) { return load_named_dataset(exp.dataset, exp.data_dir, 0); }

void print_ccv(const RunRecord& rec) {
  std::cout << rec.profile << " seed " << rec.seed << ": final accuracy " << rec.final_accuracy << ", layer CCV";
  for (double c : rec.fanin_ccv) std::cout << ' ' << c;
  std::cout << '\n';
}

int cmd_train(const ExperimentConfig& exp) {
  const auto runs = exp.expand();
  if (runs.size() != 1) {
    throw ValidationError("train expects a single run but the config expands to " + std::to_string(runs.size()) +
                          "; use sweep");
  }
  const auto& run = runs.front();
  const auto data = load_data(exp);
  ResultSink sink(exp.out);
  NetworkState<float> net;
  RunRecord rec;
  if (run.rigl) {
    const auto res = train_rigl(run.train, run.rigl_config, data, &net);
    rec = res.record;
    std::ofstream topo(fs::path(exp.out) / (run.hash + "_topology.csv"));
    write_topology_csv(topo, res.snapshots);
  } else {
    rec = train_static(run.train, data, &net);
  }
  sink.append(rec);
  save_checkpoint(fs::path(exp.out) / (run.hash + ".ckpt"), net);
  for (const auto& e : rec.epochs) {
    std::cout << "epoch " << e.epoch << ": loss " << e.train_loss << ", test accuracy " << e.test_accuracy << '\n';
  }
  print_ccv(rec);
  return 0;
}

int cmd_sweep(const ExperimentConfig& exp, int jobs) {
  ResultSink sink(exp.out);
  const auto done = sink.completed();
  std::vector<RunSpec> todo;
  const auto all = exp.expand();
  for (const auto& run : all) {
    if (!done.contains({run.hash, run.train.seed})) todo.push_back(run);
  }
  std::cout << all.size() << " runs, " << all.size() - todo.size() << " already complete, " << todo.size()
            << " to run\n";
  if (todo.empty()) return 0;
  const auto data = load_data(exp);
  std::mutex print_mu;
  const auto records = run_sweep(todo, data, jobs, [&](const RunRecord& rec) {
    sink.append(rec);
    std::lock_guard lock(print_mu);
    if (rec.ok()) {
      std::cout << rec.config_hash << " " << rec.profile << " " << rec.spreading << " s=" << rec.target_sparsity
                << " seed " << rec.seed << ": " << rec.final_accuracy << '\n';
    } else {
      std::cout << rec.config_hash << " seed " << rec.seed << " FAILED: " << rec.error << '\n';
    }
  });
  int failed = 0;
  for (const auto& rec : records) failed += rec.ok() ? 0 : 1;
  std::cout << records.size() - static_cast<std::size_t>(failed) << " succeeded, " << failed << " failed\n";
  return failed == 0 ? 0 : kExitRuntime;
}

int cmd_rigl_equilibrium(ExperimentConfig exp) {
  exp.trainer = "rigl";
  exp.validate();
  const auto data = load_data(exp);
  ResultSink sink(exp.out);
  for (const auto& run : exp.expand()) {
    const auto res = train_rigl(run.train, run.rigl_config, data);
    sink.append(res.record);
    std::ofstream topo(fs::path(exp.out) / (run.hash + "_topology.csv"));
    write_topology_csv(topo, res.snapshots);
    std::cout << "init " << run.rigl_config.init.describe() << " seed " << run.train.seed << " (" << res.updates
              << " updates): final CCV per layer";
    for (double c : res.snapshots.back().ccv) std::cout << ' ' << c;
    std::cout << ", mean " << res.snapshots.back().mean_ccv() << ", accuracy " << res.record.final_accuracy << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profiled sparse network laboratory"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  auto* gen = app.add_subcommand("gen-mask", "Build a mask and write it with a stats sidecar");
  MaskRequest req;
  std::string profile, spreading;
  gen->add_option("--config", config, "JSON with profile, inputs, outputs, sparsity, f_min, spreading, seed");
  gen->add_option("--out", out, "Mask file to write")->required();
  gen->add_option("--seed", seed, "Override the seed");
  gen->add_option("--profile", profile, "Profile, e.g. exponential or lognormal:2.43");
  gen->add_option("--spreading", spreading, "even, random or sequential");
  gen->add_option("--inputs", req.inputs);
  gen->add_option("--outputs", req.outputs);
  gen->add_option("--sparsity", req.sparsity);
  gen->add_option("--f-min", req.f_min);

  auto* train = app.add_subcommand("train", "Train one configuration");
  auto* sweep = app.add_subcommand("sweep", "Run every configuration in a grid");
  auto* rigl = app.add_subcommand("rigl-equilibrium", "Run RigL and report the final fan-in CCV");
  for (auto* sub : {train, sweep, rigl}) {
    sub->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
  }
  train->add_option("--seed", seed, "Override the seed list");
  rigl->add_option("--seed", seed, "Override the seed list");
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      MaskRequest r = config.empty() ? MaskRequest{} : parse_mask_request(read_json(config));
      for (const auto* opt : {"--inputs", "--outputs", "--sparsity", "--f-min"}) {
        if (gen->count(opt) == 0) continue;
        const std::string o = opt;
        if (o == "--inputs") r.inputs = req.inputs;
        if (o == "--outputs") r.outputs = req.outputs;
        if (o == "--sparsity") r.sparsity = req.sparsity;
        if (o == "--f-min") r.f_min = req.f_min;
      }
      if (!profile.empty()) r.profile = parse_profile(profile);
      if (!spreading.empty()) r.spreading = parse_spreading(spreading);
      if (seed) r.seed = *seed;
      return cmd_gen_mask(r, out);
    }
    const auto exp = load_with_overrides(config, seed, out.string());
    if (train->parsed()) return cmd_train(exp);
    if (sweep->parsed()) return cmd_sweep(exp, jobs);
    if (rigl->parsed()) return cmd_rigl_equilibrium(exp);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
