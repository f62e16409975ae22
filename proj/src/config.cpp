#include "psn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "psn/error.hpp"

namespace psn {
namespace {

using nlohmann::json;

template <typename T, typename Convert>
std::vector<T> scalar_or_list(const json& j, const char* single, const char* plural, std::vector<T> fallback,
                              Convert convert) {
  if (j.contains(single) && j.contains(plural)) {
    throw ValidationError(std::string("give either '") + single + "' or '" + plural + "', not both");
  }
  std::vector<T> out;
  if (j.contains(single)) {
    out.push_back(convert(j.at(single)));
  } else if (j.contains(plural)) {
    const auto& list = j.at(plural);
    if (!list.is_array() || list.empty()) throw ValidationError(std::string("'") + plural + "' must be a nonempty list");
    for (const auto& v : list) out.push_back(convert(v));
  } else {
    out = std::move(fallback);
  }
  return out;
}

ProfileSpec profile_from(const json& v) {
  if (v.is_string()) return parse_profile(v.get<std::string>());
  if (!v.is_object()) throw ValidationError("profile must be a string or an object");
  ProfileSpec p;
  p.family = parse_profile_family(v.at("family").get<std::string>());
  p.alpha = v.value("alpha", p.alpha);
  p.beta = v.value("beta", p.beta);
  p.peaks = v.value("peaks", p.peaks);
  p.target_ccv = v.value("target_ccv", p.target_ccv);
  p.inverted = v.value("inverted", p.inverted);
  p.validate();
  return p;
}

template <typename T>
T get_as(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  static const std::set<std::string> known = {
      "dataset", "data_dir",   "hidden",      "profile",    "profiles", "spreading",  "spreadings",
      "sparsity", "sparsities", "f_min",      "seed",       "seeds",    "epochs",     "batch_size",
      "lr",      "trainer",    "rigl",        "out",        "gradient_ratio_epoch"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.dataset = get_as<std::string>(j, "dataset", c.dataset);
    c.data_dir = get_as<std::string>(j, "data_dir", c.data_dir);
    c.hidden = get_as<std::vector<int>>(j, "hidden", c.hidden);
    c.profiles = scalar_or_list<ProfileSpec>(j, "profile", "profiles", c.profiles, profile_from);
    c.spreadings = scalar_or_list<Spreading>(j, "spreading", "spreadings", c.spreadings,
                                             [](const json& v) { return parse_spreading(v.get<std::string>()); });
    c.sparsities = scalar_or_list<double>(j, "sparsity", "sparsities", c.sparsities,
                                          [](const json& v) { return v.get<double>(); });
    c.seeds = scalar_or_list<std::uint64_t>(j, "seed", "seeds", c.seeds,
                                            [](const json& v) { return v.get<std::uint64_t>(); });
    c.f_min = get_as<int>(j, "f_min", c.f_min);
    c.epochs = get_as<int>(j, "epochs", c.epochs);
    c.batch_size = get_as<int>(j, "batch_size", c.batch_size);
    c.lr = get_as<double>(j, "lr", c.lr);
    c.gradient_ratio_epoch = get_as<int>(j, "gradient_ratio_epoch", c.gradient_ratio_epoch);
    c.trainer = get_as<std::string>(j, "trainer", c.trainer);
    c.out = get_as<std::string>(j, "out", c.out);
    if (j.contains("rigl")) {
      const auto& r = j.at("rigl");
      if (!r.is_object()) throw ValidationError("'rigl' must be an object");
      static const std::set<std::string> rigl_keys = {"drop_fraction", "update_period", "schedule_end", "init",
                                                      "inits"};
      for (const auto& [key, _] : r.items()) {
        if (!rigl_keys.contains(key)) throw ValidationError("unknown rigl key '" + key + "'");
      }
      c.rigl.drop_fraction = get_as<double>(r, "drop_fraction", c.rigl.drop_fraction);
      c.rigl.update_period = get_as<int>(r, "update_period", c.rigl.update_period);
      c.rigl.schedule_end = get_as<double>(r, "schedule_end", c.rigl.schedule_end);
      c.rigl_inits = scalar_or_list<RigLInit>(r, "init", "inits", c.rigl_inits,
                                              [](const json& v) { return RigLInit::parse(v.get<std::string>()); });
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

void ExperimentConfig::validate() const {
  if (trainer != "static" && trainer != "rigl") throw ValidationError("trainer must be 'static' or 'rigl'");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (trainer == "rigl") rigl.validate();
  // Every run is checked up front, including mask feasibility, before any
  // data is touched. Input width is unknown here, so layer 0 is checked
  // against each hidden-to-hidden layer only when the dataset is known.
  for (const auto& run : expand()) {
    run.train.validate();
    std::vector<int> dims;
    if (run.train.dataset == "mnist" || run.train.dataset == "fashion_mnist" ||
        run.train.dataset == "emnist_balanced") {
      dims.push_back(784);
    } else if (run.train.dataset == "covertype") {
      dims.push_back(54);
    }
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      if (run.rigl) {
        if (run.rigl_config.init.kind == RigLInit::Kind::kLognormal) {
          lognormal_fanin(run.rigl_config.init.target_ccv, dims[l], dims[l + 1], run.train.sparsity, f_min,
                          run.train.seed + l);
        } else {
          allocate_fanin(ProfileSpec{}, dims[l], dims[l + 1], run.train.sparsity, f_min);
        }
      } else {
        allocate_fanin(run.train.profile, dims[l], dims[l + 1], run.train.sparsity, f_min, run.train.seed + l);
      }
    }
  }
}

std::vector<RunSpec> ExperimentConfig::expand() const {
  std::vector<RunSpec> runs;
  TrainConfig base;
  base.dataset = dataset;
  base.hidden = hidden;
  base.f_min = f_min;
  base.epochs = epochs;
  base.batch_size = batch_size;
  base.lr = lr;
  base.gradient_ratio_epoch = gradient_ratio_epoch;
  auto add = [&](TrainConfig t, bool is_rigl, RigLConfig r) {
    for (auto seed : seeds) {
      RunSpec run;
      run.train = t;
      run.train.seed = seed;
      run.rigl = is_rigl;
      run.rigl_config = r;
      run.hash = config_hash(run.train, is_rigl ? &run.rigl_config : nullptr);
      runs.push_back(std::move(run));
    }
  };
  if (trainer == "rigl") {
    for (const auto& init : rigl_inits) {
      for (double s : sparsities) {
        TrainConfig t = base;
        t.sparsity = s;
        RigLConfig r = rigl;
        r.init = init;
        add(t, true, r);
      }
    }
  } else {
    for (const auto& p : profiles) {
      for (auto sp : spreadings) {
        for (double s : sparsities) {
          TrainConfig t = base;
          t.profile = p;
          t.spreading = sp;
          t.sparsity = s;
          add(t, false, rigl);
        }
      }
    }
  }
  return runs;
}

json canonicalize(const json& j) {
  if (j.is_object()) {
    json out = json::object();  // std::map keeps keys sorted
    for (const auto& [k, v] : j.items()) out[k] = canonicalize(v);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(canonicalize(v));
    return out;
  }
  if (j.is_number()) return j.get<double>();
  return j;
}

std::string canonical_hash(const json& j) {
  const std::string text = canonicalize(j).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const TrainConfig& c) {
  return json{{"dataset", c.dataset},
              {"hidden", c.hidden},
              {"profile", describe(c.profile)},
              {"spreading", std::string(to_string(c.spreading))},
              {"sparsity", c.sparsity},
              {"f_min", c.f_min},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"seed", c.seed},
              {"gradient_ratio_epoch", c.gradient_ratio_epoch}};
}

json to_json(const RigLConfig& c) {
  return json{{"drop_fraction", c.drop_fraction},
              {"update_period", c.update_period},
              {"schedule_end", c.schedule_end},
              {"init", c.init.describe()}};
}

std::string config_hash(const TrainConfig& config, const RigLConfig* rigl) {
  json j = to_json(config);
  if (rigl != nullptr) {
    j["trainer"] = "rigl";
    j["rigl"] = to_json(*rigl);
    j.erase("profile");
    j.erase("spreading");
  } else {
    j["trainer"] = "static";
  }
  return canonical_hash(j);
}

}  // namespace psn
