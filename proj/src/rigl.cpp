#include "psn/rigl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "psn/config.hpp"
#include "psn/error.hpp"
#include "psn/rng.hpp"

namespace psn {

RigLInit RigLInit::parse(std::string_view text) {
  RigLInit init;
  if (text == "erk") {
    init.kind = Kind::kErk;
  } else if (text == "uniform") {
    init.kind = Kind::kUniform;
  } else if (text.starts_with("lognormal:")) {
    init.kind = Kind::kLognormal;
    const auto arg = text.substr(10);
    const auto res = std::from_chars(arg.data(), arg.data() + arg.size(), init.target_ccv);
    if (res.ec != std::errc() || res.ptr != arg.data() + arg.size() || !(init.target_ccv >= 0.0)) {
      throw ValidationError("bad lognormal CCV in RigL init '" + std::string(text) + "'");
    }
  } else {
    throw ValidationError("unknown RigL init '" + std::string(text) + "' (expected erk, uniform or lognormal:<ccv>)");
  }
  return init;
}

std::string RigLInit::describe() const {
  switch (kind) {
    case Kind::kErk:
      return "erk";
    case Kind::kUniform:
      return "uniform";
    case Kind::kLognormal: {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof(buf), target_ccv);
      return "lognormal:" + std::string(buf, res.ptr);
    }
  }
  return "unknown";
}

void RigLConfig::validate() const {
  if (!(drop_fraction > 0.0 && drop_fraction < 1.0)) throw ValidationError("drop fraction must lie in (0, 1)");
  if (update_period < 1) throw ValidationError("update period must be >= 1");
  if (!(schedule_end > 0.0 && schedule_end <= 1.0)) throw ValidationError("schedule end must lie in (0, 1]");
}

std::vector<double> erk_densities(const NetworkSpec& spec, double sparsity) {
  spec.validate();
  const std::size_t layers = spec.num_hidden();
  std::vector<double> size(layers), score(layers), density(layers, 0.0);
  double budget = 0.0;
  for (std::size_t l = 0; l < layers; ++l) {
    const double n_in = spec.layer_dims[l];
    const double n_out = spec.layer_dims[l + 1];
    size[l] = n_in * n_out;
    score[l] = (n_in + n_out) / (n_in * n_out);
    budget += (1.0 - sparsity) * size[l];
  }
  std::vector<bool> capped(layers, false);
  // Water-filling: any layer whose density would exceed 1 is fixed dense and
  // the scale is recomputed over the rest.
  for (;;) {
    double free_budget = budget;
    double weighted = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      if (capped[l]) {
        free_budget -= size[l];
      } else {
        weighted += score[l] * size[l];
      }
    }
    const double eps = weighted > 0.0 ? free_budget / weighted : 0.0;
    bool changed = false;
    for (std::size_t l = 0; l < layers; ++l) {
      if (!capped[l] && eps * score[l] > 1.0) {
        capped[l] = true;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t l = 0; l < layers; ++l) density[l] = capped[l] ? 1.0 : eps * score[l];
      return density;
    }
  }
}

std::vector<SparseMask> init_rigl_masks(const RigLInit& init, const NetworkSpec& spec, double sparsity, int f_min,
                                        std::uint64_t seed) {
  spec.validate();
  std::vector<SparseMask> masks;
  const auto densities = init.kind == RigLInit::Kind::kErk ? erk_densities(spec, sparsity) : std::vector<double>{};
  for (std::size_t l = 0; l < spec.num_hidden(); ++l) {
    const int n = spec.layer_dims[l];
    const int m = spec.layer_dims[l + 1];
    switch (init.kind) {
      case RigLInit::Kind::kUniform: {
        ProfileSpec p;
        masks.push_back(spread_random(allocate_fanin(p, n, m, sparsity, f_min), seed, l));
        break;
      }
      case RigLInit::Kind::kLognormal:
        masks.push_back(spread_random(lognormal_fanin(init.target_ccv, n, m, sparsity, f_min, seed + l), seed, l));
        break;
      case RigLInit::Kind::kErk: {
        // Exactly round(density * n * m) positions, uniformly over the layer.
        const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
        const auto keep = static_cast<std::size_t>(std::llround(densities[l] * static_cast<double>(total)));
        if (keep < 1) throw InfeasibleError("ERK leaves layer " + std::to_string(l) + " without connections");
        std::vector<std::uint32_t> pos(total);
        std::iota(pos.begin(), pos.end(), 0u);
        Rng rng = make_rng(seed, Stream::kMask, l);
        for (std::size_t k = 0; k < keep; ++k) {
          std::swap(pos[k], pos[k + uniform_below(rng, total - k)]);
        }
        SparseMask mask(m, n);
        for (std::size_t k = 0; k < keep; ++k) mask.set(static_cast<int>(pos[k] / n), static_cast<int>(pos[k] % n), true);
        mask.spreading = Spreading::kRandom;
        mask.seed = seed;
        mask.provenance.fanin = mask.fanin();
        mask.provenance.n_inputs = n;
        mask.provenance.target_sparsity = sparsity;
        mask.provenance.realized_sparsity = 1.0 - static_cast<double>(keep) / static_cast<double>(total);
        mask.provenance.f_min = 0;
        masks.push_back(std::move(mask));
        break;
      }
    }
  }
  return masks;
}

double cosine_drop_fraction(std::int64_t step, std::int64_t t_end, double alpha) {
  if (step < 0) throw ValidationError("step must be >= 0");
  if (step >= t_end) return 0.0;
  return 0.5 * alpha * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(t_end)));
}

template <typename T>
std::vector<RigLLayerUpdate> rigl_update(NetworkState<T>& state, const Gradients<T>& grads, double drop_fraction) {
  if (grads.mode != GradMode::kFull) throw ValidationError("RigL growth needs unmasked gradients");
  std::vector<RigLLayerUpdate> updates;
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    auto& layer = state.layers[l];
    if (!layer.mask) continue;
    const auto& g = grads.layers[l].weight;
    const std::size_t cols = static_cast<std::size_t>(layer.in);
    const std::size_t total = static_cast<std::size_t>(layer.out) * cols;
    const auto bits = layer.mask->bits();

    std::vector<std::size_t> active, inactive;
    active.reserve(layer.nonzeros());
    inactive.reserve(total - layer.nonzeros());
    for (std::size_t p = 0; p < total; ++p) (bits[p] ? active : inactive).push_back(p);

    RigLLayerUpdate up;
    up.layer = l;
    auto k = static_cast<std::size_t>(std::llround(drop_fraction * static_cast<double>(active.size())));
    if (k > inactive.size()) {
      up.clamped = true;
      k = inactive.size();
    }
    if (k > 0) {
      const auto* w = layer.weight.data();
      // Lowest |w| first; position breaks ties.
      std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(k), active.end(),
                        [&](std::size_t a, std::size_t b) {
                          const T wa = std::abs(w[a]), wb = std::abs(w[b]);
                          return wa != wb ? wa < wb : a < b;
                        });
      // Highest |g| first among positions inactive before this update, so a
      // just-dropped connection cannot come straight back.
      const auto* gd = g.data();
      std::partial_sort(inactive.begin(), inactive.begin() + static_cast<std::ptrdiff_t>(k), inactive.end(),
                        [&](std::size_t a, std::size_t b) {
                          const T ga = std::abs(gd[a]), gb = std::abs(gd[b]);
                          return ga != gb ? ga > gb : a < b;
                        });
      up.dropped.assign(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(k));
      up.grown.assign(inactive.begin(), inactive.begin() + static_cast<std::ptrdiff_t>(k));
      auto reset = [&](std::size_t p) {
        layer.weight.data()[p] = T{0};
        layer.weight_m.data()[p] = T{0};
        layer.weight_v.data()[p] = T{0};
      };
      for (std::size_t p : up.dropped) {
        layer.mask->set(static_cast<int>(p / cols), static_cast<int>(p % cols), false);
        reset(p);
      }
      for (std::size_t p : up.grown) {
        layer.mask->set(static_cast<int>(p / cols), static_cast<int>(p % cols), true);
        reset(p);
      }
      layer.sync_mask();
    }
    if (up.clamped) {
      std::cerr << "warning: RigL update on layer " << l << " clamped to " << k << " swaps\n";
    }
    updates.push_back(std::move(up));
  }
  return updates;
}

double TopologySnapshot::mean_ccv() const {
  if (ccv.empty()) return 0.0;
  return std::accumulate(ccv.begin(), ccv.end(), 0.0) / static_cast<double>(ccv.size());
}

TopologySnapshot snapshot(const NetworkState<float>& net) {
  TopologySnapshot s;
  s.step = net.step;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (!layer.mask) continue;
    s.layers.push_back(l);
    s.fanin.push_back(layer.mask->fanin());
    s.ccv.push_back(fanin_stats(s.fanin.back()).cv);
    s.nonzeros.push_back(layer.mask->count());
  }
  return s;
}

RigLResult train_rigl(const TrainConfig& config, const RigLConfig& rigl, const DatasetPair& data,
                      NetworkState<float>* final_state) {
  config.validate();
  rigl.validate();
  const auto spec = config.network(static_cast<int>(data.test.dim()), data.test.num_classes);
  std::vector<std::optional<SparseMask>> masks;
  for (auto& m : init_rigl_masks(rigl.init, spec, config.sparsity, config.f_min, config.seed)) masks.emplace_back(std::move(m));
  auto net = init_network<float>(spec, masks, config.seed);

  const std::size_t n = data.train.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;
  const auto t_end = static_cast<std::int64_t>(std::floor(rigl.schedule_end * static_cast<double>(total_steps)));
  auto is_update = [&](std::int64_t step) { return step % rigl.update_period == 0 && step < t_end; };

  RigLResult result;
  result.snapshots.push_back(snapshot(net));
  TrainHooks hooks;
  hooks.grad_mode = [&](std::int64_t next) { return is_update(next) ? GradMode::kFull : GradMode::kActive; };
  hooks.after_step = [&](NetworkState<float>& state, const Gradients<float>& grads, std::int64_t step) {
    if (!is_update(step)) return;
    rigl_update(state, grads, cosine_drop_fraction(step, t_end, rigl.drop_fraction));
    ++result.updates;
    result.snapshots.push_back(snapshot(state));
  };
  result.record = run_training(config, data, net, hooks);
  if (result.snapshots.back().step != net.step) result.snapshots.push_back(snapshot(net));

  auto& record = result.record;
  record.trainer = "rigl";
  record.config_hash = config_hash(config, &rigl);
  record.dataset = config.dataset;
  record.profile = "rigl:" + rigl.init.describe();
  record.spreading = "random";
  record.target_sparsity = config.sparsity;
  record.f_min = config.f_min;
  record.seed = config.seed;
  record_topology(net, record);
  if (final_state != nullptr) *final_state = std::move(net);
  return result;
}

void write_topology_csv(std::ostream& out, const std::vector<TopologySnapshot>& snapshots) {
  out << "step,layer,mean_fanin,ccv,nonzeros\n";
  for (const auto& s : snapshots) {
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      out << s.step << ',' << s.layers[i] << ',' << fanin_stats(s.fanin[i]).mean << ',' << s.ccv[i] << ','
          << s.nonzeros[i] << '\n';
    }
  }
}

template std::vector<RigLLayerUpdate> rigl_update(NetworkState<float>&, const Gradients<float>&, double);
template std::vector<RigLLayerUpdate> rigl_update(NetworkState<double>&, const Gradients<double>&, double);

}  // namespace psn
