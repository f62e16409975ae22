// Acceptance suite. Prints one PASS/FAIL line per criterion; with no
// arguments every criterion runs, otherwise only the listed numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "psn/error.hpp"
#include "psn/metrics.hpp"
#include "psn/rigl.hpp"
#include "psn/trainer.hpp"

using namespace psn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Datasets are loaded once per process.
const DatasetPair& dataset(const std::string& id) {
  static std::map<std::string, DatasetPair> cache;
  auto it = cache.find(id);
  if (it == cache.end()) it = cache.emplace(id, load_named_dataset(id)).first;
  return it->second;
}

TrainConfig mnist_config(const std::string& profile, double sparsity, std::uint64_t seed, int epochs) {
  TrainConfig c;
  c.dataset = "mnist";
  c.profile = parse_profile(profile);
  c.spreading = Spreading::kRandom;
  c.sparsity = sparsity;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

// --- 1: finite differences --------------------------------------------------

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  NetworkSpec spec{{6, 8, 4}};
  ProfileSpec uniform;
  std::vector<std::optional<SparseMask>> masks{spread_random(allocate_fanin(uniform, 6, 8, 0.7, 1), 5)};
  auto net = init_network<double>(spec, masks, 5);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : net.layers) {
    for (auto& b : layer.bias) b = u(rng);
    for (auto& g : layer.gain) g = 1.0 + u(rng);
    for (auto& s : layer.shift) s = u(rng);
  }
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix<double> x(6, 7);
  for (auto& v : x.storage()) v = n01(rng);
  const std::vector<int> y{0, 1, 2, 3, 0, 2, 1};
  const auto lg = loss_and_backward(net, forward(net, x), y);

  const double eps = 1e-3;
  double worst = 0.0;
  int params = 0;
  auto check = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + eps;
    const double up = cross_entropy(forward(net, x).logits, y);
    p = saved - eps;
    const double down = cross_entropy(forward(net, x).logits, y);
    p = saved;
    const double fd = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-7}));
    ++params;
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const auto& g = lg.grads.layers[l];
    for (int i = 0; i < layer.out; ++i) {
      for (std::uint32_t j : layer.active_cols(i)) check(layer.weight(i, j), g.weight(i, j));
      check(layer.bias[i], g.bias[i]);
      if (layer.hidden) {
        check(layer.gain[i], g.gain[i]);
        check(layer.shift[i], g.shift[i]);
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 5.0,
          std::to_string(params) + " parameters, worst relative error " + std::to_string(worst) + ", " +
              fmt(secs, 3) + " s"};
}

// --- 2: mask invariants -----------------------------------------------------

Outcome mask_invariants() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> profiles{"linear",        "quadratic",   "exponential",    "bell",
                                          "inverse_bell",  "lognormal:1", "powerlaw:1",     "multipeak:4:50",
                                          "uniform_random", "inv_exponential"};
  int masks = 0;
  std::string first_failure;
  for (const auto& name : profiles) {
    for (auto spreading : {Spreading::kEven, Spreading::kRandom, Spreading::kSequential}) {
      for (double s : {0.8, 0.9, 0.98}) {
        const auto alloc = allocate_fanin(parse_profile(name), 784, 1024, s, 1, 42);
        const auto mask = build_mask(alloc, spreading, 42);
        ++masks;
        bool ok = mask.rows() == 1024 && mask.cols() == 784;
        for (int i = 0; ok && i < 1024; ++i) {
          const int f = alloc.fanin[static_cast<std::size_t>(i)];
          ok = mask.row_sum(i) == f && f >= 1 && f <= 784;
        }
        const double realized = 1.0 - static_cast<double>(mask.count()) / (784.0 * 1024.0);
        ok = ok && std::abs(realized - alloc.realized_sparsity) < 1e-12 &&
             std::abs(mask_stats(mask).realized_sparsity - realized) < 1e-12;
        if (!ok && first_failure.empty()) {
          first_failure = name + "/" + std::string(to_string(spreading)) + "/" + fmt(s, 2);
        }
      }
    }
  }
  const double secs = seconds_since(start);
  return {first_failure.empty() && secs < 10.0,
          std::to_string(masks) + " masks" + (first_failure.empty() ? "" : ", first failure " + first_failure) +
              ", " + fmt(secs, 2) + " s"};
}

// --- 3: S_max table ---------------------------------------------------------

Outcome smax_table() {
  const auto start = std::chrono::steady_clock::now();
  const std::map<std::pair<int, int>, double> table{
      {{784, 1}, 99.87}, {{784, 5}, 99.36}, {{784, 10}, 98.72}, {{784, 20}, 97.45},
      {{54, 1}, 98.15},  {{54, 5}, 90.74},  {{54, 10}, 81.48},  {{54, 20}, 62.96}};
  bool ok = true;
  std::string detail;
  for (const auto& [key, want] : table) {
    const double got = std::round(max_sparsity(key.second, key.first) * 1e4) / 100.0;
    ok = ok && std::abs(got - want) < 1e-9;
    detail += "n=" + std::to_string(key.first) + "/f=" + std::to_string(key.second) + ":" + fmt(got, 2) + " ";
  }
  const double secs = seconds_since(start);
  return {ok && secs < 1.0, detail};
}

// --- 4, 5: exponential allocation and sequential dead inputs ---------------

Outcome exponential_allocation() {
  const auto st = fanin_stats(allocate_fanin(parse_profile("exponential"), 784, 1024, 0.9, 1));
  return {st.max == 247 && st.min == 12 && st.mean >= 77.4 && st.mean <= 78.4,
          "max " + std::to_string(st.max) + ", min " + std::to_string(st.min) + ", mean " + fmt(st.mean, 3)};
}

Outcome sequential_dead_inputs() {
  const auto alloc = allocate_fanin(parse_profile("exponential"), 784, 1024, 0.9, 1);
  const int dead = mask_stats(spread_sequential(alloc)).dead_inputs;
  return {dead == 537, std::to_string(dead) + " dead inputs"};
}

// --- 6: CCV targeting -------------------------------------------------------

Outcome ccv_targeting() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail = "lognormal";
  for (double t : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const double cv = fanin_stats(lognormal_fanin(t, 784, 1024, 0.9, 1, 42)).cv;
    ok = ok && std::abs(cv - t) <= 0.02;
    detail += " " + fmt(cv, 3);
  }
  detail += "; powerlaw";
  for (double t : {0.5, 1.0, 1.5, 2.0}) {
    try {
      const double cv = fanin_stats(powerlaw_fanin(t, 784, 1024, 0.9, 1)).cv;
      ok = ok && std::abs(cv - t) <= 0.02;
      detail += " " + fmt(cv, 3);
    } catch (const Error& e) {
      ok = false;
      detail += " (" + fmt(t, 1) + " rejected)";
    }
  }
  try {
    const double cv = fanin_stats(powerlaw_fanin(2.5, 784, 1024, 0.9, 1)).cv;
    ok = false;
    detail += "; 2.5 accepted with CCV " + fmt(cv, 3);
  } catch (const InfeasibleError&) {
    detail += "; 2.5 rejected";
  }
  const double secs = seconds_since(start);
  return {ok && secs < 30.0, detail + ", " + fmt(secs, 2) + " s"};
}

// --- 7: multipeak CCV curve -------------------------------------------------

Outcome multipeak_curve() {
  auto ccv = [](int k, double beta) {
    ProfileSpec p;
    p.family = ProfileFamily::kMultiPeak;
    p.peaks = k;
    p.beta = beta;
    return fanin_stats(allocate_fanin(p, 784, 1024, 0.9, 1)).cv;
  };
  // Contract grid, then the finer grid of the multipeak sweep.
  auto nonincreasing = [&](const std::vector<int>& ks, std::string& violations) {
    bool ok = true;
    for (double beta : {12.0, 50.0, 1200.0}) {
      double prev = INFINITY;
      for (int k : ks) {
        const double c = ccv(k, beta);
        if (c > prev) {
          ok = false;
          violations += " beta " + fmt(beta, 0) + " k " + std::to_string(k);
        }
        prev = c;
      }
    }
    return ok;
  };
  std::vector<int> fine(20);
  std::iota(fine.begin(), fine.end(), 1);
  fine.insert(fine.end(), {25, 30, 40, 50});
  std::string violations, fine_violations;
  const bool monotone = nonincreasing({1, 2, 4, 8, 16, 50}, violations);
  const bool fine_monotone = nonincreasing(fine, fine_violations);
  const double k1 = ccv(1, 50), k50 = ccv(50, 50), sharp = ccv(1, 1200);
  const bool ok = std::abs(k1 - 1.23) <= 0.15 && k50 <= 0.05 && std::abs(sharp - 3.24) <= 0.2 && monotone;
  return {ok, "beta 50: k=1 " + fmt(k1, 3) + ", k=50 " + fmt(k50, 3) + "; beta 1200: k=1 " + fmt(sharp, 3) +
                  "; nonincreasing over k {1,2,4,8,16,50}: " + (monotone ? "yes" : "no," + violations) +
                  "; over k {1..20,25,30,40,50}: " + (fine_monotone ? "yes" : "no," + fine_violations)};
}

// --- 8, 11, 15: single MNIST runs ------------------------------------------

Outcome mnist_baseline() {
  const auto rec = train_static(mnist_config("random", 0.9, 42, 5), dataset("mnist"));
  return {rec.final_accuracy >= 0.973,
          "accuracy " + fmt(rec.final_accuracy) + ", " + fmt(rec.wall_ms / 1000.0, 1) + " s"};
}

Outcome extreme_sparsity() {
  const auto rec = train_static(mnist_config("random", 0.999, 42, 5), dataset("mnist"));
  return {rec.final_accuracy >= 0.90, "accuracy " + fmt(rec.final_accuracy) + ", realized sparsity " +
                                          fmt(rec.realized_sparsity, 5)};
}

Outcome determinism() {
  const auto cfg = mnist_config("random", 0.9, 42, 5);
  const auto a = train_static(cfg, dataset("mnist"));
  const auto b = train_static(cfg, dataset("mnist"));
  bool same_epochs = a.epochs.size() == b.epochs.size();
  for (std::size_t i = 0; same_epochs && i < a.epochs.size(); ++i) {
    same_epochs = a.epochs[i].train_loss == b.epochs[i].train_loss &&
                  a.epochs[i].test_accuracy == b.epochs[i].test_accuracy;
  }
  const bool same_steps = a.losses == b.losses;
  return {same_epochs && same_steps && !a.losses.empty(),
          std::to_string(a.losses.size()) + " step losses and " + std::to_string(a.epochs.size()) +
              " epoch losses " + (same_epochs && same_steps ? "bit-identical" : "differ")};
}

// --- 9: null result ---------------------------------------------------------

Outcome null_result() {
  const std::vector<std::string> profiles{"quadratic", "exponential", "linear", "bell", "random"};
  std::vector<double> means;
  std::string detail;
  for (const auto& p : profiles) {
    double sum = 0.0;
    for (std::uint64_t seed : {42u, 123u, 456u}) {
      sum += train_static(mnist_config(p, 0.9, seed, 5), dataset("mnist")).final_accuracy;
    }
    means.push_back(sum / 3.0);
    detail += p + " " + fmt(100.0 * means.back(), 2) + " ";
  }
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  const double spread = 100.0 * (*hi - *lo);
  return {spread <= 0.5, detail + "; spread " + fmt(spread, 2) + " pp"};
}

// --- 10: sequential spreading failure --------------------------------------

Outcome sequential_failure() {
  auto cfg = mnist_config("exponential", 0.9, 42, 10);
  cfg.spreading = Spreading::kEven;
  const double even = train_static(cfg, dataset("mnist")).final_accuracy;
  cfg.spreading = Spreading::kSequential;
  const double seq = train_static(cfg, dataset("mnist")).final_accuracy;
  const double gap = 100.0 * (even - seq);
  return {gap >= 15.0, "even " + fmt(100.0 * even, 2) + ", sequential " + fmt(100.0 * seq, 2) + ", gap " +
                           fmt(gap, 2) + " pp"};
}

// --- 12: gradient hierarchy -------------------------------------------------

Outcome gradient_hierarchy() {
  auto measure = [](const std::string& profile) {
    auto cfg = mnist_config(profile, 0.9, 42, 1);
    cfg.gradient_ratio_epoch = 1;
    const auto rec = train_static(cfg, dataset("mnist"));
    if (!rec.gradient) throw Error("gradient ratio missing for " + profile);
    return *rec.gradient;
  };
  const auto uniform = measure("random");
  const auto expo = measure("exponential");
  bool ok = true;
  std::string detail = "uniform";
  for (const auto& l : uniform.layers) {
    ok = ok && l.ratio >= 0.8 && l.ratio <= 1.3;
    detail += " " + fmt(l.ratio, 3) + (l.degenerate ? " (constant fan-in, degenerate split)" : "");
  }
  detail += "; exponential";
  for (const auto& l : expo.layers) {
    ok = ok && l.ratio >= 1.8 && l.ratio <= 5.5;
    detail += " " + fmt(l.ratio, 3);
  }
  std::vector<std::vector<std::pair<double, double>>> pairs(expo.layers.size());
  for (int k : {1, 2, 4, 8, 16, 50}) {
    const auto rep = measure("multipeak:" + std::to_string(k) + ":50");
    for (std::size_t l = 0; l < rep.layers.size(); ++l) pairs[l].push_back({rep.layers[l].fanin_cv, rep.layers[l].ratio});
  }
  detail += "; multipeak r";
  for (const auto& p : pairs) {
    const double r = cv_gradient_correlation(p);
    ok = ok && r >= 0.8;
    detail += " " + fmt(r, 3);
  }
  return {ok, detail};
}

// --- 13, 14: RigL -----------------------------------------------------------

Outcome rigl_equilibrium() {
  std::vector<double> finals;
  std::string detail;
  for (const char* init : {"uniform", "lognormal:1.93", "lognormal:2.43", "lognormal:2.93"}) {
    auto cfg = mnist_config("random", 0.9, 42, 20);
    cfg.gradient_ratio_epoch = -1;
    RigLConfig rc;
    rc.init = RigLInit::parse(init);
    const auto res = train_rigl(cfg, rc, dataset("mnist"));
    finals.push_back(res.snapshots.back().mean_ccv());
    detail += std::string(init) + " " + fmt(finals.back(), 3) + " ";
  }
  const auto [lo, hi] = std::minmax_element(finals.begin(), finals.end());
  const bool ok = *lo >= 2.0 && *hi <= 2.9 && *hi - *lo <= 0.4;
  return {ok, detail + "; spread " + fmt(*hi - *lo, 3)};
}

Outcome rigl_ordering() {
  auto mean_accuracy = [](const char* init) {
    double sum = 0.0;
    for (std::uint64_t seed : {42u, 123u, 456u}) {
      auto cfg = mnist_config("random", 0.9, seed, 20);
      cfg.dataset = "fashion_mnist";
      cfg.gradient_ratio_epoch = -1;
      RigLConfig rc;
      rc.init = RigLInit::parse(init);
      sum += train_rigl(cfg, rc, dataset("fashion_mnist")).record.final_accuracy;
    }
    return sum / 3.0;
  };
  const double erk = mean_accuracy("erk");
  const double lognormal = mean_accuracy("lognormal:2.52");
  const double diff = 100.0 * (lognormal - erk);
  return {diff >= -0.1, "lognormal:2.52 " + fmt(100.0 * lognormal, 2) + ", erk " + fmt(100.0 * erk, 2) +
                            ", difference " + fmt(diff, 2) + " pp"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria{
    {1, "gradient correctness", gradient_check},
    {2, "mask invariants", mask_invariants},
    {3, "S_max table", smax_table},
    {4, "exponential allocation", exponential_allocation},
    {5, "sequential dead inputs", sequential_dead_inputs},
    {6, "CCV targeting", ccv_targeting},
    {7, "multipeak CCV curve", multipeak_curve},
    {8, "MNIST baseline", mnist_baseline},
    {9, "null result across profiles", null_result},
    {10, "sequential spreading failure", sequential_failure},
    {11, "extreme sparsity", extreme_sparsity},
    {12, "gradient hierarchy", gradient_hierarchy},
    {13, "RigL equilibrium", rigl_equilibrium},
    {14, "RigL ordering on Fashion-MNIST", rigl_ordering},
    {15, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << out.detail << " ["
              << fmt(seconds_since(start), 1) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
