#pragma once

// Fan-in profiles: continuous density functions over the normalized neuron
// index, and their conversion into integer per-neuron fan-in vectors that hit
// a target sparsity under a minimum-fan-in floor.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psn {

enum class ProfileFamily {
  kLinear,
  kQuadratic,
  kExponential,
  kBell,
  kInverseBell,
  kLognormal,
  kPowerLaw,
  kMultiPeak,
  kUniformRandom,
};

std::string_view to_string(ProfileFamily family);
// Accepts the canonical names plus "random" for uniform_random.
ProfileFamily parse_profile_family(std::string_view name);

// True for families evaluated pointwise through eval_profile.
bool is_pointwise(ProfileFamily family);

struct ProfileSpec {
  ProfileFamily family = ProfileFamily::kUniformRandom;
  double alpha = 3.0;  // exponential decay rate
  double beta = 3.0;   // bell / multipeak sharpness
  int peaks = 1;       // multipeak only
  double target_ccv = 0.0;  // lognormal / powerlaw only
  bool inverted = false;    // swap hub and specialist positions

  void validate() const;
  bool operator==(const ProfileSpec&) const = default;
};

// Compact text form used in configs and result tables, e.g. "exponential",
// "inv_linear", "bell:5", "multipeak:4:50", "lognormal:2.43", "powerlaw:1".
// Parameters left at their defaults are omitted.
std::string describe(const ProfileSpec& spec);
ProfileSpec parse_profile(std::string_view text);

struct FanInAllocation {
  std::vector<int> fanin;  // one entry per output neuron
  int n_inputs = 0;
  double target_sparsity = 0.0;
  double realized_sparsity = 0.0;
  int f_min = 1;
  double lambda = 0.0;  // scale applied to the raw profile, for audit

  int n_outputs() const { return static_cast<int>(fanin.size()); }
  long long total() const;
  bool operator==(const FanInAllocation&) const = default;
};

struct FanInStats {
  double mean = 0.0;
  double std = 0.0;
  double cv = 0.0;
  int min = 0;
  int max = 0;
};

// Ceiling on achievable sparsity imposed by the fan-in floor: 1 - f_min / n.
double max_sparsity(int f_min, int n_inputs);

// P(t) for pointwise families. Inverted monotonic profiles mirror the index,
// P(1 - t); inverted bell-type profiles take the complement 1 - P(t).
double eval_profile(const ProfileSpec& spec, double t);

// max_j exp(-beta (t - c_j)^2) with c_j = (2j + 1) / (2k).
double multipeak_profile(int peaks, double beta, double t);

// Dispatches on spec.family. `seed` only matters for lognormal.
FanInAllocation allocate_fanin(const ProfileSpec& spec, int n_inputs, int n_outputs,
                               double sparsity, int f_min, std::uint64_t seed = 0);

FanInAllocation lognormal_fanin(double target_ccv, int n_inputs, int n_outputs, double sparsity,
                                int f_min, std::uint64_t seed);

FanInAllocation powerlaw_fanin(double target_ccv, int n_inputs, int n_outputs, double sparsity,
                               int f_min);

FanInStats fanin_stats(std::span<const int> fanin);
inline FanInStats fanin_stats(const FanInAllocation& alloc) { return fanin_stats(alloc.fanin); }

// One integer per line.
void write_fanin_text(std::ostream& out, const FanInAllocation& alloc);
std::vector<int> read_fanin_text(std::istream& in);

namespace profile_limits {
// Bisection budget and tolerances for the CCV-targeted families.
inline constexpr int kMaxIterations = 60;
inline constexpr double kCcvTolerance = 1e-2;
inline constexpr double kMeanTolerance = 0.5;
inline constexpr double kPowerLawMaxExponent = 1.5;
}  // namespace profile_limits

}  // namespace psn
