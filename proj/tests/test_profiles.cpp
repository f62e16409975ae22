#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "psn/error.hpp"
#include "psn/profiles.hpp"

using namespace psn;

namespace {

ProfileSpec family(ProfileFamily f) {
  ProfileSpec s;
  s.family = f;
  return s;
}

ProfileSpec multipeak(int k, double beta) {
  ProfileSpec s;
  s.family = ProfileFamily::kMultiPeak;
  s.peaks = k;
  s.beta = beta;
  return s;
}

// Population CV recomputed from scratch.
double cv_of(const std::vector<int>& f) {
  double mean = 0.0;
  for (int v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double var = 0.0;
  for (int v : f) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(f.size())) / mean;
}

}  // namespace

TEST_CASE("pointwise profile values") {
  CHECK(eval_profile(family(ProfileFamily::kLinear), 0.0) == 1.0);
  CHECK(eval_profile(family(ProfileFamily::kLinear), 1.0) == 0.0);
  CHECK(eval_profile(family(ProfileFamily::kQuadratic), 0.5) == doctest::Approx(0.75));
  CHECK(eval_profile(family(ProfileFamily::kExponential), 1.0) == doctest::Approx(0.049787).epsilon(1e-5));
  CHECK(eval_profile(family(ProfileFamily::kBell), 0.5) == 1.0);
  CHECK(eval_profile(family(ProfileFamily::kInverseBell), 0.5) == doctest::Approx(0.0));

  auto inv = family(ProfileFamily::kExponential);
  inv.inverted = true;
  CHECK(eval_profile(inv, 0.0) == doctest::Approx(std::exp(-3.0)));

  CHECK_THROWS_AS(eval_profile(family(ProfileFamily::kLinear), 1.5), ValidationError);
  CHECK_THROWS_AS(eval_profile(family(ProfileFamily::kLognormal), 0.5), ValidationError);
  CHECK_THROWS_AS(eval_profile(family(ProfileFamily::kUniformRandom), 0.5), ValidationError);
}

TEST_CASE("multipeak profile") {
  CHECK(multipeak_profile(1, 50, 0.5) == 1.0);
  CHECK(multipeak_profile(2, 50, 0.25) == 1.0);
  CHECK(multipeak_profile(2, 50, 0.5) == doctest::Approx(std::exp(-50 * 0.0625)));
  CHECK(multipeak_profile(2, 50, 0.5) == doctest::Approx(0.04394).epsilon(1e-3));
  CHECK_THROWS_AS(multipeak_profile(0, 50, 0.5), ValidationError);
  CHECK_THROWS_AS(multipeak_profile(1, 50, -0.1), ValidationError);
}

TEST_CASE("spec validation") {
  auto s = family(ProfileFamily::kExponential);
  s.alpha = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = multipeak(0, 50);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK(parse_profile_family("random") == ProfileFamily::kUniformRandom);
  CHECK(parse_profile_family("inv_bell") == ProfileFamily::kInverseBell);
  CHECK_THROWS_AS(parse_profile_family("zigzag"), ValidationError);
  for (auto f : {ProfileFamily::kLinear, ProfileFamily::kPowerLaw, ProfileFamily::kMultiPeak}) {
    CHECK(parse_profile_family(to_string(f)) == f);
  }
}

TEST_CASE("maximum sparsity ceiling") {
  CHECK(max_sparsity(1, 784) == doctest::Approx(1.0 - 1.0 / 784));
  CHECK(std::round(max_sparsity(1, 784) * 10000) / 100 == 99.87);
  CHECK(std::round(max_sparsity(10, 54) * 10000) / 100 == 81.48);
  CHECK_THROWS_AS(allocate_fanin(family(ProfileFamily::kLinear), 54, 10, 0.9, 10), InfeasibleError);
  try {
    allocate_fanin(family(ProfileFamily::kLinear), 54, 10, 0.9, 10);
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("S_max") != std::string::npos);
  }
  CHECK_THROWS_AS(allocate_fanin(family(ProfileFamily::kLinear), 0, 10, 0.5, 1), ValidationError);
  // 0.999 sits just past S_max = 99.87% and clamps every neuron to f_min.
  const auto clamped = allocate_fanin(family(ProfileFamily::kLinear), 784, 1024, 0.999, 1);
  for (int f : clamped.fanin) CHECK(f == 1);
  CHECK(clamped.realized_sparsity == doctest::Approx(max_sparsity(1, 784)));
  CHECK_THROWS_AS(allocate_fanin(family(ProfileFamily::kLinear), 784, 1024, 0.9995, 1), InfeasibleError);
  CHECK_THROWS_AS(allocate_fanin(family(ProfileFamily::kLinear), 784, 1024, 1.0, 1), InfeasibleError);
}

TEST_CASE("exponential allocation at 90%") {
  const auto a = allocate_fanin(family(ProfileFamily::kExponential), 784, 1024, 0.9, 1);
  const auto st = fanin_stats(a);
  CHECK(st.max == 247);
  CHECK(st.min == 12);
  CHECK(st.mean >= 77.4);
  CHECK(st.mean <= 78.4);
  CHECK(st.cv == doctest::Approx(0.82).epsilon(0.05 / 0.82));
  CHECK(a.realized_sparsity == 1.0 - static_cast<double>(a.total()) / (1024.0 * 784));
}

TEST_CASE("uniform random and dense limit") {
  const auto u = allocate_fanin(family(ProfileFamily::kUniformRandom), 784, 1024, 0.9, 1);
  for (int f : u.fanin) CHECK(f == 78);
  CHECK(fanin_stats(u).cv == 0.0);
  for (auto f : {ProfileFamily::kLinear, ProfileFamily::kBell, ProfileFamily::kUniformRandom,
                 ProfileFamily::kLognormal, ProfileFamily::kPowerLaw}) {
    auto spec = family(f);
    spec.target_ccv = 1.0;
    const auto a = allocate_fanin(spec, 50, 20, 0.0, 1, 3);
    for (int v : a.fanin) CHECK(v == 50);
  }
}

TEST_CASE("clamp bounds and realized-sparsity bookkeeping for pointwise families") {
  for (auto f : {ProfileFamily::kLinear, ProfileFamily::kQuadratic, ProfileFamily::kExponential,
                 ProfileFamily::kBell, ProfileFamily::kInverseBell, ProfileFamily::kMultiPeak,
                 ProfileFamily::kUniformRandom}) {
    for (double s : {0.5, 0.8, 0.9, 0.98, 0.999}) {
      for (int f_min : {1, 5}) {
        if (s >= max_sparsity(f_min, 784)) continue;
        const auto a = allocate_fanin(family(f), 784, 1024, s, f_min);
        CHECK(a.fanin.size() == 1024);
        CHECK(*std::min_element(a.fanin.begin(), a.fanin.end()) >= f_min);
        CHECK(*std::max_element(a.fanin.begin(), a.fanin.end()) <= 784);
        CHECK(a.realized_sparsity <= max_sparsity(f_min, 784));
        CHECK(a.realized_sparsity == 1.0 - static_cast<double>(a.total()) / (1024.0 * 784));
      }
    }
  }
}

TEST_CASE("inversion reverses the fan-in vector exactly") {
  for (auto f : {ProfileFamily::kLinear, ProfileFamily::kQuadratic, ProfileFamily::kExponential,
                 ProfileFamily::kBell, ProfileFamily::kInverseBell, ProfileFamily::kMultiPeak,
                 ProfileFamily::kLognormal, ProfileFamily::kPowerLaw, ProfileFamily::kUniformRandom}) {
    auto spec = family(f);
    spec.target_ccv = 1.0;
    spec.peaks = 3;
    const auto fwd = allocate_fanin(spec, 784, 300, 0.9, 1, 7);
    spec.inverted = true;
    auto inv = allocate_fanin(spec, 784, 300, 0.9, 1, 7).fanin;
    std::reverse(inv.begin(), inv.end());
    CHECK(inv == fwd.fanin);
  }
}

TEST_CASE("lognormal hits CCV targets and preserves the mean") {
  for (double target : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const auto a = lognormal_fanin(target, 784, 1024, 0.9, 1, 42);
    CHECK(std::abs(cv_of(a.fanin) - target) <= 0.02);
    CHECK(std::abs(fanin_stats(a).mean - 78.4) <= 0.5);
    CHECK(std::is_sorted(a.fanin.rbegin(), a.fanin.rend()));
  }
  const auto zero = lognormal_fanin(0.0, 784, 1024, 0.9, 1, 1);
  for (int f : zero.fanin) CHECK(f == 78);
  CHECK_THROWS_AS(lognormal_fanin(6.0, 784, 1024, 0.9, 1, 42), InfeasibleError);
  const auto again = lognormal_fanin(1.5, 784, 1024, 0.9, 1, 42);
  CHECK(again == lognormal_fanin(1.5, 784, 1024, 0.9, 1, 42));
}

TEST_CASE("power law hits CCV targets and rejects 2.5") {
  for (double target : {0.5, 1.0, 1.5, 2.0}) {
    const auto a = powerlaw_fanin(target, 784, 1024, 0.9, 1);
    CHECK(std::abs(cv_of(a.fanin) - target) <= 0.02);
    CHECK(std::abs(fanin_stats(a).mean - 78.4) <= 0.5);
  }
  CHECK_THROWS_AS(powerlaw_fanin(2.5, 784, 1024, 0.9, 1), InfeasibleError);
  const auto flat = powerlaw_fanin(0.0, 784, 1024, 0.9, 1);
  CHECK(cv_of(flat.fanin) == 0.0);
}

TEST_CASE("multipeak CCV curve") {
  CHECK(fanin_stats(allocate_fanin(multipeak(1, 50), 784, 1024, 0.9, 1)).cv == doctest::Approx(1.23).epsilon(0.15 / 1.23));
  CHECK(fanin_stats(allocate_fanin(multipeak(50, 50), 784, 1024, 0.9, 1)).cv <= 0.05);
  CHECK(fanin_stats(allocate_fanin(multipeak(1, 1200), 784, 1024, 0.9, 1)).cv == doctest::Approx(3.24).epsilon(0.2 / 3.24));
  for (double beta : {12.0, 50.0, 1200.0}) {
    double prev = 1e9;
    for (int k : {1, 2, 4, 8, 16, 50}) {
      const double cv = fanin_stats(allocate_fanin(multipeak(k, beta), 784, 1024, 0.9, 1)).cv;
      CHECK(cv <= prev + 1e-12);
      prev = cv;
    }
  }
}

TEST_CASE("fan-in statistics") {
  const std::vector<int> two{1, 3};
  const auto st = fanin_stats(two);
  CHECK(st.mean == 2.0);
  CHECK(st.std == 1.0);
  CHECK(st.cv == 0.5);
  CHECK(fanin_stats(std::vector<int>(1024, 78)).cv == 0.0);
  CHECK_THROWS_AS(fanin_stats(std::vector<int>{}), ValidationError);
}

TEST_CASE("fan-in text round trip") {
  const auto a = allocate_fanin(family(ProfileFamily::kBell), 100, 40, 0.7, 2);
  std::stringstream ss;
  write_fanin_text(ss, a);
  CHECK(read_fanin_text(ss) == a.fanin);
  std::stringstream bad("3\nx\n");
  CHECK_THROWS(read_fanin_text(bad));
}

TEST_CASE("profile shorthand round trip") {
  for (const char* text : {"linear", "inv_quadratic", "exponential", "exponential:5", "bell", "bell:2.5",
                           "inverse_bell", "multipeak:4:50", "lognormal:2.43", "powerlaw:1", "uniform_random"}) {
    CHECK(describe(parse_profile(text)) == text);
  }
  CHECK(parse_profile("random").family == ProfileFamily::kUniformRandom);
  CHECK(parse_profile("inv_exponential").inverted);
  CHECK(parse_profile("multipeak:2:1200").beta == 1200);
  CHECK_THROWS_AS(parse_profile("lognormal"), ValidationError);
  CHECK_THROWS_AS(parse_profile("multipeak:2.5:50"), ValidationError);
  CHECK_THROWS_AS(parse_profile("linear:3"), ValidationError);
  CHECK_THROWS_AS(parse_profile("exponential:-1"), ValidationError);
}
