#include "psn/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "psn/error.hpp"
#include "psn/rng.hpp"

namespace psn {
namespace {

// Absorbs representation error in lambda * P so exact products do not floor
// one below their integer value.
constexpr double kFloorSlack = 1e-9;

void check_dimensions(int n_inputs, int n_outputs, double sparsity, int f_min) {
  if (n_inputs < 1 || n_outputs < 1) {
    throw ValidationError("layer dimensions must be positive (n_inputs=" + std::to_string(n_inputs) +
                          ", n_outputs=" + std::to_string(n_outputs) + ")");
  }
  if (f_min < 1 || f_min > n_inputs) {
    throw ValidationError("f_min must lie in [1, n_inputs], got " + std::to_string(f_min));
  }
  if (!(sparsity >= 0.0) || !std::isfinite(sparsity)) {
    throw ValidationError("sparsity must be a finite value >= 0");
  }
  const double s_max = max_sparsity(f_min, n_inputs);
  // A target within half a connection per neuron above S_max still rounds to
  // f_min and is clamped there; anything further is infeasible.
  if (sparsity >= 1.0 || n_inputs * (1.0 - sparsity) < f_min - 0.5) {
    std::ostringstream msg;
    msg << "sparsity " << sparsity << " is infeasible: S_max = 1 - f_min/n = " << std::fixed << std::setprecision(2) << 100.0 * s_max
        << "% for f_min=" << f_min
        << ", n=" << n_inputs;
    throw InfeasibleError(msg.str());
  }
}

double realized_sparsity(const std::vector<int>& fanin, int n_inputs) {
  const long long total = std::accumulate(fanin.begin(), fanin.end(), 0LL);
  return 1.0 - static_cast<double>(total) / (static_cast<double>(fanin.size()) * n_inputs);
}

FanInAllocation finish(std::vector<int> fanin, int n_inputs, double sparsity, int f_min, double lambda,
                       bool inverted) {
  if (inverted) std::reverse(fanin.begin(), fanin.end());
  FanInAllocation out;
  out.realized_sparsity = realized_sparsity(fanin, n_inputs);
  out.fanin = std::move(fanin);
  out.n_inputs = n_inputs;
  out.target_sparsity = sparsity;
  out.f_min = f_min;
  out.lambda = lambda;
  return out;
}

FanInAllocation constant_allocation(int value, int n_inputs, int n_outputs, double sparsity, int f_min) {
  const int f = std::clamp(value, f_min, n_inputs);
  return finish(std::vector<int>(static_cast<std::size_t>(n_outputs), f), n_inputs, sparsity, f_min, f, false);
}

int round_clamp(double x, int lo, int hi) {
  if (!(x < static_cast<double>(hi))) return hi;
  return std::clamp(static_cast<int>(std::floor(x + 0.5)), lo, hi);
}

double mean_of(const std::vector<int>& v) {
  return static_cast<double>(std::accumulate(v.begin(), v.end(), 0LL)) / static_cast<double>(v.size());
}

struct MeanFit {
  std::vector<int> fanin;
  double log_scale = 0.0;
};

// Finds a multiplicative scale c so that round(c * exp(log_base_i)), clamped to
// [f_min, n], has mean closest to `target_mean`. The clamped mean is monotone
// in c, so bisection on log c converges.
MeanFit fit_mean(const std::vector<double>& log_base, double target_mean, int n_inputs, int f_min) {
  const auto [min_it, max_it] = std::minmax_element(log_base.begin(), log_base.end());
  double lo = -*max_it - 10.0;                           // everything rounds to 0 -> f_min
  double hi = -*min_it + std::log(n_inputs) + 10.0;      // everything saturates at n
  std::vector<int> f(log_base.size());
  auto realize = [&](double log_c) {
    for (std::size_t i = 0; i < log_base.size(); ++i) {
      f[i] = round_clamp(std::exp(log_c + log_base[i]), f_min, n_inputs);
    }
    return mean_of(f);
  };
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (realize(mid) < target_mean) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mean_lo = realize(lo);
  std::vector<int> f_lo = f;
  const double mean_hi = realize(hi);
  if (std::abs(mean_lo - target_mean) < std::abs(mean_hi - target_mean)) {
    return {std::move(f_lo), lo};
  }
  return {f, hi};
}

struct ShapeFit {
  MeanFit fit;
  double ccv = 0.0;
  double shape = 0.0;
};

// Bisection over a shape parameter whose realized CCV grows with it.
template <typename MakeLogBase>
ShapeFit fit_ccv(double target_ccv, double shape_hi, double target_mean, int n_inputs, int f_min,
                 MakeLogBase make_log_base, std::string_view family, bool grow_bracket) {
  auto evaluate = [&](double shape) {
    ShapeFit out;
    out.fit = fit_mean(make_log_base(shape), target_mean, n_inputs, f_min);
    out.ccv = fanin_stats(out.fit.fanin).cv;
    out.shape = shape;
    return out;
  };

  ShapeFit hi = evaluate(shape_hi);
  while (grow_bracket && hi.ccv < target_ccv && shape_hi < 64.0) {
    shape_hi *= 2.0;
    hi = evaluate(shape_hi);
  }
  if (hi.ccv < target_ccv - profile_limits::kCcvTolerance) {
    std::ostringstream msg;
    msg << family << " target CCV " << target_ccv << " is infeasible at n=" << n_inputs << ", mean fan-in "
        << target_mean << ", f_min=" << f_min << ": maximum achievable CCV is " << hi.ccv;
    throw InfeasibleError(msg.str());
  }

  double lo_shape = 0.0;
  double hi_shape = shape_hi;
  ShapeFit best = hi;
  for (int it = 0; it < profile_limits::kMaxIterations; ++it) {
    if (std::abs(best.ccv - target_ccv) <= profile_limits::kCcvTolerance) break;
    const double mid = 0.5 * (lo_shape + hi_shape);
    ShapeFit cur = evaluate(mid);
    if (std::abs(cur.ccv - target_ccv) < std::abs(best.ccv - target_ccv)) best = cur;
    if (cur.ccv < target_ccv) {
      lo_shape = mid;
    } else {
      hi_shape = mid;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(ProfileFamily family) {
  switch (family) {
    case ProfileFamily::kLinear:
      return "linear";
    case ProfileFamily::kQuadratic:
      return "quadratic";
    case ProfileFamily::kExponential:
      return "exponential";
    case ProfileFamily::kBell:
      return "bell";
    case ProfileFamily::kInverseBell:
      return "inverse_bell";
    case ProfileFamily::kLognormal:
      return "lognormal";
    case ProfileFamily::kPowerLaw:
      return "powerlaw";
    case ProfileFamily::kMultiPeak:
      return "multipeak";
    case ProfileFamily::kUniformRandom:
      return "uniform_random";
  }
  return "unknown";
}

ProfileFamily parse_profile_family(std::string_view name) {
  for (auto f : {ProfileFamily::kLinear, ProfileFamily::kQuadratic, ProfileFamily::kExponential,
                 ProfileFamily::kBell, ProfileFamily::kInverseBell, ProfileFamily::kLognormal,
                 ProfileFamily::kPowerLaw, ProfileFamily::kMultiPeak, ProfileFamily::kUniformRandom}) {
    if (name == to_string(f)) return f;
  }
  if (name == "random" || name == "uniform") return ProfileFamily::kUniformRandom;
  if (name == "inv_bell") return ProfileFamily::kInverseBell;
  throw ValidationError("unknown profile family '" + std::string(name) + "'");
}

namespace {

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string describe(const ProfileSpec& spec) {
  const ProfileSpec defaults;
  std::string out = spec.inverted && spec.family != ProfileFamily::kUniformRandom ? "inv_" : "";
  out += to_string(spec.family);
  switch (spec.family) {
    case ProfileFamily::kExponential:
      if (spec.alpha != defaults.alpha) out += ":" + format_number(spec.alpha);
      break;
    case ProfileFamily::kBell:
    case ProfileFamily::kInverseBell:
      if (spec.beta != defaults.beta) out += ":" + format_number(spec.beta);
      break;
    case ProfileFamily::kMultiPeak:
      out += ":" + std::to_string(spec.peaks) + ":" + format_number(spec.beta);
      break;
    case ProfileFamily::kLognormal:
    case ProfileFamily::kPowerLaw:
      out += ":" + format_number(spec.target_ccv);
      break;
    default:
      break;
  }
  return out;
}

ProfileSpec parse_profile(std::string_view text) {
  std::vector<std::string_view> parts;
  for (std::size_t start = 0;;) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  ProfileSpec spec;
  std::string_view head = parts[0];
  try {
    spec.family = parse_profile_family(head);
  } catch (const ValidationError&) {
    if (!head.starts_with("inv_")) throw;
    spec.family = parse_profile_family(head.substr(4));
    spec.inverted = true;
  }
  const std::size_t args = parts.size() - 1;
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (args < lo || args > hi) throw ValidationError("wrong number of parameters in profile '" + std::string(text) + "'");
  };
  switch (spec.family) {
    case ProfileFamily::kExponential:
      want(0, 1);
      if (args == 1) spec.alpha = parse_number(parts[1], "alpha");
      break;
    case ProfileFamily::kBell:
    case ProfileFamily::kInverseBell:
      want(0, 1);
      if (args == 1) spec.beta = parse_number(parts[1], "beta");
      break;
    case ProfileFamily::kMultiPeak: {
      want(2, 2);
      const double k = parse_number(parts[1], "peak count");
      if (k != std::floor(k) || k < 1 || k > 1e6) throw ValidationError("peak count must be a positive integer");
      spec.peaks = static_cast<int>(k);
      spec.beta = parse_number(parts[2], "beta");
      break;
    }
    case ProfileFamily::kLognormal:
    case ProfileFamily::kPowerLaw:
      want(1, 1);
      spec.target_ccv = parse_number(parts[1], "target CCV");
      break;
    default:
      want(0, 0);
  }
  spec.validate();
  return spec;
}

bool is_pointwise(ProfileFamily family) {
  switch (family) {
    case ProfileFamily::kLognormal:
    case ProfileFamily::kPowerLaw:
    case ProfileFamily::kUniformRandom:
      return false;
    default:
      return true;
  }
}

void ProfileSpec::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("profile alpha must be > 0");
  if (!(beta > 0.0)) throw ValidationError("profile beta must be > 0");
  if (peaks < 1) throw ValidationError("profile peaks must be >= 1");
  if (!(target_ccv >= 0.0)) throw ValidationError("profile target_ccv must be >= 0");
}

long long FanInAllocation::total() const { return std::accumulate(fanin.begin(), fanin.end(), 0LL); }

double max_sparsity(int f_min, int n_inputs) {
  if (n_inputs < 1) throw ValidationError("n_inputs must be positive");
  return 1.0 - static_cast<double>(f_min) / static_cast<double>(n_inputs);
}

double multipeak_profile(int peaks, double beta, double t) {
  if (peaks < 1) throw ValidationError("multipeak requires k >= 1");
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("profile argument t must lie in [0, 1]");
  double best = 0.0;
  for (int j = 0; j < peaks; ++j) {
    const double c = (2.0 * j + 1.0) / (2.0 * peaks);
    const double d = t - c;
    best = std::max(best, std::exp(-beta * d * d));
  }
  return best;
}

double eval_profile(const ProfileSpec& spec, double t) {
  spec.validate();
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("profile argument t must lie in [0, 1]");
  if (!is_pointwise(spec.family)) {
    throw ValidationError("profile family '" + std::string(to_string(spec.family)) +
                          "' assigns fan-in directly and has no pointwise density");
  }
  auto bell = [&](double u) {
    const double d = 2.0 * (u - 0.5);
    return std::exp(-spec.beta * d * d);
  };
  const double u = spec.inverted ? 1.0 - t : t;
  switch (spec.family) {
    case ProfileFamily::kLinear:
      return 1.0 - u;
    case ProfileFamily::kQuadratic:
      return 1.0 - u * u;
    case ProfileFamily::kExponential:
      return std::exp(-spec.alpha * u);
    case ProfileFamily::kBell:
      return spec.inverted ? 1.0 - bell(t) : bell(t);
    case ProfileFamily::kInverseBell:
      return spec.inverted ? bell(t) : 1.0 - bell(t);
    case ProfileFamily::kMultiPeak: {
      const double p = multipeak_profile(spec.peaks, spec.beta, t);
      return spec.inverted ? 1.0 - p : p;
    }
    default:
      break;
  }
  throw ValidationError("unreachable profile family");
}

FanInAllocation allocate_fanin(const ProfileSpec& spec, int n_inputs, int n_outputs, double sparsity, int f_min,
                               std::uint64_t seed) {
  spec.validate();
  check_dimensions(n_inputs, n_outputs, sparsity, f_min);

  if (sparsity == 0.0) return constant_allocation(n_inputs, n_inputs, n_outputs, sparsity, f_min);

  switch (spec.family) {
    case ProfileFamily::kUniformRandom:
      return constant_allocation(round_clamp(n_inputs * (1.0 - sparsity), f_min, n_inputs), n_inputs,
                                 n_outputs, sparsity, f_min);
    case ProfileFamily::kLognormal: {
      auto a = lognormal_fanin(spec.target_ccv, n_inputs, n_outputs, sparsity, f_min, seed);
      if (spec.inverted) std::reverse(a.fanin.begin(), a.fanin.end());
      return a;
    }
    case ProfileFamily::kPowerLaw: {
      auto a = powerlaw_fanin(spec.target_ccv, n_inputs, n_outputs, sparsity, f_min);
      if (spec.inverted) std::reverse(a.fanin.begin(), a.fanin.end());
      return a;
    }
    default:
      break;
  }

  // Evaluate the non-inverted profile on the grid t = i/m; inversion is a
  // reversal of the finished vector so both orientations share a multiset.
  ProfileSpec upright = spec;
  upright.inverted = false;
  std::vector<double> p(static_cast<std::size_t>(n_outputs));
  for (int i = 0; i < n_outputs; ++i) {
    p[static_cast<std::size_t>(i)] = eval_profile(upright, static_cast<double>(i) / n_outputs);
  }
  const double p_mean = std::accumulate(p.begin(), p.end(), 0.0) / n_outputs;
  if (!(p_mean > 0.0)) throw ValidationError("profile evaluates to zero everywhere");
  const double lambda = n_inputs * (1.0 - sparsity) / p_mean;

  std::vector<int> fanin(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double raw = std::floor(lambda * p[i] + kFloorSlack);
    fanin[i] = raw >= n_inputs ? n_inputs : std::max(f_min, static_cast<int>(raw));
  }
  return finish(std::move(fanin), n_inputs, sparsity, f_min, lambda, spec.inverted);
}

FanInAllocation lognormal_fanin(double target_ccv, int n_inputs, int n_outputs, double sparsity, int f_min,
                                std::uint64_t seed) {
  if (!(target_ccv >= 0.0)) throw ValidationError("target_ccv must be >= 0");
  check_dimensions(n_inputs, n_outputs, sparsity, f_min);
  const double target_mean = n_inputs * (1.0 - sparsity);
  if (target_ccv == 0.0) {
    return constant_allocation(round_clamp(target_mean, f_min, n_inputs), n_inputs, n_outputs, sparsity, f_min);
  }

  Rng rng = make_rng(seed, Stream::kLognormal);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(static_cast<std::size_t>(n_outputs));
  for (auto& v : z) v = normal(rng);

  auto make_log_base = [&](double sigma) {
    const double mu = std::log(target_mean) - 0.5 * sigma * sigma;
    std::vector<double> lb(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) lb[i] = mu + sigma * z[i];
    return lb;
  };
  // Unclamped starting point: sigma^2 = ln(1 + CCV^2). Clamping only lowers
  // the CCV, so the bracket grows from there.
  const double sigma0 = std::sqrt(std::log1p(target_ccv * target_ccv));
  ShapeFit best = fit_ccv(target_ccv, 2.0 * sigma0, target_mean, n_inputs, f_min, make_log_base, "lognormal",
                          /*grow_bracket=*/true);

  std::vector<int> fanin = std::move(best.fit.fanin);
  std::sort(fanin.begin(), fanin.end(), std::greater<>());
  const double mu = std::log(target_mean) - 0.5 * best.shape * best.shape;
  return finish(std::move(fanin), n_inputs, sparsity, f_min, std::exp(best.fit.log_scale + mu), false);
}

FanInAllocation powerlaw_fanin(double target_ccv, int n_inputs, int n_outputs, double sparsity, int f_min) {
  if (!(target_ccv >= 0.0)) throw ValidationError("target_ccv must be >= 0");
  check_dimensions(n_inputs, n_outputs, sparsity, f_min);
  const double target_mean = n_inputs * (1.0 - sparsity);
  if (target_ccv == 0.0) {
    return constant_allocation(round_clamp(target_mean, f_min, n_inputs), n_inputs, n_outputs, sparsity, f_min);
  }
  auto make_log_base = [&](double exponent) {
    std::vector<double> lb(static_cast<std::size_t>(n_outputs));
    for (int i = 0; i < n_outputs; ++i) lb[static_cast<std::size_t>(i)] = -exponent * std::log(i + 1.0);
    return lb;
  };
  ShapeFit best = fit_ccv(target_ccv, profile_limits::kPowerLawMaxExponent, target_mean, n_inputs, f_min,
                          make_log_base, "powerlaw", /*grow_bracket=*/false);
  return finish(std::move(best.fit.fanin), n_inputs, sparsity, f_min, std::exp(best.fit.log_scale), false);
}

FanInStats fanin_stats(std::span<const int> fanin) {
  if (fanin.empty()) throw ValidationError("fan-in vector is empty");
  FanInStats s;
  const double n = static_cast<double>(fanin.size());
  const long long total = std::accumulate(fanin.begin(), fanin.end(), 0LL);
  s.mean = static_cast<double>(total) / n;
  double sq = 0.0;
  for (int f : fanin) {
    const double d = f - s.mean;
    sq += d * d;
  }
  s.std = std::sqrt(sq / n);
  s.cv = s.mean > 0.0 ? s.std / s.mean : 0.0;
  const auto [lo, hi] = std::minmax_element(fanin.begin(), fanin.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

void write_fanin_text(std::ostream& out, const FanInAllocation& alloc) {
  for (int f : alloc.fanin) out << f << '\n';
}

std::vector<int> read_fanin_text(std::istream& in) {
  std::vector<int> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      const int v = std::stoi(line, &pos);
      if (pos != line.size() || v < 1) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      throw FormatError("fan-in text line " + std::to_string(lineno) + ": expected a positive integer");
    }
  }
  return out;
}

}  // namespace psn
