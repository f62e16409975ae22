#include "psn/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "psn/error.hpp"
#include "psn/rng.hpp"

namespace psn {
namespace {

void check_allocation(const FanInAllocation& alloc) {
  if (alloc.fanin.empty() || alloc.n_inputs < 1) throw ValidationError("allocation is empty");
  for (int f : alloc.fanin) {
    if (f < 1 || f > alloc.n_inputs) {
      throw ValidationError("allocation fan-in " + std::to_string(f) + " outside [1, " +
                            std::to_string(alloc.n_inputs) + "]");
    }
  }
}

SparseMask empty_like(const FanInAllocation& alloc, Spreading spreading, std::uint64_t seed) {
  SparseMask mask(alloc.n_outputs(), alloc.n_inputs);
  mask.spreading = spreading;
  mask.seed = seed;
  mask.provenance = alloc;
  return mask;
}

}  // namespace

std::string_view to_string(Spreading s) {
  switch (s) {
    case Spreading::kEven:
      return "even";
    case Spreading::kRandom:
      return "random";
    case Spreading::kSequential:
      return "sequential";
  }
  return "unknown";
}

Spreading parse_spreading(std::string_view name) {
  if (name == "even") return Spreading::kEven;
  if (name == "random") return Spreading::kRandom;
  if (name == "sequential") return Spreading::kSequential;
  throw ValidationError("unknown spreading '" + std::string(name) + "'");
}

SparseMask::SparseMask(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw ValidationError("mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(rows) * cols, 0);
}

std::vector<std::uint32_t> SparseMask::row_columns(int r) const {
  std::vector<std::uint32_t> out;
  const auto row = row_bits(r);
  for (int c = 0; c < cols_; ++c) {
    if (row[static_cast<std::size_t>(c)]) out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

int SparseMask::row_sum(int r) const {
  const auto row = row_bits(r);
  return static_cast<int>(std::count(row.begin(), row.end(), std::uint8_t{1}));
}

long long SparseMask::count() const { return std::count(bits_.begin(), bits_.end(), std::uint8_t{1}); }

std::vector<int> SparseMask::fanin() const {
  std::vector<int> out(static_cast<std::size_t>(rows_));
  for (int r = 0; r < rows_; ++r) out[static_cast<std::size_t>(r)] = row_sum(r);
  return out;
}

SparseMask spread_even(const FanInAllocation& alloc) {
  check_allocation(alloc);
  SparseMask mask = empty_like(alloc, Spreading::kEven, 0);
  const int n = alloc.n_inputs;
  const double golden = std::numbers::phi;
  for (int i = 0; i < alloc.n_outputs(); ++i) {
    const int f = alloc.fanin[static_cast<std::size_t>(i)];
    const auto offset = static_cast<long long>(std::fmod(std::floor(static_cast<double>(i) * golden * n), n));
    for (int k = 0; k < f; ++k) {
      // The offset is integral, so floor((offset + k n / f) mod n) reduces to
      // exact integer arithmetic.
      int j = static_cast<int>((offset + static_cast<long long>(k) * n / f) % n);
      while (mask.test(i, j)) j = (j + 1) % n;
      mask.set(i, j, true);
    }
  }
  return mask;
}

SparseMask spread_random(const FanInAllocation& alloc, std::uint64_t seed, std::uint64_t stream) {
  check_allocation(alloc);
  SparseMask mask = empty_like(alloc, Spreading::kRandom, seed);
  const int n = alloc.n_inputs;
  Rng rng = make_rng(seed, Stream::kMask, stream);
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < alloc.n_outputs(); ++i) {
    std::iota(pool.begin(), pool.end(), 0);
    const int f = alloc.fanin[static_cast<std::size_t>(i)];
    // Partial Fisher-Yates: the first f slots become a uniform f-subset.
    for (int k = 0; k < f; ++k) {
      const auto pick = k + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
      mask.set(i, pool[static_cast<std::size_t>(k)], true);
    }
  }
  return mask;
}

SparseMask spread_sequential(const FanInAllocation& alloc) {
  check_allocation(alloc);
  SparseMask mask = empty_like(alloc, Spreading::kSequential, 0);
  for (int i = 0; i < alloc.n_outputs(); ++i) {
    for (int j = 0; j < alloc.fanin[static_cast<std::size_t>(i)]; ++j) mask.set(i, j, true);
  }
  return mask;
}

SparseMask build_mask(const FanInAllocation& alloc, Spreading spreading, std::uint64_t seed, std::uint64_t stream) {
  switch (spreading) {
    case Spreading::kEven:
      return spread_even(alloc);
    case Spreading::kRandom:
      return spread_random(alloc, seed, stream);
    case Spreading::kSequential:
      return spread_sequential(alloc);
  }
  throw ValidationError("unknown spreading");
}

MaskStats mask_stats(const SparseMask& mask) {
  MaskStats s;
  s.fanout.assign(static_cast<std::size_t>(mask.cols()), 0);
  long long ones = 0;
  for (int r = 0; r < mask.rows(); ++r) {
    const auto row = mask.row_bits(r);
    for (int c = 0; c < mask.cols(); ++c) {
      if (row[static_cast<std::size_t>(c)]) {
        ++s.fanout[static_cast<std::size_t>(c)];
        ++ones;
      }
    }
  }
  s.dead_inputs = static_cast<int>(std::count(s.fanout.begin(), s.fanout.end(), 0));
  const double n = static_cast<double>(mask.cols());
  s.fanout_mean = static_cast<double>(ones) / n;
  double sq = 0.0;
  for (int f : s.fanout) sq += (f - s.fanout_mean) * (f - s.fanout_mean);
  s.fanout_std = std::sqrt(sq / n);
  const auto [lo, hi] = std::minmax_element(s.fanout.begin(), s.fanout.end());
  s.fanout_min = *lo;
  s.fanout_max = *hi;
  s.realized_sparsity = 1.0 - static_cast<double>(ones) / (static_cast<double>(mask.rows()) * mask.cols());
  return s;
}

void write_mask(std::ostream& out, const SparseMask& mask) {
  out << "PSNMASK v1 " << mask.rows() << ' ' << mask.cols() << ' ' << to_string(mask.spreading) << ' '
      << mask.seed << '\n';
  for (int r = 0; r < mask.rows(); ++r) {
    const auto cols = mask.row_columns(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (k) out << ' ';
      out << cols[k];
    }
    out << '\n';
  }
}

SparseMask read_mask(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("PSNMASK: missing header");
  std::istringstream header(line);
  std::string magic, version, spreading;
  long long rows = 0, cols = 0;
  std::uint64_t seed = 0;
  if (!(header >> magic >> version >> rows >> cols >> spreading >> seed) || magic != "PSNMASK" ||
      version != "v1") {
    throw FormatError("PSNMASK: malformed header '" + line + "'");
  }
  if (rows < 1 || cols < 1 || rows > (1 << 24) || cols > (1 << 24)) {
    throw FormatError("PSNMASK: bad dimensions in header");
  }
  SparseMask mask(static_cast<int>(rows), static_cast<int>(cols));
  try {
    mask.spreading = parse_spreading(spreading);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("PSNMASK: ") + e.what());
  }
  mask.seed = seed;
  for (int r = 0; r < mask.rows(); ++r) {
    if (!std::getline(in, line)) throw FormatError("PSNMASK: truncated at row " + std::to_string(r));
    std::istringstream row(line);
    long long c = 0, prev = -1;
    while (row >> c) {
      if (c <= prev || c >= cols) {
        throw FormatError("PSNMASK: row " + std::to_string(r) + " has unsorted or out-of-range column " +
                          std::to_string(c));
      }
      mask.set(r, static_cast<int>(c), true);
      prev = c;
    }
    if (!row.eof()) throw FormatError("PSNMASK: row " + std::to_string(r) + " contains a non-integer token");
  }
  FanInAllocation prov;
  prov.fanin = mask.fanin();
  prov.n_inputs = mask.cols();
  prov.f_min = *std::min_element(prov.fanin.begin(), prov.fanin.end());
  prov.realized_sparsity = 1.0 - static_cast<double>(mask.count()) / (static_cast<double>(rows) * cols);
  prov.target_sparsity = prov.realized_sparsity;
  mask.provenance = std::move(prov);
  return mask;
}

}  // namespace psn
