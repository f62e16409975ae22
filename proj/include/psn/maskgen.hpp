#pragma once

// Binary connectivity masks built from a fan-in allocation. The spreading
// rule decides which inputs each output neuron connects to.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "psn/profiles.hpp"

namespace psn {

enum class Spreading { kEven, kRandom, kSequential };

std::string_view to_string(Spreading s);
Spreading parse_spreading(std::string_view name);

class SparseMask {
 public:
  SparseMask() = default;
  SparseMask(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool test(int r, int c) const { return bits_[index(r, c)] != 0; }
  void set(int r, int c, bool on) { bits_[index(r, c)] = on ? 1 : 0; }

  // One byte per entry, row-major.
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<const std::uint8_t> row_bits(int r) const {
    return {bits_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  // Sorted set column indices of row r.
  std::vector<std::uint32_t> row_columns(int r) const;
  int row_sum(int r) const;
  long long count() const;
  std::vector<int> fanin() const;

  Spreading spreading = Spreading::kRandom;
  std::uint64_t seed = 0;
  FanInAllocation provenance;

  bool same_bits(const SparseMask& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && bits_ == other.bits_;
  }

 private:
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct MaskStats {
  std::vector<int> fanout;  // column sums
  int dead_inputs = 0;
  double fanout_mean = 0.0;
  double fanout_std = 0.0;
  int fanout_min = 0;
  int fanout_max = 0;
  double realized_sparsity = 0.0;
};

// Golden-ratio offset stride: row i takes columns
// floor((phi_i + k n / f_i) mod n), phi_i = floor(i * golden * n) mod n.
// A collision moves to the next free column upward (mod n).
SparseMask spread_even(const FanInAllocation& alloc);

// f_i distinct columns per row, uniformly without replacement. `stream`
// selects an independent RNG stream (the layer index in a network).
SparseMask spread_random(const FanInAllocation& alloc, std::uint64_t seed, std::uint64_t stream = 0);

// Row i takes columns 0..f_i-1. Diagnostic only.
SparseMask spread_sequential(const FanInAllocation& alloc);

SparseMask build_mask(const FanInAllocation& alloc, Spreading spreading, std::uint64_t seed,
                      std::uint64_t stream = 0);

MaskStats mask_stats(const SparseMask& mask);

// PSNMASK v1: header `PSNMASK v1 <m> <n> <spreading> <seed>`, then one line per
// row of space-separated sorted column indices.
void write_mask(std::ostream& out, const SparseMask& mask);
SparseMask read_mask(std::istream& in);

}  // namespace psn
