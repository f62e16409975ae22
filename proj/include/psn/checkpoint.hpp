#pragma once
// Versioned binary snapshot of a NetworkState: spec, masks (as embedded
// PSNMASK blocks), parameters, Adam moments and the step counter.

#include <filesystem>
#include <iosfwd>

#include "psn/network.hpp"

namespace psn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_checkpoint(std::ostream& out, const NetworkState<T>& state);
template <typename T>
NetworkState<T> read_checkpoint(std::istream& in);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const NetworkState<T>& state);
template <typename T>
NetworkState<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace psn
