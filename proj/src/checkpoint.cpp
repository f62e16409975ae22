#include "psn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "psn/error.hpp"

namespace psn {
namespace {

constexpr char kMagic[8] = {'P', 'S', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kEndianTag = 0x01020304;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw FormatError("checkpoint truncated");
  return v;
}

template <typename T>
void put_array(std::ostream& out, const T* data, std::size_t n) {
  put<std::uint64_t>(out, n);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void get_array(std::istream& in, T* data, std::size_t expected, const char* what) {
  const auto n = get<std::uint64_t>(in);
  if (n != expected) {
    throw FormatError(std::string("checkpoint ") + what + " has " + std::to_string(n) + " entries, expected " +
                      std::to_string(expected));
  }
  if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)))) {
    throw FormatError("checkpoint truncated");
  }
}

}  // namespace

template <typename T>
void write_checkpoint(std::ostream& out, const NetworkState<T>& state) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, kEndianTag);
  put<std::uint32_t>(out, sizeof(T));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.spec.layer_dims.size()));
  for (int d : state.spec.layer_dims) put<std::int32_t>(out, d);
  put<std::int64_t>(out, state.step);
  for (const auto& layer : state.layers) {
    put<std::uint8_t>(out, layer.mask ? 1 : 0);
    if (layer.mask) {
      std::ostringstream text;
      write_mask(text, *layer.mask);
      const std::string s = text.str();
      put_array(out, s.data(), s.size());
    }
    put_array(out, layer.weight.data(), layer.weight.size());
    put_array(out, layer.bias.data(), layer.bias.size());
    put_array(out, layer.gain.data(), layer.gain.size());
    put_array(out, layer.shift.data(), layer.shift.size());
    put_array(out, layer.weight_m.data(), layer.weight_m.size());
    put_array(out, layer.weight_v.data(), layer.weight_v.size());
    put_array(out, layer.bias_m.data(), layer.bias_m.size());
    put_array(out, layer.bias_v.data(), layer.bias_v.size());
    put_array(out, layer.gain_m.data(), layer.gain_m.size());
    put_array(out, layer.gain_v.data(), layer.gain_v.size());
    put_array(out, layer.shift_m.data(), layer.shift_m.size());
    put_array(out, layer.shift_v.data(), layer.shift_v.size());
  }
  if (!out) throw Error("failed to write checkpoint");
}

template <typename T>
NetworkState<T> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  if (get<std::uint32_t>(in) != kEndianTag) throw FormatError("checkpoint byte order differs from this machine");
  const auto scalar = get<std::uint32_t>(in);
  if (scalar != sizeof(T)) {
    throw FormatError("checkpoint holds " + std::to_string(scalar * 8) + "-bit parameters, expected " +
                      std::to_string(sizeof(T) * 8));
  }
  const auto dims = get<std::uint32_t>(in);
  if (dims < 3 || dims > 64) throw FormatError("implausible layer count in checkpoint");
  NetworkSpec spec;
  for (std::uint32_t i = 0; i < dims; ++i) spec.layer_dims.push_back(get<std::int32_t>(in));
  spec.validate();
  const auto step = get<std::int64_t>(in);

  // Shapes come from a fresh network; contents are overwritten below.
  auto state = init_network<T>(spec, {}, 0);
  state.step = step;
  for (auto& layer : state.layers) {
    if (get<std::uint8_t>(in) != 0) {
      const auto n = get<std::uint64_t>(in);
      if (n > (1ULL << 32)) throw FormatError("implausible mask block size");
      std::string text(n, '\0');
      if (!in.read(text.data(), static_cast<std::streamsize>(n))) throw FormatError("checkpoint truncated");
      std::istringstream mask_in(text);
      layer.mask = read_mask(mask_in);
    }
    get_array(in, layer.weight.data(), layer.weight.size(), "weight");
    get_array(in, layer.bias.data(), layer.bias.size(), "bias");
    get_array(in, layer.gain.data(), layer.gain.size(), "gain");
    get_array(in, layer.shift.data(), layer.shift.size(), "shift");
    get_array(in, layer.weight_m.data(), layer.weight_m.size(), "weight moment");
    get_array(in, layer.weight_v.data(), layer.weight_v.size(), "weight moment");
    get_array(in, layer.bias_m.data(), layer.bias_m.size(), "bias moment");
    get_array(in, layer.bias_v.data(), layer.bias_v.size(), "bias moment");
    get_array(in, layer.gain_m.data(), layer.gain_m.size(), "gain moment");
    get_array(in, layer.gain_v.data(), layer.gain_v.size(), "gain moment");
    get_array(in, layer.shift_m.data(), layer.shift_m.size(), "shift moment");
    get_array(in, layer.shift_v.data(), layer.shift_v.size(), "shift moment");
    const auto saved = layer.weight;
    layer.sync_mask();
    if (!(layer.weight == saved)) throw FormatError("checkpoint weights violate their mask");
  }
  return state;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const NetworkState<T>& state) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    write_checkpoint(out, state);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
NetworkState<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint<T>(in);
}

template void write_checkpoint(std::ostream&, const NetworkState<float>&);
template void write_checkpoint(std::ostream&, const NetworkState<double>&);
template NetworkState<float> read_checkpoint(std::istream&);
template NetworkState<double> read_checkpoint(std::istream&);
template void save_checkpoint(const std::filesystem::path&, const NetworkState<float>&);
template void save_checkpoint(const std::filesystem::path&, const NetworkState<double>&);
template NetworkState<float> load_checkpoint(const std::filesystem::path&);
template NetworkState<double> load_checkpoint(const std::filesystem::path&);

}  // namespace psn
