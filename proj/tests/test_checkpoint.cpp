#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "psn/checkpoint.hpp"
#include "psn/error.hpp"
#include "psn/trainer.hpp"

using namespace psn;

TEST_CASE("checkpoint round trip is bit exact") {
  TrainConfig cfg;
  cfg.dataset = "synthetic:200:12:3";
  cfg.hidden = {16, 16};
  cfg.profile = parse_profile("linear");
  cfg.sparsity = 0.5;
  cfg.epochs = 1;
  cfg.batch_size = 20;
  cfg.gradient_ratio_epoch = -1;
  NetworkState<float> net;
  train_static(cfg, load_named_dataset(cfg.dataset, {}, 2), &net);

  std::stringstream buf;
  write_checkpoint(buf, net);
  const auto back = read_checkpoint<float>(buf);
  CHECK(back.spec == net.spec);
  CHECK(back.step == net.step);
  REQUIRE(back.layers.size() == net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& a = net.layers[l];
    const auto& b = back.layers[l];
    CHECK(a.weight.storage() == b.weight.storage());
    CHECK(a.weight_m.storage() == b.weight_m.storage());
    CHECK(a.weight_v.storage() == b.weight_v.storage());
    CHECK(a.bias == b.bias);
    CHECK(a.gain == b.gain);
    CHECK(a.shift_v == b.shift_v);
    CHECK(a.mask.has_value() == b.mask.has_value());
    if (a.mask) CHECK(a.mask->same_bits(*b.mask));
    CHECK(a.cols == b.cols);
  }

  SUBCASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "psn_ckpt_test.ckpt";
    save_checkpoint(path, net);
    CHECK(load_checkpoint<float>(path).layers[0].weight.storage() == net.layers[0].weight.storage());
    std::filesystem::remove(path);
  }
  SUBCASE("corruption is detected") {
    std::string bytes = buf.str();
    std::stringstream bad_magic("XSNCKPT" + bytes.substr(7));
    CHECK_THROWS_AS(read_checkpoint<float>(bad_magic), FormatError);
    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_checkpoint<float>(truncated), FormatError);
    std::stringstream again(bytes);
    CHECK_THROWS_AS(read_checkpoint<double>(again), FormatError);
  }
}
