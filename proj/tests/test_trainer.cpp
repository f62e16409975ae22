#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "psn/error.hpp"
#include "psn/trainer.hpp"

using namespace psn;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.dataset = "synthetic:400:16:4";
  cfg.hidden = {32, 32};
  cfg.profile = parse_profile("exponential");
  cfg.sparsity = 0.6;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.lr = 1e-2;
  cfg.gradient_ratio_epoch = 1;
  return cfg;
}

}  // namespace

TEST_CASE("static training on separable blobs") {
  const auto cfg = small_config();
  const auto data = load_named_dataset(cfg.dataset, {}, 1);
  NetworkState<float> net;
  const auto rec = train_static(cfg, data, &net);
  REQUIRE(rec.ok());
  CHECK(rec.epochs.size() == 3);
  CHECK(rec.final_accuracy > 0.9);
  double best = 0.0;
  for (const auto& e : rec.epochs) best = std::max(best, e.test_accuracy);
  CHECK(rec.best_accuracy == best);
  CHECK(rec.final_accuracy == rec.epochs.back().test_accuracy);
  CHECK(rec.losses.size() == 3u * 13u);
  CHECK(rec.layer_realized_sparsity.size() == 2);
  CHECK(rec.fanin_ccv.size() == 2);
  CHECK(rec.fanin_ccv[0] > 0.0);
  REQUIRE(rec.gradient.has_value());
  CHECK(rec.gradient->layers.size() == 2);
  CHECK(rec.config_hash.size() == 16);
  CHECK(masks_respected(net));
  for (std::size_t i = 1; i < rec.epochs.size(); ++i) CHECK(rec.epochs[i].wall_ms >= rec.epochs[i - 1].wall_ms);

  SUBCASE("masks are the ones built before training") {
    const auto spec = cfg.network(16, 4);
    const auto masks = build_static_masks(cfg, spec);
    for (std::size_t l = 0; l < 2; ++l) CHECK(net.layers[l].mask->same_bits(*masks[l]));
  }
  SUBCASE("same config and seed reproduce the record") {
    const auto again = train_static(cfg, data);
    CHECK(again.losses == rec.losses);
    CHECK(again.final_accuracy == rec.final_accuracy);
  }
  SUBCASE("a different seed changes the trajectory") {
    auto other = cfg;
    other.seed = 7;
    CHECK(train_static(other, data).losses != rec.losses);
  }
}

TEST_CASE("empty training split leaves the network untrained") {
  auto cfg = small_config();
  cfg.epochs = 1;
  auto data = load_named_dataset(cfg.dataset, {}, 1);
  data.train.features = Matrix<float>(0, data.train.dim());
  data.train.labels.clear();
  const auto rec = train_static(cfg, data);
  REQUIRE(rec.ok());
  CHECK(rec.losses.empty());
  CHECK(rec.final_accuracy < 0.6);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.sparsity = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.sparsity = 0.999;
  cfg.f_min = 5;
  const auto data = load_named_dataset(cfg.dataset, {}, 1);
  CHECK_THROWS_AS(train_static(cfg, data), InfeasibleError);
}

TEST_CASE("divergence is reported with its step") {
  auto cfg = small_config();
  cfg.lr = 1e30;
  const auto data = load_named_dataset(cfg.dataset, {}, 1);
  try {
    train_static(cfg, data);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("results CSV") {
  const auto cfg = small_config();
  const auto rec = train_static(cfg, load_named_dataset(cfg.dataset, {}, 1));
  std::ostringstream out;
  write_csv_header(out);
  write_csv_rows(out, rec);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == kCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 14);
  }
  CHECK(rows == cfg.epochs);
}
