#include "psn/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "psn/config.hpp"
#include "psn/error.hpp"

namespace psn {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void TrainConfig::validate() const {
  profile.validate();
  if (hidden.empty()) throw ValidationError("at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden widths must be positive");
  }
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be positive");
  if (!(sparsity >= 0.0) || !(sparsity < 1.0)) {
    throw ValidationError("sparsity must lie in [0, 1), got " + num(sparsity));
  }
  if (f_min < 1) throw ValidationError("f_min must be >= 1");
}

NetworkSpec TrainConfig::network(int inputs, int classes) const {
  NetworkSpec spec;
  spec.layer_dims.push_back(inputs);
  spec.layer_dims.insert(spec.layer_dims.end(), hidden.begin(), hidden.end());
  spec.layer_dims.push_back(classes);
  spec.validate();
  return spec;
}

std::vector<std::optional<SparseMask>> build_static_masks(const TrainConfig& config, const NetworkSpec& spec) {
  std::vector<std::optional<SparseMask>> masks;
  for (std::size_t l = 0; l < spec.num_hidden(); ++l) {
    const int n = spec.layer_dims[l];
    const int m = spec.layer_dims[l + 1];
    const auto alloc = allocate_fanin(config.profile, n, m, config.sparsity, config.f_min, config.seed + l);
    masks.emplace_back(build_mask(alloc, config.spreading, config.seed, l));
  }
  return masks;
}

void record_topology(const NetworkState<float>& net, RunRecord& record) {
  record.layer_realized_sparsity.clear();
  record.fanin_ccv.clear();
  long long ones = 0;
  long long total = 0;
  for (const auto& layer : net.layers) {
    if (!layer.mask) continue;
    const long long count = layer.mask->count();
    const long long size = static_cast<long long>(layer.out) * layer.in;
    ones += count;
    total += size;
    record.layer_realized_sparsity.push_back(1.0 - static_cast<double>(count) / static_cast<double>(size));
    record.fanin_ccv.push_back(fanin_stats(layer.mask->fanin()).cv);
  }
  record.realized_sparsity = total == 0 ? 0.0 : 1.0 - static_cast<double>(ones) / static_cast<double>(total);
}

RunRecord run_training(const TrainConfig& config, const DatasetPair& data, NetworkState<float>& net,
                       const TrainHooks& hooks) {
  const auto start = Clock::now();
  RunRecord record;
  const Dataset& train = data.train;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  auto measure = [&](int after_epoch) {
    if (train.size() == 0) return;
    const auto batches = make_batches(train.size(), bs, config.seed, static_cast<std::uint64_t>(after_epoch));
    std::vector<int> y;
    for (auto i : batches.front()) y.push_back(train.labels[i]);
    record.gradient = gradient_ratio(net, gather_batch<float>(train, batches.front()), y, net.step);
  };
  if (config.gradient_ratio_epoch == 0) measure(0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(train.size(), bs, config.seed, static_cast<std::uint64_t>(epoch))) {
      std::vector<int> y;
      y.reserve(batch.size());
      for (auto i : batch) y.push_back(train.labels[i]);
      const GradMode mode = hooks.grad_mode ? hooks.grad_mode(net.step + 1) : GradMode::kActive;
      const auto lg = loss_and_backward(net, forward(net, gather_batch<float>(train, batch)), y, mode);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                              std::to_string(net.step + 1));
      }
      adam_step(net, lg.grads, AdamConfig{config.lr});
      if (hooks.after_step) hooks.after_step(net, lg.grads, net.step);
      record.losses.push_back(lg.loss);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochRecord er;
    er.epoch = epoch + 1;
    er.train_loss = seen == 0 ? std::nan("") : loss_sum / static_cast<double>(seen);
    er.test_accuracy = evaluate(net, data.test);
    er.wall_ms = ms_since(start);
    record.epochs.push_back(er);
    record.best_accuracy = std::max(record.best_accuracy, er.test_accuracy);
    if (epoch + 1 == config.gradient_ratio_epoch) measure(epoch + 1);
  }
  record.final_accuracy = record.epochs.back().test_accuracy;
  record.wall_ms = ms_since(start);
  return record;
}

RunRecord train_static(const TrainConfig& config, const DatasetPair& data, NetworkState<float>* final_state) {
  config.validate();
  if (data.train.dim() != data.test.dim() && data.train.size() > 0) {
    throw ValidationError("train and test feature dimensions differ");
  }
  const auto spec = config.network(static_cast<int>(data.test.dim()), data.test.num_classes);
  auto net = init_network<float>(spec, build_static_masks(config, spec), config.seed);
  const auto initial = net;

  RunRecord record = run_training(config, data, net);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (net.layers[l].mask && !net.layers[l].mask->same_bits(*initial.layers[l].mask)) {
      throw Error("mask of layer " + std::to_string(l) + " changed during static training");
    }
  }
  record.config_hash = config_hash(config);
  record.dataset = config.dataset;
  record.profile = describe(config.profile);
  record.spreading = std::string(to_string(config.spreading));
  record.target_sparsity = config.sparsity;
  record.f_min = config.f_min;
  record.seed = config.seed;
  record_topology(net, record);
  if (final_state != nullptr) *final_state = std::move(net);
  return record;
}

void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

void write_csv_rows(std::ostream& out, const RunRecord& record) {
  auto layer_value = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? num(v[i]) : ""; };
  std::vector<double> ratios;
  if (record.gradient) {
    for (const auto& l : record.gradient->layers) ratios.push_back(l.ratio);
  }
  std::ostringstream rows;
  for (const auto& e : record.epochs) {
    rows << record.dataset << ',' << record.profile << ',' << record.spreading << ',' << num(record.target_sparsity)
         << ',' << num(record.realized_sparsity) << ',' << record.f_min << ',' << record.seed << ',' << e.epoch << ','
         << num(e.train_loss) << ',' << num(e.test_accuracy) << ',' << layer_value(record.fanin_ccv, 0) << ','
         << layer_value(record.fanin_ccv, 1) << ',' << layer_value(ratios, 0) << ',' << layer_value(ratios, 1) << ','
         << num(std::round(e.wall_ms * 10.0) / 10.0) << '\n';
  }
  out << rows.str();
  out.flush();
}

}  // namespace psn
