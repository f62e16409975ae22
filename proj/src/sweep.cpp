#include "psn/sweep.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "psn/error.hpp"

namespace psn {

RunRecord execute_run(const RunSpec& run, const DatasetPair& data) {
  try {
    if (run.rigl) return train_rigl(run.train, run.rigl_config, data).record;
    return train_static(run.train, data);
  } catch (const std::exception& e) {
    RunRecord failed;
    failed.config_hash = run.hash;
    failed.trainer = run.rigl ? "rigl" : "static";
    failed.dataset = run.train.dataset;
    failed.profile = run.rigl ? "rigl:" + run.rigl_config.init.describe() : describe(run.train.profile);
    failed.spreading = std::string(to_string(run.train.spreading));
    failed.target_sparsity = run.train.sparsity;
    failed.f_min = run.train.f_min;
    failed.seed = run.train.seed;
    failed.error = e.what();
    return failed;
  }
}

std::vector<RunRecord> run_sweep(const std::vector<RunSpec>& runs, const DatasetPair& data, int jobs,
                                 const std::function<void(const RunRecord&)>& on_record) {
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  std::vector<RunRecord> records(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      records[i] = execute_run(runs[i], data);
      if (on_record) on_record(records[i]);
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), runs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

ResultSink::ResultSink(std::filesystem::path dir)
    : dir_(std::move(dir)), csv_(dir_ / "results.csv"), manifest_(dir_ / "runs.tsv") {
  std::filesystem::create_directories(dir_);
  if (!std::filesystem::exists(csv_) || std::filesystem::file_size(csv_) == 0) {
    std::ofstream out(csv_, std::ios::app);
    write_csv_header(out);
  }
}

void ResultSink::append(const RunRecord& record) {
  std::ostringstream rows;
  write_csv_rows(rows, record);
  std::ostringstream line;
  std::string error = record.error;
  for (char& c : error) {
    if (c == '\t' || c == '\n') c = ' ';
  }
  line << record.config_hash << '\t' << record.seed << '\t' << (record.ok() ? "ok" : "failed") << '\t'
       << record.final_accuracy << '\t' << error << '\n';
  std::lock_guard lock(mu_);
  {
    std::ofstream out(csv_, std::ios::app);
    out << rows.str();
  }
  std::ofstream man(manifest_, std::ios::app);
  man << line.str();
}

std::set<std::pair<std::string, std::uint64_t>> ResultSink::completed() const {
  std::set<std::pair<std::string, std::uint64_t>> done;
  std::ifstream in(manifest_);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string hash, seed, status;
    if (!std::getline(fields, hash, '\t') || !std::getline(fields, seed, '\t') || !std::getline(fields, status, '\t')) {
      continue;
    }
    if (status == "ok") done.emplace(hash, std::stoull(seed));
  }
  return done;
}

}  // namespace psn
