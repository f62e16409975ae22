#pragma once
// Runs a list of (config, seed) jobs, optionally on several threads, and
// appends their results to an on-disk CSV plus a completion manifest.

#include <filesystem>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "psn/config.hpp"

namespace psn {

// Executes one run. Errors are caught and stored in the record.
RunRecord execute_run(const RunSpec& run, const DatasetPair& data);

// Records come back in input order. `on_record` is called as each run
// finishes, from the worker thread, and must be thread-safe.
std::vector<RunRecord> run_sweep(const std::vector<RunSpec>& runs, const DatasetPair& data, int jobs = 1,
                                 const std::function<void(const RunRecord&)>& on_record = {});

// results.csv (one row per epoch) and runs.tsv (hash, seed, status, final
// accuracy, error) inside `dir`. Appends are serialized and each record is
// written with a single flush.
class ResultSink {
 public:
  explicit ResultSink(std::filesystem::path dir);

  void append(const RunRecord& record);
  // (hash, seed) pairs with status ok.
  std::set<std::pair<std::string, std::uint64_t>> completed() const;

  const std::filesystem::path& csv_path() const { return csv_; }
  const std::filesystem::path& manifest_path() const { return manifest_; }

 private:
  std::filesystem::path dir_, csv_, manifest_;
  std::mutex mu_;
};

}  // namespace psn
