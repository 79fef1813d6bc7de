#pragma once

#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "tplf/common.hpp"

namespace tplf {

// One JSONL line per record: {"step":..,"wall_time":..,"phase":..,<metrics>}.
// Steps must be monotone within a phase.
struct MetricRecord {
  int64_t step = 0;
  double wall_time = 0.0;
  std::string phase;
  std::map<std::string, double> metrics;

  nlohmann::json to_json() const;
};

// Append-only writer; every line is flushed so the file is valid JSONL at
// any prefix. wall_time can be suppressed (written as 0) so identical runs
// produce identical files.
class MetricsLogger {
 public:
  explicit MetricsLogger(const std::string& path, bool record_wall_time = true);

  MetricsLogger(const MetricsLogger&) = delete;
  MetricsLogger& operator=(const MetricsLogger&) = delete;

  void log(const std::string& phase, int64_t step,
           const std::map<std::string, double>& metrics);

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  bool record_wall_time_;
  double start_time_;
  std::map<std::string, int64_t> last_step_;
  std::ofstream out_;
};

uint64_t file_hash(const std::string& path);

}  // namespace tplf
