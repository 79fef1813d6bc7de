#include "tplf/metrics_log.hpp"

#include <chrono>
#include <filesystem>

namespace tplf {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

nlohmann::json MetricRecord::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["wall_time"] = wall_time;
  j["phase"] = phase;
  for (const auto& [k, v] : metrics) j[k] = v;
  return j;
}

MetricsLogger::MetricsLogger(const std::string& path, bool record_wall_time)
    : path_(path), record_wall_time_(record_wall_time), start_time_(now_seconds()) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open metrics file " + path);
}

void MetricsLogger::log(const std::string& phase, int64_t step,
                        const std::map<std::string, double>& metrics) {
  auto it = last_step_.find(phase);
  if (it != last_step_.end() && step < it->second)
    throw ConfigError("metrics: step must be monotone within phase '" + phase + "'");
  last_step_[phase] = step;
  MetricRecord rec;
  rec.step = step;
  rec.wall_time = record_wall_time_ ? now_seconds() - start_time_ : 0.0;
  rec.phase = phase;
  rec.metrics = metrics;
  out_ << rec.to_json().dump() << "\n";
  out_.flush();
  if (!out_) throw IoError("metrics write failed: " + path_);
}

uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

}  // namespace tplf
