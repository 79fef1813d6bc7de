#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "tplf/common.hpp"

namespace tplf {

// On-disk container: "TPLF" magic, version, a UTF-8 JSON config section,
// named f32 arrays (little-endian, row-major), and a trailing CRC-32 over
// everything before it. f64 is a test-only compute mode and never serialized.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, Mat<float>> arrays;

  uint64_t arrays_hash() const;  // content identity of the numeric payload
};

// Atomic: writes a temp file in the same directory, then renames.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Validates magic, version, and the trailing CRC before returning state.
Checkpoint load_checkpoint(const std::string& path);

// Header peek: config only, no array payloads and no CRC validation.
nlohmann::json read_checkpoint_config(const std::string& path);

}  // namespace tplf
