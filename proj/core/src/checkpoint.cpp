#include "tplf/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <zlib.h>

namespace tplf {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'L', 'F'};
constexpr uint8_t kDtypeF32 = 0;

uint32_t crc_of(const std::string& bytes) {
  return static_cast<uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

struct Reader {
  const unsigned char* p;
  size_t remaining;
  const std::string& path;

  void need(size_t n) const {
    if (remaining < n) throw IoError(path + ": truncated checkpoint (CRC cannot validate)");
  }
  const unsigned char* take(size_t n) {
    need(n);
    const unsigned char* out = p;
    p += n;
    remaining -= n;
    return out;
  }
};

}  // namespace

uint64_t Checkpoint::arrays_hash() const {
  uint64_t h = kFnvOffset;
  for (const auto& [name, m] : arrays) {
    h = fnv1a(name, h);
    std::string payload;
    payload.reserve(static_cast<size_t>(m.size()) * 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) store_le_f32(m.data()[i], payload);
    h = fnv1a(payload, h);
  }
  return h;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string bytes;
  bytes.append(kMagic, 4);
  store_le32(Checkpoint::kVersion, bytes);
  std::string config = ckpt.config.dump();
  store_le64(config.size(), bytes);
  bytes += config;
  store_le32(static_cast<uint32_t>(ckpt.arrays.size()), bytes);
  for (const auto& [name, m] : ckpt.arrays) {
    if (name.size() > 0xffff) throw ConfigError("save_checkpoint: array name too long");
    store_le32(static_cast<uint32_t>(name.size()), bytes);
    bytes += name;
    bytes.push_back(static_cast<char>(kDtypeF32));
    bytes.push_back(static_cast<char>(2));  // ndim
    store_le64(static_cast<uint64_t>(m.rows()), bytes);
    store_le64(static_cast<uint64_t>(m.cols()), bytes);
    for (Eigen::Index i = 0; i < m.size(); ++i) store_le_f32(m.data()[i], bytes);
  }
  store_le32(crc_of(bytes), bytes);

  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 4 + 4 + 8 + 4 + 4) throw IoError(path + ": truncated checkpoint (CRC cannot validate)");
  uint32_t stored_crc = load_le32(reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size() - 4);
  std::string body = bytes.substr(0, bytes.size() - 4);
  if (crc_of(body) != stored_crc) throw IoError(path + ": CRC mismatch, checkpoint corrupt");

  Reader r{reinterpret_cast<const unsigned char*>(body.data()), body.size(), path};
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw IoError(path + ": not a TPLF checkpoint");
  uint32_t version = load_le32(r.take(4));
  if (version > Checkpoint::kVersion)
    throw IoError(path + ": checkpoint version " + std::to_string(version) + " is newer than reader");
  uint64_t config_len = load_le64(r.take(8));
  const unsigned char* config_bytes = r.take(config_len);

  Checkpoint out;
  out.config = nlohmann::json::parse(config_bytes, config_bytes + config_len);
  uint32_t num_arrays = load_le32(r.take(4));
  for (uint32_t a = 0; a < num_arrays; ++a) {
    uint32_t name_len = load_le32(r.take(4));
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    uint8_t dtype = *r.take(1);
    if (dtype != kDtypeF32) throw IoError(path + ": unsupported dtype tag");
    uint8_t ndim = *r.take(1);
    if (ndim != 2) throw IoError(path + ": unsupported array rank");
    uint64_t rows = load_le64(r.take(8));
    uint64_t cols = load_le64(r.take(8));
    Mat<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const unsigned char* payload = r.take(rows * cols * 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = load_le_f32(payload + i * 4);
    if (!out.arrays.emplace(std::move(name), std::move(m)).second)
      throw IoError(path + ": duplicate array name");
  }
  if (r.remaining != 0) throw IoError(path + ": trailing bytes after arrays");
  return out;
}

nlohmann::json read_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char head[16];
  in.read(head, 16);
  if (in.gcount() != 16 || std::memcmp(head, kMagic, 4) != 0)
    throw IoError(path + ": not a TPLF checkpoint");
  uint32_t version = load_le32(reinterpret_cast<const unsigned char*>(head) + 4);
  if (version > Checkpoint::kVersion)
    throw IoError(path + ": checkpoint version " + std::to_string(version) + " is newer than reader");
  uint64_t config_len = load_le64(reinterpret_cast<const unsigned char*>(head) + 8);
  std::string config(config_len, '\0');
  in.read(config.data(), static_cast<std::streamsize>(config_len));
  if (in.gcount() != static_cast<std::streamsize>(config_len))
    throw IoError(path + ": truncated config section");
  return nlohmann::json::parse(config);
}

}  // namespace tplf
