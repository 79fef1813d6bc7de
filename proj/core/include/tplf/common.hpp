#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tplf {

// Configuration / shape violations detected before compute.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (corpus files, plans, label sets).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf or degenerate values produced during compute.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-level failures: missing files, corruption, version mismatch.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatI = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

inline constexpr double kNormEps = 1e-12;  // degenerate-embedding threshold
inline constexpr int kIgnoreLabel = -100;  // ignored positions in token classification

// Normal(0, sigma) resampled until |x| <= 2*sigma. BERT-family init.
template <class S>
Mat<S> truncated_normal(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng) {
  Mat<S> m(rows, cols);
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      double x = dist(rng);
      while (sigma > 0.0 && std::abs(x) > 2.0 * sigma) x = dist(rng);
      m(i, j) = static_cast<S>(x);
    }
  }
  return m;
}

// --- little-endian byte helpers (host-independent on-disk layout) ---

inline void store_le32(uint32_t v, std::string& out) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void store_le64(uint64_t v, std::string& out) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint32_t load_le32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline uint64_t load_le64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void store_le_f32(float f, std::string& out) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  store_le32(bits, out);
}

inline float load_le_f32(const unsigned char* p) {
  uint32_t bits = load_le32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

// --- FNV-1a 64: content hashes for provenance and bundle integrity ---

inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = kFnvOffset) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::string to_hex(uint64_t v, int width) {
  static const char* digits = "0123456789abcdef";
  std::string s(width, '0');
  for (int i = width - 1; i >= 0 && v; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

inline std::string to_hex(uint64_t v) { return to_hex(v, 16); }

}  // namespace tplf
