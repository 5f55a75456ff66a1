#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace nsbayes {

/// SplitMix64 finaliser; used to derive independent per-task seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of stream `stream` under master seed `master`.
///
/// Counter scheme: seed = splitmix64(splitmix64(master) ^ splitmix64(stream + 1)).
/// Stream 0 is reserved for the top-level driver; replicate r uses stream r + 1
/// and sub-tasks of a replicate use derive_seed(derive_seed(master, r + 1), k).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Incremental 64-bit FNV-1a over raw bytes.
class Fnv1a {
public:
  void mix(const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= b[i];
      h_ *= 1099511628211ULL;
    }
  }
  template <class T>
  void mix_value(const T& v) {
    mix(&v, sizeof(T));
  }
  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 1469598103934665603ULL;
};

/// Seeded random source owned by exactly one worker.
class RandomSource {
public:
  explicit RandomSource(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }

  /// Full textual state (engine and cached normal variate), for checkpoints.
  std::string save_state() const;
  void restore_state(const std::string& state);

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nsbayes
