#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace revisit {

// ---------------------------------------------------------------------------
// Deterministic hashing and random streams.
//
// Everything that samples randomness goes through these primitives instead of
// std::<distribution> types, so output bytes are identical across standard
// library versions and across shard/thread counts.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);

/// FNV-1a over bytes; stable across platforms, used to derive per-entity
/// random streams from string ids.
std::uint64_t fnv1a64(std::string_view bytes);

/// Mixes a root seed with an arbitrary tag (e.g. "user"/"pin") and an id.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::string_view id);

/// xoshiro256** with explicit inline distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n), unbiased (Lemire with rejection).
  std::uint64_t uniform_below(std::uint64_t n);

  bool bernoulli(double p);

  /// Inversion by sequential search; fine for the small means used here.
  std::uint32_t poisson(double mean);

 private:
  std::array<std::uint64_t, 4> state_;
};

// ---------------------------------------------------------------------------
// Worker pool sizing and sharded execution.
// ---------------------------------------------------------------------------

/// Worker cap from REVISIT_LAB_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

/// Runs fn(shard) for shard in [0, n_shards) on up to worker_count() threads.
/// The caller owns making shard outputs order-independent.
void parallel_shards(std::size_t n_shards, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Text helpers for the line-oriented file formats.
// ---------------------------------------------------------------------------

std::vector<std::string_view> split_csv(std::string_view line);
std::string_view trim(std::string_view s);

/// "%.9g" — the precision used by all data files carrying reals.
std::string format_real(double v);
/// "%.17g" — round-trip exact; used by the model file.
std::string format_real_exact(double v);

std::int64_t parse_int(std::string_view s, const std::string& context);
double parse_real(std::string_view s, const std::string& context);

/// FNV-1a digest of a whole file, hex-encoded; the manifest's file digest.
std::string file_digest(const std::string& path);

void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace revisit
