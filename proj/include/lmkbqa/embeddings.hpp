#pragma once

// Per-token contextual embeddings for an assembled sequence.
//
// Two providers share one interface: a store of precomputed language-model
// features keyed by the space-joined sequence, and a hash-seeded stub whose
// output is bit-exact across implementations:
//
//   h      = fnv1a64(token) ^ (position * 0x9E3779B97F4A7C15) ^ seed
//   v[j]   = (splitmix64(h + j) >> 11) * 2^-53 * 2 - 1
//
// Embedding file (little-endian): "LMKB", u32 version = 1, u32 dim,
// u64 entries, then per entry u32 key length, key bytes, u32 rows and
// rows * dim float32 values, row-major.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

#include "lmkbqa/aspects.hpp"

namespace lmkbqa {

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StoredMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;
inline constexpr long kDefaultStubDim = 64;
// 12 encoder layers of a base-size model, 768 wide each.
inline constexpr long kLanguageModelDim = 12 * 768;

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
Eigen::VectorXd stub_vector(std::string_view token, std::uint64_t position, long dim, std::uint64_t seed);

struct EmbeddingStore {
  long dim = 0;
  std::map<std::string, StoredMatrix> entries;
};

EmbeddingStore load_embedding_file(const std::string& path);
void write_embedding_file(const EmbeddingStore& store, const std::string& path);

class EmbeddingProvider {
 public:
  enum class Mode { kFile, kStub };

  static EmbeddingProvider stub(long dim = kDefaultStubDim, std::uint64_t seed = 1);
  static EmbeddingProvider from_store(EmbeddingStore store);
  static EmbeddingProvider from_file(const std::string& path, long expected_dim);

  Mode mode() const { return mode_; }
  long dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  EmbeddingMatrix embed(const TokenSequence& seq) const;
  EmbeddingMatrix embed(const Tokens& tokens) const;

 private:
  EmbeddingProvider(Mode mode, long dim, std::uint64_t seed) : mode_(mode), dim_(dim), seed_(seed) {}

  Mode mode_;
  long dim_;
  std::uint64_t seed_;
  EmbeddingStore store_;
};

}  // namespace lmkbqa
