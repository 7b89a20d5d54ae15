#include "lmkbqa/embeddings.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'K', 'B'};

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void read(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw TruncatedFile(path_);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return v;
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::string path_;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd stub_vector(std::string_view token, std::uint64_t position, long dim, std::uint64_t seed) {
  if (dim <= 0) throw Error("stub dim must be positive");
  const std::uint64_t h = fnv1a64(token) ^ (position * 0x9E3779B97F4A7C15ULL) ^ seed;
  Eigen::VectorXd v(dim);
  for (long j = 0; j < dim; ++j) {
    const auto bits = splitmix64(h + static_cast<std::uint64_t>(j)) >> 11;
    v[j] = static_cast<double>(bits) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return v;
}

EmbeddingStore load_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file " + path);
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path);

  char magic[4];
  try {
    r.read(magic, 4);
  } catch (const TruncatedFile&) {
    throw BadMagic(path);
  }
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagic(path);
  const auto version = r.get<std::uint32_t>();
  if (version != kEmbeddingFileVersion) throw UnsupportedVersion(version);

  EmbeddingStore store;
  store.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t e = 0; e < count; ++e) {
    std::string key(r.get<std::uint32_t>(), '\0');
    r.read(key.data(), key.size());
    const auto rows = r.get<std::uint32_t>();
    StoredMatrix m(rows, store.dim);
    r.read(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
    store.entries.insert_or_assign(std::move(key), std::move(m));
  }
  return store;
}

void write_embedding_file(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embedding file " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kEmbeddingFileVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim));
  put<std::uint64_t>(out, store.entries.size());
  for (const auto& [key, m] : store.entries) {
    if (m.cols() != store.dim) throw DimensionMismatch(store.dim, m.cols());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * m.size()));
  }
  if (!out) throw Error("write failed for " + path);
}

EmbeddingProvider EmbeddingProvider::stub(long dim, std::uint64_t seed) {
  if (dim <= 0) throw Error("embedding dim must be positive");
  return EmbeddingProvider(Mode::kStub, dim, seed);
}

EmbeddingProvider EmbeddingProvider::from_store(EmbeddingStore store) {
  if (store.dim <= 0) throw Error("embedding dim must be positive");
  EmbeddingProvider p(Mode::kFile, store.dim, 0);
  p.store_ = std::move(store);
  return p;
}

EmbeddingProvider EmbeddingProvider::from_file(const std::string& path, long expected_dim) {
  auto store = load_embedding_file(path);
  if (expected_dim > 0 && store.dim != expected_dim) throw DimensionMismatch(expected_dim, store.dim);
  return from_store(std::move(store));
}

EmbeddingMatrix EmbeddingProvider::embed(const TokenSequence& seq) const { return embed(seq.tokens); }

EmbeddingMatrix EmbeddingProvider::embed(const Tokens& tokens) const {
  const long rows = static_cast<long>(tokens.size());
  if (mode_ == Mode::kStub) {
    EmbeddingMatrix out(rows, dim_);
    for (long i = 0; i < rows; ++i)
      out.row(i) = stub_vector(tokens[i], static_cast<std::uint64_t>(i), dim_, seed_).transpose();
    return out;
  }
  const auto key = join_tokens(tokens);
  auto it = store_.entries.find(key);
  if (it == store_.entries.end()) throw MissingEmbedding(key);
  if (it->second.cols() != dim_) throw DimensionMismatch(dim_, it->second.cols());
  if (it->second.rows() != rows)
    throw ShapeMismatch("stored embedding has " + std::to_string(it->second.rows()) + " rows for " +
                        std::to_string(rows) + " tokens");
  return it->second.cast<double>();
}

}  // namespace lmkbqa
