#include "lmkbqa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "lmkbqa/errors.hpp"

namespace lmkbqa {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'K', 'W'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename Tensor>
constexpr std::uint32_t rank_of() {
  return Tensor::RowsAtCompileTime == 1 ? 1 : 2;
}

}  // namespace

void write_checkpoint(const ModelWeights<double>& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  std::uint32_t count = 0;
  visit_tensors([&](const std::string&, const auto&) { ++count; }, w);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, count);
  visit_tensors(
      [&](const std::string& name, const auto& t) {
        using Tensor = std::decay_t<decltype(t)>;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, rank_of<Tensor>());
        if constexpr (rank_of<Tensor>() == 2) put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
      },
      w);
  if (!out) throw Error("write failed for " + path);
}

ModelWeights<double> load_checkpoint(const std::string& path, const ModelDims& dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  const std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  std::size_t pos = 0;
  auto read = [&](void* dst, std::size_t n) {
    if (bytes.size() - pos < n) throw TruncatedFile(path);
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  auto get_u32 = [&] {
    std::uint32_t v;
    read(&v, sizeof v);
    return v;
  };

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic(path);
  pos = 4;
  if (const auto version = get_u32(); version != kCheckpointVersion) throw UnsupportedVersion(version);

  auto w = zero_weights<double>(dims);
  std::uint32_t expected = 0;
  visit_tensors([&](const std::string&, const auto&) { ++expected; }, w);
  if (get_u32() != expected) throw ShapeMismatch("checkpoint tensor count does not match model dimensions");

  visit_tensors(
      [&](const std::string& name, auto& t) {
        std::string stored(get_u32(), '\0');
        read(stored.data(), stored.size());
        if (stored != name) throw ShapeMismatch("checkpoint tensor " + stored + " where " + name + " expected");
        const auto rank = get_u32();
        std::vector<long> shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get_u32());
        const std::vector<long> want = rank == 1 ? std::vector<long>{t.cols()} : std::vector<long>{t.rows(), t.cols()};
        if (shape != want) throw ShapeMismatch("checkpoint tensor " + name + " has a different shape");
        read(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
      },
      w);
  return w;
}

}  // namespace lmkbqa
