#pragma once

// Checkpoint file (little-endian): "LMKW", u32 version = 1, u32 tensor count,
// then per tensor u32 name length, name bytes, u32 rank, rank x u32 dims and
// the float64 values row-major. Tensors appear in visit_tensors order.

#include <cstdint>
#include <string>

#include "lmkbqa/model.hpp"

namespace lmkbqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const ModelWeights<double>& w, const std::string& path);

// Shapes and names must match `dims` exactly.
ModelWeights<double> load_checkpoint(const std::string& path, const ModelDims& dims);

}  // namespace lmkbqa
