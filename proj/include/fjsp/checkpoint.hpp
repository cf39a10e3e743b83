#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fjsp/tensor.hpp"

namespace fjsp {

// Versioned binary container for named tensors. Layout, all little-endian:
//   magic "DANL1"
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rows, u32 cols, f64 payload
// A JSON sidecar at <path>.json carries hyperparameters and training
// metadata.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const std::string& metadata_json);

struct LoadedCheckpoint {
  std::map<std::string, Tensor> tensors;
  std::string metadata_json;  // "{}" when the sidecar is missing
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fjsp
