#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pcnet/model.hpp"

namespace pcnet {

// Checkpoint file layout (all multi-byte values little-endian):
//   bytes 0..7   magic "PCCKPT01"
//   bytes 8..11  uint32 header length H
//   bytes 12..   H bytes of UTF-8 JSON:
//                  {"experiment": str, "trainer": str, "objective": str,
//                   "config": {...}, "params": [{"name": str, "shape": [int..]}, ...]}
//   then, for each entry of "params" in order, shape-product raw float64 values.
struct Checkpoint {
  std::string experiment;
  std::string trainer;
  std::string objective;
  nlohmann::json config;  // enough architecture detail to rebuild the model
  std::vector<Param> params;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// Copies checkpoint values into a freshly built model's parameters.
// Names, counts and shapes must match exactly.
void apply_params(const Checkpoint& ck, ParamStore& store);

}  // namespace pcnet
