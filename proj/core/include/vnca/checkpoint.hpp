#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vnca/model.hpp"
#include "vnca/training.hpp"

namespace vnca {

// Binary checkpoint: "VNCA" magic, u32 version (currently 1), a key=value
// config block, named f32 tensor records (parameters, then optimizer moments
// as adam.m.<name> / adam.v.<name>), the global step and the training RNG
// counter. All integers little-endian; loading refuses unknown versions and
// re-saving a loaded checkpoint reproduces the bytes exactly.

void save_checkpoint(const std::string& path, const VncaModel& model,
                     const Adam* opt, std::uint64_t global_step,
                     std::uint64_t rng_counter, std::uint64_t seed);

struct LoadedCheckpoint {
  VncaModel model;
  bool has_opt = false;
  // Moment vectors keyed by parameter name; install with restore_adam.
  std::map<std::string, std::vector<float>> adam_m, adam_v;
  std::uint64_t global_step = 0;
  std::uint64_t rng_counter = 0;
  std::uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies saved moments into an Adam built over the same parameter list and
// sets its update count to global_step.
void restore_adam(Adam& opt, const LoadedCheckpoint& ck,
                  const std::vector<NamedParam>& params);

}  // namespace vnca
