#pragma once

#include <cstdint>
#include <string>

#include "dapolab/policy.hpp"

namespace dapolab {

// Binary checkpoint: little-endian block holding the policy shape and the
// flat parameter vector, plus a fingerprint of the config snapshot that
// produced it. Layout (docs/checkpoint-format.md):
//   8 bytes  magic "DAPOLABC"
//   1 byte   format version (1)
//   8 bytes  config fingerprint (uint64)
//   4 x 4 bytes  vocab_size, embed_dim, hidden_dim, window (uint32)
//   8 bytes  parameter count P (uint64)
//   P x 8 bytes  parameters (IEEE-754 float64)
struct Checkpoint {
  PolicyParams params;
  std::uint64_t config_fingerprint = 0;
};

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::uint64_t config_fingerprint);

Checkpoint load_checkpoint(const std::string& path);

// FNV-1a 64-bit hash; fingerprints config snapshots.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace dapolab
