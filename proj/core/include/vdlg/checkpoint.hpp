#pragma once

#include <memory>
#include <string>

#include "vdlg/config.hpp"
#include "vdlg/encoder.hpp"

namespace vdlg {

struct CheckpointMeta {
  RunConfig config;
  std::uint64_t step = 0;
  std::uint64_t data_seed = 0;
};

// Binary checkpoint: config text + step counter + data-seed record + every
// named parameter tensor, bit-exact. load(save(m)) reproduces forward outputs
// bit-identically.
void save_checkpoint(const std::string& path, const Model& model, const RunConfig& config,
                     std::uint64_t step, std::uint64_t data_seed);

CheckpointMeta peek_checkpoint(const std::string& path);

std::unique_ptr<Model> load_checkpoint(const std::string& path, int vocab_size,
                                       CheckpointMeta* meta = nullptr);

}  // namespace vdlg
