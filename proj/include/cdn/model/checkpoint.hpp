#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cdn/model/cdn_model.hpp"

namespace cdn::model {

// Layout (all integers u32 little-endian):
//   "CDNCKPT1" | n_params | n_params x (path_len path rank dims... f32 values...)
//   | config_len config_text
// Parameters appear in the store's path order.

void save_checkpoint(std::ostream& out, const CdnModel<float>& model);
void save_checkpoint(const std::string& path, const CdnModel<float>& model);

/// Config stored in a checkpoint, without reading the parameters.
ModelConfig read_checkpoint_config(const std::string& path);

/// Loads values into an existing model. Throws ConfigError when the stored
/// config differs from the model's, FormatError on bad magic, truncation or
/// a parameter set that does not match.
void load_checkpoint(std::istream& in, CdnModel<float>& model);
void load_checkpoint(const std::string& path, CdnModel<float>& model);

struct CheckpointSummary {
  ModelConfig config;
  std::size_t n_params = 0;
  std::size_t n_scalars = 0;
  std::string listing;  // "path [dims]" per line
};

CheckpointSummary inspect_checkpoint(const std::string& path);

}  // namespace cdn::model
