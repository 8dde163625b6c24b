#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmk/autodiff.hpp"

namespace mmk {

/// Parameter envelope shared by TKZ1 and GEN1: magic, JSON header with a
/// "params" list of {name, rows, cols}, then float32 values row-major.
std::vector<std::uint8_t> writeCheckpoint(std::string_view magic, nlohmann::json header,
                                          std::span<const ad::Parameter* const> params);

struct CheckpointContents {
  nlohmann::json header;
  std::vector<std::pair<std::string, ad::Mat>> params;

  // Copies the stored values into `dst`, matching by name and shape.
  void restore(std::span<ad::Parameter* const> dst) const;
};

CheckpointContents readCheckpoint(std::string_view magic, std::span<const std::uint8_t> bytes);

} // namespace mmk
