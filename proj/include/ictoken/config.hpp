#pragma once

#include <cstdint>
#include <string>

#include "ictoken/errors.hpp"

namespace ictoken {

/// Text key=value configuration for the CLI and network harness.
/// Unknown keys are rejected; '#' starts a comment line.
struct HarnessConfig {
  std::size_t nodes = 4;
  std::size_t quorum = 0;  // 0 -> floor(2n/3)+1
  std::size_t blockCapacity = 16;
  std::uint64_t seed = 0;
  std::string ledgerPath;

  std::string toText() const;
};

Result<HarnessConfig> parseConfig(std::string_view text);
Result<HarnessConfig> loadConfig(const std::string& path);

}  // namespace ictoken
