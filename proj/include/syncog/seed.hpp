#pragma once

#include <cstdint>
#include <string_view>

namespace syncog::corpus {

/// Stable 64-bit seed for (master_seed, namespace, index). Every random draw
/// in a run is reachable from the master seed through this function.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view ns, std::uint64_t index);

}  // namespace syncog::corpus
