#include "syncog/seed.hpp"

#include "syncog/hash.hpp"

#include <fmt/format.h>

namespace syncog::corpus {

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view ns, std::uint64_t index) {
  // Decimal rendering keeps the preimage independent of endianness.
  return stable_hash64(fmt::format("syncog-seed/1|{}|{}|{}", master_seed, ns, index));
}

}  // namespace syncog::corpus
