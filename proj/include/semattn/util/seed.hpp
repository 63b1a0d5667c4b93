#pragma once

#include <cstdint>
#include <string>

namespace semattn {

// Independent RNG stream seed for a named component (FNV-1a of the tag mixed
// with the base seed through splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag);

}  // namespace semattn
