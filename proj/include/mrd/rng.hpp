#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mrd {

/// Derives an independent generator for a named consumer from one user seed.
/// Adding a new stream name never perturbs the sequences of existing ones.
std::mt19937_64 named_stream(std::uint64_t seed, std::string_view name);

}  // namespace mrd
