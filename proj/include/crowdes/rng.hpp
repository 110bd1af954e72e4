#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace crowdes {

using Rng = std::mt19937_64;

// Derives an independent, reproducible stream from a master seed and a name
// ("emit", "switch", "eval", ...). Same (seed, name) always yields the same stream.
Rng named_stream(std::uint64_t master_seed, std::string_view name);

// Same as named_stream but with an additional integer index, for per-repetition streams.
Rng named_stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

}  // namespace crowdes
