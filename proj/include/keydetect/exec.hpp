#pragma once

#include <cstdint>

namespace keydetect {

// Selects between the serial reference loop and the OpenMP kernel.
// Both paths produce bit-identical results; the serial one is kept as the
// reference the tests compare against.
enum class Exec { serial, parallel };

// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

// splitmix64; used to derive independent sub-seeds from one user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace keydetect
