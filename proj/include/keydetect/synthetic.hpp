#pragma once

#include <cstdint>

#include "keydetect/dataset.hpp"

namespace keydetect {

// Generator for benchmark-shaped data (subjects x sessions x reps of valid
// 31-feature timing vectors). Each subject gets a log-normal timing profile;
// `separation` scales how far profiles spread apart and `noise` scales the
// per-repetition jitter. Used by tests, the benchmark target and as a
// stand-in when the real benchmark CSV is not available.
struct SyntheticOptions {
  std::size_t subjects = 51;
  int sessions = 8;
  int reps_per_session = 50;
  double separation = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 7;
};

Dataset make_synthetic_dataset(const SyntheticOptions& options = {});

}  // namespace keydetect
