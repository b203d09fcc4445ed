#include "keydetect/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "keydetect/exec.hpp"

namespace keydetect {

Dataset make_synthetic_dataset(const SyntheticOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> hold_base(0.06, 0.14);
  std::uniform_real_distribution<double> dd_base(0.12, 0.45);

  std::array<double, kKeyCount> pop_hold{};
  std::array<double, kKeyCount - 1> pop_dd{};
  for (auto& h : pop_hold) h = hold_base(rng);
  for (auto& d : pop_dd) d = dd_base(rng);

  Dataset ds;
  for (std::size_t s = 0; s < o.subjects; ++s) {
    std::mt19937_64 srng(derive_seed(o.seed, s));
    std::array<double, kKeyCount> hold{};
    std::array<double, kKeyCount - 1> dd{};
    for (std::size_t k = 0; k < kKeyCount; ++k) {
      hold[k] = pop_hold[k] * std::exp(o.separation * 0.25 * gauss(srng));
    }
    for (std::size_t k = 0; k + 1 < kKeyCount; ++k) {
      dd[k] = pop_dd[k] * std::exp(o.separation * 0.35 * gauss(srng));
    }
    const double subject_jitter = 0.8 + 0.4 * std::uniform_real_distribution<double>(0, 1)(srng);

    char id[16];
    std::snprintf(id, sizeof id, "s%03zu", s + 2);
    for (int session = 1; session <= o.sessions; ++session) {
      // Slow drift across sessions.
      const double drift = std::exp(-0.02 * (session - 1) + 0.03 * gauss(srng));
      for (int rep = 1; rep <= o.reps_per_session; ++rep) {
        std::array<double, kFeatureCount> f{};
        for (std::size_t k = 0; k < kKeyCount; ++k) {
          const double h =
              hold[k] * drift * std::exp(o.noise * subject_jitter * 0.15 * gauss(srng));
          f[3 * k] = h;
          if (k + 1 < kKeyCount) {
            const double d =
                dd[k] * drift * std::exp(o.noise * subject_jitter * 0.22 * gauss(srng));
            f[3 * k + 1] = d;
            f[3 * k + 2] = d - h;
          }
        }
        KeystrokeSample sample;
        sample.subject = id;
        sample.session = session;
        sample.repetition = rep;
        sample.vector = TimingVector::from(f);
        ds.samples.push_back(std::move(sample));
      }
    }
  }
  normalize_order(ds);
  return ds;
}

}  // namespace keydetect
