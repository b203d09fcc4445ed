#include "keydetect/timing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "keydetect/errors.hpp"

namespace keydetect {

const std::array<std::string, kFeatureCount>& feature_labels() {
  static const auto labels = [] {
    std::array<std::string, kFeatureCount> out;
    std::size_t n = 0;
    for (std::size_t k = 0; k < kKeyCount; ++k) {
      const std::string key(kCsvKeyNames[k]);
      out[n++] = "H." + key;
      if (k + 1 < kKeyCount) {
        const std::string next(kCsvKeyNames[k + 1]);
        out[n++] = "DD." + key + "." + next;
        out[n++] = "UD." + key + "." + next;
      }
    }
    return out;
  }();
  return labels;
}

FeatureKind feature_kind(std::size_t index) {
  switch (index % 3) {
    case 0: return FeatureKind::hold;
    case 1: return FeatureKind::down_down;
    default: return FeatureKind::up_down;
  }
}

TimingVector TimingVector::from(std::span<const double> values) {
  if (values.size() != kFeatureCount) {
    throw ValueError("timing vector needs " + std::to_string(kFeatureCount) +
                     " values, got " + std::to_string(values.size()));
  }
  TimingVector v;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double x = values[i];
    if (!std::isfinite(x)) {
      throw ValueError("non-finite value for " + feature_labels()[i]);
    }
    if (feature_kind(i) != FeatureKind::up_down && !(x > 0.0)) {
      throw ValueError("non-positive value for " + feature_labels()[i]);
    }
    v.values_[i] = x;
  }
  return v;
}

std::optional<std::size_t> password_key_index(std::string_view key) {
  struct Alias {
    std::string_view name;
    std::size_t index;
  };
  static constexpr Alias aliases[] = {
      {".", 0},      {"period", 0},  {"Period", 0},  {"t", 1},
      {"KeyT", 1},   {"i", 2},       {"KeyI", 2},    {"e", 3},
      {"KeyE", 3},   {"5", 4},       {"five", 4},    {"Digit5", 4},
      {"R", 5},      {"Shift.r", 5}, {"Shift+r", 5}, {"KeyR", 5},
      {"o", 6},      {"KeyO", 6},    {"a", 7},       {"KeyA", 7},
      {"n", 8},      {"KeyN", 8},    {"l", 9},       {"KeyL", 9},
      {"Enter", 10}, {"Return", 10}, {"NumpadEnter", 10},
  };
  for (const auto& a : aliases) {
    if (a.name == key) return a.index;
  }
  return std::nullopt;
}

bool is_modifier_key(std::string_view key) {
  return key == "Shift" || key == "ShiftLeft" || key == "ShiftRight";
}

TimingVector extract_features(const EventTrace& trace) {
  std::array<std::int64_t, kKeyCount> down{};
  std::array<std::int64_t, kKeyCount> up{};
  std::array<bool, kKeyCount> released{};
  std::size_t next_down = 0;
  std::int64_t last_t = 0;

  for (std::size_t e = 0; e < trace.size(); ++e) {
    const KeyEvent& ev = trace[e];
    if (e > 0 && ev.t_ms < last_t) {
      throw MalformedTrace("timestamps decrease at event " + std::to_string(e));
    }
    last_t = ev.t_ms;
    if (is_modifier_key(ev.key)) continue;
    if (ev.key == "Backspace" || ev.key == "Delete") {
      throw MalformedTrace("correction key '" + ev.key + "' present");
    }
    const auto idx = password_key_index(ev.key);
    if (!idx) throw MalformedTrace("unexpected key '" + ev.key + "'");
    const std::size_t k = *idx;

    if (ev.action == KeyAction::down) {
      if (k != next_down) {
        throw MalformedTrace("key '" + ev.key + "' pressed out of sequence");
      }
      down[k] = ev.t_ms;
      ++next_down;
    } else {
      if (k >= next_down || released[k]) {
        throw MalformedTrace("unmatched release of '" + ev.key + "'");
      }
      up[k] = ev.t_ms;
      released[k] = true;
    }
  }
  if (next_down != kKeyCount) {
    throw MalformedTrace("incomplete password: " + std::to_string(next_down) +
                         " of " + std::to_string(kKeyCount) + " keys pressed");
  }
  for (std::size_t k = 0; k < kKeyCount; ++k) {
    if (!released[k]) {
      throw MalformedTrace("key '" + std::string(kTraceKeyNames[k]) +
                           "' never released");
    }
  }

  std::array<double, kFeatureCount> f{};
  std::size_t n = 0;
  for (std::size_t k = 0; k < kKeyCount; ++k) {
    f[n++] = static_cast<double>(up[k] - down[k]) / 1000.0;
    if (k + 1 < kKeyCount) {
      f[n++] = static_cast<double>(down[k + 1] - down[k]) / 1000.0;
      f[n++] = static_cast<double>(down[k + 1] - up[k]) / 1000.0;
    }
  }
  try {
    return TimingVector::from(f);
  } catch (const ValueError& e) {
    throw MalformedTrace(std::string("invalid timing: ") + e.what());
  }
}

EventTrace synthesize_trace(const TimingVector& v) {
  EventTrace trace;
  trace.reserve(2 * kKeyCount);
  double t_down = 0.0;
  for (std::size_t k = 0; k < kKeyCount; ++k) {
    const double hold = v[3 * k];
    const auto down_ms = static_cast<std::int64_t>(std::llround(t_down * 1000.0));
    // Keep the rounded hold at least 1 ms so the trace stays valid.
    const auto up_ms =
        std::max(down_ms + 1, static_cast<std::int64_t>(
                                  std::llround((t_down + hold) * 1000.0)));
    const std::string key(kTraceKeyNames[k]);
    trace.push_back({key, KeyAction::down, down_ms});
    trace.push_back({key, KeyAction::up, up_ms});
    if (k + 1 < kKeyCount) t_down += v[3 * k + 1];
  }
  std::stable_sort(trace.begin(), trace.end(),
                   [](const KeyEvent& a, const KeyEvent& b) {
                     return a.t_ms < b.t_ms;
                   });
  return trace;
}

}  // namespace keydetect
