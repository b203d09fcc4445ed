#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace keydetect {

// The fixed password ".tie5Roanl" followed by Enter: 11 keystrokes.
inline constexpr std::size_t kKeyCount = 11;

// 11 hold times + 10 keydown-keydown + 10 keyup-keydown.
inline constexpr std::size_t kFeatureCount = 31;

// Key names as they appear in the benchmark CSV column labels.
inline constexpr std::array<std::string_view, kKeyCount> kCsvKeyNames = {
    "period", "t", "i", "e", "five", "Shift.r", "o", "a", "n", "l", "Return"};

// Canonical key symbols used on the event-trace wire.
inline constexpr std::array<std::string_view, kKeyCount> kTraceKeyNames = {
    ".", "t", "i", "e", "5", "R", "o", "a", "n", "l", "Enter"};

// Benchmark CSV column order: H.k, DD.k.k+1, UD.k.k+1 for each key, ending
// with H.Return. This order is load-bearing for the 1-D convolution.
const std::array<std::string, kFeatureCount>& feature_labels();

enum class FeatureKind { hold, down_down, up_down };
FeatureKind feature_kind(std::size_t index);

// 31 keystroke timing features in seconds.
// Hold and keydown-keydown entries are strictly positive; keyup-keydown
// entries may be negative when keys overlap. All entries are finite.
class TimingVector {
 public:
  TimingVector() = default;

  // Throws ValueError when an invariant is violated.
  static TimingVector from(std::span<const double> values);

  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double, kFeatureCount> values() const { return values_; }
  const double* data() const { return values_.data(); }

  friend bool operator==(const TimingVector&, const TimingVector&) = default;

 private:
  std::array<double, kFeatureCount> values_{};
};

struct KeystrokeSample {
  std::string subject;
  int session = 0;     // 1..8 in the benchmark
  int repetition = 0;  // 1..50 in the benchmark
  TimingVector vector;
};

enum class KeyAction { down, up };

struct KeyEvent {
  std::string key;
  KeyAction action = KeyAction::down;
  std::int64_t t_ms = 0;  // milliseconds since attempt start
};

using EventTrace = std::vector<KeyEvent>;

// Position of a key in the password, accepting the canonical symbol, the CSV
// name and browser KeyboardEvent.code names ("KeyT", "Digit5", ...).
// Returns nullopt for keys outside the password.
std::optional<std::size_t> password_key_index(std::string_view key);

// Shift presses around 'R' are modifiers, not keystrokes, and are skipped.
bool is_modifier_key(std::string_view key);

// Computes H_k = up_k - down_k, DD_k = down_{k+1} - down_k and
// UD_k = down_{k+1} - up_k, converted from ms to seconds.
// Throws MalformedTrace on a wrong key sequence, backspace, unmatched
// down/up, decreasing timestamps or a non-positive hold/down-down time.
TimingVector extract_features(const EventTrace& trace);

// Inverse of extract_features up to millisecond rounding: lays out
// keystrokes on a timeline starting at t = 0. Events are time-ordered.
EventTrace synthesize_trace(const TimingVector& v);

}  // namespace keydetect
