#pragma once

#include <optional>
#include <string_view>

#include "tweetinfo/errors.hpp"

namespace tweetinfo {

/// Task label. INFORMATIVE is the positive class everywhere: its numeric
/// target is 1 and all precision/recall/F1 figures are computed for it.
enum class Label : int {
  kUninformative = 0,
  kInformative = 1,
};

inline constexpr std::string_view kInformativeWire = "INFORMATIVE";
inline constexpr std::string_view kUninformativeWire = "UNINFORMATIVE";

inline constexpr std::string_view to_wire(Label label) {
  return label == Label::kInformative ? kInformativeWire : kUninformativeWire;
}

/// Two-letter tag used in error-analysis listings (IN / UN).
inline constexpr std::string_view short_tag(Label label) {
  return label == Label::kInformative ? "IN" : "UN";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == kInformativeWire) return Label::kInformative;
  if (s == kUninformativeWire) return Label::kUninformative;
  return std::nullopt;
}

inline constexpr int to_target(Label label) { return static_cast<int>(label); }

inline constexpr Label other(Label label) {
  return label == Label::kInformative ? Label::kUninformative : Label::kInformative;
}

}  // namespace tweetinfo
