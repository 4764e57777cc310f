#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "stainbench/error.hpp"

namespace stainbench {

// The five staining conditions of the protocol, in canonical order. This order
// is also the tie-break order for a model's single best condition.
enum class Condition { Reference, LowIntensity, HighIntensity, LowSimilarity, HighSimilarity };

inline constexpr std::array<Condition, 5> kAllConditions{Condition::Reference, Condition::LowIntensity,
                                                         Condition::HighIntensity, Condition::LowSimilarity,
                                                         Condition::HighSimilarity};

inline constexpr std::array<Condition, 4> kSimulatedConditions{Condition::LowIntensity, Condition::HighIntensity,
                                                               Condition::LowSimilarity, Condition::HighSimilarity};

constexpr std::string_view condition_name(Condition c) noexcept {
  switch (c) {
    case Condition::Reference: return "reference";
    case Condition::LowIntensity: return "low_intensity";
    case Condition::HighIntensity: return "high_intensity";
    case Condition::LowSimilarity: return "low_similarity";
    case Condition::HighSimilarity: return "high_similarity";
  }
  return "unknown";
}

constexpr std::size_t condition_index(Condition c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::optional<Condition> try_parse_condition(std::string_view name) noexcept {
  for (Condition c : kAllConditions) {
    if (condition_name(c) == name) {
      return c;
    }
  }
  return std::nullopt;
}

inline Condition parse_condition(std::string_view name) {
  if (const auto c = try_parse_condition(name)) {
    return *c;
  }
  throw Error(ErrorKind::UnknownCondition, "unknown staining condition '" + std::string(name) + "'");
}

constexpr bool is_intensity_condition(Condition c) noexcept {
  return c == Condition::LowIntensity || c == Condition::HighIntensity;
}

constexpr bool is_color_condition(Condition c) noexcept {
  return c == Condition::LowSimilarity || c == Condition::HighSimilarity;
}

}  // namespace stainbench
