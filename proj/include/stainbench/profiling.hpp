#pragma once

// Tile screening, profile aggregation, stain colour metrics and reference
// library construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stainbench/color.hpp"
#include "stainbench/error.hpp"
#include "stainbench/estimation.hpp"
#include "stainbench/od.hpp"
#include "stainbench/rng.hpp"
#include "stainbench/statistics.hpp"

namespace stainbench {

// Hue interval in degrees; lo > hi wraps through 0.
struct HueInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double hue) const noexcept {
    return lo <= hi ? (hue >= lo && hue <= hi) : (hue >= lo || hue <= hi);
  }
};

// Configurable quality screen. Tissue and dark pixels are classified by OD
// magnitude; saturation and hue use HSV on tissue pixels only.
struct TileQualityCriteria {
  double min_tissue_fraction = 0.5;
  double max_dark_fraction = 0.1;
  double tissue_od = 0.15;
  double dark_od = 4.0;
  double min_saturation_mean = 0.05;
  std::vector<HueInterval> hue_gate;
  // A gate interval rejects the tile when it holds more than this share of tissue.
  double max_gated_fraction = 0.2;

  void validate() const {
    for (double f : {min_tissue_fraction, max_dark_fraction, max_gated_fraction}) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw Error(ErrorKind::ConfigError, "quality fractions must lie in [0, 1]");
      }
    }
    if (!(tissue_od >= 0.0) || !(dark_od > tissue_od)) {
      throw Error(ErrorKind::ConfigError, "quality OD thresholds need 0 <= tissue_od < dark_od");
    }
  }
};

enum class QualityCheck { None, TissueFraction, DarkFraction, Saturation, HueGate };

constexpr std::string_view quality_check_name(QualityCheck check) noexcept {
  switch (check) {
    case QualityCheck::None: return "none";
    case QualityCheck::TissueFraction: return "tissue_fraction";
    case QualityCheck::DarkFraction: return "dark_fraction";
    case QualityCheck::Saturation: return "saturation";
    case QualityCheck::HueGate: return "hue_gate";
  }
  return "unknown";
}

struct ScreenResult {
  bool passed = false;
  QualityCheck failed = QualityCheck::None;
  double tissue_fraction = 0.0;
  double dark_fraction = 0.0;
  double mean_saturation = 0.0;
  // Largest share of tissue pixels captured by one hue-gate interval.
  double gated_fraction = 0.0;
};

namespace detail {

// HSV hue in degrees and saturation of an 8-bit pixel.
inline std::pair<double, double> hue_saturation(std::span<const std::uint8_t, 3> px) noexcept {
  const double r = px[0];
  const double g = px[1];
  const double b = px[2];
  const double max = std::max({r, g, b});
  const double min = std::min({r, g, b});
  const double delta = max - min;
  const double saturation = max > 0.0 ? delta / max : 0.0;
  if (delta == 0.0) {
    return {0.0, saturation};
  }
  double hue = 0.0;
  if (max == r) {
    hue = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (max == g) {
    hue = 60.0 * ((b - r) / delta + 2.0);
  } else {
    hue = 60.0 * ((r - g) / delta + 4.0);
  }
  if (hue < 0.0) {
    hue += 360.0;
  }
  return {hue, saturation};
}

}  // namespace detail

inline ScreenResult screen_tile(const RgbTile& tile, const TileQualityCriteria& criteria = {}, double i0 = kDefaultI0) {
  criteria.validate();
  const detail::OdTable table(i0);
  const double tissue_sq = criteria.tissue_od * criteria.tissue_od;
  const double dark_sq = criteria.dark_od * criteria.dark_od;
  std::size_t tissue = 0;
  std::size_t dark = 0;
  double saturation_sum = 0.0;
  std::vector<std::size_t> gated(criteria.hue_gate.size(), 0);
  for (std::size_t i = 0; i < tile.pixel_count(); ++i) {
    const auto px = tile.pixel(i);
    const double o0 = table[px[0]];
    const double o1 = table[px[1]];
    const double o2 = table[px[2]];
    const double sq = o0 * o0 + o1 * o1 + o2 * o2;
    if (sq >= dark_sq) {
      ++dark;
    }
    if (sq < tissue_sq) {
      continue;
    }
    ++tissue;
    const auto [hue, saturation] = detail::hue_saturation(px);
    saturation_sum += saturation;
    for (std::size_t g = 0; g < gated.size(); ++g) {
      if (criteria.hue_gate[g].contains(hue)) {
        ++gated[g];
      }
    }
  }

  ScreenResult result;
  const auto total = static_cast<double>(tile.pixel_count());
  result.tissue_fraction = static_cast<double>(tissue) / total;
  result.dark_fraction = static_cast<double>(dark) / total;
  result.mean_saturation = tissue > 0 ? saturation_sum / static_cast<double>(tissue) : 0.0;
  for (std::size_t count : gated) {
    const double share = tissue > 0 ? static_cast<double>(count) / static_cast<double>(tissue) : 0.0;
    result.gated_fraction = std::max(result.gated_fraction, share);
  }

  if (result.tissue_fraction < criteria.min_tissue_fraction) {
    result.failed = QualityCheck::TissueFraction;
  } else if (result.dark_fraction > criteria.max_dark_fraction) {
    result.failed = QualityCheck::DarkFraction;
  } else if (result.mean_saturation < criteria.min_saturation_mean) {
    result.failed = QualityCheck::Saturation;
  } else if (result.gated_fraction > criteria.max_gated_fraction) {
    result.failed = QualityCheck::HueGate;
  }
  result.passed = result.failed == QualityCheck::None;
  return result;
}

// Angle between two stain directions in degrees, in [0, 90].
inline double stain_angle(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "stain_angle of a zero vector");
  }
  // atan2 of |cross| and |dot| stays accurate near 0 and 90 degrees.
  return degrees(std::atan2(a.cross(b).norm(), std::abs(a.dot(b))));
}

// H-E angle within one basis: smaller means more similar stain colours.
inline double he_angle(const StainBasis& basis) { return stain_angle(basis.hematoxylin(), basis.eosin()); }

enum class Stain { Hematoxylin, Eosin };

inline const Vec3& stain_vector(const StainBasis& basis, Stain which) noexcept {
  return which == Stain::Hematoxylin ? basis.hematoxylin() : basis.eosin();
}

// Same stain compared across two bases.
inline double stain_angle(const StainBasis& a, const StainBasis& b, Stain which) {
  return stain_angle(stain_vector(a, which), stain_vector(b, which));
}

inline constexpr double kDefaultHueRenderIntensity = 1.0;

// CIELab hue of the colour i0 * exp(-render_intensity * v), read as sRGB.
inline double stain_hue(const Vec3& v, double render_intensity = kDefaultHueRenderIntensity, double i0 = kDefaultI0) {
  if (!(render_intensity > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "render_intensity must be positive");
  }
  detail::check_i0(i0);
  std::array<double, 3> rgb{};
  for (int k = 0; k < 3; ++k) {
    rgb[static_cast<std::size_t>(k)] = std::clamp(i0 * std::exp(-render_intensity * v[k]) / 255.0, 0.0, 1.0);
  }
  const Lab lab = srgb_to_lab(rgb[0], rgb[1], rgb[2]);
  if (lab.chroma() < 0.5) {
    throw Error(ErrorKind::AchromaticColor, "rendered stain colour has chroma " + std::to_string(lab.chroma()));
  }
  return lab.hue_degrees();
}

// Componentwise median of the stain vectors (renormalized, residual
// re-derived) and scalar medians of the intensities.
inline StainProfile aggregate_profiles(std::span<const StainProfile> profiles, std::string source_id = {}) {
  if (profiles.empty()) {
    throw Error(ErrorKind::EmptyInput, "aggregate_profiles needs at least one profile");
  }
  const std::size_t n = profiles.size();
  std::vector<double> buffer(n);
  auto median_of = [&](auto&& get) {
    for (std::size_t i = 0; i < n; ++i) {
      buffer[i] = get(profiles[i]);
    }
    return percentile_inplace(buffer, 50.0);
  };
  Vec3 h;
  Vec3 e;
  Vec3 r;
  for (int k = 0; k < 3; ++k) {
    h[k] = median_of([k](const StainProfile& p) { return p.basis.hematoxylin()[k]; });
    e[k] = median_of([k](const StainProfile& p) { return p.basis.eosin()[k]; });
    r[k] = median_of([k](const StainProfile& p) { return p.basis.residual()[k]; });
  }
  StainBasis basis = StainBasis::from_stains(h, e);
  // Orientation of the residual follows the members' majority.
  if (r.dot(basis.residual()) < 0.0) {
    basis = StainBasis::from_vectors(basis.hematoxylin(), basis.eosin(), -basis.residual());
  }
  const double ih = median_of([](const StainProfile& p) { return p.intensity_h; });
  const double ie = median_of([](const StainProfile& p) { return p.intensity_e; });
  std::size_t tiles = 0;
  for (const auto& p : profiles) {
    tiles += p.tile_count;
  }
  for (const auto& p : profiles) {
    if (p.i0 != profiles.front().i0) {
      throw Error(ErrorKind::InvalidArgument, "profiles measured against different i0 cannot be aggregated");
    }
  }
  if (source_id.empty()) {
    source_id = profiles.front().source_id;
  }
  return StainProfile{std::move(basis), ih, ie, std::move(source_id), tiles, {}, profiles.front().i0};
}

enum class ReferenceRole { LowIntensity, HighIntensity, LowSimilarity, HighSimilarity };

inline constexpr std::array<ReferenceRole, 4> kReferenceRoles{
    ReferenceRole::LowIntensity, ReferenceRole::HighIntensity, ReferenceRole::LowSimilarity,
    ReferenceRole::HighSimilarity};

constexpr std::string_view reference_role_name(ReferenceRole role) noexcept {
  switch (role) {
    case ReferenceRole::LowIntensity: return "low_intensity";
    case ReferenceRole::HighIntensity: return "high_intensity";
    case ReferenceRole::LowSimilarity: return "low_similarity";
    case ReferenceRole::HighSimilarity: return "high_similarity";
  }
  return "unknown";
}

struct ReferenceSelection {
  std::string low_intensity;
  std::string high_intensity;
  // Low similarity is the LARGER H-E angle.
  std::string low_similarity;
  std::string high_similarity;

  const std::string& operator[](ReferenceRole role) const noexcept {
    switch (role) {
      case ReferenceRole::LowIntensity: return low_intensity;
      case ReferenceRole::HighIntensity: return high_intensity;
      case ReferenceRole::LowSimilarity: return low_similarity;
      case ReferenceRole::HighSimilarity: break;
    }
    return high_similarity;
  }
  std::string& operator[](ReferenceRole role) noexcept {
    return const_cast<std::string&>(std::as_const(*this)[role]);
  }
};

struct SelectionOverrides {
  std::optional<std::string> low_intensity;
  std::optional<std::string> high_intensity;
  std::optional<std::string> low_similarity;
  std::optional<std::string> high_similarity;

  const std::optional<std::string>& operator[](ReferenceRole role) const noexcept {
    switch (role) {
      case ReferenceRole::LowIntensity: return low_intensity;
      case ReferenceRole::HighIntensity: return high_intensity;
      case ReferenceRole::LowSimilarity: return low_similarity;
      case ReferenceRole::HighSimilarity: break;
    }
    return high_similarity;
  }
  std::optional<std::string>& operator[](ReferenceRole role) noexcept {
    return const_cast<std::optional<std::string>&>(std::as_const(*this)[role]);
  }
};

// Scalar used to rank conditions by intensity.
inline double combined_intensity(const StainProfile& p) noexcept { return p.intensity_h + p.intensity_e; }

struct ReferenceLibrary {
  std::map<std::string, StainProfile> entries;
  ReferenceSelection selected;

  const StainProfile& at(const std::string& id) const {
    const auto it = entries.find(id);
    if (it == entries.end()) {
      throw Error(ErrorKind::UnknownCondition, "condition '" + id + "' is not in the library");
    }
    return it->second;
  }

  const StainProfile& reference(ReferenceRole role) const { return at(selected[role]); }

  void validate() const {
    for (ReferenceRole role : kReferenceRoles) {
      if (!entries.contains(selected[role])) {
        throw Error(ErrorKind::UnknownCondition, std::string(reference_role_name(role)) + " selection '" +
                                                     selected[role] + "' is not in the library");
      }
    }
    if (combined_intensity(reference(ReferenceRole::LowIntensity)) >
        combined_intensity(reference(ReferenceRole::HighIntensity))) {
      throw Error(ErrorKind::InvalidSelection, "low_intensity reference is more intense than high_intensity");
    }
    if (he_angle(reference(ReferenceRole::LowSimilarity).basis) <
        he_angle(reference(ReferenceRole::HighSimilarity).basis)) {
      throw Error(ErrorKind::InvalidSelection, "low_similarity reference has a smaller H-E angle than high_similarity");
    }
  }

  // Human-readable notes for degenerate but valid selections.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (selected.low_intensity == selected.high_intensity) {
      out.push_back("low and high intensity references are the same condition '" + selected.low_intensity + "'");
    }
    if (selected.low_similarity == selected.high_similarity) {
      out.push_back("low and high similarity references are the same condition '" + selected.low_similarity + "'");
    }
    return out;
  }
};

// Aggregates each condition, then selects the four references. Ties resolve
// to the lexicographically smallest condition id.
inline ReferenceLibrary build_library(const std::map<std::string, std::vector<StainProfile>>& condition_profiles,
                                      const SelectionOverrides& overrides = {}) {
  if (condition_profiles.size() < 2) {
    throw Error(ErrorKind::TooFewConditions,
                "a reference library needs at least 2 conditions, got " + std::to_string(condition_profiles.size()));
  }
  ReferenceLibrary library;
  for (const auto& [id, profiles] : condition_profiles) {
    library.entries.emplace(id, aggregate_profiles(profiles, id));
  }

  const auto first = library.entries.begin();
  std::string low_i = first->first;
  std::string high_i = first->first;
  std::string low_s = first->first;
  std::string high_s = first->first;
  double min_sum = combined_intensity(first->second);
  double max_sum = min_sum;
  double max_angle = he_angle(first->second.basis);
  double min_angle = max_angle;
  for (const auto& [id, profile] : library.entries) {
    const double sum = combined_intensity(profile);
    const double angle = he_angle(profile.basis);
    if (sum < min_sum) {
      min_sum = sum;
      low_i = id;
    }
    if (sum > max_sum) {
      max_sum = sum;
      high_i = id;
    }
    if (angle > max_angle) {
      max_angle = angle;
      low_s = id;
    }
    if (angle < min_angle) {
      min_angle = angle;
      high_s = id;
    }
  }
  library.selected = {low_i, high_i, low_s, high_s};
  for (ReferenceRole role : kReferenceRoles) {
    if (overrides[role]) {
      library.selected[role] = *overrides[role];
    }
  }
  library.validate();
  return library;
}

struct SlideTally {
  std::size_t screened = 0;
  std::size_t passed = 0;
  std::uint64_t seed = 0;

  bool operator==(const SlideTally&) const = default;
};

// Slide-level profiles keyed by slide id, with screening tallies.
struct SlideProfileSet {
  std::map<std::string, StainProfile> profiles;
  std::map<std::string, SlideTally> tallies;
};

struct SlideSampling {
  std::size_t n_tiles = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double i0 = kDefaultI0;
};

struct ScreeningRecord {
  std::size_t candidate = 0;
  bool passed = false;
  // Failed quality check, or "estimation:<error>" when profiling the tile failed.
  std::string reason;
};

struct SlideCharacterization {
  StainProfile profile;
  std::size_t screened = 0;
  std::size_t passed = 0;
  std::uint64_t seed = 0;
  std::vector<ScreeningRecord> log;
  std::vector<StainProfile> tile_profiles;
};

// Walks the candidates in seeded-shuffle order, profiles the first n_tiles
// tiles that pass screening and estimation, and aggregates them by median.
// `load(i)` returns candidate i as an RgbTile.
template <typename LoadTile>
SlideCharacterization characterize_slide(const std::string& slide_id, std::size_t candidate_count, LoadTile&& load,
                                         const TileQualityCriteria& criteria = {}, const EstimationConfig& cfg = {},
                                         const SlideSampling& sampling = {}) {
  if (sampling.n_tiles == 0) {
    throw Error(ErrorKind::ConfigError, "n_tiles must be at least 1");
  }
  std::vector<std::size_t> order(candidate_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (sampling.shuffle) {
    SplitMix64 rng(sampling.seed);
    rng.shuffle(std::span<std::size_t>(order));
  }

  std::vector<StainProfile> profiles;
  std::vector<ScreeningRecord> log;
  for (std::size_t candidate : order) {
    if (profiles.size() == sampling.n_tiles) {
      break;
    }
    const RgbTile tile = load(candidate);
    const ScreenResult screen = screen_tile(tile, criteria, sampling.i0);
    if (!screen.passed) {
      log.push_back({candidate, false, std::string(quality_check_name(screen.failed))});
      continue;
    }
    try {
      profiles.push_back(estimate_profile(tile, cfg, sampling.i0, slide_id));
      profiles.back().metadata["candidate"] = std::to_string(candidate);
      log.push_back({candidate, true, {}});
    } catch (const Error& err) {
      log.push_back({candidate, false, "estimation:" + std::string(err.name())});
    }
  }
  if (profiles.size() < sampling.n_tiles) {
    throw Error(ErrorKind::InsufficientPassingTiles,
                "slide '" + slide_id + "': " + std::to_string(profiles.size()) + " of " +
                    std::to_string(sampling.n_tiles) + " tiles passed after screening " +
                    std::to_string(log.size()) + " candidates");
  }
  StainProfile slide = aggregate_profiles(profiles, slide_id);
  slide.metadata["sampling_seed"] = std::to_string(sampling.seed);
  slide.metadata["tiles_screened"] = std::to_string(log.size());
  return SlideCharacterization{std::move(slide), log.size(), profiles.size(), sampling.seed, std::move(log),
                               std::move(profiles)};
}

}  // namespace stainbench
