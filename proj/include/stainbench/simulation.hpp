#pragma once

// Staining-condition planning and tile transformation.

#include <algorithm>
#include <cmath>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stainbench/conditions.hpp"
#include "stainbench/error.hpp"
#include "stainbench/estimation.hpp"
#include "stainbench/od.hpp"
#include "stainbench/parallel.hpp"
#include "stainbench/profiling.hpp"
#include "stainbench/tile.hpp"

namespace stainbench {

inline constexpr double kMinSourceIntensity = 1e-6;

struct SimulationCondition {
  Condition id;
  StainBasis target_basis;
  double scale_h = 1.0;
  double scale_e = 1.0;
  double residual_scale = kDefaultResidualScale;
  // Only meaningful for the reference condition: run decompose/recompose with
  // unit scales instead of passing the tile through untouched.
  bool force_roundtrip = false;

  RecomposeScales scales() const noexcept { return {scale_h, scale_e, residual_scale}; }
  bool is_passthrough() const noexcept { return id == Condition::Reference && !force_roundtrip; }
};

inline ReferenceRole reference_role(Condition c) {
  switch (c) {
    case Condition::LowIntensity: return ReferenceRole::LowIntensity;
    case Condition::HighIntensity: return ReferenceRole::HighIntensity;
    case Condition::LowSimilarity: return ReferenceRole::LowSimilarity;
    case Condition::HighSimilarity: return ReferenceRole::HighSimilarity;
    case Condition::Reference: break;
  }
  throw Error(ErrorKind::InvalidArgument, "the reference condition has no library role");
}

// Identity condition; with force_roundtrip it recomposes at unit scales,
// residual included.
inline SimulationCondition reference_condition(const StainBasis& source_basis, bool force_roundtrip = false) {
  return {Condition::Reference, source_basis, 1.0, 1.0, 1.0, force_roundtrip};
}

// Returns the five conditions for one source slide, indexed by condition_index.
inline std::vector<SimulationCondition> plan_conditions(const StainProfile& source, const ReferenceLibrary& library,
                                                          double residual_scale = kDefaultResidualScale,
                                                          bool force_reference_roundtrip = false) {
  if (!(source.intensity_h >= kMinSourceIntensity) || !(source.intensity_e >= kMinSourceIntensity)) {
    throw Error(ErrorKind::ZeroSourceIntensity, "source '" + source.source_id + "' has intensities (" +
                                                    std::to_string(source.intensity_h) + ", " +
                                                    std::to_string(source.intensity_e) + ")");
  }
  if (!std::isfinite(residual_scale) || residual_scale < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "residual_scale must be finite and nonnegative");
  }
  std::vector<SimulationCondition> plan;
  plan.reserve(kAllConditions.size());
  plan.push_back(reference_condition(source.basis, force_reference_roundtrip));
  for (Condition c : kSimulatedConditions) {
    const StainProfile& ref = library.reference(reference_role(c));
    if (is_intensity_condition(c)) {
      plan.push_back({c, source.basis, ref.intensity_h / source.intensity_h, ref.intensity_e / source.intensity_e,
                      residual_scale});
    } else {
      plan.push_back({c, ref.basis, 1.0, 1.0, residual_scale});
    }
  }
  return plan;
}

// Single-tile transform. Callers processing many tiles with one source basis
// should build the StainUnmixer once and use the overload below.
inline RgbTile simulate_tile(const RgbTile& tile, const StainUnmixer& source, const SimulationCondition& cond) {
  if (cond.is_passthrough()) {
    return tile;
  }
  return restain(tile, source, cond.target_basis, cond.scales());
}

inline RgbTile simulate_tile(const RgbTile& tile, const StainBasis& source_basis, const SimulationCondition& cond,
                             double i0 = kDefaultI0) {
  if (cond.is_passthrough()) {
    return tile;
  }
  return simulate_tile(tile, StainUnmixer(source_basis, i0), cond);
}

// slide_id -> tile paths, in manifest order.
using TileManifest = std::map<std::string, std::vector<std::filesystem::path>>;

struct BatchOptions {
  std::vector<Condition> conditions{kAllConditions.begin(), kAllConditions.end()};
  double residual_scale = kDefaultResidualScale;
  double i0 = kDefaultI0;
  bool force_reference_roundtrip = false;
  std::size_t workers = 1;
};

struct BatchFailure {
  std::string slide_id;
  std::string reason;

  bool operator==(const BatchFailure&) const = default;
};

struct BatchReport {
  std::size_t tiles_written = 0;
  std::vector<BatchFailure> failures;
  double elapsed_s = 0.0;
};

inline std::filesystem::path simulated_tile_path(const std::filesystem::path& out_root, Condition c,
                                                 const std::string& slide_id, const std::filesystem::path& tile) {
  return out_root / std::string(condition_name(c)) / slide_id / (tile.stem().string() + ".png");
}

// Transforms every manifest tile under every requested condition.
// `store` provides `RgbTile load(const path&)` and
// `void save(const path&, const RgbTile&)`; save is called concurrently for
// distinct paths. Slides without a usable profile are recorded as failures
// and skipped; exceptions from load/save abort the batch.
template <typename TileStore>
BatchReport simulate_batch(const TileManifest& manifest, const std::map<std::string, StainProfile>& profiles,
                           const ReferenceLibrary& library, const std::filesystem::path& out_root, TileStore& store,
                           const BatchOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  detail::check_i0(options.i0);
  std::vector<Condition> conditions = options.conditions;
  std::sort(conditions.begin(), conditions.end());
  conditions.erase(std::unique(conditions.begin(), conditions.end()), conditions.end());
  if (conditions.empty()) {
    throw Error(ErrorKind::ConfigError, "no conditions requested");
  }
  const bool needs_library = std::any_of(conditions.begin(), conditions.end(),
                                         [](Condition c) { return c != Condition::Reference; });
  if (needs_library) {
    library.validate();
  }

  struct SlidePlan {
    const std::string* slide_id;
    const std::vector<std::filesystem::path>* tiles;
    std::vector<SimulationCondition> conditions;
    StainUnmixer unmixer;
  };
  BatchReport report;
  std::vector<SlidePlan> plans;
  for (const auto& [slide_id, tiles] : manifest) {
    const auto it = profiles.find(slide_id);
    if (it == profiles.end()) {
      report.failures.push_back({slide_id, std::string(error_name(ErrorKind::MissingProfile))});
      continue;
    }
    std::set<std::string> stems;
    for (const auto& tile : tiles) {
      if (!stems.insert(tile.stem().string()).second) {
        throw Error(ErrorKind::FormatError,
                    "slide '" + slide_id + "' has two tiles named '" + tile.stem().string() + "'");
      }
    }
    try {
      std::vector<SimulationCondition> planned =
          needs_library ? plan_conditions(it->second, library, options.residual_scale,
                                          options.force_reference_roundtrip)
                        : std::vector{reference_condition(it->second.basis, options.force_reference_roundtrip)};
      plans.push_back({&slide_id, &tiles, std::move(planned), StainUnmixer(it->second.basis, options.i0)});
    } catch (const Error& err) {
      report.failures.push_back({slide_id, std::string(err.name())});
    }
  }

  const std::size_t task_count = plans.size() * conditions.size();
  std::atomic<std::size_t> written{0};
  parallel_for(task_count, options.workers, [&](std::size_t task) {
    const SlidePlan& plan = plans[task / conditions.size()];
    const SimulationCondition& cond = plan.conditions[condition_index(conditions[task % conditions.size()])];
    for (const auto& tile_path : *plan.tiles) {
      const RgbTile source = store.load(tile_path);
      store.save(simulated_tile_path(out_root, cond.id, *plan.slide_id, tile_path),
                 simulate_tile(source, plan.unmixer, cond));
      written.fetch_add(1, std::memory_order_relaxed);
    }
  });
  report.tiles_written = written.load();
  std::sort(report.failures.begin(), report.failures.end(),
            [](const BatchFailure& a, const BatchFailure& b) { return a.slide_id < b.slide_id; });
  report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace stainbench
