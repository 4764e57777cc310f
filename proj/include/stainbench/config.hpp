#pragma once

// Run configuration shared by all subcommands, stored as one JSON document.
// Values resolve as: command-line flags, then config file, then defaults.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stainbench/conditions.hpp"
#include "stainbench/error.hpp"
#include "stainbench/estimation.hpp"
#include "stainbench/evaluation.hpp"
#include "stainbench/io/json.hpp"
#include "stainbench/profiling.hpp"

namespace stainbench {

struct RunConfig {
  std::uint64_t seed = 0;
  // 0 selects the available hardware parallelism at run time.
  std::size_t workers = 0;
  double i0 = kDefaultI0;
  EstimationConfig estimation;
  TileQualityCriteria quality;
  // profile
  std::size_t n_tiles = 10;
  bool shuffle_tiles = true;
  bool per_tile = false;
  // build-library
  SelectionOverrides overrides;
  double hue_render_intensity = kDefaultHueRenderIntensity;
  // simulate
  std::vector<Condition> conditions{kAllConditions.begin(), kAllConditions.end()};
  double residual_scale = kDefaultResidualScale;
  bool force_reference_roundtrip = false;
  // evaluate
  std::size_t n_bootstrap = kDefaultBootstrapIterations;
  std::size_t min_n_for_ci = 4;

  std::size_t resolved_workers() const noexcept { return workers == 0 ? default_workers() : workers; }

  void validate() const {
    detail::check_i0(i0);
    estimation.validate();
    quality.validate();
    if (n_tiles == 0) {
      throw Error(ErrorKind::ConfigError, "n_tiles must be at least 1");
    }
    if (conditions.empty()) {
      throw Error(ErrorKind::ConfigError, "at least one condition is required");
    }
    if (!(residual_scale >= 0.0) || !std::isfinite(residual_scale)) {
      throw Error(ErrorKind::ConfigError, "residual_scale must be finite and nonnegative");
    }
    if (!(hue_render_intensity > 0.0) || !std::isfinite(hue_render_intensity)) {
      throw Error(ErrorKind::ConfigError, "hue_render_intensity must be positive");
    }
    if (n_bootstrap == 0) {
      throw Error(ErrorKind::ConfigError, "n_bootstrap must be at least 1");
    }
    if (min_n_for_ci < 4) {
      throw Error(ErrorKind::ConfigError, "min_n_for_ci must be at least 4");
    }
  }
};

constexpr std::string_view label_rule_name(StainLabelRule rule) noexcept {
  switch (rule) {
    case StainLabelRule::RedChannel: return "red_channel";
    case StainLabelRule::SmallerAngleIsHematoxylin: return "smaller_angle_is_hematoxylin";
    case StainLabelRule::LargerAngleIsHematoxylin: return "larger_angle_is_hematoxylin";
  }
  return "unknown";
}

inline StainLabelRule parse_label_rule(std::string_view name) {
  for (StainLabelRule r : {StainLabelRule::RedChannel, StainLabelRule::SmallerAngleIsHematoxylin,
                           StainLabelRule::LargerAngleIsHematoxylin}) {
    if (label_rule_name(r) == name) {
      return r;
    }
  }
  throw Error(ErrorKind::ConfigError, "unknown label_rule '" + std::string(name) + "'");
}

// Comma-separated condition names, e.g. "reference,high_intensity".
inline std::vector<Condition> parse_condition_list(std::string_view text) {
  std::vector<Condition> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view name = text.substr(start, comma - start);
    const auto c = try_parse_condition(name);
    if (!c) {
      throw Error(ErrorKind::ConfigError, "unknown condition '" + std::string(name) + "'");
    }
    if (std::find(out.begin(), out.end(), *c) == out.end()) {
      out.push_back(*c);
    }
    start = comma + 1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

// Reads members of one JSON object and rejects keys it did not consume.
class ConfigReader {
 public:
  ConfigReader(const io::Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw Error(ErrorKind::ConfigError, where() + " must be an object");
    }
  }

  ~ConfigReader() noexcept(false) {
    if (std::uncaught_exceptions() == 0) {
      for (const auto& [key, value] : obj_.items()) {
        if (!seen_.contains(key)) {
          throw Error(ErrorKind::ConfigError, "unknown config key '" + prefix() + key + "'");
        }
      }
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) {
      return;
    }
    const io::Json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0 &&
                                        !v.is_number_unsigned())) {
          throw Error(ErrorKind::ConfigError, "");
        }
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) {
          throw Error(ErrorKind::ConfigError, "");
        }
        out = v.get<T>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "config key '" + prefix() + key + "' has the wrong type");
    }
  }

  const io::Json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  std::string prefix() const { return path_.empty() ? std::string() : path_ + "."; }

 private:
  std::string where() const { return path_.empty() ? "config" : "config key '" + path_ + "'"; }

  const io::Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline io::Json config_to_json(const RunConfig& c) {
  io::Json gate = io::Json::array();
  for (const auto& g : c.quality.hue_gate) {
    gate.push_back({g.lo, g.hi});
  }
  io::Json overrides = io::Json::object();
  for (ReferenceRole role : kReferenceRoles) {
    overrides[std::string(reference_role_name(role))] =
        c.overrides[role] ? io::Json(*c.overrides[role]) : io::Json(nullptr);
  }
  io::Json conditions = io::Json::array();
  for (Condition cond : c.conditions) {
    conditions.push_back(condition_name(cond));
  }
  return io::Json{
      {"schema_version", io::kSchemaVersion},
      {"seed", c.seed},
      {"workers", c.workers},
      {"i0", c.i0},
      {"estimation",
       {{"od_min", c.estimation.od_min},
        {"od_max_percentile", c.estimation.od_max_percentile},
        {"angle_alpha", c.estimation.angle_alpha},
        {"min_valid_pixels", c.estimation.min_valid_pixels},
        {"label_rule", label_rule_name(c.estimation.label_rule)}}},
      {"quality",
       {{"min_tissue_fraction", c.quality.min_tissue_fraction},
        {"max_dark_fraction", c.quality.max_dark_fraction},
        {"tissue_od", c.quality.tissue_od},
        {"dark_od", c.quality.dark_od},
        {"min_saturation_mean", c.quality.min_saturation_mean},
        {"hue_gate", std::move(gate)},
        {"max_gated_fraction", c.quality.max_gated_fraction}}},
      {"profile", {{"n_tiles", c.n_tiles}, {"shuffle_tiles", c.shuffle_tiles}, {"per_tile", c.per_tile}}},
      {"library", {{"overrides", std::move(overrides)}, {"hue_render_intensity", c.hue_render_intensity}}},
      {"simulate",
       {{"conditions", std::move(conditions)},
        {"residual_scale", c.residual_scale},
        {"force_reference_roundtrip", c.force_reference_roundtrip}}},
      {"evaluate", {{"n_bootstrap", c.n_bootstrap}, {"min_n_for_ci", c.min_n_for_ci}}},
  };
}

// Values absent from `doc` keep their current value in `base`.
inline RunConfig config_from_json(const io::Json& doc, RunConfig base = {}) {
  RunConfig c = std::move(base);
  {
    detail::ConfigReader top(doc, "");
    int version = io::kSchemaVersion;
    top.read("schema_version", version);
    if (version != io::kSchemaVersion) {
      throw Error(ErrorKind::ConfigError, "unsupported config schema_version " + std::to_string(version));
    }
    top.read("seed", c.seed);
    top.read("workers", c.workers);
    top.read("i0", c.i0);
    if (const auto* est = top.child("estimation")) {
      detail::ConfigReader r(*est, "estimation");
      r.read("od_min", c.estimation.od_min);
      r.read("od_max_percentile", c.estimation.od_max_percentile);
      r.read("angle_alpha", c.estimation.angle_alpha);
      r.read("min_valid_pixels", c.estimation.min_valid_pixels);
      std::string rule(label_rule_name(c.estimation.label_rule));
      r.read("label_rule", rule);
      c.estimation.label_rule = parse_label_rule(rule);
    }
    if (const auto* q = top.child("quality")) {
      detail::ConfigReader r(*q, "quality");
      r.read("min_tissue_fraction", c.quality.min_tissue_fraction);
      r.read("max_dark_fraction", c.quality.max_dark_fraction);
      r.read("tissue_od", c.quality.tissue_od);
      r.read("dark_od", c.quality.dark_od);
      r.read("min_saturation_mean", c.quality.min_saturation_mean);
      r.read("max_gated_fraction", c.quality.max_gated_fraction);
      if (const auto* gate = r.child("hue_gate")) {
        std::vector<std::array<double, 2>> intervals;
        try {
          intervals = gate->get<std::vector<std::array<double, 2>>>();
        } catch (const std::exception&) {
          throw Error(ErrorKind::ConfigError, "quality.hue_gate must be a list of [lo, hi] pairs");
        }
        c.quality.hue_gate.clear();
        for (const auto& [lo, hi] : intervals) {
          c.quality.hue_gate.push_back({lo, hi});
        }
      }
    }
    if (const auto* p = top.child("profile")) {
      detail::ConfigReader r(*p, "profile");
      r.read("n_tiles", c.n_tiles);
      r.read("shuffle_tiles", c.shuffle_tiles);
      r.read("per_tile", c.per_tile);
    }
    if (const auto* lib = top.child("library")) {
      detail::ConfigReader r(*lib, "library");
      r.read("hue_render_intensity", c.hue_render_intensity);
      if (const auto* o = r.child("overrides")) {
        try {
          const SelectionOverrides parsed = io::overrides_from_json(*o, "config key 'library.overrides'");
          for (ReferenceRole role : kReferenceRoles) {
            if (o->contains(std::string(reference_role_name(role)))) {
              c.overrides[role] = parsed[role];
            }
          }
        } catch (const Error& err) {
          throw Error(ErrorKind::ConfigError, err.what());
        }
      }
    }
    if (const auto* s = top.child("simulate")) {
      detail::ConfigReader r(*s, "simulate");
      if (const auto* list = r.child("conditions")) {
        std::vector<std::string> names;
        try {
          names = list->get<std::vector<std::string>>();
        } catch (const std::exception&) {
          throw Error(ErrorKind::ConfigError, "simulate.conditions must be a list of condition names");
        }
        std::string joined;
        for (const auto& n : names) {
          joined += (joined.empty() ? "" : ",") + n;
        }
        c.conditions = names.empty() ? std::vector<Condition>{} : parse_condition_list(joined);
      }
      r.read("residual_scale", c.residual_scale);
      r.read("force_reference_roundtrip", c.force_reference_roundtrip);
    }
    if (const auto* e = top.child("evaluate")) {
      detail::ConfigReader r(*e, "evaluate");
      r.read("n_bootstrap", c.n_bootstrap);
      r.read("min_n_for_ci", c.min_n_for_ci);
    }
  }
  c.validate();
  return c;
}

}  // namespace stainbench
