#pragma once

// JSON documents for profiles, profile sets and reference libraries.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "stainbench/error.hpp"
#include "stainbench/estimation.hpp"
#include "stainbench/profiling.hpp"

namespace stainbench::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  }
  try {
    return Json::parse(in);
  } catch (const Json::exception& err) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + err.what());
  }
}

// Two-space indentation and a trailing newline; byte-stable for equal input.
inline void write_json(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorKind::IoError, "write failed for '" + path.string() + "'");
  }
}

namespace detail {

inline const Json& member(const Json& obj, const char* key, const std::string& origin) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::FormatError, origin + ": missing '" + key + "'");
  }
  return obj.at(key);
}

inline double number(const Json& obj, const char* key, const std::string& origin) {
  const Json& v = member(obj, key, origin);
  if (!v.is_number()) {
    throw Error(ErrorKind::FormatError, origin + ": '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline std::string string(const Json& obj, const char* key, const std::string& origin) {
  const Json& v = member(obj, key, origin);
  if (!v.is_string()) {
    throw Error(ErrorKind::FormatError, origin + ": '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline Vec3 vec3(const Json& obj, const char* key, const std::string& origin) {
  const Json& v = member(obj, key, origin);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number()) {
    throw Error(ErrorKind::FormatError, origin + ": '" + key + "' must be an array of 3 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline Json vec3_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

inline void check_schema(const Json& doc, const std::string& origin) {
  const Json& v = member(doc, "schema_version", origin);
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw Error(ErrorKind::FormatError, origin + ": unsupported schema_version " + v.dump());
  }
}

}  // namespace detail

inline Json profile_to_json(const StainProfile& p) {
  Json metadata = Json::object();
  for (const auto& [key, value] : p.metadata) {
    metadata[key] = value;
  }
  return Json{{"schema_version", kSchemaVersion},
              {"source_id", p.source_id},
              {"log_base", "e"},
              {"i0", p.i0},
              {"stain_vectors",
               {{"H", detail::vec3_json(p.basis.hematoxylin())},
                {"E", detail::vec3_json(p.basis.eosin())},
                {"R", detail::vec3_json(p.basis.residual())}}},
              {"intensities", {{"H", p.intensity_h}, {"E", p.intensity_e}}},
              {"tile_count", p.tile_count},
              {"metadata", std::move(metadata)}};
}

inline StainProfile profile_from_json(const Json& doc, const std::string& origin) {
  detail::check_schema(doc, origin);
  if (detail::string(doc, "log_base", origin) != "e") {
    throw Error(ErrorKind::FormatError, origin + ": only natural-log optical density is supported");
  }
  const Json& vectors = detail::member(doc, "stain_vectors", origin);
  const Json& intensities = detail::member(doc, "intensities", origin);
  const Json& tiles = detail::member(doc, "tile_count", origin);
  if (!tiles.is_number_unsigned()) {
    throw Error(ErrorKind::FormatError, origin + ": 'tile_count' must be a nonnegative integer");
  }
  StainProfile p{StainBasis::from_vectors(detail::vec3(vectors, "H", origin), detail::vec3(vectors, "E", origin),
                                          detail::vec3(vectors, "R", origin)),
                 detail::number(intensities, "H", origin),
                 detail::number(intensities, "E", origin),
                 detail::string(doc, "source_id", origin),
                 tiles.get<std::size_t>(),
                 {},
                 detail::number(doc, "i0", origin)};
  if (doc.contains("metadata")) {
    for (const auto& [key, value] : doc.at("metadata").items()) {
      p.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return p;
}

inline Json profile_set_to_json(const SlideProfileSet& set) {
  Json profiles = Json::object();
  for (const auto& [id, p] : set.profiles) {
    profiles[id] = profile_to_json(p);
  }
  Json tallies = Json::object();
  for (const auto& [id, t] : set.tallies) {
    tallies[id] = {{"screened", t.screened}, {"passed", t.passed}, {"sampling_seed", t.seed}};
  }
  return Json{{"schema_version", kSchemaVersion}, {"profiles", std::move(profiles)}, {"tallies", std::move(tallies)}};
}

inline SlideProfileSet profile_set_from_json(const Json& doc, const std::string& origin) {
  detail::check_schema(doc, origin);
  SlideProfileSet set;
  for (const auto& [id, p] : detail::member(doc, "profiles", origin).items()) {
    set.profiles.emplace(id, profile_from_json(p, origin + ": profile '" + id + "'"));
  }
  if (doc.contains("tallies")) {
    for (const auto& [id, t] : doc.at("tallies").items()) {
      set.tallies[id] = {t.value("screened", std::size_t{0}), t.value("passed", std::size_t{0}),
                         t.value("sampling_seed", std::uint64_t{0})};
    }
  }
  return set;
}

// Either a single profile document or a profile set; returns every profile.
inline std::vector<StainProfile> profiles_from_document(const Json& doc, const std::string& origin) {
  if (doc.is_object() && doc.contains("profiles")) {
    std::vector<StainProfile> out;
    for (auto& [id, p] : profile_set_from_json(doc, origin).profiles) {
      out.push_back(std::move(p));
    }
    return out;
  }
  return {profile_from_json(doc, origin)};
}

inline Json selection_to_json(const ReferenceSelection& s) {
  Json out = Json::object();
  for (ReferenceRole role : kReferenceRoles) {
    out[std::string(reference_role_name(role))] = s[role];
  }
  return out;
}

inline SelectionOverrides overrides_from_json(const Json& doc, const std::string& origin) {
  if (!doc.is_object()) {
    throw Error(ErrorKind::FormatError, origin + ": selection overrides must be an object");
  }
  SelectionOverrides out;
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (ReferenceRole role : kReferenceRoles) {
      if (key == reference_role_name(role)) {
        known = true;
        if (!value.is_null()) {
          if (!value.is_string()) {
            throw Error(ErrorKind::FormatError, origin + ": override '" + key + "' must be a string");
          }
          out[role] = value.get<std::string>();
        }
      }
    }
    if (!known) {
      throw Error(ErrorKind::FormatError, origin + ": unknown selection role '" + key + "'");
    }
  }
  return out;
}

inline Json library_to_json(const ReferenceLibrary& lib, const Json& metadata = Json::object()) {
  Json entries = Json::object();
  for (const auto& [id, p] : lib.entries) {
    entries[id] = profile_to_json(p);
  }
  return Json{{"schema_version", kSchemaVersion},
              {"entries", std::move(entries)},
              {"selected", selection_to_json(lib.selected)},
              {"metadata", metadata}};
}

inline ReferenceLibrary library_from_json(const Json& doc, const std::string& origin) {
  detail::check_schema(doc, origin);
  ReferenceLibrary lib;
  for (const auto& [id, p] : detail::member(doc, "entries", origin).items()) {
    lib.entries.emplace(id, profile_from_json(p, origin + ": entry '" + id + "'"));
  }
  const Json& selected = detail::member(doc, "selected", origin);
  for (ReferenceRole role : kReferenceRoles) {
    lib.selected[role] = detail::string(selected, std::string(reference_role_name(role)).c_str(), origin);
  }
  lib.validate();
  return lib;
}

}  // namespace stainbench::io
