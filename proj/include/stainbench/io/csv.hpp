#pragma once

// CSV tables: tile manifests, prediction tables and report rows.

#include <boost/tokenizer.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stainbench/conditions.hpp"
#include "stainbench/error.hpp"
#include "stainbench/evaluation.hpp"
#include "stainbench/simulation.hpp"

namespace stainbench::io {

// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Fields containing commas are quoted. Double quotes and line breaks inside
// fields are not representable in this dialect and are rejected.
inline std::string csv_field(std::string_view field) {
  if (field.find_first_of("\"\n\r") != std::string_view::npos) {
    throw Error(ErrorKind::FormatError, "CSV field contains a quote or line break: '" + std::string(field) + "'");
  }
  if (field.find(',') == std::string_view::npos) {
    return std::string(field);
  }
  return "\"" + std::string(field) + "\"";
}

inline void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out << (i ? "," : "") << csv_field(fields[i]);
  }
  out << '\n';
}

class CsvTable {
 public:
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based source line of each row, for messages.
  std::vector<std::size_t> lines;

  std::size_t column(std::string_view name, const std::string& origin) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) {
        return i;
      }
    }
    throw Error(ErrorKind::FormatError, origin + ": missing column '" + std::string(name) + "'");
  }
};

// Comma-separated, fields optionally wrapped in double quotes, no escape
// character (backslashes are literal), one record per line.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  }
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  const boost::escaped_list_separator<char> separator('\0', ',', '"');
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    std::vector<std::string> fields;
    try {
      const Tokenizer tokens(line, separator);
      fields.assign(tokens.begin(), tokens.end());
    } catch (const boost::escaped_list_error& err) {
      throw Error(ErrorKind::FormatError, path.string() + ":" + std::to_string(number) + ": " + err.what());
    }
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::FormatError, path.string() + ":" + std::to_string(number) + ": expected " +
                                              std::to_string(table.header.size()) + " fields, found " +
                                              std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(number);
  }
  if (!have_header) {
    throw Error(ErrorKind::FormatError, path.string() + ": empty file, expected a header row");
  }
  return table;
}

// slide_id,tile_path; relative tile paths resolve against the manifest's
// directory. Tiles keep manifest order within a slide.
inline TileManifest read_manifest(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::string origin = path.string();
  const std::size_t slide_col = table.column("slide_id", origin);
  const std::size_t path_col = table.column("tile_path", origin);
  const std::filesystem::path base = path.parent_path();
  TileManifest manifest;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row[slide_col].empty() || row[path_col].empty()) {
      throw Error(ErrorKind::FormatError, origin + ":" + std::to_string(table.lines[r]) + ": empty field");
    }
    const std::filesystem::path tile(row[path_col]);
    manifest[row[slide_col]].push_back(tile.is_absolute() ? tile : base / tile);
  }
  return manifest;
}

inline double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorKind::FormatError, where + ": '" + text + "' is not a number");
  }
  return value;
}

// model_id,slide_id,label,condition,score.
inline PredictionTable read_predictions(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::string origin = path.string();
  const std::size_t model_col = table.column("model_id", origin);
  const std::size_t slide_col = table.column("slide_id", origin);
  const std::size_t label_col = table.column("label", origin);
  const std::size_t cond_col = table.column("condition", origin);
  const std::size_t score_col = table.column("score", origin);
  PredictionTable out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = origin + ":" + std::to_string(table.lines[r]);
    if (row[label_col] != "0" && row[label_col] != "1") {
      throw Error(ErrorKind::FormatError, where + ": label must be 0 or 1, got '" + row[label_col] + "'");
    }
    const auto condition = try_parse_condition(row[cond_col]);
    if (!condition) {
      throw Error(ErrorKind::FormatError, where + ": unknown condition '" + row[cond_col] + "'");
    }
    const double score = parse_double(row[score_col], where);
    if (!std::isfinite(score)) {
      throw Error(ErrorKind::FormatError, where + ": score must be finite");
    }
    out.push_back({row[model_col], row[slide_col], row[label_col] == "1" ? 1 : 0, *condition, score});
  }
  return out;
}

inline void write_predictions(std::ostream& out, const PredictionTable& table) {
  out << "model_id,slide_id,label,condition,score\n";
  for (const Prediction& p : table) {
    write_csv_row(out, std::vector<std::string>{p.model_id, p.slide_id, std::to_string(p.label),
                                                std::string(condition_name(p.condition)), format_double(p.score)});
  }
}

}  // namespace stainbench::io
