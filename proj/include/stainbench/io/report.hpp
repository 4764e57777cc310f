#pragma once

// Machine-readable outputs: simulation run reports, cohort reports and the
// flat tables derived from them.

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stainbench/evaluation.hpp"
#include "stainbench/io/csv.hpp"
#include "stainbench/io/json.hpp"
#include "stainbench/profiling.hpp"
#include "stainbench/simulation.hpp"

namespace stainbench::io {

struct Failure {
  std::string id;
  std::string reason;
};

inline Json failures_json(const std::vector<Failure>& failures, const char* id_key) {
  Json out = Json::array();
  for (const auto& f : failures) {
    out.push_back({{id_key, f.id}, {"reason", f.reason}});
  }
  return out;
}

inline Json batch_report_to_json(const BatchReport& r) {
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"slide_id", f.slide_id}, {"reason", f.reason}});
  }
  return Json{{"tiles_written", r.tiles_written}, {"failures", std::move(failures)}, {"elapsed_s", r.elapsed_s}};
}

inline Json interval_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

struct ModelBootstrap {
  BootstrapResult result;
  std::optional<Ellipse> ellipse;
  std::string ellipse_note;
};

inline Json ellipse_json(const Ellipse& e) {
  return Json{{"center", {e.center.x, e.center.y}},
              {"semi_axes", {e.major, e.minor}},
              {"rotation", e.rotation},
              {"covariance", {e.covariance[0], e.covariance[1], e.covariance[2]}}};
}

inline std::string flags_field(const ModelResult& m) {
  std::string out;
  if (m.high_performing()) {
    out = "high_performing";
  }
  if (m.highly_robust()) {
    out += out.empty() ? "highly_robust" : ";highly_robust";
  }
  return out.empty() ? "none" : out;
}

inline Json model_json(const ModelResult& m, const ModelBootstrap* boot) {
  Json aucs = Json::object();
  Json deltas = Json::object();
  Json best = Json::array();
  for (Condition c : kAllConditions) {
    aucs[std::string(condition_name(c))] = m.auc_by_condition[condition_index(c)];
  }
  for (Condition c : kSimulatedConditions) {
    deltas[std::string(condition_name(c))] = m.delta_auc[condition_index(c)];
  }
  for (Condition c : m.best_conditions) {
    best.push_back(condition_name(c));
  }
  Json out{{"model_id", m.model_id},
           {"auc_by_condition", std::move(aucs)},
           {"reference_auc", m.reference_auc},
           {"robustness", m.robustness},
           {"delta_auc", std::move(deltas)},
           {"best_condition", condition_name(m.best_condition)},
           {"best_conditions", std::move(best)},
           {"flags", {{"high_performing", m.high_performing()}, {"highly_robust", m.highly_robust()}}}};
  if (boot != nullptr) {
    const BootstrapResult& b = boot->result;
    out["bootstrap"] = {{"seed", b.seed},
                        {"n_iter", b.reference_auc.size()},
                        {"redraws", b.redraws},
                        {"reference_auc_ci", interval_json(b.reference_ci)},
                        {"robustness_ci", interval_json(b.robustness_ci)},
                        {"mean_point", {b.mean_reference_auc, b.mean_robustness}},
                        {"covariance_ellipse", boot->ellipse ? ellipse_json(*boot->ellipse) : Json(nullptr)}};
    if (!boot->ellipse_note.empty()) {
      out["bootstrap"]["ellipse_note"] = boot->ellipse_note;
    }
  }
  return out;
}

inline Json cohort_report_to_json(const CohortReport& report, const std::map<std::string, ModelBootstrap>& boots,
                                  const std::vector<Failure>& excluded) {
  Json models = Json::array();
  for (const auto& m : report.models) {
    const auto it = boots.find(m.model_id);
    models.push_back(model_json(m, it == boots.end() ? nullptr : &it->second));
  }
  Json conditions = Json::array();
  for (const auto& s : report.conditions) {
    conditions.push_back({{"condition", condition_name(s.condition)},
                          {"best_model_count", s.best_model_count},
                          {"median_delta_auc", s.median_delta_auc},
                          {"delta_ci", interval_json(s.delta_ci)},
                          {"worst_case_decrease", s.worst_case_decrease}});
  }
  Json correlation = nullptr;
  if (report.performance_robustness) {
    const Correlation& c = *report.performance_robustness;
    correlation = {{"pearson_r", c.r},
                   {"ci", c.ci ? interval_json(*c.ci) : Json(nullptr)},
                   {"n", c.n},
                   {"degenerate", c.degenerate}};
  }
  Json out{{"schema_version", kSchemaVersion},
           {"boot_seed", report.boot_seed},
           {"n_bootstrap", report.n_bootstrap},
           {"thresholds", {{"high_performing_auc", kHighPerformingAuc}, {"highly_robust_range", kHighlyRobustRange}}},
           {"models", std::move(models)},
           {"excluded_models", failures_json(excluded, "model_id")},
           {"conditions", std::move(conditions)},
           {"performance_robustness", std::move(correlation)}};
  if (!report.correlation_note.empty()) {
    out["correlation_note"] = report.correlation_note;
  }
  return out;
}

inline const std::vector<std::string>& condition_table_columns() {
  static const std::vector<std::string> cols{"condition",        "best_model_count", "median_delta_auc",
                                             "ci_lo",            "ci_hi",            "worst_case_decrease"};
  return cols;
}

inline const std::vector<std::string>& model_table_columns() {
  static const std::vector<std::string> cols{"model_id", "reference_auc", "robustness", "best_condition", "flags"};
  return cols;
}

inline void write_condition_table(std::ostream& out, const CohortReport& report) {
  write_csv_row(out, condition_table_columns());
  for (const auto& s : report.conditions) {
    write_csv_row(out, std::vector<std::string>{std::string(condition_name(s.condition)),
                                                std::to_string(s.best_model_count), format_double(s.median_delta_auc),
                                                format_double(s.delta_ci.lo), format_double(s.delta_ci.hi),
                                                format_double(s.worst_case_decrease)});
  }
}

inline void write_model_table(std::ostream& out, const CohortReport& report) {
  write_csv_row(out, model_table_columns());
  for (const auto& m : report.models) {
    write_csv_row(out, std::vector<std::string>{m.model_id, format_double(m.reference_auc), format_double(m.robustness),
                                                std::string(condition_name(m.best_condition)), flags_field(m)});
  }
}

// Performance-robustness scatter with bootstrap mean points.
inline void write_performance_points(std::ostream& out, const CohortReport& report,
                                     const std::map<std::string, ModelBootstrap>& boots) {
  write_csv_row(out, std::vector<std::string>{"model_id", "reference_auc", "robustness", "boot_mean_reference_auc",
                                              "boot_mean_robustness"});
  for (const auto& m : report.models) {
    const auto it = boots.find(m.model_id);
    const bool has = it != boots.end();
    write_csv_row(out, std::vector<std::string>{
                           m.model_id, format_double(m.reference_auc), format_double(m.robustness),
                           has ? format_double(it->second.result.mean_reference_auc) : "",
                           has ? format_double(it->second.result.mean_robustness) : ""});
  }
}

inline void write_performance_ellipses(std::ostream& out, const std::map<std::string, ModelBootstrap>& boots) {
  write_csv_row(out, std::vector<std::string>{"model_id", "center_reference_auc", "center_robustness", "semi_major",
                                              "semi_minor", "rotation_rad"});
  for (const auto& [id, b] : boots) {
    if (!b.ellipse) {
      continue;
    }
    const Ellipse& e = *b.ellipse;
    write_csv_row(out, std::vector<std::string>{id, format_double(e.center.x), format_double(e.center.y),
                                                format_double(e.major), format_double(e.minor),
                                                format_double(e.rotation)});
  }
}

// One labelled profile for the stain-property plots.
struct PlotProfile {
  std::string group;
  StainProfile profile;
};

inline void write_intensity_points(std::ostream& out, const std::vector<PlotProfile>& items) {
  write_csv_row(out, std::vector<std::string>{"source_id", "group", "intensity_h", "intensity_e"});
  for (const auto& [group, p] : items) {
    write_csv_row(out, std::vector<std::string>{p.source_id, group, format_double(p.intensity_h),
                                                format_double(p.intensity_e)});
  }
}

inline void write_angle_list(std::ostream& out, const std::vector<PlotProfile>& items) {
  write_csv_row(out, std::vector<std::string>{"source_id", "group", "he_angle_deg"});
  for (const auto& [group, p] : items) {
    write_csv_row(out, std::vector<std::string>{p.source_id, group, format_double(he_angle(p.basis))});
  }
}

// Achromatic renderings leave hue_deg empty.
inline void write_hue_list(std::ostream& out, const std::vector<PlotProfile>& items, double render_intensity) {
  write_csv_row(out, std::vector<std::string>{"source_id", "group", "stain", "hue_deg", "render_intensity"});
  for (const auto& [group, p] : items) {
    for (Stain s : {Stain::Hematoxylin, Stain::Eosin}) {
      std::string hue;
      try {
        hue = format_double(stain_hue(stain_vector(p.basis, s), render_intensity, p.i0));
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::AchromaticColor) {
          throw;
        }
      }
      write_csv_row(out, std::vector<std::string>{p.source_id, group, s == Stain::Hematoxylin ? "H" : "E", hue,
                                                  format_double(render_intensity)});
    }
  }
}

}  // namespace stainbench::io
