// stainbench: profile slides, build a reference library, simulate staining
// conditions, evaluate prediction scores and export plot tables.
//
// Exit status: 0 success, 1 usage or configuration error, 2 data failure or
// partial success. Progress goes to stderr; results only to files under --out.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stainbench/config.hpp"
#include "stainbench/evaluation.hpp"
#include "stainbench/io/csv.hpp"
#include "stainbench/io/json.hpp"
#include "stainbench/io/png.hpp"
#include "stainbench/io/report.hpp"
#include "stainbench/parallel.hpp"
#include "stainbench/profiling.hpp"
#include "stainbench/simulation.hpp"

namespace fs = std::filesystem;
namespace sb = stainbench;
using sb::io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Flags shared by every subcommand. Unset optionals leave the config value.
struct CommonFlags {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> i0;
};

struct Flags {
  CommonFlags common;
  std::string manifest;
  std::string profiles;
  std::string library;
  std::string predictions;
  std::string report;
  std::string override_path;
  std::vector<std::string> condition_dirs;
  std::optional<std::string> conditions;
  std::optional<std::size_t> n_tiles;
  std::optional<double> residual_scale;
  std::optional<std::size_t> n_bootstrap;
  bool per_tile = false;
  bool force_roundtrip = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_out = true) {
  cmd->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", f.out, "output directory");
  if (needs_out) {
    out->required();
  }
  cmd->add_option("--seed", f.seed, "64-bit random seed");
  cmd->add_option("--workers", f.workers, "worker threads (0 = available parallelism)");
  cmd->add_option("--i0", f.i0, "incident light intensity");
}

sb::RunConfig resolve_config(const Flags& f) {
  sb::RunConfig cfg;
  if (!f.common.config_path.empty()) {
    Json doc;
    try {
      doc = sb::io::read_json(f.common.config_path);
    } catch (const sb::Error& err) {
      throw sb::Error(sb::ErrorKind::ConfigError, err.what());
    }
    cfg = sb::config_from_json(doc);
  }
  if (f.common.seed) cfg.seed = *f.common.seed;
  if (f.common.workers) cfg.workers = *f.common.workers;
  if (f.common.i0) cfg.i0 = *f.common.i0;
  if (f.n_tiles) cfg.n_tiles = *f.n_tiles;
  if (f.per_tile) cfg.per_tile = true;
  if (f.conditions) cfg.conditions = sb::parse_condition_list(*f.conditions);
  if (f.residual_scale) cfg.residual_scale = *f.residual_scale;
  if (f.force_roundtrip) cfg.force_reference_roundtrip = true;
  if (f.n_bootstrap) cfg.n_bootstrap = *f.n_bootstrap;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw sb::Error(sb::ErrorKind::IoError, "cannot write '" + path.string() + "'");
  }
}

template <typename Writer>
void write_table(const fs::path& path, Writer&& writer) {
  std::ostringstream text;
  writer(text);
  write_text(path, text.str());
}

void report_failures(const char* command, const std::vector<sb::io::Failure>& failures) {
  for (const auto& f : failures) {
    std::cerr << command << ": " << f.id << ": " << f.reason << '\n';
  }
}

std::uint64_t slide_seed(std::uint64_t seed, const std::string& slide_id) {
  return sb::SplitMix64::substream(seed, sb::fnv1a(slide_id))();
}

// ---------------------------------------------------------------------------

int cmd_profile(const Flags& f) {
  const sb::RunConfig cfg = resolve_config(f);
  const fs::path out(f.common.out);
  const sb::TileManifest manifest = sb::io::read_manifest(f.manifest);
  sb::io::write_json(out / "resolved_config.json", sb::config_to_json(cfg));
  if (manifest.empty()) {
    std::cerr << "profile: no slides in " << f.manifest << '\n';
    sb::io::write_json(out / "profile_report.json",
                       Json{{"slides_profiled", 0}, {"failures", Json::array({{{"slide_id", ""}, {"reason", "no slides"}}})}});
    return kExitData;
  }

  std::vector<const std::pair<const std::string, std::vector<fs::path>>*> slides;
  for (const auto& entry : manifest) {
    slides.push_back(&entry);
  }
  std::vector<std::optional<sb::SlideCharacterization>> results(slides.size());
  std::vector<std::string> errors(slides.size());
  std::mutex log_mutex;
  sb::parallel_for(slides.size(), cfg.resolved_workers(), [&](std::size_t i) {
    const auto& [slide_id, tiles] = *slides[i];
    const sb::SlideSampling sampling{cfg.n_tiles, slide_seed(cfg.seed, slide_id), cfg.shuffle_tiles, cfg.i0};
    try {
      results[i] = sb::characterize_slide(
          slide_id, tiles.size(), [&](std::size_t k) { return sb::io::read_png(tiles[k]); }, cfg.quality,
          cfg.estimation, sampling);
      const std::lock_guard lock(log_mutex);
      std::cerr << "profile: " << slide_id << ": " << results[i]->passed << " tiles profiled, "
                << results[i]->screened << " screened\n";
    } catch (const sb::Error& err) {
      errors[i] = err.what();
    }
  });

  sb::SlideProfileSet set;
  std::vector<sb::io::Failure> failures;
  Json screening = Json::object();
  for (std::size_t i = 0; i < slides.size(); ++i) {
    const auto& [slide_id, tiles] = *slides[i];
    if (!results[i]) {
      failures.push_back({slide_id, errors[i]});
      continue;
    }
    const sb::SlideCharacterization& r = *results[i];
    set.profiles.emplace(slide_id, r.profile);
    set.tallies[slide_id] = {r.screened, r.passed, r.seed};
    Json log = Json::array();
    for (const auto& rec : r.log) {
      log.push_back({{"tile", tiles[rec.candidate].filename().string()}, {"passed", rec.passed}, {"reason", rec.reason}});
    }
    screening[slide_id] = std::move(log);
    if (cfg.per_tile) {
      for (const auto& tp : r.tile_profiles) {
        const std::size_t k = std::stoul(tp.metadata.at("candidate"));
        sb::StainProfile copy = tp;
        copy.metadata["tile"] = tiles[k].filename().string();
        sb::io::write_json(out / "per_tile" / slide_id / (tiles[k].stem().string() + ".json"),
                           sb::io::profile_to_json(copy));
      }
    }
  }
  sb::io::write_json(out / "profiles.json", sb::io::profile_set_to_json(set));
  sb::io::write_json(out / "profile_report.json", Json{{"slides_profiled", set.profiles.size()},
                                                       {"failures", sb::io::failures_json(failures, "slide_id")},
                                                       {"screening", std::move(screening)}});
  report_failures("profile", failures);
  std::cerr << "profile: " << set.profiles.size() << " of " << slides.size() << " slides profiled\n";
  return failures.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------

std::vector<sb::StainProfile> load_condition_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw sb::Error(sb::ErrorKind::IoError, "'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<sb::StainProfile> out;
  for (const auto& file : files) {
    for (auto& p : sb::io::profiles_from_document(sb::io::read_json(file), file.string())) {
      out.push_back(std::move(p));
    }
  }
  if (out.empty()) {
    throw sb::Error(sb::ErrorKind::EmptyInput, "no profile documents in '" + dir.string() + "'");
  }
  return out;
}

int cmd_build_library(const Flags& f) {
  sb::RunConfig cfg = resolve_config(f);
  const fs::path out(f.common.out);
  if (!f.override_path.empty()) {
    const sb::SelectionOverrides file =
        sb::io::overrides_from_json(sb::io::read_json(f.override_path), f.override_path);
    for (sb::ReferenceRole role : sb::kReferenceRoles) {
      if (file[role]) {
        cfg.overrides[role] = file[role];
      }
    }
  }
  sb::io::write_json(out / "resolved_config.json", sb::config_to_json(cfg));
  std::map<std::string, std::vector<sb::StainProfile>> conditions;
  for (const auto& dir_text : f.condition_dirs) {
    const fs::path dir = fs::path(dir_text).lexically_normal();
    const std::string id = (dir.has_filename() ? dir : dir.parent_path()).filename().string();
    if (conditions.contains(id)) {
      throw sb::Error(sb::ErrorKind::InvalidArgument, "condition '" + id + "' given twice");
    }
    conditions.emplace(id, load_condition_dir(dir));
    std::cerr << "build-library: " << id << ": " << conditions[id].size() << " profiles\n";
  }
  const sb::ReferenceLibrary lib = sb::build_library(conditions, cfg.overrides);
  Json warnings = Json::array();
  for (const auto& w : lib.warnings()) {
    std::cerr << "build-library: warning: " << w << '\n';
    warnings.push_back(w);
  }
  Json metadata{{"hue_render_intensity", cfg.hue_render_intensity}, {"warnings", std::move(warnings)}};
  Json stats = Json::object();
  for (const auto& [id, p] : lib.entries) {
    Json hue = Json::object();
    for (auto [stain, key] : {std::pair{sb::Stain::Hematoxylin, "H"}, std::pair{sb::Stain::Eosin, "E"}}) {
      try {
        hue[key] = sb::stain_hue(sb::stain_vector(p.basis, stain), cfg.hue_render_intensity, p.i0);
      } catch (const sb::Error&) {
        hue[key] = nullptr;
      }
    }
    stats[id] = {{"he_angle_deg", sb::he_angle(p.basis)},
                 {"combined_intensity", sb::combined_intensity(p)},
                 {"hue_deg", std::move(hue)}};
  }
  metadata["condition_stats"] = std::move(stats);
  sb::io::write_json(out / "library.json", sb::io::library_to_json(lib, metadata));
  for (sb::ReferenceRole role : sb::kReferenceRoles) {
    std::cerr << "build-library: " << sb::reference_role_name(role) << " = " << lib.selected[role] << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Flags& f) {
  const sb::RunConfig cfg = resolve_config(f);
  const fs::path out(f.common.out);
  const sb::TileManifest manifest = sb::io::read_manifest(f.manifest);
  const sb::SlideProfileSet profiles =
      sb::io::profile_set_from_json(sb::io::read_json(f.profiles), f.profiles);
  const bool reference_only =
      std::all_of(cfg.conditions.begin(), cfg.conditions.end(), [](sb::Condition c) { return c == sb::Condition::Reference; });
  sb::ReferenceLibrary library;
  if (!f.library.empty()) {
    library = sb::io::library_from_json(sb::io::read_json(f.library), f.library);
  } else if (!reference_only) {
    throw sb::Error(sb::ErrorKind::ConfigError, "--library is required unless --conditions is reference only");
  }
  sb::io::write_json(out / "resolved_config.json", sb::config_to_json(cfg));
  if (manifest.empty()) {
    std::cerr << "simulate: no slides in " << f.manifest << '\n';
    return kExitData;
  }
  sb::BatchOptions options;
  options.conditions = cfg.conditions;
  options.residual_scale = cfg.residual_scale;
  options.i0 = cfg.i0;
  options.force_reference_roundtrip = cfg.force_reference_roundtrip;
  options.workers = cfg.resolved_workers();
  sb::io::PngTileStore store;
  const sb::BatchReport report = sb::simulate_batch(manifest, profiles.profiles, library, out, store, options);
  sb::io::write_json(out / "run_report.json", sb::io::batch_report_to_json(report));
  for (const auto& fail : report.failures) {
    std::cerr << "simulate: " << fail.slide_id << ": " << fail.reason << '\n';
  }
  std::cerr << "simulate: " << report.tiles_written << " tiles written in " << report.elapsed_s << " s\n";
  return report.failures.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const Flags& f) {
  const sb::RunConfig cfg = resolve_config(f);
  const fs::path out(f.common.out);
  const sb::PredictionTable table = sb::io::read_predictions(f.predictions);
  sb::io::write_json(out / "resolved_config.json", sb::config_to_json(cfg));

  std::vector<sb::ModelResult> results;
  std::vector<sb::ModelPredictions> preds;
  std::vector<sb::io::Failure> excluded;
  for (const auto& [model, rows] : sb::group_by_model(table)) {
    try {
      preds.push_back(sb::model_predictions(rows));
      results.push_back(sb::model_result(preds.back()));
    } catch (const sb::Error& err) {
      excluded.push_back({model, err.what()});
    }
  }
  report_failures("evaluate", excluded);
  if (results.empty()) {
    std::cerr << "evaluate: no model could be evaluated\n";
    sb::io::write_json(out / "report.json", Json{{"schema_version", sb::io::kSchemaVersion},
                                                 {"models", Json::array()},
                                                 {"excluded_models", sb::io::failures_json(excluded, "model_id")}});
    return kExitData;
  }

  std::map<std::string, sb::io::ModelBootstrap> boots;
  std::vector<sb::io::Failure> boot_failures;
  for (const auto& p : preds) {
    try {
      sb::io::ModelBootstrap b{sb::bootstrap_model(p, cfg.n_bootstrap, sb::model_seed(cfg.seed, p.model_id),
                                                   cfg.resolved_workers()),
                               std::nullopt,
                               {}};
      std::vector<sb::Point2> pts(b.result.reference_auc.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = {b.result.reference_auc[i], b.result.robustness[i]};
      }
      try {
        b.ellipse = sb::ellipse_summary(pts);
      } catch (const sb::Error& err) {
        b.ellipse_note = err.what();
      }
      boots.emplace(p.model_id, std::move(b));
    } catch (const sb::Error& err) {
      boot_failures.push_back({p.model_id, err.what()});
    }
  }
  report_failures("evaluate: bootstrap", boot_failures);

  const sb::CohortReport report =
      sb::cohort_stats(results, sb::model_seed(cfg.seed, "#cohort"), cfg.n_bootstrap, cfg.min_n_for_ci);
  Json doc = sb::io::cohort_report_to_json(report, boots, excluded);
  doc["bootstrap_failures"] = sb::io::failures_json(boot_failures, "model_id");
  sb::io::write_json(out / "report.json", doc);
  write_table(out / "conditions.csv", [&](std::ostream& s) { sb::io::write_condition_table(s, report); });
  write_table(out / "models.csv", [&](std::ostream& s) { sb::io::write_model_table(s, report); });
  write_table(out / "performance_points.csv",
              [&](std::ostream& s) { sb::io::write_performance_points(s, report, boots); });
  write_table(out / "performance_ellipses.csv", [&](std::ostream& s) { sb::io::write_performance_ellipses(s, boots); });
  std::cerr << "evaluate: " << results.size() << " models evaluated, " << excluded.size() << " excluded\n";
  return excluded.empty() && boot_failures.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------

int cmd_plot_data(const Flags& f) {
  const sb::RunConfig cfg = resolve_config(f);
  const fs::path out(f.common.out);
  if (f.profiles.empty() && f.library.empty() && f.report.empty()) {
    throw sb::Error(sb::ErrorKind::ConfigError, "plot-data needs --profiles, --library or --report");
  }
  sb::io::write_json(out / "resolved_config.json", sb::config_to_json(cfg));
  std::vector<sb::io::PlotProfile> items;
  if (!f.profiles.empty()) {
    for (const auto& [id, p] : sb::io::profile_set_from_json(sb::io::read_json(f.profiles), f.profiles).profiles) {
      items.push_back({"slide", p});
    }
  }
  if (!f.library.empty()) {
    const sb::ReferenceLibrary lib = sb::io::library_from_json(sb::io::read_json(f.library), f.library);
    for (const auto& [id, p] : lib.entries) {
      items.push_back({"library", p});
    }
    write_table(out / "references.csv", [&](std::ostream& s) {
      sb::io::write_csv_row(s, std::vector<std::string>{"role", "condition_id"});
      for (sb::ReferenceRole role : sb::kReferenceRoles) {
        sb::io::write_csv_row(s, std::vector<std::string>{std::string(sb::reference_role_name(role)), lib.selected[role]});
      }
    });
  }
  if (!items.empty()) {
    write_table(out / "intensities.csv", [&](std::ostream& s) { sb::io::write_intensity_points(s, items); });
    write_table(out / "angles.csv", [&](std::ostream& s) { sb::io::write_angle_list(s, items); });
    write_table(out / "hues.csv", [&](std::ostream& s) { sb::io::write_hue_list(s, items, cfg.hue_render_intensity); });
  }
  if (!f.report.empty()) {
    const Json doc = sb::io::read_json(f.report);
    write_table(out / "performance_points.csv", [&](std::ostream& s) {
      sb::io::write_csv_row(s, std::vector<std::string>{"model_id", "reference_auc", "robustness",
                                                        "boot_mean_reference_auc", "boot_mean_robustness"});
      for (const auto& m : doc.at("models")) {
        const bool has = m.contains("bootstrap");
        sb::io::write_csv_row(
            s, std::vector<std::string>{
                   m.at("model_id").get<std::string>(), sb::io::format_double(m.at("reference_auc").get<double>()),
                   sb::io::format_double(m.at("robustness").get<double>()),
                   has ? sb::io::format_double(m["bootstrap"]["mean_point"][0].get<double>()) : "",
                   has ? sb::io::format_double(m["bootstrap"]["mean_point"][1].get<double>()) : ""});
      }
    });
    write_table(out / "performance_ellipses.csv", [&](std::ostream& s) {
      sb::io::write_csv_row(s, std::vector<std::string>{"model_id", "center_reference_auc", "center_robustness",
                                                        "semi_major", "semi_minor", "rotation_rad"});
      for (const auto& m : doc.at("models")) {
        if (!m.contains("bootstrap") || m["bootstrap"]["covariance_ellipse"].is_null()) {
          continue;
        }
        const Json& e = m["bootstrap"]["covariance_ellipse"];
        sb::io::write_csv_row(s, std::vector<std::string>{
                                     m.at("model_id").get<std::string>(),
                                     sb::io::format_double(e["center"][0].get<double>()),
                                     sb::io::format_double(e["center"][1].get<double>()),
                                     sb::io::format_double(e["semi_axes"][0].get<double>()),
                                     sb::io::format_double(e["semi_axes"][1].get<double>()),
                                     sb::io::format_double(e["rotation"].get<double>())});
      }
    });
  }
  std::cerr << "plot-data: " << items.size() << " profiles exported\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H&E staining robustness toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* profile = app.add_subcommand("profile", "characterize slides from a tile manifest");
  add_common(profile, f.common);
  profile->add_option("--manifest", f.manifest, "CSV with slide_id,tile_path")->required();
  profile->add_option("--n-tiles", f.n_tiles, "passing tiles profiled per slide");
  profile->add_flag("--per-tile", f.per_tile, "also write each sampled tile's profile");

  auto* build = app.add_subcommand("build-library", "select reference staining conditions");
  add_common(build, f.common);
  build->add_option("--condition-dir", f.condition_dirs, "directory of profile JSON files for one condition")
      ->required();
  build->add_option("--override", f.override_path, "JSON selection overrides")->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "transform tiles into the staining conditions");
  add_common(simulate, f.common);
  simulate->add_option("--manifest", f.manifest, "CSV with slide_id,tile_path")->required();
  simulate->add_option("--profiles", f.profiles, "slide profiles JSON")->required();
  simulate->add_option("--library", f.library, "reference library JSON");
  simulate->add_option("--conditions", f.conditions, "comma-separated condition names");
  simulate->add_option("--residual-scale", f.residual_scale, "residual attenuation");
  simulate->add_flag("--force-roundtrip", f.force_roundtrip, "recompose reference tiles instead of copying");

  auto* evaluate = app.add_subcommand("evaluate", "AUC, robustness and cohort statistics");
  add_common(evaluate, f.common);
  evaluate->add_option("--predictions", f.predictions, "CSV model_id,slide_id,label,condition,score")->required();
  evaluate->add_option("--n-bootstrap", f.n_bootstrap, "bootstrap resamples");

  auto* plot = app.add_subcommand("plot-data", "export data tables for stain and robustness plots");
  add_common(plot, f.common);
  plot->add_option("--profiles", f.profiles, "slide profiles JSON");
  plot->add_option("--library", f.library, "reference library JSON");
  plot->add_option("--report", f.report, "report.json written by evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*profile) return cmd_profile(f);
    if (*build) return cmd_build_library(f);
    if (*simulate) return cmd_simulate(f);
    if (*evaluate) return cmd_evaluate(f);
    if (*plot) return cmd_plot_data(f);
  } catch (const sb::Error& err) {
    std::cerr << app.get_subcommands().front()->get_name() << ": " << err.what() << '\n';
    return err.kind() == sb::ErrorKind::ConfigError ? kExitUsage : kExitData;
  } catch (const std::exception& err) {
    std::cerr << "stainbench: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
