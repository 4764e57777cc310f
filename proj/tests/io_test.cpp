#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stainbench/config.hpp"
#include "stainbench/io/csv.hpp"
#include "stainbench/io/json.hpp"
#include "stainbench/io/png.hpp"
#include "stainbench/io/report.hpp"
#include "stainbench/synthetic.hpp"

namespace sb = stainbench;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("stainbench_io_" + std::string(info->name()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

sb::StainProfile sample_profile(const std::string& id, double scale) {
  sb::StainProfile p{sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin()),
                     1.0 / 3.0 * scale, 0.1 * scale, id, 7, {{"note", "x"}}, 255.0};
  return p;
}

}  // namespace

TEST(Png, RoundTripIsLossless) {
  TempDir dir;
  const auto tile =
      sb::synthesize_tile(sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin()),
                          {.width = 37, .height = 23}, 5)
          .tile;
  const fs::path p = dir.path() / "nested" / "a.png";
  sb::io::write_png(p, tile);
  EXPECT_EQ(sb::io::read_png(p), tile);
  const fs::path q = dir.path() / "b.png";
  sb::io::write_png(q, tile);
  std::ifstream a(p, std::ios::binary);
  std::ifstream b(q, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Png, MissingFileIsIoError) {
  try {
    sb::io::read_png("/nonexistent/tile.png");
    FAIL();
  } catch (const sb::Error& e) {
    EXPECT_EQ(e.kind(), sb::ErrorKind::IoError);
  }
}

TEST(Csv, ManifestResolvesRelativePaths) {
  TempDir dir;
  write_text(dir.path() / "m.csv",
             "tile_path,slide_id\r\ntiles/a.png,s1\n\"tiles/b,c.png\",s1\n/abs/x.png,s0\n\n");
  const auto m = sb::io::read_manifest(dir.path() / "m.csv");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("s1"), (std::vector<fs::path>{dir.path() / "tiles/a.png", dir.path() / "tiles/b,c.png"}));
  EXPECT_EQ(m.at("s0"), (std::vector<fs::path>{"/abs/x.png"}));
}

TEST(Csv, MalformedInputs) {
  TempDir dir;
  write_text(dir.path() / "bad.csv", "slide_id\ns1\n");
  write_text(dir.path() / "short.csv", "slide_id,tile_path\ns1\n");
  write_text(dir.path() / "empty.csv", "");
  for (const char* name : {"bad.csv", "short.csv", "empty.csv"}) {
    try {
      sb::io::read_manifest(dir.path() / name);
      FAIL() << name;
    } catch (const sb::Error& e) {
      EXPECT_EQ(e.kind(), sb::ErrorKind::FormatError) << name;
    }
  }
  EXPECT_THROW(sb::io::read_manifest(dir.path() / "missing.csv"), sb::Error);
  EXPECT_THROW(sb::io::csv_field("a\"b"), sb::Error);
  EXPECT_EQ(sb::io::csv_field("a,b"), "\"a,b\"");
}

TEST(Csv, PredictionsRoundTrip) {
  TempDir dir;
  sb::CohortSpec spec;
  spec.n_models = 2;
  spec.conditions[3].noise = 0.3;
  const auto table = sb::synth_cohort(spec, 9);
  {
    std::ofstream out(dir.path() / "p.csv");
    sb::io::write_predictions(out, table);
  }
  EXPECT_EQ(sb::io::read_predictions(dir.path() / "p.csv"), table);

  write_text(dir.path() / "cond.csv", "model_id,slide_id,label,condition,score\nm,s,1,medium,0.5\n");
  write_text(dir.path() / "label.csv", "model_id,slide_id,label,condition,score\nm,s,2,reference,0.5\n");
  write_text(dir.path() / "score.csv", "model_id,slide_id,label,condition,score\nm,s,1,reference,high\n");
  for (const char* name : {"cond.csv", "label.csv", "score.csv"}) {
    EXPECT_THROW(sb::io::read_predictions(dir.path() / name), sb::Error) << name;
  }
}

TEST(Json, ProfileRoundTripIsExact) {
  const auto p = sample_profile("slide-1", 1.0);
  const auto doc = sb::io::profile_to_json(p);
  EXPECT_EQ(doc["schema_version"], 1);
  EXPECT_EQ(doc["log_base"], "e");
  const auto back = sb::io::profile_from_json(sb::io::Json::parse(doc.dump()), "test");
  EXPECT_EQ(back.basis, p.basis);
  EXPECT_EQ(back.intensity_h, p.intensity_h);
  EXPECT_EQ(back.intensity_e, p.intensity_e);
  EXPECT_EQ(back.tile_count, 7u);
  EXPECT_EQ(back.metadata, p.metadata);
  EXPECT_EQ(back.source_id, "slide-1");
  // 1/3 needs all its digits to survive.
  EXPECT_NE(doc.dump().find("0.3333333333333333"), std::string::npos);
}

TEST(Json, ProfileRejectsBadDocuments) {
  auto doc = sb::io::profile_to_json(sample_profile("s", 1.0));
  auto wrong_version = doc;
  wrong_version["schema_version"] = 2;
  auto wrong_base = doc;
  wrong_base["log_base"] = "10";
  auto short_vec = doc;
  short_vec["stain_vectors"]["H"] = {1.0, 0.0};
  auto bad_residual = doc;
  bad_residual["stain_vectors"]["R"] = {1.0, 0.0, 0.0};
  for (const auto* d : {&wrong_version, &wrong_base, &short_vec}) {
    try {
      sb::io::profile_from_json(*d, "t");
      FAIL();
    } catch (const sb::Error& e) {
      EXPECT_EQ(e.kind(), sb::ErrorKind::FormatError);
    }
  }
  EXPECT_THROW(sb::io::profile_from_json(bad_residual, "t"), sb::Error);
}

TEST(Json, LibraryAndProfileSetRoundTrip) {
  std::map<std::string, std::vector<sb::StainProfile>> conds{{"low", {sample_profile("low", 0.5)}},
                                                              {"high", {sample_profile("high", 3.0)}}};
  const auto lib = sb::build_library(conds);
  const auto back = sb::io::library_from_json(sb::io::Json::parse(sb::io::library_to_json(lib).dump()), "t");
  EXPECT_EQ(back.selected.low_intensity, "low");
  EXPECT_EQ(back.selected.high_intensity, "high");
  EXPECT_EQ(back.entries.at("high").intensity_h, lib.entries.at("high").intensity_h);

  auto broken = sb::io::library_to_json(lib);
  broken["selected"]["low_intensity"] = "nope";
  EXPECT_THROW(sb::io::library_from_json(broken, "t"), sb::Error);

  sb::SlideProfileSet set;
  set.profiles.emplace("a", sample_profile("a", 1.0));
  set.tallies["a"] = {12, 10, 99};
  const auto set_back = sb::io::profile_set_from_json(sb::io::profile_set_to_json(set), "t");
  EXPECT_EQ(set_back.tallies.at("a"), set.tallies.at("a"));
  EXPECT_EQ(sb::io::profiles_from_document(sb::io::profile_set_to_json(set), "t").size(), 1u);
  EXPECT_EQ(sb::io::profiles_from_document(sb::io::profile_to_json(set.profiles.at("a")), "t").size(), 1u);
}

TEST(Json, Overrides) {
  const auto o = sb::io::overrides_from_json(sb::io::Json{{"high_similarity", "gill"}, {"low_intensity", nullptr}},
                                             "t");
  EXPECT_EQ(o.high_similarity, "gill");
  EXPECT_FALSE(o.low_intensity);
  EXPECT_THROW(sb::io::overrides_from_json(sb::io::Json{{"medium", "x"}}, "t"), sb::Error);
}

TEST(Config, EmitParseFixpoint) {
  sb::RunConfig c;
  c.seed = 123456789012345ULL;
  c.workers = 3;
  c.estimation.angle_alpha = 2.5;
  c.estimation.label_rule = sb::StainLabelRule::LargerAngleIsHematoxylin;
  c.quality.hue_gate = {{350.0, 20.0}};
  c.overrides.high_similarity = "gill";
  c.conditions = {sb::Condition::Reference, sb::Condition::HighIntensity};
  c.residual_scale = 1.0 / 3.0;
  c.n_bootstrap = 250;
  const auto once = sb::config_to_json(c);
  const auto parsed = sb::config_from_json(sb::io::Json::parse(once.dump()));
  const auto twice = sb::config_to_json(parsed);
  EXPECT_EQ(once.dump(), twice.dump());
  EXPECT_EQ(parsed.seed, c.seed);
  EXPECT_EQ(parsed.residual_scale, c.residual_scale);
  EXPECT_EQ(parsed.conditions, c.conditions);
  EXPECT_EQ(sb::config_to_json(sb::config_from_json(sb::config_to_json(sb::RunConfig{}))).dump(),
            sb::config_to_json(sb::RunConfig{}).dump());
}

TEST(Config, PartialDocumentsOverlayDefaults) {
  const auto c = sb::config_from_json(sb::io::Json::parse(R"({"profile": {"n_tiles": 4}, "seed": 5})"));
  EXPECT_EQ(c.n_tiles, 4u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.residual_scale, 0.01);
  EXPECT_EQ(c.n_bootstrap, 1000u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  for (const char* text : {R"({"sed": 1})", R"({"profile": {"ntiles": 4}})", R"({"seed": -1})",
                           R"({"seed": "x"})", R"({"simulate": {"conditions": ["medium"]}})",
                           R"({"estimation": {"angle_alpha": 60}})", R"({"profile": {"n_tiles": 0}})",
                           R"({"schema_version": 2})", R"({"estimation": {"label_rule": "blue"}})"}) {
    try {
      sb::config_from_json(sb::io::Json::parse(text));
      FAIL() << text;
    } catch (const sb::Error& e) {
      EXPECT_EQ(e.kind(), sb::ErrorKind::ConfigError) << text;
    }
  }
}

TEST(Config, ConditionList) {
  EXPECT_EQ(sb::parse_condition_list("high_intensity,reference,high_intensity"),
            (std::vector{sb::Condition::Reference, sb::Condition::HighIntensity}));
  EXPECT_THROW(sb::parse_condition_list("reference,"), sb::Error);
}

TEST(Report, ConditionTableColumns) {
  const std::vector<sb::ModelResult> models{sb::model_result_from_aucs("a", {0.92, 0.91, 0.93, 0.92, 0.92}),
                                            sb::model_result_from_aucs("b", {0.80, 0.85, 0.70, 0.75, 0.79})};
  const auto report = sb::cohort_stats(models, 1, 100);
  std::ostringstream cond;
  sb::io::write_condition_table(cond, report);
  std::string header;
  std::istringstream lines(cond.str());
  std::getline(lines, header);
  EXPECT_EQ(header, "condition,best_model_count,median_delta_auc,ci_lo,ci_hi,worst_case_decrease");
  std::ostringstream models_csv;
  sb::io::write_model_table(models_csv, report);
  EXPECT_NE(models_csv.str().find("a,0.92,0.020000000000000018,high_intensity,high_performing;highly_robust"),
            std::string::npos)
      << models_csv.str();
  EXPECT_NE(models_csv.str().find(",none\n"), std::string::npos);
}
