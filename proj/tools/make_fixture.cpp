// make_fixture: writes a small synthetic dataset for exercising the CLI.
//
//   <out>/slides/<slide>/tileNN.png   3 slides x 12 tiles, two blank tiles
//   <out>/manifest.csv
//   <out>/references/<cond>/tileNN.png  4 reference staining conditions
//   <out>/references_manifest.csv
//   <out>/predictions.csv             synthetic model scores

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "stainbench/evaluation.hpp"
#include "stainbench/io/csv.hpp"
#include "stainbench/io/png.hpp"
#include "stainbench/synthetic.hpp"

namespace fs = std::filesystem;
namespace sb = stainbench;

namespace {

constexpr std::size_t kSlides = 3;
constexpr std::size_t kTilesPerSlide = 12;
constexpr std::size_t kReferenceTiles = 10;

struct ReferenceCondition {
  const char* id;
  double angle_deg;  // H-E angle; the intensity conditions sit between the colour extremes
  double scale;
};

constexpr ReferenceCondition kReferences[] = {
    {"dim", 10.0, 0.55},
    {"dark", 10.0, 2.2},
    {"distinct", 15.9, 1.0},
    {"similar", 5.0, 1.0},
};

std::string tile_name(std::size_t i) {
  return (i < 10 ? "tile0" : "tile") + std::to_string(i) + ".png";
}

void write_row(std::ostream& out, std::vector<std::string> fields) { sb::io::write_csv_row(out, fields); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"write a synthetic H&E fixture"};
  std::string out_text;
  std::uint64_t seed = 7;
  app.add_option("--out", out_text, "output directory")->required();
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(out_text);
    fs::create_directories(out);
    sb::SyntheticTileSpec spec;

    std::ofstream manifest(out / "manifest.csv");
    write_row(manifest, {"slide_id", "tile_path"});
    for (std::size_t s = 0; s < kSlides; ++s) {
      const std::string slide = "slide" + std::to_string(s);
      sb::SplitMix64 rng = sb::SplitMix64::substream(seed, s);
      const sb::StainBasis basis = sb::random_he_basis(rng, 0.05);
      spec.concentration_scale = rng.uniform(0.7, 1.3);
      for (std::size_t t = 0; t < kTilesPerSlide; ++t) {
        const fs::path rel = fs::path("slides") / slide / tile_name(t);
        if (t % 6 == 5) {
          sb::RgbTile blank(spec.width, spec.height);
          std::fill(blank.data().begin(), blank.data().end(), std::uint8_t{255});
          sb::io::write_png(out / rel, blank);
        } else {
          sb::io::write_png(out / rel, sb::synthesize_tile(basis, spec, rng()).tile);
        }
        write_row(manifest, {slide, rel.generic_string()});
      }
    }

    std::ofstream refs(out / "references_manifest.csv");
    write_row(refs, {"slide_id", "tile_path"});
    for (std::size_t c = 0; c < std::size(kReferences); ++c) {
      const ReferenceCondition& ref = kReferences[c];
      sb::SplitMix64 rng = sb::SplitMix64::substream(seed ^ 0x5EF, c);
      const sb::StainBasis basis = sb::basis_with_angle(ref.angle_deg);
      spec.concentration_scale = ref.scale;
      for (std::size_t t = 0; t < kReferenceTiles; ++t) {
        const fs::path rel = fs::path("references") / ref.id / tile_name(t);
        sb::io::write_png(out / rel, sb::synthesize_tile(basis, spec, rng()).tile);
        write_row(refs, {ref.id, rel.generic_string()});
      }
    }

    std::ofstream predictions(out / "predictions.csv");
    sb::CohortSpec cohort;
    cohort.n_models = 4;
    cohort.separation = 1.2;
    cohort.model_spread = 0.3;
    cohort.conditions[sb::condition_index(sb::Condition::LowIntensity)] = {0.0, 0.2, 0};
    cohort.conditions[sb::condition_index(sb::Condition::HighIntensity)] = {-0.3, 0.2, 0};
    cohort.conditions[sb::condition_index(sb::Condition::LowSimilarity)] = {-0.5, 0.4, 0};
    cohort.conditions[sb::condition_index(sb::Condition::HighSimilarity)] = {0.0, 0.1, 0};
    sb::io::write_predictions(predictions, sb::synth_cohort(cohort, seed));
    if (!manifest || !refs || !predictions) {
      throw sb::Error(sb::ErrorKind::IoError, "cannot write fixture tables under '" + out.string() + "'");
    }
  } catch (const std::exception& err) {
    std::cerr << "make_fixture: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
