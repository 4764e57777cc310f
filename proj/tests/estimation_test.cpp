#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "stainbench/estimation.hpp"
#include "stainbench/synthetic.hpp"

namespace sb = stainbench;

namespace {

double angle_deg(const sb::Vec3& a, const sb::Vec3& b) {
  return sb::degrees(std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)));
}

// Independent oracle: full sort, then the rank formula.
double sorted_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= v.size()) {
    return v.back();
  }
  return v[lo] + (rank - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace

TEST(Percentile, RankFormulaExamples) {
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  EXPECT_NEAR(sb::percentile(hundred, 95.0), 95.05, 1e-12);
  EXPECT_DOUBLE_EQ(sb::percentile(std::vector<double>{3.0, 1.0, 2.0}, 50.0), 2.0);
  for (double p : {0.0, 13.0, 50.0, 99.9, 100.0}) {
    EXPECT_DOUBLE_EQ(sb::percentile(std::vector<double>{4.25}, p), 4.25);
  }
}

TEST(Percentile, MatchesSortOracle) {
  sb::SplitMix64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(300));
    for (double& x : v) {
      x = rng.normal();
    }
    const double p = rng.uniform(0.0, 100.0);
    EXPECT_DOUBLE_EQ(sb::percentile(v, p), sorted_percentile(v, p));
  }
}

TEST(Percentile, Errors) {
  EXPECT_THROW(sb::percentile(std::vector<double>{}, 50.0), sb::Error);
  try {
    sb::percentile(std::vector<double>{}, 50.0);
  } catch (const sb::Error& err) {
    EXPECT_EQ(err.kind(), sb::ErrorKind::EmptyInput);
  }
  EXPECT_THROW(sb::percentile(std::vector<double>{1.0}, 101.0), sb::Error);
}

TEST(EstimateBasis, RecoversKnownStainVectors) {
  sb::SplitMix64 rng(2024);
  for (int instance = 0; instance < 10; ++instance) {
    const auto truth = sb::random_he_basis(rng);
    const auto tile = sb::synthesize_tile(truth, {}, 1000 + static_cast<std::uint64_t>(instance)).tile;
    const auto est = sb::estimate_basis(sb::rgb_to_od(tile).data());
    EXPECT_LE(angle_deg(est.hematoxylin(), truth.hematoxylin()), 1.0) << "instance " << instance;
    EXPECT_LE(angle_deg(est.eosin(), truth.eosin()), 1.0) << "instance " << instance;
    const double he = angle_deg(est.hematoxylin(), est.eosin());
    EXPECT_GT(he, 0.0);
    EXPECT_LE(he, 90.0);
  }
}

TEST(EstimateBasis, RecoveredBasisSatisfiesInvariants) {
  sb::SplitMix64 rng(8);
  const auto truth = sb::random_he_basis(rng);
  const auto est = sb::estimate_basis(sb::rgb_to_od(sb::synthesize_tile(truth, {}, 4).tile).data());
  EXPECT_NEAR(est.hematoxylin().norm(), 1.0, 1e-9);
  EXPECT_NEAR(est.eosin().norm(), 1.0, 1e-9);
  EXPECT_NEAR(est.residual().norm(), 1.0, 1e-9);
  EXPECT_NEAR(est.residual().dot(est.hematoxylin()), 0.0, 1e-9);
  EXPECT_NEAR(est.residual().dot(est.eosin()), 0.0, 1e-9);
  EXPECT_GE(est.hematoxylin().minCoeff(), 0.0);
  EXPECT_GE(est.eosin().minCoeff(), 0.0);
  // H is the redder stain.
  EXPECT_GT(est.hematoxylin()[0], est.eosin()[0]);
}

TEST(EstimateBasis, InvariantToPixelOrder) {
  sb::SplitMix64 rng(12);
  const auto truth = sb::random_he_basis(rng);
  const auto od = sb::rgb_to_od(sb::synthesize_tile(truth, {.width = 200, .height = 200}, 5).tile);
  const auto data = od.data();
  std::vector<std::size_t> order(od.pixel_count());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<double> shuffled;
  shuffled.reserve(data.size());
  for (std::size_t i : order) {
    shuffled.insert(shuffled.end(), {data[3 * i], data[3 * i + 1], data[3 * i + 2]});
  }
  const auto a = sb::estimate_basis(data);
  const auto b = sb::estimate_basis(std::span<const double>(shuffled));
  EXPECT_LE(angle_deg(a.hematoxylin(), b.hematoxylin()), 0.1);
  EXPECT_LE(angle_deg(a.eosin(), b.eosin()), 0.1);
}

TEST(EstimateBasis, ErrorShrinksWithAlphaOnNoiselessData) {
  const auto truth = sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin());
  // Mixture-only pixels: pure stains are rare, so the angular extremes
  // approach the true vectors only as alpha goes to zero.
  const sb::SyntheticTileSpec spec{.background_fraction = 0.0,
                                   .hematoxylin_fraction = 0.0,
                                   .eosin_fraction = 0.0,
                                   .od_noise = 0.0};
  std::vector<sb::Vec3> od;
  {
    const auto synth = sb::synthesize_tile(truth, spec, 77);
    for (std::size_t i = 0; i < synth.truth.pixel_count(); ++i) {
      // Unquantized densities straight from the generated concentrations.
      od.push_back(synth.truth.hematoxylin[i] * truth.hematoxylin() + synth.truth.eosin[i] * truth.eosin());
    }
  }
  double previous = 1e9;
  for (double alpha : {5.0, 1.0, 0.1}) {
    sb::EstimationConfig cfg;
    cfg.angle_alpha = alpha;
    const auto est = sb::estimate_basis(od, cfg);
    const double err = std::max(angle_deg(est.hematoxylin(), truth.hematoxylin()), angle_deg(est.eosin(), truth.eosin()));
    EXPECT_LT(err, previous) << "alpha " << alpha;
    previous = err;
  }
}

TEST(EstimateBasis, RankOneInputIsDegenerate) {
  std::vector<sb::Vec3> od;
  sb::SplitMix64 rng(1);
  for (int i = 0; i < 5000; ++i) {
    od.push_back(rng.uniform(0.2, 2.0) * sb::typical_hematoxylin());
  }
  try {
    sb::estimate_basis(od);
    FAIL() << "expected DegeneratePlane";
  } catch (const sb::Error& err) {
    EXPECT_EQ(err.kind(), sb::ErrorKind::DegeneratePlane);
  }
}

TEST(EstimateBasis, TooFewTissuePixels) {
  std::vector<sb::Vec3> od(999, sb::Vec3(0.5, 0.6, 0.2));
  od.resize(5000, sb::Vec3(0.01, 0.01, 0.01));
  try {
    sb::estimate_basis(od);
    FAIL() << "expected InsufficientTissue";
  } catch (const sb::Error& err) {
    EXPECT_EQ(err.kind(), sb::ErrorKind::InsufficientTissue);
  }
}

TEST(EstimateBasis, LabelRuleOverride) {
  const auto truth = sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin());
  const auto od = sb::rgb_to_od(sb::synthesize_tile(truth, {}, 6).tile);
  sb::EstimationConfig smaller;
  smaller.label_rule = sb::StainLabelRule::SmallerAngleIsHematoxylin;
  sb::EstimationConfig larger;
  larger.label_rule = sb::StainLabelRule::LargerAngleIsHematoxylin;
  const auto a = sb::estimate_basis(od.data(), smaller);
  const auto b = sb::estimate_basis(od.data(), larger);
  EXPECT_EQ(a.hematoxylin(), b.eosin());
  EXPECT_EQ(a.eosin(), b.hematoxylin());
}

TEST(EstimateBasis, RejectsBadConfig) {
  sb::EstimationConfig cfg;
  cfg.angle_alpha = 50.0;
  EXPECT_THROW(sb::estimate_basis(std::vector<sb::Vec3>{}, cfg), sb::Error);
}

TEST(EstimateProfile, UniformHematoxylinNinetyFifthPercentile) {
  const auto truth = sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin());
  const sb::SyntheticTileSpec spec{.background_fraction = 0.0,
                                   .hematoxylin_fraction = 0.0,
                                   .eosin_fraction = 0.0,
                                   .hematoxylin = {0.0, 2.0},
                                   .eosin = {0.0, 1.0}};
  const auto synth = sb::synthesize_tile(truth, spec, 31);
  const double oracle = sorted_percentile(synth.truth.hematoxylin, 95.0);
  EXPECT_NEAR(oracle, 1.9, 0.01);
  const auto profile = sb::estimate_profile(synth.tile);
  EXPECT_NEAR(profile.intensity_h, oracle, 0.02);
  EXPECT_NEAR(profile.intensity_h, 1.9, 0.02);
}

TEST(EstimateProfile, ConstantHematoxylin) {
  const auto truth = sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin());
  sb::SplitMix64 rng(2);
  // Every hematoxylin-stained pixel carries exactly 0.7; the rest is eosin.
  sb::OdTile od(200, 200);
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    od.set_pixel(i, i % 2 == 0 ? sb::Vec3(0.7 * truth.hematoxylin()) : sb::Vec3(rng.uniform(0.2, 1.0) * truth.eosin()));
  }
  const auto profile = sb::estimate_profile(sb::od_to_rgb(od));
  EXPECT_NEAR(profile.intensity_h, 0.7, 0.01);
}

TEST(EstimateProfile, WhiteTileHasNoTissue) {
  try {
    sb::estimate_profile(sb::RgbTile(64, 64));
    FAIL() << "expected InsufficientTissue";
  } catch (const sb::Error& err) {
    EXPECT_EQ(err.kind(), sb::ErrorKind::InsufficientTissue);
  }
}

TEST(EstimateProfile, IntensitiesScaleWithConcentrations) {
  sb::SplitMix64 rng(44);
  const auto truth = sb::random_he_basis(rng);
  sb::SyntheticTileSpec spec;
  const auto base = sb::estimate_profile(sb::synthesize_tile(truth, spec, 9).tile);
  for (double k : {0.6, 1.5}) {
    spec.concentration_scale = k;
    const auto scaled = sb::estimate_profile(sb::synthesize_tile(truth, spec, 9).tile);
    EXPECT_NEAR(scaled.intensity_h / base.intensity_h, k, 0.01 * k);
    EXPECT_NEAR(scaled.intensity_e / base.intensity_e, k, 0.01 * k);
  }
}
