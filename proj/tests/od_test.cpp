#include <cmath>
#include <cstdint>
#include <cstdlib>

#include <gtest/gtest.h>

#include "stainbench/od.hpp"
#include "stainbench/rng.hpp"
#include "stainbench/synthetic.hpp"

namespace sb = stainbench;

namespace {

sb::RgbTile single_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return sb::RgbTile(1, 1, {r, g, b});
}

sb::StainBasis typical_basis() {
  return sb::StainBasis::from_stains(sb::typical_hematoxylin(), sb::typical_eosin());
}

sb::RgbTile render_concentrations(const sb::StainBasis& basis, double ih, double ie, double ir, std::size_t n = 4) {
  sb::OdTile od(n, n);
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    od.set_pixel(i, ih * basis.hematoxylin() + ie * basis.eosin() + ir * basis.residual());
  }
  return sb::od_to_rgb(od);
}

int max_abs_diff(const sb::RgbTile& a, const sb::RgbTile& b) {
  int worst = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(int{a.data()[i]} - int{b.data()[i]}));
  }
  return worst;
}

}  // namespace

TEST(RgbToOd, WhiteIsZeroDensity) {
  const auto od = sb::rgb_to_od(single_pixel(255, 255, 255));
  for (double v : od.data()) {
    EXPECT_DOUBLE_EQ(v, 0.0);
  }
}

TEST(RgbToOd, MidGray) {
  const auto od = sb::rgb_to_od(single_pixel(128, 128, 128));
  for (double v : od.data()) {
    EXPECT_DOUBLE_EQ(v, -std::log(128.0 / 255.0));
    EXPECT_NEAR(v, 0.6890, 5e-4);
  }
}

TEST(RgbToOd, ZeroChannelClampsToOne) {
  const auto od = sb::rgb_to_od(single_pixel(0, 100, 255));
  EXPECT_NEAR(od.data()[0], 5.5413, 1e-4);
  EXPECT_DOUBLE_EQ(od.data()[0], std::log(255.0));
  EXPECT_NEAR(od.data()[1], 0.9361, 1e-4);
  EXPECT_DOUBLE_EQ(od.data()[2], 0.0);
}

TEST(RgbToOd, RejectsNonPositiveIlluminant) {
  EXPECT_THROW(sb::rgb_to_od(single_pixel(1, 2, 3), 0.0), sb::Error);
  EXPECT_THROW(sb::rgb_to_od(single_pixel(1, 2, 3), -5.0), sb::Error);
}

TEST(OdToRgb, ZeroDensityIsWhite) {
  sb::OdTile od(2, 2);
  const auto rgb = sb::od_to_rgb(od);
  for (auto v : rgb.data()) {
    EXPECT_EQ(v, 255);
  }
}

TEST(OdToRgb, InvertsMidGray) {
  sb::OdTile od(1, 1);
  od.set_pixel(0, sb::Vec3::Constant(0.6890));
  const auto rgb = sb::od_to_rgb(od);
  for (auto v : rgb.data()) {
    EXPECT_NEAR(int{v}, 128, 1);
  }
}

TEST(OdToRgb, ExactInverseAboveClampFloor) {
  // Every channel value 1..255 in every channel position.
  std::vector<std::uint8_t> px;
  for (int v = 1; v <= 255; ++v) {
    px.insert(px.end(), {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(256 - v),
                         static_cast<std::uint8_t>((v * 7) % 255 + 1)});
  }
  const sb::RgbTile tile(255, 1, px);
  EXPECT_EQ(sb::od_to_rgb(sb::rgb_to_od(tile)), tile);
}

TEST(StainBasis, UnitNormAndOrthogonalResidual) {
  const auto basis = typical_basis();
  EXPECT_NEAR(basis.hematoxylin().norm(), 1.0, 1e-12);
  EXPECT_NEAR(basis.eosin().norm(), 1.0, 1e-12);
  EXPECT_NEAR(basis.residual().norm(), 1.0, 1e-12);
  EXPECT_NEAR(basis.residual().dot(basis.hematoxylin()), 0.0, 1e-12);
  EXPECT_NEAR(basis.residual().dot(basis.eosin()), 0.0, 1e-12);
}

TEST(StainBasis, RejectsDegenerateInputs) {
  const sb::Vec3 h(1.0, 0.5, 0.2);
  const sb::Vec3 nearly_h = h + sb::Vec3(0.0, 1e-5, 0.0);
  EXPECT_THROW(sb::StainBasis::from_stains(h, nearly_h), sb::Error);
  EXPECT_THROW(sb::StainBasis::from_stains(h, sb::Vec3(-0.5, 1.0, 0.0)), sb::Error);
  EXPECT_THROW(sb::StainBasis::from_stains(h, sb::Vec3::Zero()), sb::Error);
  try {
    sb::StainBasis::from_stains(h, h);
    FAIL() << "expected DegenerateBasis";
  } catch (const sb::Error& err) {
    EXPECT_EQ(err.kind(), sb::ErrorKind::DegenerateBasis);
  }
}

TEST(StainBasis, FromVectorsKeepsResidualSign) {
  const auto basis = typical_basis();
  const auto flipped = sb::StainBasis::from_vectors(basis.hematoxylin(), basis.eosin(), -basis.residual());
  EXPECT_NEAR((flipped.residual() + basis.residual()).norm(), 0.0, 1e-15);
  EXPECT_THROW(sb::StainBasis::from_vectors(basis.hematoxylin(), basis.eosin(), basis.hematoxylin()), sb::Error);
}

TEST(Decompose, RecoversForwardSynthesizedConcentrations) {
  const auto basis = typical_basis();
  const auto tile = render_concentrations(basis, 0.5, 0.3, 0.0);
  const auto conc = sb::decompose(tile, basis);
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    EXPECT_NEAR(conc.hematoxylin[i], 0.5, 1e-2);
    EXPECT_NEAR(conc.eosin[i], 0.3, 1e-2);
    EXPECT_NEAR(conc.residual[i], 0.0, 1e-2);
  }
}

TEST(Decompose, WhiteTileHasZeroConcentrations) {
  const auto conc = sb::decompose(sb::RgbTile(3, 3), typical_basis());
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    EXPECT_EQ(conc.hematoxylin[i], 0.0);
    EXPECT_EQ(conc.eosin[i], 0.0);
    EXPECT_EQ(conc.residual[i], 0.0);
  }
}

TEST(Decompose, ResidualOnlyTile) {
  // A residual-only OD needs nonnegative residual components to be renderable.
  const auto basis = sb::StainBasis::from_stains(sb::Vec3(1.0, 0.3, 0.0), sb::Vec3(0.2, 1.0, 0.0));
  ASSERT_GE(basis.residual().minCoeff(), 0.0);
  const auto tile = render_concentrations(basis, 0.0, 0.0, 0.8);
  const auto conc = sb::decompose(tile, basis);
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    EXPECT_NEAR(conc.hematoxylin[i], 0.0, 1e-2);
    EXPECT_NEAR(conc.eosin[i], 0.0, 1e-2);
    EXPECT_NEAR(conc.residual[i], 0.8, 1e-2);
  }
}

TEST(Decompose, SolveIsExactBeforeClamping) {
  const auto basis = typical_basis();
  const sb::StainUnmixer unmixer(basis);
  const sb::Mat3 m = basis.matrix();
  sb::SplitMix64 rng(17);
  int nonnegative = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::array<std::uint8_t, 3> px{};
    for (auto& c : px) {
      c = static_cast<std::uint8_t>(1 + rng.below(255));
    }
    const sb::Vec3 od(-std::log(px[0] / 255.0), -std::log(px[1] / 255.0), -std::log(px[2] / 255.0));
    const sb::Vec3 c = unmixer.solve(od);
    EXPECT_LE((m * c - od).norm(), 1e-9);
    const auto clamped = unmixer.unmix(std::span<const std::uint8_t, 3>(px));
    if (c.minCoeff() >= 0.0) {
      ++nonnegative;
      EXPECT_LE((m * sb::Vec3(clamped[0], clamped[1], clamped[2]) - od).norm(), 1e-9);
    }
    for (double v : clamped) {
      EXPECT_GE(v, 0.0);
    }
  }
  EXPECT_GT(nonnegative, 100);
}

TEST(Decompose, RowPartitionInvariant) {
  const auto basis = typical_basis();
  const auto tile = sb::synthesize_tile(basis, {.width = 37, .height = 29}, 3).tile;
  const sb::StainUnmixer unmixer(basis);
  const auto whole = unmixer.decompose(tile);
  sb::ConcentrationMaps parts(tile.width(), tile.height());
  const std::array<std::pair<std::size_t, std::size_t>, 4> bands{{{20, 29}, {0, 5}, {6, 20}, {5, 6}}};
  for (const auto& [begin, end] : bands) {
    unmixer.decompose_rows(tile, begin, end, parts);
  }
  EXPECT_EQ(whole.hematoxylin, parts.hematoxylin);
  EXPECT_EQ(whole.eosin, parts.eosin);
  EXPECT_EQ(whole.residual, parts.residual);
}

TEST(Recompose, IdentityRoundTrip) {
  sb::SplitMix64 rng(5);
  for (int t = 0; t < 5; ++t) {
    const auto basis = sb::random_he_basis(rng);
    // Noise-free: pixels off the H&E plane would lose their negative parts to clamping.
    const auto tile = sb::synthesize_tile(basis, {.width = 64, .height = 64, .od_noise = 0.0}, 100 + t).tile;
    const auto back = sb::recompose(sb::decompose(tile, basis), basis, {1.0, 1.0, 1.0});
    EXPECT_LE(max_abs_diff(tile, back), 2);
  }
}

TEST(Recompose, ZeroScalesGiveResidualOrWhite) {
  const auto basis = sb::StainBasis::from_stains(sb::Vec3(1.0, 0.3, 0.0), sb::Vec3(0.2, 1.0, 0.0));
  const auto tile = render_concentrations(basis, 0.6, 0.4, 0.5);
  const auto conc = sb::decompose(tile, basis);
  const auto white = sb::recompose(conc, basis, {0.0, 0.0, 0.0});
  for (auto v : white.data()) {
    EXPECT_EQ(v, 255);
  }
  const auto residual_only = sb::recompose(conc, basis, {0.0, 0.0, 1.0});
  const auto expected = render_concentrations(basis, 0.0, 0.0, 0.5);
  EXPECT_LE(max_abs_diff(residual_only, expected), 1);
  // Uniform because every pixel carries the same residual.
  for (std::size_t i = 1; i < residual_only.pixel_count(); ++i) {
    EXPECT_TRUE(std::ranges::equal(residual_only.pixel(i), residual_only.pixel(0)));
  }
}

TEST(Recompose, DoublingHematoxylinScaleDoublesItsDensity) {
  const auto basis = typical_basis();
  sb::ConcentrationMaps conc(16, 16);
  sb::SplitMix64 rng(9);
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    conc.hematoxylin[i] = rng.uniform(0.1, 1.0);
  }
  // H-only maps: the output density is exactly the hematoxylin contribution,
  // up to 8-bit quantization of each channel.
  const auto one = sb::rgb_to_od(sb::recompose(conc, basis, {1.0, 0.0, 0.0}));
  const auto two = sb::rgb_to_od(sb::recompose(conc, basis, {2.0, 0.0, 0.0}));
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double expected1 = conc.hematoxylin[i] * basis.hematoxylin()[k];
      const double od1 = one.data()[3 * i + static_cast<std::size_t>(k)];
      const double od2 = two.data()[3 * i + static_cast<std::size_t>(k)];
      // Rounding by half a count around value x moves OD by at most ln(x / (x - 0.5)).
      const double x1 = 255.0 * std::exp(-expected1);
      const double x2 = 255.0 * std::exp(-2.0 * expected1);
      const double q1 = std::log(x1 / (x1 - 0.5)) + 1e-12;
      const double q2 = std::log(x2 / (x2 - 0.5)) + 1e-12;
      EXPECT_NEAR(od1, expected1, q1);
      EXPECT_NEAR(od2, 2.0 * expected1, q2);
    }
  }
}

TEST(Recompose, MonotoneInHematoxylinScale) {
  const auto basis = typical_basis();
  const auto tile = sb::synthesize_tile(basis, {.width = 48, .height = 48}, 11).tile;
  const auto conc = sb::decompose(tile, basis);
  sb::RgbTile previous = sb::recompose(conc, basis, {0.0, 1.0, 0.01});
  for (double scale : {0.25, 0.5, 1.0, 1.5, 3.0, 8.0}) {
    const auto next = sb::recompose(conc, basis, {scale, 1.0, 0.01});
    for (std::size_t i = 0; i < next.data().size(); ++i) {
      ASSERT_LE(next.data()[i], previous.data()[i]);
    }
    previous = next;
  }
}

TEST(Recompose, RejectsNegativeScales) {
  const auto basis = typical_basis();
  const sb::ConcentrationMaps conc(2, 2);
  EXPECT_THROW(sb::recompose(conc, basis, {-1.0, 1.0, 0.01}), sb::Error);
}

TEST(Restain, MatchesTwoStepPathBitExactly) {
  sb::SplitMix64 rng(21);
  const auto source = sb::random_he_basis(rng);
  const auto target = sb::random_he_basis(rng);
  const auto tile = sb::synthesize_tile(source, {.width = 40, .height = 30}, 2).tile;
  const sb::RecomposeScales scales{1.7, 0.6, 0.01};
  const auto fused = sb::restain(tile, sb::StainUnmixer(source), target, scales);
  const auto two_step = sb::recompose(sb::decompose(tile, source), target, scales);
  EXPECT_EQ(fused, two_step);
  EXPECT_EQ(fused, sb::restain(tile, sb::StainUnmixer(source), target, scales));
}
