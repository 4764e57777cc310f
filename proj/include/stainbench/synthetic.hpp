#pragma once

// Synthetic H&E tiles with known ground truth, for fixtures and tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Geometry>

#include "stainbench/od.hpp"
#include "stainbench/rng.hpp"
#include "stainbench/tile.hpp"

namespace stainbench {

struct ConcentrationRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Each pixel is, independently, background (zero OD), hematoxylin-only,
// eosin-only, or a mixture with intensities drawn from [0, hi] of each range.
struct SyntheticTileSpec {
  std::size_t width = 448;
  std::size_t height = 448;
  double background_fraction = 0.15;
  double hematoxylin_fraction = 0.25;
  double eosin_fraction = 0.25;
  ConcentrationRange hematoxylin{0.3, 1.2};
  ConcentrationRange eosin{0.2, 1.0};
  // Multiplies every drawn concentration.
  double concentration_scale = 1.0;
  // Relative Gaussian noise applied independently to each OD channel.
  double od_noise = 0.01;
  double i0 = kDefaultI0;
};

struct SyntheticTile {
  RgbTile tile;
  // Concentrations used to render the tile, before noise and quantization.
  ConcentrationMaps truth;
};

inline SyntheticTile synthesize_tile(const StainBasis& basis, const SyntheticTileSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SyntheticTile out{RgbTile(spec.width, spec.height), ConcentrationMaps(spec.width, spec.height)};
  const double p_bg = spec.background_fraction;
  const double p_h = p_bg + spec.hematoxylin_fraction;
  const double p_e = p_h + spec.eosin_fraction;
  const Vec3& h = basis.hematoxylin();
  const Vec3& e = basis.eosin();
  for (std::size_t i = 0; i < out.tile.pixel_count(); ++i) {
    const double u = rng.uniform();
    double ih = 0.0;
    double ie = 0.0;
    if (u < p_bg) {
      // background
    } else if (u < p_h) {
      ih = rng.uniform(spec.hematoxylin.lo, spec.hematoxylin.hi);
    } else if (u < p_e) {
      ie = rng.uniform(spec.eosin.lo, spec.eosin.hi);
    } else {
      ih = rng.uniform(0.0, spec.hematoxylin.hi);
      ie = rng.uniform(0.0, spec.eosin.hi);
    }
    ih *= spec.concentration_scale;
    ie *= spec.concentration_scale;
    out.truth.hematoxylin[i] = ih;
    out.truth.eosin[i] = ie;
    auto px = out.tile.pixel(i);
    for (int k = 0; k < 3; ++k) {
      double od = ih * h[k] + ie * e[k];
      if (spec.od_noise > 0.0) {
        od *= 1.0 + spec.od_noise * rng.normal();
      }
      px[static_cast<std::size_t>(k)] = detail::quantize(spec.i0 * std::exp(-std::max(od, 0.0)));
    }
  }
  return out;
}

inline const Vec3& typical_hematoxylin() {
  static const Vec3 v = Vec3(0.650, 0.704, 0.286).normalized();
  return v;
}

inline const Vec3& typical_eosin() {
  static const Vec3 v = Vec3(0.072, 0.990, 0.105).normalized();
  return v;
}

// Typical H with E rotated toward the typical E to the requested H-E angle.
inline StainBasis basis_with_angle(double degrees_he) {
  const Vec3& h = typical_hematoxylin();
  const Vec3 axis = h.cross(typical_eosin()).normalized();
  const Vec3 e = Eigen::AngleAxisd(degrees_he * std::numbers::pi / 180.0, axis) * h;
  return StainBasis::from_stains(h, e);
}

// Plausible H&E basis: the typical vectors perturbed by `spread` per component.
inline StainBasis random_he_basis(SplitMix64& rng, double spread = 0.08) {
  for (;;) {
    Vec3 h = typical_hematoxylin();
    Vec3 e = typical_eosin();
    for (int k = 0; k < 3; ++k) {
      h[k] = std::max(0.02, h[k] + spread * rng.normal());
      e[k] = std::max(0.02, e[k] + spread * rng.normal());
    }
    h.normalize();
    e.normalize();
    // Keep H and E well separated and H redder than E, as in real stains.
    if (degrees(std::acos(std::clamp(h.dot(e), -1.0, 1.0))) > 15.0 && h[0] > e[0] + 0.1) {
      return StainBasis::from_stains(h, e);
    }
  }
}

}  // namespace stainbench
