#pragma once

// Stain-vector and intensity estimation from OD pixels (SVD plane fit plus
// angular extremes, in the Macenko lineage).

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "stainbench/error.hpp"
#include "stainbench/od.hpp"
#include "stainbench/statistics.hpp"
#include "stainbench/tile.hpp"

namespace stainbench {

// How the two extreme in-plane directions are labelled H and E.
enum class StainLabelRule {
  // Larger red-channel absorbance is hematoxylin; ties go to the smaller angle.
  RedChannel,
  SmallerAngleIsHematoxylin,
  LargerAngleIsHematoxylin,
};

struct EstimationConfig {
  // Pixels with OD magnitude below this are background.
  double od_min = 0.15;
  // Pixels above this percentile of tissue OD magnitude are discarded.
  double od_max_percentile = 99.5;
  // Extreme directions are the alpha and (100 - alpha) angle percentiles.
  double angle_alpha = 1.0;
  static constexpr double intensity_percentile = 95.0;
  std::size_t min_valid_pixels = 1000;
  StainLabelRule label_rule = StainLabelRule::RedChannel;

  void validate() const {
    if (!(angle_alpha > 0.0 && angle_alpha < 50.0)) {
      throw Error(ErrorKind::ConfigError, "angle_alpha must lie in (0, 50)");
    }
    if (!(od_min >= 0.0) || !std::isfinite(od_min)) {
      throw Error(ErrorKind::ConfigError, "od_min must be a nonnegative number");
    }
    if (!(od_max_percentile > 0.0 && od_max_percentile <= 100.0)) {
      throw Error(ErrorKind::ConfigError, "od_max_percentile must lie in (0, 100]");
    }
  }
};

struct StainProfile {
  StainBasis basis;
  // 95th percentiles of the per-pixel H and E intensities.
  double intensity_h = 0.0;
  double intensity_e = 0.0;
  std::string source_id;
  std::size_t tile_count = 1;
  std::map<std::string, std::string> metadata;
  // Incident intensity the profile was measured against.
  double i0 = kDefaultI0;
};

namespace detail {

inline Vec3 positive_sum(Vec3 v) noexcept { return v.sum() < 0.0 ? Vec3(-v) : v; }

// Accepts small negative components from noise; larger ones mean the plane
// does not contain a physical stain direction.
inline Vec3 clamp_stain_direction(Vec3 v) {
  v = positive_sum(v);
  if (v.minCoeff() < -0.05) {
    throw Error(ErrorKind::DegeneratePlane, "extreme stain direction has a negative component below -0.05");
  }
  v = v.cwiseMax(0.0);
  return v.normalized();
}

}  // namespace detail

// `od` holds interleaved (r, g, b) densities.
inline StainBasis estimate_basis(std::span<const double> od, const EstimationConfig& cfg = {}) {
  cfg.validate();
  if (od.size() % 3 != 0) {
    throw Error(ErrorKind::InvalidArgument, "OD buffer length is not a multiple of 3");
  }
  const std::size_t n = od.size() / 3;

  std::vector<double> magnitude(n);
  std::vector<double> tissue_magnitude;
  tissue_magnitude.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::sqrt(od[3 * i] * od[3 * i] + od[3 * i + 1] * od[3 * i + 1] + od[3 * i + 2] * od[3 * i + 2]);
    magnitude[i] = m;
    if (m >= cfg.od_min) {
      tissue_magnitude.push_back(m);
    }
  }
  if (tissue_magnitude.size() < cfg.min_valid_pixels || tissue_magnitude.empty()) {
    throw Error(ErrorKind::InsufficientTissue, std::to_string(tissue_magnitude.size()) +
                                                   " pixels above od_min, need " +
                                                   std::to_string(cfg.min_valid_pixels));
  }
  const double od_upper = percentile_inplace(tissue_magnitude, cfg.od_max_percentile);

  std::vector<Vec3> kept;
  kept.reserve(tissue_magnitude.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (magnitude[i] >= cfg.od_min && magnitude[i] <= od_upper) {
      kept.emplace_back(od[3 * i], od[3 * i + 1], od[3 * i + 2]);
    }
  }
  if (kept.size() < cfg.min_valid_pixels || kept.empty()) {
    throw Error(ErrorKind::InsufficientTissue, std::to_string(kept.size()) + " pixels survive OD filtering, need " +
                                                   std::to_string(cfg.min_valid_pixels));
  }

  // Right singular vectors of the kept OD matrix are the eigenvectors of its
  // 3x3 Gram matrix; singular values are the roots of the eigenvalues.
  Mat3 gram = Mat3::Zero();
  for (const Vec3& x : kept) {
    gram.noalias() += x * x.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::DegeneratePlane, "eigen decomposition of the OD Gram matrix failed");
  }
  const Vec3 lambda = eig.eigenvalues().cwiseMax(0.0);
  const double sigma1 = std::sqrt(lambda(2));
  const double sigma2 = std::sqrt(lambda(1));
  if (!(sigma1 > 0.0) || sigma2 < 1e-6 * sigma1) {
    throw Error(ErrorKind::DegeneratePlane, "second singular value is below 1e-6 of the first");
  }
  const Vec3 v1 = detail::positive_sum(eig.eigenvectors().col(2));
  const Vec3 v2 = detail::positive_sum(eig.eigenvectors().col(1));

  std::vector<double> angle(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    angle[i] = std::atan2(kept[i].dot(v2), kept[i].dot(v1));
  }
  const double phi_lo = percentile(angle, cfg.angle_alpha);
  const double phi_hi = percentile_inplace(angle, 100.0 - cfg.angle_alpha);

  const Vec3 lo = detail::clamp_stain_direction(std::cos(phi_lo) * v1 + std::sin(phi_lo) * v2);
  const Vec3 hi = detail::clamp_stain_direction(std::cos(phi_hi) * v1 + std::sin(phi_hi) * v2);

  bool lo_is_h = true;
  switch (cfg.label_rule) {
    case StainLabelRule::RedChannel:
      lo_is_h = lo[0] >= hi[0];
      break;
    case StainLabelRule::SmallerAngleIsHematoxylin:
      lo_is_h = true;
      break;
    case StainLabelRule::LargerAngleIsHematoxylin:
      lo_is_h = false;
      break;
  }
  try {
    return lo_is_h ? StainBasis::from_stains(lo, hi) : StainBasis::from_stains(hi, lo);
  } catch (const Error& err) {
    throw Error(ErrorKind::DegeneratePlane, err.what());
  }
}

inline StainBasis estimate_basis(std::span<const Vec3> od, const EstimationConfig& cfg = {}) {
  std::vector<double> flat;
  flat.reserve(od.size() * 3);
  for (const Vec3& v : od) {
    flat.insert(flat.end(), {v[0], v[1], v[2]});
  }
  return estimate_basis(std::span<const double>(flat), cfg);
}

// Basis from the filtered pixels; intensities are percentiles over all pixels.
inline StainProfile estimate_profile(const RgbTile& tile, const EstimationConfig& cfg = {},
                                     double i0 = kDefaultI0, std::string source_id = {}) {
  const OdTile od = rgb_to_od(tile, i0);
  StainBasis basis = estimate_basis(od.data(), cfg);
  ConcentrationMaps conc = decompose(tile, basis, i0);
  const double ih = percentile_inplace(conc.hematoxylin, EstimationConfig::intensity_percentile);
  const double ie = percentile_inplace(conc.eosin, EstimationConfig::intensity_percentile);
  return StainProfile{std::move(basis), ih, ie, std::move(source_id), 1, {}, i0};
}

}  // namespace stainbench
