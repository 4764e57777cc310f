#pragma once

// Optical-density kernel: Beer-Lambert transforms, stain unmixing against a
// three-vector basis, and recomposition to target staining properties.
//
// All densities use the natural logarithm. Channel values of 0 are clamped to
// 1 before the log, which caps a channel's density at ln(i0).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "stainbench/error.hpp"
#include "stainbench/tile.hpp"

namespace stainbench {

inline constexpr double kDefaultI0 = 255.0;
inline constexpr double kDefaultResidualScale = 0.01;
inline constexpr double kMaxConditionNumber = 1e8;

inline double degrees(double radians) noexcept { return radians * 180.0 / std::numbers::pi; }

// Hematoxylin, eosin and residual unit vectors in OD space.
//
// Invariants: every vector has unit norm, the residual is orthogonal to the
// H&E plane, H and E are componentwise nonnegative and at least 0.1 degrees
// apart. The residual is always re-derived from the H&E cross product so the
// orthogonality holds to rounding error.
class StainBasis {
 public:
  static StainBasis from_stains(const Vec3& hematoxylin, const Vec3& eosin) {
    StainBasis basis(check_stain(hematoxylin, "hematoxylin"), check_stain(eosin, "eosin"));
    Vec3 r = basis.h_.cross(basis.e_).normalized();
    if (r.sum() < 0.0) {
      r = -r;
    }
    basis.r_ = r;
    return basis;
  }

  // Accepts a stored basis. The residual only contributes its sign; it must be
  // orthogonal to the H&E plane within 1e-6 after normalization.
  static StainBasis from_vectors(const Vec3& hematoxylin, const Vec3& eosin, const Vec3& residual) {
    StainBasis basis = from_stains(hematoxylin, eosin);
    const double norm = residual.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorKind::DegenerateBasis, "residual vector has zero or non-finite norm");
    }
    const Vec3 r = residual / norm;
    if (std::abs(r.dot(basis.h_)) > 1e-6 || std::abs(r.dot(basis.e_)) > 1e-6) {
      throw Error(ErrorKind::DegenerateBasis, "residual vector is not orthogonal to the H&E plane");
    }
    if (r.dot(basis.r_) < 0.0) {
      basis.r_ = -basis.r_;
    }
    return basis;
  }

  const Vec3& hematoxylin() const noexcept { return h_; }
  const Vec3& eosin() const noexcept { return e_; }
  const Vec3& residual() const noexcept { return r_; }

  // Columns are (H, E, R).
  Mat3 matrix() const {
    Mat3 m;
    m.col(0) = h_;
    m.col(1) = e_;
    m.col(2) = r_;
    return m;
  }

  friend bool operator==(const StainBasis& a, const StainBasis& b) noexcept {
    return a.h_ == b.h_ && a.e_ == b.e_ && a.r_ == b.r_;
  }

 private:
  StainBasis(const Vec3& h, const Vec3& e) : h_(h), e_(e), r_(Vec3::Zero()) {
    const double cosine = std::clamp(h_.dot(e_), -1.0, 1.0);
    if (degrees(std::acos(cosine)) <= 0.1) {
      throw Error(ErrorKind::DegenerateBasis, "hematoxylin and eosin vectors are less than 0.1 degrees apart");
    }
  }

  static Vec3 check_stain(const Vec3& v, const char* which) {
    if (!v.allFinite()) {
      throw Error(ErrorKind::DegenerateBasis, std::string(which) + " vector is not finite");
    }
    if (v.minCoeff() < -1e-12) {
      throw Error(ErrorKind::DegenerateBasis, std::string(which) + " vector has negative absorbance");
    }
    Vec3 c = v.cwiseMax(0.0);
    const double norm = c.norm();
    if (!(norm > 0.0)) {
      throw Error(ErrorKind::DegenerateBasis, std::string(which) + " vector has zero norm");
    }
    return c / norm;
  }

  Vec3 h_;
  Vec3 e_;
  Vec3 r_;
};

namespace detail {

inline std::uint8_t quantize(double value) noexcept {
  // std::round rounds half away from zero.
  const double rounded = std::round(value);
  if (!(rounded > 0.0)) {
    return 0;
  }
  if (rounded >= 255.0) {
    return 255;
  }
  return static_cast<std::uint8_t>(rounded);
}

inline void check_i0(double i0) {
  if (!(i0 > 0.0) || !std::isfinite(i0)) {
    throw Error(ErrorKind::InvalidArgument, "illumination constant i0 must be positive");
  }
}

// Density for each 8-bit channel value.
class OdTable {
 public:
  explicit OdTable(double i0) {
    check_i0(i0);
    for (int v = 0; v < 256; ++v) {
      const double od = -std::log(static_cast<double>(std::max(v, 1)) / i0);
      table_[static_cast<std::size_t>(v)] = std::max(od, 0.0);
    }
  }

  double operator[](std::uint8_t value) const noexcept { return table_[value]; }

 private:
  std::array<double, 256> table_{};
};

}  // namespace detail

inline OdTile rgb_to_od(const RgbTile& tile, double i0 = kDefaultI0) {
  const detail::OdTable table(i0);
  OdTile out(tile.width(), tile.height());
  const auto in = tile.data();
  auto od = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    od[i] = table[in[i]];
  }
  return out;
}

// Inverse of rgb_to_od up to rounding: round(i0 * exp(-od)), clamped to [0, 255].
inline RgbTile od_to_rgb(const OdTile& od, double i0 = kDefaultI0) {
  detail::check_i0(i0);
  RgbTile out(od.width(), od.height());
  const auto in = od.data();
  auto px = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    px[i] = detail::quantize(i0 * std::exp(-in[i]));
  }
  return out;
}

// Precomputed pixelwise solver for one basis. Construction inverts the 3x3
// basis matrix once; the per-pixel solve is a matrix-vector product.
class StainUnmixer {
 public:
  explicit StainUnmixer(const StainBasis& basis, double i0 = kDefaultI0)
      : basis_(basis), table_(i0), i0_(i0) {
    const Mat3 m = basis.matrix();
    const Eigen::JacobiSVD<Mat3> svd(m);
    const auto& sv = svd.singularValues();
    const double condition = sv(2) > 0.0 ? sv(0) / sv(2) : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxConditionNumber)) {
      throw Error(ErrorKind::DegenerateBasis,
                  "stain matrix condition number " + std::to_string(condition) + " exceeds 1e8");
    }
    inverse_ = m.inverse();
  }

  const StainBasis& basis() const noexcept { return basis_; }
  double i0() const noexcept { return i0_; }

  // Exact solution of basis * c = od, before clamping.
  Vec3 solve(const Vec3& od) const noexcept { return inverse_ * od; }

  // Clamped intensities (H, E, R) for one pixel.
  std::array<double, 3> unmix(std::span<const std::uint8_t, 3> px) const noexcept {
    const double o0 = table_[px[0]];
    const double o1 = table_[px[1]];
    const double o2 = table_[px[2]];
    std::array<double, 3> c{};
    for (int k = 0; k < 3; ++k) {
      const double v = inverse_(k, 0) * o0 + inverse_(k, 1) * o1 + inverse_(k, 2) * o2;
      c[static_cast<std::size_t>(k)] = v > 0.0 ? v : 0.0;
    }
    return c;
  }

  // Rows [row_begin, row_end) of tile into out; any row partition gives the
  // same result as one full pass.
  void decompose_rows(const RgbTile& tile, std::size_t row_begin, std::size_t row_end,
                      ConcentrationMaps& out) const {
    const std::size_t w = tile.width();
    for (std::size_t i = row_begin * w; i < row_end * w; ++i) {
      const auto c = unmix(tile.pixel(i));
      out.hematoxylin[i] = c[0];
      out.eosin[i] = c[1];
      out.residual[i] = c[2];
    }
  }

  ConcentrationMaps decompose(const RgbTile& tile) const {
    ConcentrationMaps out(tile.width(), tile.height());
    decompose_rows(tile, 0, tile.height(), out);
    return out;
  }

 private:
  StainBasis basis_;
  detail::OdTable table_;
  double i0_;
  Mat3 inverse_;
};

// Weights applied to each concentration channel during recomposition.
struct RecomposeScales {
  double hematoxylin = 1.0;
  double eosin = 1.0;
  double residual = kDefaultResidualScale;
};

namespace detail {

inline void check_scales(const RecomposeScales& s) {
  if (!(s.hematoxylin >= 0.0) || !(s.eosin >= 0.0) || !(s.residual >= 0.0) ||
      !std::isfinite(s.hematoxylin) || !std::isfinite(s.eosin) || !std::isfinite(s.residual)) {
    throw Error(ErrorKind::InvalidArgument, "recomposition scales must be finite and nonnegative");
  }
}

// Target pixel from scaled intensities. Shared by recompose and the fused
// restain path so both produce bit-identical output.
class Recomposer {
 public:
  Recomposer(const StainBasis& target, const RecomposeScales& scales, double i0)
      : h_(target.hematoxylin()), e_(target.eosin()), r_(target.residual()), scales_(scales), i0_(i0) {
    check_scales(scales);
    check_i0(i0);
  }

  void render(double ih, double ie, double ir, std::span<std::uint8_t, 3> out) const noexcept {
    const double ch = scales_.hematoxylin * ih;
    const double ce = scales_.eosin * ie;
    const double cr = scales_.residual * ir;
    for (int k = 0; k < 3; ++k) {
      const double od = ch * h_[k] + ce * e_[k] + cr * r_[k];
      out[static_cast<std::size_t>(k)] = quantize(i0_ * std::exp(-od));
    }
  }

 private:
  Vec3 h_;
  Vec3 e_;
  Vec3 r_;
  RecomposeScales scales_;
  double i0_;
};

}  // namespace detail

inline ConcentrationMaps decompose(const RgbTile& tile, const StainBasis& basis, double i0 = kDefaultI0) {
  return StainUnmixer(basis, i0).decompose(tile);
}

// OD' = (sh*ih) s_h' + (se*ie) s_e' + (sr*ir) s_r', rendered back to 8-bit RGB.
inline RgbTile recompose(const ConcentrationMaps& conc, const StainBasis& target_basis,
                         const RecomposeScales& scales, double i0 = kDefaultI0) {
  const detail::Recomposer recomposer(target_basis, scales, i0);
  RgbTile out(conc.width, conc.height);
  for (std::size_t i = 0; i < conc.pixel_count(); ++i) {
    recomposer.render(conc.hematoxylin[i], conc.eosin[i], conc.residual[i], out.pixel(i));
  }
  return out;
}

// decompose followed by recompose without materializing the concentration
// maps. Output is bit-identical to the two-step path.
inline RgbTile restain(const RgbTile& tile, const StainUnmixer& source, const StainBasis& target_basis,
                       const RecomposeScales& scales) {
  const detail::Recomposer recomposer(target_basis, scales, source.i0());
  RgbTile out(tile.width(), tile.height());
  for (std::size_t i = 0; i < tile.pixel_count(); ++i) {
    const auto c = source.unmix(tile.pixel(i));
    recomposer.render(c[0], c[1], c[2], out.pixel(i));
  }
  return out;
}

}  // namespace stainbench
