#pragma once

// sRGB (D65, 2 degree observer) to CIE XYZ and CIELab.

#include <array>
#include <cmath>
#include <numbers>

namespace stainbench {

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;

  double chroma() const noexcept { return std::hypot(a, b); }

  // atan2(b*, a*) in degrees, mapped to [0, 360).
  double hue_degrees() const noexcept {
    double h = std::atan2(b, a) * 180.0 / std::numbers::pi;
    if (h < 0.0) {
      h += 360.0;
    }
    return h >= 360.0 ? h - 360.0 : h;
  }
};

// IEC 61966-2-1 transfer function; input and output in [0, 1].
inline double srgb_to_linear(double c) noexcept {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline std::array<double, 3> linear_srgb_to_xyz(double r, double g, double b) noexcept {
  return {0.412453 * r + 0.357580 * g + 0.180423 * b,
          0.212671 * r + 0.715160 * g + 0.072169 * b,
          0.019334 * r + 0.119193 * g + 0.950227 * b};
}

inline Lab xyz_to_lab(const std::array<double, 3>& xyz) noexcept {
  constexpr std::array<double, 3> white{0.95047, 1.0, 1.08883};
  constexpr double epsilon = 216.0 / 24389.0;
  constexpr double kappa = 24389.0 / 27.0;
  std::array<double, 3> f{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double t = xyz[i] / white[i];
    f[i] = t > epsilon ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

// Gamma-encoded sRGB components in [0, 1].
inline Lab srgb_to_lab(double r, double g, double b) noexcept {
  return xyz_to_lab(linear_srgb_to_xyz(srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)));
}

}  // namespace stainbench
