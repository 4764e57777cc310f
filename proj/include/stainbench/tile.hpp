#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stainbench/error.hpp"

namespace stainbench {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// 8-bit RGB tile, row-major, channel-interleaved.
class RgbTile {
 public:
  RgbTile(std::size_t width, std::size_t height, std::uint8_t fill = 255)
      : RgbTile(width, height, std::vector<std::uint8_t>(width * height * 3, fill)) {}

  RgbTile(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width_ == 0 || height_ == 0) {
      throw Error(ErrorKind::InvalidArgument, "tile dimensions must be positive");
    }
    if (pixels_.size() != width_ * height_ * 3) {
      throw Error(ErrorKind::InvalidArgument,
                  "pixel buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                      std::to_string(width_ * height_ * 3));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }

  std::span<const std::uint8_t> data() const noexcept { return pixels_; }
  std::span<std::uint8_t> data() noexcept { return pixels_; }

  std::span<const std::uint8_t, 3> pixel(std::size_t index) const noexcept {
    return std::span<const std::uint8_t, 3>(pixels_.data() + 3 * index, 3);
  }
  std::span<std::uint8_t, 3> pixel(std::size_t index) noexcept {
    return std::span<std::uint8_t, 3>(pixels_.data() + 3 * index, 3);
  }
  std::span<std::uint8_t, 3> pixel(std::size_t x, std::size_t y) noexcept { return pixel(y * width_ + x); }

  friend bool operator==(const RgbTile&, const RgbTile&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> pixels_;
};

// Natural-log optical densities, same layout as RgbTile.
class OdTile {
 public:
  OdTile(std::size_t width, std::size_t height)
      : width_(width), height_(height), od_(width * height * 3, 0.0) {
    if (width_ == 0 || height_ == 0) {
      throw Error(ErrorKind::InvalidArgument, "tile dimensions must be positive");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }

  std::span<const double> data() const noexcept { return od_; }
  std::span<double> data() noexcept { return od_; }

  Vec3 pixel(std::size_t index) const noexcept {
    return {od_[3 * index], od_[3 * index + 1], od_[3 * index + 2]};
  }
  void set_pixel(std::size_t index, const Vec3& od) noexcept {
    od_[3 * index] = od[0];
    od_[3 * index + 1] = od[1];
    od_[3 * index + 2] = od[2];
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> od_;
};

// Per-pixel stain intensities along hematoxylin, eosin and residual.
struct ConcentrationMaps {
  ConcentrationMaps(std::size_t w, std::size_t h)
      : width(w), height(h), hematoxylin(w * h, 0.0), eosin(w * h, 0.0), residual(w * h, 0.0) {}

  std::size_t width;
  std::size_t height;
  std::vector<double> hematoxylin;
  std::vector<double> eosin;
  std::vector<double> residual;

  std::size_t pixel_count() const noexcept { return width * height; }
};

}  // namespace stainbench
