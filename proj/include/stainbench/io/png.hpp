#pragma once

// 8-bit RGB PNG tiles via libpng's simplified API.

#include <png.h>

#include <filesystem>
#include <string>
#include <system_error>
#include <vector>

#include "stainbench/error.hpp"
#include "stainbench/tile.hpp"

namespace stainbench::io {

// Any PNG libpng can decode; alpha is composited onto white, gray expanded.
inline RgbTile read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoError, "cannot read PNG '" + path.string() + "': " + message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  const png_color white{255, 255, 255};
  if (png_image_finish_read(&image, &white, data.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoError, "cannot decode PNG '" + path.string() + "': " + message);
  }
  return RgbTile(image.width, image.height, std::move(data));
}

// Creates parent directories as needed. Output bytes depend only on pixels.
inline void write_png(const std::filesystem::path& path, const RgbTile& tile) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec && !std::filesystem::is_directory(path.parent_path())) {
      throw Error(ErrorKind::IoError, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(tile.width());
  image.height = static_cast<png_uint_32>(tile.height());
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.c_str(), 0, tile.data().data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::IoError, "cannot write PNG '" + path.string() + "': " + message);
  }
}

// File-system tile store for simulate_batch.
struct PngTileStore {
  RgbTile load(const std::filesystem::path& path) const { return read_png(path); }
  void save(const std::filesystem::path& path, const RgbTile& tile) const { write_png(path, tile); }
};

}  // namespace stainbench::io
