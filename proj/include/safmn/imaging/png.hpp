#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/imaging/image.hpp"

namespace safmn {

namespace detail {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline ImageBuffer finish_decode(PngImage& p, const std::string& what) {
  if ((p.img.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
    throw UnsupportedFormatError(what + ": 16-bit PNG is not supported");
  }
  // Read as RGBA and drop alpha rather than compositing it onto a background.
  p.img.format = PNG_FORMAT_RGBA;
  const std::size_t w = p.img.width, h = p.img.height;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(p.img));
  if (png_image_finish_read(&p.img, nullptr, rgba.data(), 0, nullptr) == 0) {
    throw DecodeError(what + ": " + p.img.message);
  }
  ImageBuffer out(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    out.data[3 * i + 0] = rgba[4 * i + 0];
    out.data[3 * i + 1] = rgba[4 * i + 1];
    out.data[3 * i + 2] = rgba[4 * i + 2];
  }
  return out;
}

}  // namespace detail

/// 8-bit RGB, grayscale (replicated) or palette PNG. Alpha is discarded.
inline ImageBuffer decode_png(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw DecodeError(path.string() + ": no such file");
  detail::PngImage p;
  if (png_image_begin_read_from_file(&p.img, path.c_str()) == 0) {
    throw DecodeError(path.string() + ": " + p.img.message);
  }
  return detail::finish_decode(p, path.string());
}

inline ImageBuffer decode_png_memory(const std::vector<std::uint8_t>& bytes) {
  detail::PngImage p;
  if (png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()) == 0) {
    throw DecodeError(std::string("png: ") + p.img.message);
  }
  return detail::finish_decode(p, "png");
}

inline void encode_png(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.data.size() != 3 * img.width * img.height || img.width == 0 || img.height == 0) {
    throw DimensionError("encode_png: buffer does not hold " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + " RGB pixels");
  }
  detail::PngImage p;
  p.img.width = static_cast<png_uint_32>(img.width);
  p.img.height = static_cast<png_uint_32>(img.height);
  p.img.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&p.img, path.c_str(), 0, img.data.data(), 0, nullptr) == 0) {
    throw DataError("cannot write " + path.string() + ": " + p.img.message);
  }
}

}  // namespace safmn
