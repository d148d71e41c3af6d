#pragma once

// Grayscale PNG previews of spatial slices. Level sets render as a filled
// zero set with a one-cell linear ramp; densities map [0, 1] to black..white.
// Presentation only.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flof/grid.hpp"

namespace flof {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> gray;  // row-major, top row first
};

inline double fill_coverage(double phi) { return std::clamp(0.5 * (1.0 - phi), 0.0, 1.0); }

// 2D slices map axis 0 to x and axis 1 to y (up). 3D slices show the middle
// plane of the last axis.
inline Image rasterize(const ScalarField& slice, bool density = false) {
  const Extents& ext = slice.extents();
  if (ext.rank() < 2 || ext.rank() > 3) throw Error("rasterize: expected a 2D or 3D slice, got " + ext.str());
  Image img;
  img.width = ext[0];
  img.height = ext[1];
  img.gray.resize(static_cast<std::size_t>(img.width) * img.height);
  const std::size_t offset = ext.rank() == 3 ? static_cast<std::size_t>(ext[2] / 2) * ext.stride(2) : 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = slice[offset + x + static_cast<std::size_t>(y) * ext.stride(1)];
      const double c = density ? std::clamp(v, 0.0, 1.0) : fill_coverage(v);
      img.gray[static_cast<std::size_t>(img.height - 1 - y) * img.width + x] =
          static_cast<std::uint8_t>(std::lround(255.0 * c));
    }
  }
  return img;
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: cannot create info");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.gray.data() + static_cast<std::size_t>(y) * img.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::vector<std::uint8_t> slice_png(const ScalarField& slice, bool density = false) {
  return encode_png(rasterize(slice, density));
}

}  // namespace flof
