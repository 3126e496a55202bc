#pragma once

#include <cstdint>
#include <vector>

namespace markush {

/// Axis-aligned pixel rectangle. May extend outside an image; crop() fills
/// the uncovered part.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool operator==(const Rect&) const = default;
};

/// 8-bit single-channel raster, row-major. 0 is black ink, 255 is white
/// background.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// Integer luma with round-half-up: round(0.299 R + 0.587 G + 0.114 B).
std::uint8_t luma_from_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Grow the canvas by the given non-negative pads, new pixels all white.
GrayImage pad_white(const GrayImage& img, int left, int top, int right, int bottom);

/// Copy `rect` out of `img`; parts of the rect outside the image are filled
/// with `fill`. Throws std::invalid_argument for non-positive rect dims.
GrayImage crop(const GrayImage& img, const Rect& rect, std::uint8_t fill);

}  // namespace markush
