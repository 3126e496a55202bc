#include "markush/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace markush {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 1 || h < 1) throw std::invalid_argument("GrayImage dims must be >= 1");
}

std::uint8_t luma_from_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::floor(y + 0.5));
}

GrayImage pad_white(const GrayImage& img, int left, int top, int right, int bottom) {
  if (left < 0 || top < 0 || right < 0 || bottom < 0)
    throw std::invalid_argument("pad_white: pads must be >= 0");
  if (left == 0 && top == 0 && right == 0 && bottom == 0) return img;

  GrayImage out(img.width + left + right, img.height + top + bottom, 255);
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::size_t>(y) * img.width, img.width,
                out.pixels.begin() + static_cast<std::size_t>(y + top) * out.width + left);
  }
  return out;
}

GrayImage crop(const GrayImage& img, const Rect& rect, std::uint8_t fill) {
  if (rect.w < 1 || rect.h < 1) throw std::invalid_argument("crop: rect dims must be >= 1");

  GrayImage out(rect.w, rect.h, fill);
  const int sx0 = std::max(rect.x, 0);
  const int sy0 = std::max(rect.y, 0);
  const int sx1 = std::min(rect.x + rect.w, img.width);
  const int sy1 = std::min(rect.y + rect.h, img.height);
  for (int sy = sy0; sy < sy1; ++sy) {
    if (sx0 >= sx1) break;
    std::copy_n(img.pixels.begin() + static_cast<std::size_t>(sy) * img.width + sx0, sx1 - sx0,
                out.pixels.begin() +
                    static_cast<std::size_t>(sy - rect.y) * out.width + (sx0 - rect.x));
  }
  return out;
}

}  // namespace markush
