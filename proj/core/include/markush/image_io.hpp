#pragma once

#include <filesystem>

#include "markush/errors.hpp"
#include "markush/image.hpp"

namespace markush {

/// Load a raster by sniffing the magic bytes. Supported: binary PGM (P5,
/// maxval 255) and PNG (8-bit gray, gray+alpha, palette, RGB or RGBA; color
/// is reduced with the integer luma rule, alpha is ignored).
/// Throws IoError for unreadable files, FormatError for unsupported content.
GrayImage load_image(const std::filesystem::path& path);

GrayImage load_pgm(const std::filesystem::path& path);

/// Native intermediate format. Round-trips bit-exactly through load_pgm.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

GrayImage load_png(const std::filesystem::path& path);

}  // namespace markush
