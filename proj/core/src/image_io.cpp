#include "markush/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

namespace markush {

namespace {

// Skips PGM whitespace and '#' comment lines.
void skip_pgm_separators(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

int read_pgm_int(std::istream& in) {
  skip_pgm_separators(in);
  int value = 0;
  if (!(in >> value)) throw FormatError("pgm: malformed header");
  return value;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') throw FormatError("pgm: expected P5 magic");

  const int w = read_pgm_int(in);
  const int h = read_pgm_int(in);
  const int maxval = read_pgm_int(in);
  if (w < 1 || h < 1) throw FormatError("pgm: bad dimensions");
  if (maxval != 255) throw FormatError("pgm: only maxval 255 supported");
  in.get();  // single separator byte before the raster

  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw FormatError("pgm: truncated pixel data");
  return img;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("short write to " + path.string());
}

GrayImage load_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw FormatError("png: bad signature in " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: out of memory");
  }

  std::vector<std::uint8_t> rgb;
  std::vector<png_bytep> rows;
  int width = 0;
  int height = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: decode error in " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte bit_depth = png_get_bit_depth(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: 16-bit depth not supported");
  }

  // Normalize every supported layout to tightly packed RGB8; the luma rule
  // maps gray (equal channels) back to itself exactly.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  if (width < 1 || height < 1 || png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: unsupported layout in " + path.string());
  }

  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] = rgb.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  GrayImage img(width, height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = luma_from_rgb(rgb[i * 3], rgb[i * 3 + 1], rgb[i * 3 + 2]);
  return img;
}

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path.string());
  unsigned char magic[8] = {0};
  probe.read(reinterpret_cast<char*>(magic), 8);
  probe.close();

  if (magic[0] == 'P' && magic[1] == '5') return load_pgm(path);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (std::memcmp(magic, png_sig, 8) == 0) return load_png(path);
  throw FormatError("unsupported image format: " + path.string());
}

}  // namespace markush
