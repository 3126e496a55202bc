#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "markush/dataset.hpp"
#include "markush/image.hpp"

namespace markush {

/// Markush indicator glyphs, rendered procedurally from stroke lists.
enum class GlyphId {
  R_label,
  X_label,
  wavy_line_open,
  paren_n,
  arrow,
  halogen_Z,
};

std::vector<GlyphId> all_glyphs();
std::string to_string(GlyphId id);
GlyphId glyph_from_string(const std::string& name);

struct RenderedGlyph {
  GrayImage image;    // white canvas with 1-bit strokes
  Rect ink_bbox;      // tight bounds of the ink pixels
};

/// Deterministic raster of a glyph scaled to roughly `height` pixels tall
/// (before rotation), rotated about its center. No anti-aliasing.
RenderedGlyph render_glyph(GlyphId id, int height, double rotation);

struct SynthConfig {
  int n_images = 300;
  int min_w = 160, min_h = 240;
  int max_w = 1200, max_h = 1000;
  int min_indicator_scale = 5, max_indicator_scale = 25;  // glyph height in px
  double markush_fraction = 0.6;
  int min_indicators = 1, max_indicators = 15;
  std::vector<GlyphId> glyph_set = all_glyphs();
  std::uint64_t seed = 0;

  void validate() const;
};

SynthConfig synth_config_from_json_text(const std::string& text);
std::string synth_config_to_json_text(const SynthConfig& cfg);
SynthConfig load_synth_config(const std::filesystem::path& path);

struct SynthImage {
  AnnotatedImage meta;  // path left empty until written to disk
  GrayImage image;
};

struct SynthResult {
  std::vector<SynthImage> images;
  int skipped_placements = 0;  // indicator placements dropped after retries
};

/// In-memory corpus: white pages with random ring/bond/letter line art, plus
/// indicator glyphs with exact annotation boxes on Markush pages.
/// Deterministic per config; image i depends only on (seed xor i).
SynthResult generate_corpus_images(const SynthConfig& cfg);

/// Writes PGM images plus manifest.json into out_dir and returns the manifest
/// (paths relative to out_dir).
DatasetManifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                int* skipped_placements = nullptr);

}  // namespace markush
