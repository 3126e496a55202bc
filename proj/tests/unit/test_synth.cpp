#include <doctest.h>

#include <stdexcept>

#include "markush/synth.hpp"
#include "test_util.hpp"

using namespace markush;

TEST_CASE("render_glyph") {
  SUBCASE("wavy line at height 10 has plausible ink bounds") {
    const RenderedGlyph g = render_glyph(GlyphId::wavy_line_open, 10, 0.0);
    CHECK(g.ink_bbox.w > 0);
    CHECK(g.ink_bbox.h >= 8);
    CHECK(g.ink_bbox.h <= 10);
    bool has_ink = false;
    for (auto p : g.image.pixels) has_ink |= p == 0;
    CHECK(has_ink);
  }
  SUBCASE("deterministic raster") {
    const RenderedGlyph a = render_glyph(GlyphId::R_label, 17, 0.35);
    const RenderedGlyph b = render_glyph(GlyphId::R_label, 17, 0.35);
    CHECK(a.image == b.image);
    CHECK(a.ink_bbox == b.ink_bbox);
  }
  SUBCASE("minimal height still inks") {
    for (GlyphId id : all_glyphs()) {
      const RenderedGlyph g = render_glyph(id, 3, 0.0);
      int ink = 0;
      for (auto p : g.image.pixels) ink += p == 0 ? 1 : 0;
      CHECK(ink >= 1);
    }
  }
  SUBCASE("height below 3 rejected") {
    CHECK_THROWS_AS(render_glyph(GlyphId::arrow, 2, 0.0), std::invalid_argument);
  }
}

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_images = 40;
  cfg.min_w = 120;
  cfg.min_h = 120;
  cfg.max_w = 400;
  cfg.max_h = 360;
  cfg.min_indicators = 1;
  cfg.max_indicators = 6;
  cfg.seed = 2024;
  return cfg;
}

}  // namespace

TEST_CASE("generate_corpus_images") {
  SUBCASE("fraction zero means no annotations anywhere") {
    SynthConfig cfg = small_config();
    cfg.markush_fraction = 0.0;
    const SynthResult r = generate_corpus_images(cfg);
    for (const auto& si : r.images) {
      CHECK_FALSE(si.meta.label);
      CHECK(si.meta.annotations.empty());
    }
  }

  SUBCASE("true-image count tracks the fraction") {
    SynthConfig cfg = small_config();
    cfg.n_images = 100;
    cfg.markush_fraction = 0.6;
    const SynthResult r = generate_corpus_images(cfg);
    int n_true = 0;
    for (const auto& si : r.images) n_true += si.meta.label ? 1 : 0;
    CHECK(n_true >= 58);
    CHECK(n_true <= 62);
  }

  SUBCASE("label always equals annotation presence") {
    const SynthResult r = generate_corpus_images(small_config());
    for (const auto& si : r.images) CHECK(si.meta.label == !si.meta.annotations.empty());
  }

  SUBCASE("annotation boxes tightly bound ink and stay in bounds") {
    const SynthResult r = generate_corpus_images(small_config());
    int boxes = 0;
    for (const auto& si : r.images) {
      for (const auto& a : si.meta.annotations) {
        ++boxes;
        REQUIRE(a.x >= 0);
        REQUIRE(a.y >= 0);
        REQUIRE(a.x + a.w <= si.image.width);
        REQUIRE(a.y + a.h <= si.image.height);
        // The glyph's own ink touches every edge of its box.
        bool top = false, bottom = false, left = false, right = false;
        for (int x = a.x; x < a.x + a.w; ++x) {
          top |= si.image.at(x, a.y) == 0;
          bottom |= si.image.at(x, a.y + a.h - 1) == 0;
        }
        for (int y = a.y; y < a.y + a.h; ++y) {
          left |= si.image.at(a.x, y) == 0;
          right |= si.image.at(a.x + a.w - 1, y) == 0;
        }
        CHECK(top);
        CHECK(bottom);
        CHECK(left);
        CHECK(right);
      }
    }
    CHECK(boxes > 0);
  }

  SUBCASE("seeded determinism is byte-exact") {
    const SynthResult a = generate_corpus_images(small_config());
    const SynthResult b = generate_corpus_images(small_config());
    REQUIRE(a.images.size() == b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i) {
      CHECK(a.images[i].image == b.images[i].image);
      CHECK(a.images[i].meta.annotations == b.images[i].meta.annotations);
    }
  }

  SUBCASE("mean ROI ratio stays below 2%") {
    SynthConfig cfg;  // paper-like defaults
    cfg.n_images = 60;
    cfg.seed = 7;
    const SynthResult r = generate_corpus_images(cfg);
    double ratio_sum = 0.0;
    for (const auto& si : r.images) {
      long long ann_area = 0;
      for (const auto& a : si.meta.annotations) ann_area += a.area();
      ratio_sum += static_cast<double>(ann_area) /
                   (static_cast<double>(si.image.width) * si.image.height);
    }
    CHECK(ratio_sum / static_cast<double>(r.images.size()) < 0.02);
  }
}

TEST_CASE("generate_corpus writes a loadable dataset") {
  testutil::TempDir tmp;
  SynthConfig cfg = small_config();
  cfg.n_images = 8;
  const DatasetManifest manifest = generate_corpus(cfg, tmp.path);
  CHECK(manifest.entries.size() == 8);
  CHECK(std::filesystem::exists(tmp.path / "manifest.json"));

  const DatasetManifest loaded = load_manifest(tmp.path / "manifest.json");
  CHECK(loaded.entries.size() == 8);
  const LoadedDataset ds = load_dataset(loaded, tmp.path);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(ds.images[i].width >= cfg.min_w);
    CHECK(ds.images[i].height >= cfg.min_h);
  }
}

TEST_CASE("synth config json round trip") {
  SynthConfig cfg = small_config();
  cfg.glyph_set = {GlyphId::arrow, GlyphId::wavy_line_open};
  const SynthConfig back = synth_config_from_json_text(synth_config_to_json_text(cfg));
  CHECK(back.n_images == cfg.n_images);
  CHECK(back.min_w == cfg.min_w);
  CHECK(back.max_h == cfg.max_h);
  CHECK(back.glyph_set == cfg.glyph_set);
  CHECK(back.seed == cfg.seed);
}
