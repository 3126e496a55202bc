#include "markush/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "markush/errors.hpp"
#include "markush/image_io.hpp"
#include "markush/rng.hpp"

namespace markush {

using nlohmann::json;

std::vector<GlyphId> all_glyphs() {
  return {GlyphId::R_label, GlyphId::X_label, GlyphId::wavy_line_open,
          GlyphId::paren_n, GlyphId::arrow,   GlyphId::halogen_Z};
}

std::string to_string(GlyphId id) {
  switch (id) {
    case GlyphId::R_label: return "R_label";
    case GlyphId::X_label: return "X_label";
    case GlyphId::wavy_line_open: return "wavy_line_open";
    case GlyphId::paren_n: return "paren_n";
    case GlyphId::arrow: return "arrow";
    case GlyphId::halogen_Z: return "halogen_Z";
  }
  throw std::logic_error("bad GlyphId");
}

GlyphId glyph_from_string(const std::string& name) {
  for (GlyphId id : all_glyphs())
    if (to_string(id) == name) return id;
  throw FormatError("unknown glyph id: " + name);
}

namespace {

struct Pt {
  double x, y;
};

struct Stroke {
  Pt a, b;
};

// Stroke lists live in a unit box: y in [0,1] top-down, x in [0, aspect].
struct GlyphShape {
  double aspect;
  std::vector<Stroke> strokes;
};

GlyphShape letter_R() {
  return {0.75,
          {{{0.10, 0.00}, {0.10, 1.00}},
           {{0.10, 0.00}, {0.55, 0.00}},
           {{0.55, 0.00}, {0.70, 0.10}},
           {{0.70, 0.10}, {0.70, 0.40}},
           {{0.70, 0.40}, {0.55, 0.50}},
           {{0.55, 0.50}, {0.10, 0.50}},
           {{0.40, 0.50}, {0.72, 1.00}}}};
}

GlyphShape letter_X() {
  return {0.75, {{{0.05, 0.00}, {0.70, 1.00}}, {{0.70, 0.00}, {0.05, 1.00}}}};
}

GlyphShape letter_Z() {
  return {0.75,
          {{{0.05, 0.00}, {0.70, 0.00}},
           {{0.70, 0.00}, {0.05, 1.00}},
           {{0.05, 1.00}, {0.70, 1.00}}}};
}

GlyphShape wavy_line() {
  GlyphShape g{1.80, {}};
  // One-and-a-half sine periods, open at both ends.
  constexpr int segments = 14;
  Pt prev{0.0, 0.5};
  for (int i = 1; i <= segments; ++i) {
    const double t = static_cast<double>(i) / segments;
    Pt next{g.aspect * t, 0.5 - 0.42 * std::sin(3.0 * 3.14159265358979323846 * t)};
    g.strokes.push_back({prev, next});
    prev = next;
  }
  return g;
}

GlyphShape paren_n() {
  GlyphShape g{1.10, {}};
  auto arc = [&](double cx, double sign) {
    Pt pts[5] = {{cx + sign * 0.12, 0.00},
                 {cx + sign * 0.02, 0.22},
                 {cx, 0.45},
                 {cx + sign * 0.02, 0.68},
                 {cx + sign * 0.12, 0.90}};
    for (int i = 0; i < 4; ++i) g.strokes.push_back({pts[i], pts[i + 1]});
  };
  arc(0.10, +1.0);  // (
  arc(0.52, -1.0);  // )
  // subscript n
  g.strokes.push_back({{0.75, 0.70}, {0.75, 1.00}});
  g.strokes.push_back({{0.75, 0.78}, {0.90, 0.70}});
  g.strokes.push_back({{0.90, 0.70}, {1.00, 0.78}});
  g.strokes.push_back({{1.00, 0.78}, {1.00, 1.00}});
  return g;
}

GlyphShape arrow() {
  return {1.60,
          {{{0.00, 0.50}, {1.55, 0.50}},
           {{1.55, 0.50}, {1.25, 0.28}},
           {{1.55, 0.50}, {1.25, 0.72}}}};
}

GlyphShape glyph_shape(GlyphId id) {
  switch (id) {
    case GlyphId::R_label: return letter_R();
    case GlyphId::X_label: return letter_X();
    case GlyphId::wavy_line_open: return wavy_line();
    case GlyphId::paren_n: return paren_n();
    case GlyphId::arrow: return arrow();
    case GlyphId::halogen_Z: return letter_Z();
  }
  throw std::logic_error("bad GlyphId");
}

// Distractor letters share the indicator size range so shape, not scale,
// separates the classes.
GlyphShape letter_C() {
  return {0.75,
          {{{0.70, 0.10}, {0.45, 0.00}},
           {{0.45, 0.00}, {0.15, 0.12}},
           {{0.15, 0.12}, {0.05, 0.50}},
           {{0.05, 0.50}, {0.15, 0.88}},
           {{0.15, 0.88}, {0.45, 1.00}},
           {{0.45, 1.00}, {0.70, 0.90}}}};
}

GlyphShape letter_O() {
  return {0.80,
          {{{0.25, 0.00}, {0.55, 0.00}},
           {{0.55, 0.00}, {0.75, 0.25}},
           {{0.75, 0.25}, {0.75, 0.75}},
           {{0.75, 0.75}, {0.55, 1.00}},
           {{0.55, 1.00}, {0.25, 1.00}},
           {{0.25, 1.00}, {0.05, 0.75}},
           {{0.05, 0.75}, {0.05, 0.25}},
           {{0.05, 0.25}, {0.25, 0.00}}}};
}

GlyphShape letter_N() {
  return {0.75,
          {{{0.08, 1.00}, {0.08, 0.00}},
           {{0.08, 0.00}, {0.68, 1.00}},
           {{0.68, 1.00}, {0.68, 0.00}}}};
}

GlyphShape letter_H() {
  return {0.75,
          {{{0.08, 0.00}, {0.08, 1.00}},
           {{0.68, 0.00}, {0.68, 1.00}},
           {{0.08, 0.50}, {0.68, 0.50}}}};
}

void draw_thick_point(GrayImage& img, int x, int y, int thickness) {
  const int r0 = -(thickness / 2);
  const int r1 = (thickness - 1) / 2;
  for (int dy = r0; dy <= r1; ++dy)
    for (int dx = r0; dx <= r1; ++dx) {
      const int px = x + dx, py = y + dy;
      if (px >= 0 && px < img.width && py >= 0 && py < img.height) img.at(px, py) = 0;
    }
}

void draw_line(GrayImage& img, int x0, int y0, int x1, int y1, int thickness) {
  // Bresenham.
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    draw_thick_point(img, x0, y0, thickness);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

Rect ink_bbox_of(const GrayImage& img) {
  int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y) == 0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return Rect{0, 0, 0, 0};
  return Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

GrayImage render_shape(const GlyphShape& shape, int height, double rotation, int thickness) {
  const double scale = height - 1;
  const double cx = shape.aspect / 2.0, cy = 0.5;
  const double c = std::cos(rotation), s = std::sin(rotation);

  std::vector<std::pair<Pt, Pt>> segs;
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  auto transform = [&](const Pt& p) {
    const double ux = p.x - cx, uy = p.y - cy;
    Pt out{(c * ux - s * uy) * scale, (s * ux + c * uy) * scale};
    min_x = std::min(min_x, out.x);
    min_y = std::min(min_y, out.y);
    max_x = std::max(max_x, out.x);
    max_y = std::max(max_y, out.y);
    return out;
  };
  for (const auto& st : shape.strokes) segs.emplace_back(transform(st.a), transform(st.b));

  const int margin = thickness + 1;
  const int w = static_cast<int>(std::ceil(max_x - min_x)) + 2 * margin + 1;
  const int h = static_cast<int>(std::ceil(max_y - min_y)) + 2 * margin + 1;
  GrayImage img(w, h, 255);
  for (const auto& [a, b] : segs) {
    draw_line(img, static_cast<int>(std::lround(a.x - min_x)) + margin,
              static_cast<int>(std::lround(a.y - min_y)) + margin,
              static_cast<int>(std::lround(b.x - min_x)) + margin,
              static_cast<int>(std::lround(b.y - min_y)) + margin, thickness);
  }
  return img;
}

int thickness_for(int height) { return std::max(1, static_cast<int>(std::lround(height / 12.0))); }

RenderedGlyph render_trimmed(const GlyphShape& shape, int height, double rotation) {
  GrayImage raster = render_shape(shape, height, rotation, thickness_for(height));
  const Rect bbox = ink_bbox_of(raster);
  RenderedGlyph out;
  out.image = crop(raster, bbox, 255);
  out.ink_bbox = Rect{0, 0, bbox.w, bbox.h};
  return out;
}

}  // namespace

RenderedGlyph render_glyph(GlyphId id, int height, double rotation) {
  if (height < 3) throw std::invalid_argument("render_glyph: height must be >= 3");
  return render_trimmed(glyph_shape(id), height, rotation);
}

void SynthConfig::validate() const {
  if (n_images < 1) throw std::invalid_argument("synth: n_images must be >= 1");
  if (min_w < 8 || min_h < 8 || max_w < min_w || max_h < min_h)
    throw std::invalid_argument("synth: bad size range");
  if (min_indicator_scale < 3 || max_indicator_scale < min_indicator_scale)
    throw std::invalid_argument("synth: bad indicator scale range");
  if (!(markush_fraction >= 0.0 && markush_fraction <= 1.0))
    throw std::invalid_argument("synth: markush_fraction must be in [0, 1]");
  if (min_indicators < 1 || max_indicators < min_indicators)
    throw std::invalid_argument("synth: bad indicators-per-image range");
  if (glyph_set.empty()) throw std::invalid_argument("synth: empty glyph set");
}

SynthConfig synth_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("synth config: not valid JSON: ") + e.what());
  }
  SynthConfig cfg;
  if (doc.contains("n_images")) cfg.n_images = doc["n_images"].get<int>();
  if (doc.contains("size_range")) {
    const auto& r = doc["size_range"];
    cfg.min_w = r.at(0).get<int>();
    cfg.min_h = r.at(1).get<int>();
    cfg.max_w = r.at(2).get<int>();
    cfg.max_h = r.at(3).get<int>();
  }
  if (doc.contains("indicator_scale_range")) {
    cfg.min_indicator_scale = doc["indicator_scale_range"].at(0).get<int>();
    cfg.max_indicator_scale = doc["indicator_scale_range"].at(1).get<int>();
  }
  if (doc.contains("markush_fraction")) cfg.markush_fraction = doc["markush_fraction"].get<double>();
  if (doc.contains("indicators_per_image")) {
    cfg.min_indicators = doc["indicators_per_image"].at(0).get<int>();
    cfg.max_indicators = doc["indicators_per_image"].at(1).get<int>();
  }
  if (doc.contains("glyph_set")) {
    cfg.glyph_set.clear();
    for (const auto& name : doc["glyph_set"]) cfg.glyph_set.push_back(glyph_from_string(name));
  }
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

std::string synth_config_to_json_text(const SynthConfig& cfg) {
  json doc;
  doc["n_images"] = cfg.n_images;
  doc["size_range"] = {cfg.min_w, cfg.min_h, cfg.max_w, cfg.max_h};
  doc["indicator_scale_range"] = {cfg.min_indicator_scale, cfg.max_indicator_scale};
  doc["markush_fraction"] = cfg.markush_fraction;
  doc["indicators_per_image"] = {cfg.min_indicators, cfg.max_indicators};
  auto names = json::array();
  for (GlyphId id : cfg.glyph_set) names.push_back(to_string(id));
  doc["glyph_set"] = std::move(names);
  doc["seed"] = cfg.seed;
  return doc.dump(2) + "\n";
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synth config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return synth_config_from_json_text(text);
}

namespace {

void stamp(GrayImage& page, const GrayImage& glyph, int x, int y) {
  for (int gy = 0; gy < glyph.height; ++gy)
    for (int gx = 0; gx < glyph.width; ++gx) {
      const int px = x + gx, py = y + gy;
      if (px >= 0 && px < page.width && py >= 0 && py < page.height)
        page.at(px, py) = std::min(page.at(px, py), glyph.at(gx, gy));
    }
}

void draw_skeleton(GrayImage& page, Rng& rng) {
  const long long area = static_cast<long long>(page.width) * page.height;

  // Hexagon rings with occasional inner double-bond strokes.
  const int n_hex = std::clamp<int>(static_cast<int>(area / 60000) + 1, 1, 8);
  for (int i = 0; i < n_hex; ++i) {
    const int max_r = std::max(8, std::min(page.width, page.height) / 4);
    const int r = rng.uniform_int(8, std::min(48, max_r));
    const int cx = rng.uniform_int(r, std::max(r, page.width - 1 - r));
    const int cy = rng.uniform_int(r, std::max(r, page.height - 1 - r));
    const double phase = rng.uniform(0.0, 6.283185307179586);
    int vx[6], vy[6];
    for (int k = 0; k < 6; ++k) {
      const double ang = phase + k * 6.283185307179586 / 6.0;
      vx[k] = cx + static_cast<int>(std::lround(r * std::cos(ang)));
      vy[k] = cy + static_cast<int>(std::lround(r * std::sin(ang)));
    }
    for (int k = 0; k < 6; ++k)
      draw_line(page, vx[k], vy[k], vx[(k + 1) % 6], vy[(k + 1) % 6], 1);
    if (rng.bernoulli(0.5)) {
      const int k = rng.uniform_int(0, 5);
      const int k2 = (k + 1) % 6;
      // Inner parallel stroke toward the center.
      auto shrink = [&](int v, int cvx) { return v + (cvx - v) / 5; };
      draw_line(page, shrink(vx[k], cx), shrink(vy[k], cy), shrink(vx[k2], cx),
                shrink(vy[k2], cy), 1);
    }
  }

  // Free-floating bond lines.
  const int n_lines = std::clamp<int>(static_cast<int>(area / 80000) + 1, 1, 6);
  for (int i = 0; i < n_lines; ++i) {
    const int x0 = rng.uniform_int(0, page.width - 1);
    const int y0 = rng.uniform_int(0, page.height - 1);
    const double ang = rng.uniform(0.0, 6.283185307179586);
    const int len = rng.uniform_int(20, 80);
    const int x1 = std::clamp(x0 + static_cast<int>(std::lround(len * std::cos(ang))), 0,
                              page.width - 1);
    const int y1 = std::clamp(y0 + static_cast<int>(std::lround(len * std::sin(ang))), 0,
                              page.height - 1);
    draw_line(page, x0, y0, x1, y1, 1);
  }
}

void draw_distractor_letters(GrayImage& page, Rng& rng, int min_scale, int max_scale) {
  const long long area = static_cast<long long>(page.width) * page.height;
  const int n_letters = std::clamp<int>(static_cast<int>(area / 50000) + 2, 2, 12);
  const GlyphShape shapes[4] = {letter_C(), letter_O(), letter_N(), letter_H()};
  for (int i = 0; i < n_letters; ++i) {
    const int which = rng.uniform_int(0, 3);
    const int h = rng.uniform_int(min_scale, max_scale);
    const RenderedGlyph glyph = render_trimmed(shapes[which], std::max(3, h), 0.0);
    if (glyph.image.width >= page.width || glyph.image.height >= page.height) continue;
    const int x = rng.uniform_int(0, page.width - glyph.image.width);
    const int y = rng.uniform_int(0, page.height - glyph.image.height);
    stamp(page, glyph.image, x, y);
  }
}

}  // namespace

SynthResult generate_corpus_images(const SynthConfig& cfg) {
  cfg.validate();

  // Deterministic label assignment: round(n * fraction) true images.
  const int n_true =
      static_cast<int>(std::lround(cfg.markush_fraction * static_cast<double>(cfg.n_images)));
  std::vector<char> wants_markush(static_cast<std::size_t>(cfg.n_images), 0);
  std::fill(wants_markush.begin(), wants_markush.begin() + n_true, 1);
  Rng label_rng(cfg.seed ^ 0x9F0DULL);
  label_rng.shuffle(wants_markush);

  SynthResult result;
  int id_width = 1;
  for (int v = cfg.n_images - 1; v >= 10; v /= 10) ++id_width;

  for (int i = 0; i < cfg.n_images; ++i) {
    Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(i));

    SynthImage si;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%0*d", id_width, i);
    si.meta.image_id = buf;

    const int w = rng.uniform_int(cfg.min_w, cfg.max_w);
    const int h = rng.uniform_int(cfg.min_h, cfg.max_h);
    si.image = GrayImage(w, h, 255);

    draw_skeleton(si.image, rng);
    draw_distractor_letters(si.image, rng, cfg.min_indicator_scale, cfg.max_indicator_scale);

    if (wants_markush[static_cast<std::size_t>(i)]) {
      const int k = rng.uniform_int(cfg.min_indicators, cfg.max_indicators);
      for (int g = 0; g < k; ++g) {
        const GlyphId id =
            cfg.glyph_set[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cfg.glyph_set.size()) - 1))];
        bool placed = false;
        for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
          const int scale = rng.uniform_int(cfg.min_indicator_scale, cfg.max_indicator_scale);
          const RenderedGlyph glyph = render_glyph(id, std::max(3, scale), 0.0);
          if (glyph.image.width >= w || glyph.image.height >= h) continue;
          const int x = rng.uniform_int(0, w - glyph.image.width);
          const int y = rng.uniform_int(0, h - glyph.image.height);
          stamp(si.image, glyph.image, x, y);
          si.meta.annotations.push_back(AnnotationBox{x + glyph.ink_bbox.x, y + glyph.ink_bbox.y,
                                                      glyph.ink_bbox.w, glyph.ink_bbox.h});
          placed = true;
        }
        if (!placed) ++result.skipped_placements;
      }
    }
    si.meta.label = !si.meta.annotations.empty();
    result.images.push_back(std::move(si));
  }
  return result;
}

DatasetManifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                int* skipped_placements) {
  SynthResult result = generate_corpus_images(cfg);
  if (skipped_placements) *skipped_placements = result.skipped_placements;

  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  for (auto& si : result.images) {
    const std::string filename = si.meta.image_id + ".pgm";
    save_pgm(si.image, out_dir / filename);
    si.meta.path = filename;
    manifest.entries.push_back(si.meta);
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace markush
