#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "markush/image.hpp"
#include "markush/orb.hpp"
#include "markush/rng.hpp"
#include "markush/synth.hpp"
#include "test_util.hpp"

using namespace markush;

namespace {

BinaryDescriptor256 random_descriptor(Rng& rng) {
  BinaryDescriptor256 d;
  for (auto& w : d.words) w = rng.next_u64();
  return d;
}

BinaryDescriptor256 descriptor_with_bits(std::initializer_list<int> bits) {
  BinaryDescriptor256 d;
  for (int b : bits) d.set_bit(b);
  return d;
}

GrayImage rotate90(const GrayImage& img) {
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(img.height - 1 - y, x) = img.at(x, y);
  return out;
}

// Synthetic test card: a few glyphs at distinct positions and scales.
GrayImage glyph_card(std::uint64_t seed, int side = 160) {
  Rng rng(seed);
  GrayImage img(side, side, 255);
  const auto glyphs = all_glyphs();
  for (int k = 0; k < 5; ++k) {
    const GlyphId id = glyphs[static_cast<std::size_t>(rng.uniform_int(0, 5))];
    const RenderedGlyph g = render_glyph(id, rng.uniform_int(18, 40), 0.0);
    if (g.image.width + 40 >= side || g.image.height + 40 >= side) continue;
    const int x = rng.uniform_int(20, side - g.image.width - 20);
    const int y = rng.uniform_int(20, side - g.image.height - 20);
    for (int gy = 0; gy < g.image.height; ++gy)
      for (int gx = 0; gx < g.image.width; ++gx)
        img.at(x + gx, y + gy) = std::min(img.at(x + gx, y + gy), g.image.at(gx, gy));
  }
  return img;
}

}  // namespace

TEST_CASE("hamming distance") {
  const BinaryDescriptor256 zeros;
  BinaryDescriptor256 ones;
  for (auto& w : ones.words) w = ~0ULL;

  CHECK(hamming(zeros, zeros) == 0);
  CHECK(hamming(zeros, ones) == 256);
  CHECK(hamming(descriptor_with_bits({0, 100, 255}), zeros) == 3);
}

TEST_CASE("hamming is a metric") {
  Rng rng(1234);
  for (int it = 0; it < 2000; ++it) {
    const auto a = random_descriptor(rng);
    const auto b = random_descriptor(rng);
    const auto c = random_descriptor(rng);
    CHECK(hamming(a, b) == hamming(b, a));
    CHECK((hamming(a, b) == 0) == (a == b));
    CHECK(hamming(a, c) <= hamming(a, b) + hamming(b, c));
    CHECK(hamming(a, b) >= 0);
    CHECK(hamming(a, b) <= 256);
  }
}

TEST_CASE("uniform image has no keypoints") {
  const GrayImage img(128, 128, 255);
  OrbConfig cfg;
  CHECK(detect_keypoints(img, cfg).empty());
}

TEST_CASE("black square corners are detected") {
  GrayImage img(96, 96, 255);
  for (int y = 40; y < 43; ++y)
    for (int x = 40; x < 43; ++x) img.at(x, y) = 0;

  OrbConfig cfg;
  cfg.fast_threshold = 20;
  cfg.n_levels = 1;
  const auto kps = detect_keypoints(img, cfg);
  REQUIRE_FALSE(kps.empty());
  const int corners[4][2] = {{40, 40}, {42, 40}, {40, 42}, {42, 42}};
  for (const auto& c : corners) {
    bool near = false;
    for (const auto& kp : kps)
      near |= std::abs(kp.x - c[0]) <= 2 && std::abs(kp.y - c[1]) <= 2;
    CHECK(near);
  }
}

TEST_CASE("max_features caps and is a ranking prefix") {
  const GrayImage img = glyph_card(5, 200);
  OrbConfig big;
  big.max_features = 500;
  const auto all = detect_keypoints(img, big);
  CHECK(all.size() <= 500);
  REQUIRE(all.size() >= 20);

  OrbConfig small = big;
  small.max_features = 10;
  const auto few = detect_keypoints(img, small);
  REQUIRE(few.size() == 10);
  for (std::size_t i = 0; i < few.size(); ++i) {
    CHECK(few[i].x == all[i].x);
    CHECK(few[i].y == all[i].y);
    CHECK(few[i].response == all[i].response);
  }
}

TEST_CASE("descriptors are deterministic") {
  const GrayImage img = glyph_card(6);
  OrbConfig cfg;
  const OrbFeatures a = detect_and_describe(img, cfg);
  const OrbFeatures b = detect_and_describe(img, cfg);
  REQUIRE(a.descriptors.size() == b.descriptors.size());
  for (std::size_t i = 0; i < a.descriptors.size(); ++i) CHECK(a.descriptors[i] == b.descriptors[i]);
}

TEST_CASE("translation equivariance at the base level") {
  OrbConfig cfg;
  cfg.n_levels = 1;  // fractional pyramid resampling is not shift-invariant
  const GrayImage img = glyph_card(7, 140);
  const int dx = 9, dy = 6;
  // Shift content by embedding into a larger white canvas.
  GrayImage shifted(img.width + 30, img.height + 30, 255);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) shifted.at(x + dx, y + dy) = img.at(x, y);
  GrayImage base(img.width + 30, img.height + 30, 255);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) base.at(x, y) = img.at(x, y);

  const OrbFeatures fa = detect_and_describe(base, cfg);
  const OrbFeatures fb = detect_and_describe(shifted, cfg);
  REQUIRE(fa.keypoints.size() == fb.keypoints.size());
  REQUIRE_FALSE(fa.keypoints.empty());
  for (std::size_t i = 0; i < fa.keypoints.size(); ++i) {
    CHECK(fb.keypoints[i].x == fa.keypoints[i].x + dx);
    CHECK(fb.keypoints[i].y == fa.keypoints[i].y + dy);
    CHECK(fb.keypoints[i].angle == fa.keypoints[i].angle);
    CHECK(fb.descriptors[i] == fa.descriptors[i]);
  }
}

TEST_CASE("flat-region keypoint gives the all-zero descriptor") {
  const GrayImage img(128, 128, 200);
  std::vector<Keypoint> kps(1);
  kps[0].x = kps[0].level_x = 64;
  kps[0].y = kps[0].level_y = 64;
  kps[0].octave = 0;
  OrbConfig cfg;
  const auto descs = compute_descriptors(img, kps, cfg);
  REQUIRE(descs.size() == 1);
  CHECK(descs[0] == BinaryDescriptor256{});
}

TEST_CASE("angle two-pi wraps to the zero rotation bin") {
  const GrayImage img = glyph_card(8);
  OrbConfig cfg;
  auto kps = detect_keypoints(img, cfg);
  REQUIRE_FALSE(kps.empty());
  std::vector<Keypoint> at_zero{kps[0]};
  at_zero[0].angle = 0.0;
  std::vector<Keypoint> at_two_pi{kps[0]};
  at_two_pi[0].angle = 6.283185307179586;
  const auto d0 = compute_descriptors(img, at_zero, cfg);
  const auto d1 = compute_descriptors(img, at_two_pi, cfg);
  REQUIRE(d0.size() == 1);
  REQUIRE(d1.size() == 1);
  CHECK(d0[0] == d1[0]);
}

TEST_CASE("border keypoints are dropped, list stays aligned") {
  const GrayImage img = glyph_card(9);
  OrbConfig cfg;
  auto kps = detect_keypoints(img, cfg);
  REQUIRE(kps.size() >= 2);
  Keypoint close = kps[0];
  close.level_x = close.x = 3;  // inside the image, outside the border margin
  std::vector<Keypoint> mixed{kps[0], close, kps[1]};
  const auto descs = compute_descriptors(img, mixed, cfg);
  CHECK(mixed.size() == 2);
  CHECK(descs.size() == 2);
  CHECK(mixed[0].x == kps[0].x);
  CHECK(mixed[1].x == kps[1].x);
}

TEST_CASE("rotation robustness on a 90-degree copy") {
  // Steered descriptors should match across a quarter turn for most points.
  const GrayImage img = glyph_card(10, 180);
  const GrayImage rot = rotate90(img);
  OrbConfig cfg;
  cfg.max_features = 150;
  const OrbFeatures fa = detect_and_describe(img, cfg);
  const OrbFeatures fb = detect_and_describe(rot, cfg);
  REQUIRE(fa.descriptors.size() >= 20);
  REQUIRE(fb.descriptors.size() >= 20);

  const auto matches = match_ratio_test(fa.descriptors, fb.descriptors, 0.75);
  REQUIRE(matches.size() >= 10);
  int close = 0;
  for (const auto& m : matches) close += m.distance <= 64 ? 1 : 0;
  CHECK(static_cast<double>(close) >= 0.8 * static_cast<double>(matches.size()));
}

TEST_CASE("ratio test") {
  const BinaryDescriptor256 query;  // all zeros
  auto with_n_bits = [](int n, int offset) {
    BinaryDescriptor256 d;
    for (int i = 0; i < n; ++i) d.set_bit((offset + i) % 256);
    return d;
  };

  SUBCASE("kept when d1 is clearly better") {
    // d1 = 30, d2 = 50: 30 < 0.75 * 50.
    const auto matches =
        match_ratio_test({query}, {with_n_bits(30, 0), with_n_bits(50, 100)}, 0.75);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].template_index == 0);
    CHECK(matches[0].distance == 30);
  }
  SUBCASE("rejected when ambiguous") {
    // d1 = 45, d2 = 50: 45 >= 0.75 * 50.
    CHECK(match_ratio_test({query}, {with_n_bits(45, 0), with_n_bits(50, 100)}, 0.75).empty());
  }
  SUBCASE("self matching keeps everything at distance zero") {
    std::vector<BinaryDescriptor256> set;
    Rng rng(77);
    for (int i = 0; i < 12; ++i) set.push_back(random_descriptor(rng));
    const auto matches = match_ratio_test(set, set, 0.75);
    REQUIRE(matches.size() == set.size());
    for (const auto& m : matches) {
      CHECK(m.distance == 0);
      CHECK(m.query_index == m.template_index);
    }
  }
  SUBCASE("degenerate template list gives no matches") {
    CHECK(match_ratio_test({query}, {}, 0.75).empty());
    CHECK(match_ratio_test({query}, {with_n_bits(3, 0)}, 0.75).empty());
  }
  SUBCASE("matches sorted by ascending distance") {
    Rng rng(78);
    std::vector<BinaryDescriptor256> queries, templates;
    for (int i = 0; i < 30; ++i) queries.push_back(random_descriptor(rng));
    for (int i = 0; i < 30; ++i) templates.push_back(random_descriptor(rng));
    const auto matches = match_ratio_test(queries, templates, 0.9);
    for (std::size_t i = 1; i < matches.size(); ++i)
      CHECK(matches[i - 1].distance <= matches[i].distance);
  }
}

TEST_CASE("scale change starves the matcher") {
  // The same glyph at 5 px vs 25 px produces far fewer ratio-test survivors
  // than matching at equal scale; mean over repeated trials.
  OrbConfig cfg;
  cfg.fast_threshold = 10;
  long long same_scale_total = 0;
  long long cross_scale_total = 0;
  int trials = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const GlyphId id = all_glyphs()[static_cast<std::size_t>(trial % 6)];
    Rng rng(900 + static_cast<std::uint64_t>(trial));

    auto card_with = [&](int height) {
      const RenderedGlyph g = render_glyph(id, height, 0.0);
      GrayImage img(120, 120, 255);
      const int x = rng.uniform_int(45, 70 - std::min(25, g.image.width / 2));
      const int y = rng.uniform_int(45, 70 - std::min(25, g.image.height / 2));
      for (int gy = 0; gy < g.image.height && y + gy < img.height; ++gy)
        for (int gx = 0; gx < g.image.width && x + gx < img.width; ++gx)
          img.at(x + gx, y + gy) = std::min(img.at(x + gx, y + gy), g.image.at(gx, gy));
      return img;
    };

    const OrbFeatures tmpl_small = detect_and_describe(card_with(5), cfg);
    const OrbFeatures query_large = detect_and_describe(card_with(25), cfg);
    const OrbFeatures tmpl_large = detect_and_describe(card_with(25), cfg);
    ++trials;
    cross_scale_total +=
        static_cast<long long>(match_ratio_test(query_large.descriptors, tmpl_small.descriptors, 0.75).size());
    same_scale_total +=
        static_cast<long long>(match_ratio_test(query_large.descriptors, tmpl_large.descriptors, 0.75).size());
  }
  CHECK(trials >= 100);
  CHECK(cross_scale_total < same_scale_total);
}

TEST_CASE("descriptor dump round trip") {
  testutil::TempDir tmp;
  const GrayImage img = glyph_card(11);
  OrbConfig cfg;
  const OrbFeatures feats = detect_and_describe(img, cfg);
  REQUIRE_FALSE(feats.keypoints.empty());

  const auto file = tmp.path / "feats.orb";
  save_descriptors(feats, file);
  const OrbFeatures back = load_descriptors(file);
  REQUIRE(back.keypoints.size() == feats.keypoints.size());
  for (std::size_t i = 0; i < feats.keypoints.size(); ++i) {
    CHECK(back.keypoints[i].x == feats.keypoints[i].x);
    CHECK(back.keypoints[i].y == feats.keypoints[i].y);
    CHECK(back.keypoints[i].octave == feats.keypoints[i].octave);
    CHECK(back.keypoints[i].angle ==
          doctest::Approx(feats.keypoints[i].angle).epsilon(1e-6));
    CHECK(back.descriptors[i] == feats.descriptors[i]);
  }
}
