#include "markush/orb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "markush/errors.hpp"
#include "orb_pattern.hpp"

namespace markush {

void OrbConfig::validate() const {
  if (max_features < 1) throw std::invalid_argument("orb: max_features must be >= 1");
  if (fast_threshold < 1) throw std::invalid_argument("orb: fast_threshold must be >= 1");
  if (n_levels < 1) throw std::invalid_argument("orb: n_levels must be >= 1");
  if (!(scale_factor > 1.0)) throw std::invalid_argument("orb: scale_factor must be > 1");
  if (!(match_ratio > 0.0 && match_ratio < 1.0))
    throw std::invalid_argument("orb: match_ratio must be in (0, 1)");
}

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// ---------------------------------------------------------------- pyramid

// 1D fractional box average from `src_len` cells to `dst_len` cells.
void resample_axis(const double* src, int src_len, int src_stride, double* dst, int dst_len,
                   int dst_stride) {
  const double ratio = static_cast<double>(src_len) / dst_len;
  for (int i = 0; i < dst_len; ++i) {
    const double lo = i * ratio;
    const double hi = (i + 1) * ratio;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(static_cast<int>(std::ceil(hi)), src_len) - 1;
    double acc = 0.0;
    for (int s = first; s <= last; ++s) {
      const double cover = std::min(hi, static_cast<double>(s + 1)) -
                           std::max(lo, static_cast<double>(s));
      if (cover > 0.0) acc += cover * src[s * src_stride];
    }
    dst[i * dst_stride] = acc / ratio;
  }
}

GrayImage resample_box(const GrayImage& img, int new_w, int new_h) {
  std::vector<double> src(img.pixels.begin(), img.pixels.end());
  std::vector<double> mid(static_cast<std::size_t>(new_w) * img.height);
  for (int y = 0; y < img.height; ++y)
    resample_axis(src.data() + static_cast<std::size_t>(y) * img.width, img.width, 1,
                  mid.data() + static_cast<std::size_t>(y) * new_w, new_w, 1);
  std::vector<double> out(static_cast<std::size_t>(new_w) * new_h);
  for (int x = 0; x < new_w; ++x)
    resample_axis(mid.data() + x, img.height, new_w, out.data() + x, new_h, new_w);

  GrayImage result(new_w, new_h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = std::floor(out[i] + 0.5);
    result.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return result;
}

// ---------------------------------------------------------------- FAST-9

constexpr int kCircle[16][2] = {{0, -3}, {1, -3},  {2, -2},  {3, -1},  {3, 0},   {3, 1},
                                {2, 2},  {1, 3},   {0, 3},   {-1, 3},  {-2, 2},  {-3, 1},
                                {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// has_run9[m] is true when the 16-bit circular mask m contains 9 contiguous
// set bits.
const std::vector<bool>& run9_table() {
  static const std::vector<bool> table = [] {
    std::vector<bool> t(1 << 16, false);
    for (std::uint32_t m = 0; m < (1u << 16); ++m) {
      const std::uint32_t ext = m | (m << 16);
      for (int s = 0; s < 16; ++s) {
        if (((ext >> s) & 0x1FFu) == 0x1FFu) {
          t[m] = true;
          break;
        }
      }
    }
    return t;
  }();
  return table;
}

bool fast9_corner(const GrayImage& img, int x, int y, int threshold) {
  const int c = img.at(x, y);
  const int hi = c + threshold;
  const int lo = c - threshold;
  std::uint32_t bright = 0, dark = 0;
  for (int k = 0; k < 16; ++k) {
    const int v = img.at(x + kCircle[k][0], y + kCircle[k][1]);
    if (v > hi) bright |= 1u << k;
    if (v < lo) dark |= 1u << k;
  }
  const auto& runs = run9_table();
  return runs[bright] || runs[dark];
}

// ---------------------------------------------------------------- Harris

double harris_response(const GrayImage& img, int x, int y) {
  // Sobel gradients over a 7x7 block, k = 0.04.
  double a = 0.0, b = 0.0, c = 0.0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      const int px = x + dx, py = y + dy;
      const auto p = [&](int ox, int oy) {
        return static_cast<double>(img.at(px + ox, py + oy));
      };
      const double ix = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) -
                        (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
      const double iy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) -
                        (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
      a += ix * ix;
      b += iy * iy;
      c += ix * iy;
    }
  }
  return (a * b - c * c) - 0.04 * (a + b) * (a + b);
}

// ------------------------------------------------------------ orientation

constexpr int kCentroidRadius = 15;

// Circular disc row extents, index v + kCentroidRadius.
const std::array<int, 2 * kCentroidRadius + 1>& centroid_umax() {
  static const auto table = [] {
    std::array<int, 2 * kCentroidRadius + 1> t{};
    for (int v = -kCentroidRadius; v <= kCentroidRadius; ++v)
      t[static_cast<std::size_t>(v + kCentroidRadius)] =
          static_cast<int>(std::floor(std::sqrt(static_cast<double>(kCentroidRadius * kCentroidRadius - v * v))));
    return t;
  }();
  return table;
}

double intensity_centroid_angle(const GrayImage& img, int x, int y) {
  const auto& umax = centroid_umax();
  long long m10 = 0, m01 = 0;
  for (int v = -kCentroidRadius; v <= kCentroidRadius; ++v) {
    const int u_lim = umax[static_cast<std::size_t>(v + kCentroidRadius)];
    for (int u = -u_lim; u <= u_lim; ++u) {
      const long long intensity = img.at(x + u, y + v);
      m10 += u * intensity;
      m01 += v * intensity;
    }
  }
  double angle = std::atan2(static_cast<double>(m01), static_cast<double>(m10));
  if (angle < 0.0) angle += kTwoPi;
  if (angle >= kTwoPi) angle = 0.0;
  return angle;
}

// ---------------------------------------------------------------- detect

struct LevelDetection {
  std::vector<Keypoint> keypoints;
};

std::vector<Keypoint> detect_on_pyramid(const std::vector<GrayImage>& pyramid,
                                        const OrbConfig& cfg) {
  std::vector<Keypoint> all;
  for (int level = 0; level < static_cast<int>(pyramid.size()); ++level) {
    const GrayImage& img = pyramid[static_cast<std::size_t>(level)];
    const int border = kPatchRadius;
    if (img.width <= 2 * border || img.height <= 2 * border) continue;

    // FAST-9 candidates with their Harris responses.
    std::vector<int> candidate_at(static_cast<std::size_t>(img.width) * img.height, -1);
    std::vector<std::pair<int, int>> coords;
    std::vector<double> responses;
    for (int y = border; y < img.height - border; ++y) {
      for (int x = border; x < img.width - border; ++x) {
        if (!fast9_corner(img, x, y, cfg.fast_threshold)) continue;
        candidate_at[static_cast<std::size_t>(y) * img.width + x] =
            static_cast<int>(coords.size());
        coords.emplace_back(x, y);
        responses.push_back(harris_response(img, x, y));
      }
    }

    // 3x3 non-max suppression on the response; equal plateaus keep the
    // first candidate in scan order.
    const double scale = std::pow(cfg.scale_factor, level);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const auto [x, y] = coords[i];
      const double r = responses[i];
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int n = candidate_at[static_cast<std::size_t>(y + dy) * img.width + (x + dx)];
          if (n < 0) continue;
          const double rn = responses[static_cast<std::size_t>(n)];
          if (rn > r || (rn == r && static_cast<std::size_t>(n) < i)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;

      Keypoint kp;
      kp.level_x = x;
      kp.level_y = y;
      kp.x = static_cast<int>(std::lround(x * scale));
      kp.y = static_cast<int>(std::lround(y * scale));
      kp.response = r;
      kp.angle = intensity_centroid_angle(img, x, y);
      kp.octave = level;
      all.push_back(kp);
    }
  }

  std::sort(all.begin(), all.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.octave != b.octave) return a.octave < b.octave;
    if (a.level_y != b.level_y) return a.level_y < b.level_y;
    return a.level_x < b.level_x;
  });
  if (all.size() > static_cast<std::size_t>(cfg.max_features))
    all.resize(static_cast<std::size_t>(cfg.max_features));
  return all;
}

// ------------------------------------------------------------ descriptors

// Summed-area table with a 1-cell border of zeros.
struct Integral {
  int width = 0;
  std::vector<std::uint64_t> sums;

  explicit Integral(const GrayImage& img) : width(img.width + 1) {
    sums.assign(static_cast<std::size_t>(img.width + 1) * (img.height + 1), 0);
    for (int y = 0; y < img.height; ++y) {
      std::uint64_t row = 0;
      for (int x = 0; x < img.width; ++x) {
        row += img.at(x, y);
        sums[static_cast<std::size_t>(y + 1) * width + (x + 1)] =
            sums[static_cast<std::size_t>(y) * width + (x + 1)] + row;
      }
    }
  }

  // Inclusive box sum.
  std::uint64_t box(int x0, int y0, int x1, int y1) const {
    return sums[static_cast<std::size_t>(y1 + 1) * width + (x1 + 1)] -
           sums[static_cast<std::size_t>(y0) * width + (x1 + 1)] -
           sums[static_cast<std::size_t>(y1 + 1) * width + x0] +
           sums[static_cast<std::size_t>(y0) * width + x0];
  }

  // 5x5 box sum centered on (x, y); comparing sums equals comparing means.
  std::uint64_t smoothed(int x, int y) const { return box(x - 2, y - 2, x + 2, y + 2); }
};

std::vector<BinaryDescriptor256> describe_on_pyramid(const std::vector<GrayImage>& pyramid,
                                                     std::vector<Keypoint>& kps) {
  std::vector<std::unique_ptr<Integral>> integrals(pyramid.size());
  const auto& patterns = detail::rotated_patterns();

  std::vector<Keypoint> survivors;
  std::vector<BinaryDescriptor256> descriptors;
  survivors.reserve(kps.size());
  descriptors.reserve(kps.size());

  for (const Keypoint& kp : kps) {
    if (kp.octave < 0 || kp.octave >= static_cast<int>(pyramid.size())) continue;
    const GrayImage& img = pyramid[static_cast<std::size_t>(kp.octave)];
    if (kp.level_x < kPatchRadius || kp.level_x >= img.width - kPatchRadius ||
        kp.level_y < kPatchRadius || kp.level_y >= img.height - kPatchRadius)
      continue;  // dropped: pattern would not fit

    auto& integral = integrals[static_cast<std::size_t>(kp.octave)];
    if (!integral) integral = std::make_unique<Integral>(img);

    const int step =
        static_cast<int>(std::lround(kp.angle / (kTwoPi / detail::kRotationSteps))) %
        detail::kRotationSteps;
    const auto& pattern = patterns[static_cast<std::size_t>(step)];

    BinaryDescriptor256 desc;
    for (int k = 0; k < 256; ++k) {
      const auto& p = pattern[static_cast<std::size_t>(k)];
      const std::uint64_t s1 = integral->smoothed(kp.level_x + p.x1, kp.level_y + p.y1);
      const std::uint64_t s2 = integral->smoothed(kp.level_x + p.x2, kp.level_y + p.y2);
      if (s1 < s2) desc.set_bit(k);
    }
    survivors.push_back(kp);
    descriptors.push_back(desc);
  }

  kps = std::move(survivors);
  return descriptors;
}

}  // namespace

std::vector<GrayImage> build_pyramid(const GrayImage& img, int n_levels, double scale_factor) {
  if (img.width < 1 || img.height < 1) throw std::invalid_argument("build_pyramid: empty image");
  std::vector<GrayImage> pyramid;
  pyramid.push_back(img);
  for (int level = 1; level < n_levels; ++level) {
    const double scale = std::pow(scale_factor, level);
    const int w = std::max(1, static_cast<int>(std::lround(img.width / scale)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height / scale)));
    pyramid.push_back(resample_box(img, w, h));
  }
  return pyramid;
}

std::vector<Keypoint> detect_keypoints(const GrayImage& img, const OrbConfig& cfg) {
  cfg.validate();
  return detect_on_pyramid(build_pyramid(img, cfg.n_levels, cfg.scale_factor), cfg);
}

std::vector<BinaryDescriptor256> compute_descriptors(const GrayImage& img,
                                                     std::vector<Keypoint>& kps,
                                                     const OrbConfig& cfg) {
  cfg.validate();
  auto pyramid = build_pyramid(img, cfg.n_levels, cfg.scale_factor);
  return describe_on_pyramid(pyramid, kps);
}

OrbFeatures detect_and_describe(const GrayImage& img, const OrbConfig& cfg) {
  cfg.validate();
  auto pyramid = build_pyramid(img, cfg.n_levels, cfg.scale_factor);
  OrbFeatures feats;
  feats.keypoints = detect_on_pyramid(pyramid, cfg);
  feats.descriptors = describe_on_pyramid(pyramid, feats.keypoints);
  return feats;
}

std::vector<KeypointMatch> match_ratio_test(const std::vector<BinaryDescriptor256>& query_desc,
                                            const std::vector<BinaryDescriptor256>& template_desc,
                                            double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("match_ratio_test: ratio must be in (0, 1)");
  std::vector<KeypointMatch> matches;
  if (template_desc.size() < 2) return matches;  // ratio test cannot rank

  for (std::size_t qi = 0; qi < query_desc.size(); ++qi) {
    int d1 = 257, d2 = 257, best = -1;
    for (std::size_t ti = 0; ti < template_desc.size(); ++ti) {
      const int d = hamming(query_desc[qi], template_desc[ti]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = static_cast<int>(ti);
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (static_cast<double>(d1) < ratio * static_cast<double>(d2))
      matches.push_back({static_cast<int>(qi), best, d1});
  }

  std::sort(matches.begin(), matches.end(), [](const KeypointMatch& a, const KeypointMatch& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.query_index != b.query_index) return a.query_index < b.query_index;
    return a.template_index < b.template_index;
  });
  return matches;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& data;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > data.size()) throw FormatError("orb dump: truncated");
    return static_cast<std::uint8_t>(data[pos++]);
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(u8() | (u8() << 8)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

void save_descriptors(const OrbFeatures& feats, const std::filesystem::path& path) {
  if (feats.keypoints.size() != feats.descriptors.size())
    throw std::invalid_argument("save_descriptors: keypoint/descriptor mismatch");
  std::string out;
  out += "ORB1";
  put_u32(out, static_cast<std::uint32_t>(feats.keypoints.size()));
  for (std::size_t i = 0; i < feats.keypoints.size(); ++i) {
    const Keypoint& kp = feats.keypoints[i];
    put_u16(out, static_cast<std::uint16_t>(kp.x));
    put_u16(out, static_cast<std::uint16_t>(kp.y));
    put_f32(out, static_cast<float>(kp.angle));
    out.push_back(static_cast<char>(kp.octave));
    for (int w = 0; w < 4; ++w) {
      const std::uint64_t word = feats.descriptors[i].words[static_cast<std::size_t>(w)];
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((word >> (8 * b)) & 0xFF));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

OrbFeatures load_descriptors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || data.compare(0, 4, "ORB1") != 0)
    throw FormatError("orb dump: bad magic in " + path.string());

  Reader r{data, 4};
  const std::uint32_t count = r.u32();
  OrbFeatures feats;
  feats.keypoints.reserve(count);
  feats.descriptors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Keypoint kp;
    kp.x = r.u16();
    kp.y = r.u16();
    kp.angle = r.f32();
    kp.octave = r.u8();
    kp.level_x = kp.x;  // level coordinates are not serialized
    kp.level_y = kp.y;
    BinaryDescriptor256 desc;
    for (int w = 0; w < 4; ++w) {
      std::uint64_t word = 0;
      for (int b = 0; b < 8; ++b) word |= static_cast<std::uint64_t>(r.u8()) << (8 * b);
      desc.words[static_cast<std::size_t>(w)] = word;
    }
    feats.keypoints.push_back(kp);
    feats.descriptors.push_back(desc);
  }
  return feats;
}

}  // namespace markush
