#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "markush/image.hpp"

namespace markush {

struct OrbConfig {
  int max_features = 500;
  int fast_threshold = 20;   // FAST-9 intensity delta
  int n_levels = 4;          // pyramid depth
  double scale_factor = 1.3; // per-level box downsampling factor
  double match_ratio = 0.75; // Lowe ratio test threshold

  void validate() const;
};

/// Border (in level pixels) a keypoint must keep from the image edge so the
/// rotated sampling pattern and its smoothing window always fit.
inline constexpr int kPatchRadius = 18;

struct Keypoint {
  int x = 0;  // level-0 coordinates
  int y = 0;
  double response = 0.0;  // Harris corner score
  double angle = 0.0;     // [0, 2*pi)
  int octave = 0;         // pyramid level
  int level_x = 0;        // coordinates on the detection level
  int level_y = 0;
};

struct BinaryDescriptor256 {
  std::array<std::uint64_t, 4> words{};

  bool bit(int k) const { return (words[static_cast<std::size_t>(k >> 6)] >> (k & 63)) & 1ULL; }
  void set_bit(int k) { words[static_cast<std::size_t>(k >> 6)] |= 1ULL << (k & 63); }
  bool operator==(const BinaryDescriptor256&) const = default;
};

struct KeypointMatch {
  int query_index = 0;
  int template_index = 0;
  int distance = 0;  // bits, [0, 256]
};

/// Popcount of XOR.
inline int hamming(const BinaryDescriptor256& a, const BinaryDescriptor256& b) {
  int d = 0;
  for (int i = 0; i < 4; ++i)
    d += std::popcount(a.words[static_cast<std::size_t>(i)] ^ b.words[static_cast<std::size_t>(i)]);
  return d;
}

/// Pyramid levels built by fractional box downsampling of the base image.
std::vector<GrayImage> build_pyramid(const GrayImage& img, int n_levels, double scale_factor);

/// FAST-9 corners over the pyramid, non-max suppressed, Harris ranked,
/// intensity-centroid oriented, capped at max_features. The cap keeps a
/// prefix of the response ranking, so smaller caps are prefixes of larger.
std::vector<Keypoint> detect_keypoints(const GrayImage& img, const OrbConfig& cfg);

/// Steered 256-bit BRIEF over the frozen pattern, orientation quantized to
/// 30 steps, comparisons on 5x5 box-smoothed intensities, ties resolve to 0.
/// Keypoints too close to the border are dropped from `kps` so the result
/// aligns with the surviving keypoints.
std::vector<BinaryDescriptor256> compute_descriptors(const GrayImage& img,
                                                     std::vector<Keypoint>& kps,
                                                     const OrbConfig& cfg);

/// Lowe ratio test against the template set: keep a query's nearest match
/// iff d1 < ratio * d2. Fewer than two template descriptors means no match
/// can be ranked, giving an empty list. Result sorted by ascending distance.
std::vector<KeypointMatch> match_ratio_test(const std::vector<BinaryDescriptor256>& query_desc,
                                            const std::vector<BinaryDescriptor256>& template_desc,
                                            double ratio);

struct OrbFeatures {
  std::vector<Keypoint> keypoints;
  std::vector<BinaryDescriptor256> descriptors;
};

OrbFeatures detect_and_describe(const GrayImage& img, const OrbConfig& cfg);

/// ORB1 dump: magic "ORB1", u32 count, then per record u16 x, u16 y,
/// f32 angle, u8 octave, 32 descriptor bytes. Little-endian.
void save_descriptors(const OrbFeatures& feats, const std::filesystem::path& path);
OrbFeatures load_descriptors(const std::filesystem::path& path);

}  // namespace markush
