#pragma once

#include <array>
#include <cstdint>

namespace markush::detail {

struct PatternPair {
  std::int8_t x1, y1, x2, y2;
};

inline constexpr int kRotationSteps = 30;  // 12 degree bins

/// Frozen BRIEF sampling pattern: one seeded Gaussian(0, (31/5)^2) draw over
/// the 31x31 window, committed so descriptors never change between builds.
/// Every point sits inside the radius-13 disc, which keeps all rotated
/// samples plus the 5x5 smoothing window within the 18 px keypoint border.
extern const std::array<PatternPair, 256> kBriefPattern;

/// kBriefPattern rotated to each of the 30 quantized orientations.
const std::array<std::array<PatternPair, 256>, kRotationSteps>& rotated_patterns();

}  // namespace markush::detail
