#include "orb_pattern.hpp"

#include <cmath>

namespace markush::detail {

const std::array<PatternPair, 256> kBriefPattern = {{
    {3, 0, 3, 1}, {-4, -9, 7, -1}, {-10, -7, 1, 4}, {-2, 12, -1, -8}, {1, -7, 1, 8}, {1, 7, -2, 6},
    {-3, 10, 5, -2}, {-2, 3, 6, -7}, {-1, -8, -3, 8}, {2, 6, -4, -3}, {9, -4, 4, 8}, {-6, 7, 12, 4},
    {8, -6, 2, 5}, {1, -2, 0, 0}, {-1, 3, 6, -6}, {9, -7, -1, 4}, {3, 7, 8, 4}, {2, 5, -7, -1},
    {10, -4, -2, 7}, {0, 0, -1, 5}, {5, 6, 3, 1}, {-2, -1, 9, -2}, {1, -3, -4, -2}, {-5, 7, -3, 7},
    {0, 5, 2, -6}, {3, -1, 9, 4}, {11, 4, -2, 6}, {-3, -1, 1, 5}, {3, 8, -1, 3}, {-8, 4, 4, 5},
    {-5, 2, -3, 1}, {7, 0, -3, 2}, {-8, -8, -4, -3}, {3, -1, 11, -3}, {5, -3, 1, -6}, {-7, -6, -1, 7},
    {-7, 0, -7, 2}, {-8, 3, -8, 0}, {0, -9, 4, -2}, {6, 3, 1, -7}, {4, -2, -1, -1}, {1, 0, -8, 4},
    {-7, 10, 7, -4}, {-2, 2, -4, -5}, {1, 10, 2, 4}, {2, 1, -3, -4}, {-7, -9, 4, -10}, {1, -1, 0, 0},
    {-3, -5, 4, 3}, {8, -2, -4, -4}, {5, 4, 8, 5}, {4, 8, -1, -6}, {2, -2, -2, -8}, {6, 5, 9, -1},
    {-5, 1, 6, -9}, {0, 6, -9, -6}, {3, 2, -7, 1}, {3, -3, -8, -6}, {-2, 9, 5, -1}, {2, 3, 3, 2},
    {-3, -4, -1, -4}, {-2, 0, -5, 10}, {2, -9, -7, 6}, {11, 3, 3, 4}, {4, -1, 2, -5}, {-4, -7, 0, 0},
    {4, 1, -1, 7}, {1, -11, -3, -2}, {-1, -2, 6, -8}, {2, 5, 4, 1}, {2, 12, 7, -8}, {2, -3, -1, 5},
    {5, -1, 11, -3}, {2, 4, 9, -3}, {-10, -1, 3, 3}, {-9, -3, -7, -8}, {-10, -3, 5, 8}, {8, -5, 1, -4},
    {-4, -9, 4, 8}, {8, 5, -3, -3}, {-1, 0, 1, -6}, {0, 1, -11, 1}, {5, 2, 0, 11}, {-4, -11, -7, -9},
    {-2, -4, 2, 6}, {-6, 0, -1, 2}, {0, -9, 4, -2}, {2, 1, 5, 7}, {3, 4, 6, -2}, {-6, 7, -1, 7},
    {-6, 4, -9, -4}, {5, -4, 9, 8}, {1, 5, 5, -4}, {-7, -4, 7, -3}, {-2, 2, 5, -9}, {-4, -8, -2, -6},
    {10, 6, 8, 1}, {9, -1, -6, 4}, {-7, -1, -9, -2}, {8, -3, 8, -6}, {-1, -8, -6, -6}, {-4, 2, 6, -9},
    {-8, 8, 5, -2}, {-9, 5, 4, -5}, {-7, -4, -6, -5}, {-1, 3, -8, 1}, {7, -1, 5, 4}, {-2, -8, 5, -8},
    {-2, 0, -4, 7}, {-1, -5, -9, 6}, {4, 5, -4, 1}, {-7, 6, -10, 0}, {-12, 2, 0, 6}, {-5, -2, -5, 11},
    {-7, 7, 2, -4}, {9, 8, 4, 2}, {5, 8, 7, 6}, {-3, -2, -12, 0}, {5, -3, 7, 6}, {-9, -2, 0, 1},
    {-5, -2, 5, -10}, {-2, -9, -5, 2}, {-4, -1, 3, 6}, {-3, -1, 2, -3}, {-4, -4, 5, 0}, {-3, 8, 1, -1},
    {-1, -2, -4, 9}, {-6, 2, -1, -2}, {-12, 2, 6, -1}, {-5, -5, 3, -1}, {-5, 8, 9, -8}, {7, 4, -3, -7},
    {-3, -3, -6, 0}, {-6, 1, 2, -7}, {5, 6, 7, -1}, {6, 9, 3, -5}, {-3, -1, 4, -4}, {8, -6, -1, -1},
    {-5, 5, 0, -4}, {-2, 12, -1, 9}, {-7, 5, 5, 3}, {7, 1, 1, -5}, {0, -2, -2, -1}, {-3, 3, 5, 3},
    {2, -3, -7, -7}, {3, -4, -7, -2}, {-4, 4, 5, 3}, {0, -5, 5, -9}, {5, 10, -1, -4}, {3, -5, -6, 9},
    {3, 4, -3, -7}, {3, -5, -5, -2}, {3, -2, 2, -11}, {-5, 5, 2, 1}, {4, -1, -6, 7}, {1, -4, 3, 0},
    {5, 6, -3, -4}, {-7, -2, 0, -1}, {10, -4, 5, 2}, {4, 1, 2, 2}, {4, 4, 4, -2}, {-4, -8, 5, 0},
    {2, -2, -5, -3}, {1, 1, 2, -4}, {-4, -5, -1, 0}, {-7, 1, -3, -4}, {-5, 0, 2, -3}, {-5, 6, 2, 6},
    {6, 9, -1, -4}, {3, 10, 7, 0}, {-1, -3, 1, 0}, {8, 4, 1, 2}, {-4, 7, -3, 0}, {-4, 10, -6, -9},
    {-7, -4, 9, -3}, {-11, -5, -7, 2}, {9, -2, 4, -1}, {-2, -7, -2, -2}, {-3, 0, 5, 7}, {-2, -4, -6, -4},
    {-3, -8, -5, 4}, {-2, 3, 7, 5}, {-3, 5, 0, -8}, {4, -4, -1, 4}, {3, -3, -9, -7}, {-3, 1, 5, -3},
    {-3, 7, 5, -1}, {2, -7, -11, 6}, {1, -9, 5, -4}, {4, -6, -3, 4}, {5, 3, 9, 1}, {-5, -2, -4, 10},
    {-1, -3, -6, 5}, {3, -6, 5, 8}, {3, -8, 7, 1}, {5, 2, 10, -3}, {-3, -2, 6, 0}, {7, -3, 0, 1},
    {-1, 2, 8, 5}, {2, 1, 5, 7}, {6, 1, 0, 3}, {10, 0, -2, 3}, {4, 8, -9, 4}, {2, 4, 0, -5},
    {4, 2, 7, 1}, {2, 2, -2, -6}, {12, -5, 1, -4}, {-3, 8, 2, 10}, {2, 4, -4, -11}, {-1, 3, 7, 8},
    {3, 11, -6, 3}, {-2, 2, 6, 0}, {4, -3, 1, 0}, {-2, 1, -3, -10}, {-6, -6, -2, 3}, {-6, -9, -4, 6},
    {-2, -6, -3, -2}, {3, 4, -9, -1}, {-6, 6, 2, 8}, {6, -7, 4, -6}, {1, 0, 0, 5}, {0, 0, 0, -5},
    {-3, -1, 5, 3}, {4, -3, 9, 2}, {4, -1, -8, 3}, {2, 3, 11, -2}, {-4, -2, -5, -5}, {3, 7, 3, 5},
    {2, 7, -4, 4}, {12, -5, 4, 10}, {3, -2, -5, -2}, {-11, -3, -9, 7}, {-3, -9, 5, 4}, {-2, 4, -4, -3},
    {7, 6, 6, 5}, {3, -1, 5, -10}, {4, 2, 11, -3}, {-1, 0, 10, 7}, {-6, 3, 1, 9}, {-2, 0, -3, -3},
    {-9, 0, -5, -6}, {-9, 3, -6, 2}, {-5, 4, 5, 3}, {0, 2, 5, -1}, {11, -4, 10, -6}, {3, 1, -3, 8},
    {4, -4, -5, -12}, {-3, -2, 6, 6}, {-1, -3, 6, -2}, {4, -12, -1, 3}, {5, 10, 6, -10}, {-3, 1, 3, 0},
    {-4, 4, 3, -2}, {9, -5, 8, 9}, {-3, 3, -2, 7}, {-5, 1, 1, 6},
}};

namespace {

std::array<std::array<PatternPair, 256>, kRotationSteps> build_rotations() {
  std::array<std::array<PatternPair, 256>, kRotationSteps> out{};
  for (int step = 0; step < kRotationSteps; ++step) {
    const double angle = step * 2.0 * 3.14159265358979323846 / kRotationSteps;
    const double c = std::cos(angle), s = std::sin(angle);
    for (int k = 0; k < 256; ++k) {
      const PatternPair& p = kBriefPattern[static_cast<std::size_t>(k)];
      auto rot_x = [&](double x, double y) {
        return static_cast<std::int8_t>(std::lround(c * x - s * y));
      };
      auto rot_y = [&](double x, double y) {
        return static_cast<std::int8_t>(std::lround(s * x + c * y));
      };
      out[static_cast<std::size_t>(step)][static_cast<std::size_t>(k)] = PatternPair{
          rot_x(p.x1, p.y1), rot_y(p.x1, p.y1), rot_x(p.x2, p.y2), rot_y(p.x2, p.y2)};
    }
  }
  return out;
}

}  // namespace

const std::array<std::array<PatternPair, 256>, kRotationSteps>& rotated_patterns() {
  static const auto table = build_rotations();
  return table;
}

}  // namespace markush::detail
