#include "markush/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace markush {

namespace {

// Homography coefficients h0..h7 (h8 = 1) sending (x, y) to
// ((h0 x + h1 y + h2) / w, (h3 x + h4 y + h5) / w), w = h6 x + h7 y + 1.
using Homography = std::array<double, 8>;

// Least-squares-free 4-point DLT: 8x8 linear system, partial pivoting.
Homography solve_homography(const std::array<double, 8>& src_xy,
                            const std::array<double, 8>& dst_xy) {
  double m[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double x = src_xy[static_cast<std::size_t>(2 * i)];
    const double y = src_xy[static_cast<std::size_t>(2 * i + 1)];
    const double u = dst_xy[static_cast<std::size_t>(2 * i)];
    const double v = dst_xy[static_cast<std::size_t>(2 * i + 1)];
    double* r1 = m[2 * i];
    double* r2 = m[2 * i + 1];
    r1[0] = x; r1[1] = y; r1[2] = 1; r1[6] = -u * x; r1[7] = -u * y; r1[8] = u;
    r2[3] = x; r2[4] = y; r2[5] = 1; r2[6] = -v * x; r2[7] = -v * y; r2[8] = v;
  }
  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-12)
      throw std::runtime_error("augment: degenerate perspective corners");
    std::swap_ranges(m[col], m[col] + 9, m[pivot]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 9; ++c) m[r][c] -= f * m[col][c];
    }
  }
  Homography h;
  for (int i = 0; i < 8; ++i) h[static_cast<std::size_t>(i)] = m[i][8] / m[i][i];
  return h;
}

double bilinear_white(const Tensor3& t, int c, double x, double y) {
  if (x < 0.0 || y < 0.0 || x > t.width - 1 || y > t.height - 1) return 1.0;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, t.width - 1);
  const int y1 = std::min(y0 + 1, t.height - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = t.at(c, y0, x0) * (1.0 - fx) + t.at(c, y0, x1) * fx;
  const double bot = t.at(c, y1, x0) * (1.0 - fx) + t.at(c, y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

void perspective_warp(Tensor3& t, Rng& rng) {
  const double side = t.width;
  const double jitter = 0.10 * side;
  const std::array<double, 8> out_corners = {0.0,
                                             0.0,
                                             side - 1.0,
                                             0.0,
                                             side - 1.0,
                                             side - 1.0,
                                             0.0,
                                             side - 1.0};
  std::array<double, 8> src_corners{};
  for (int i = 0; i < 8; ++i)
    src_corners[static_cast<std::size_t>(i)] =
        out_corners[static_cast<std::size_t>(i)] + rng.uniform(-jitter, jitter);

  // Map output pixels back into the jittered quad.
  const Homography h = solve_homography(out_corners, src_corners);
  Tensor3 warped(t.channels, t.height, t.width);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const double w = h[6] * x + h[7] * y + 1.0;
      const double sx = (h[0] * x + h[1] * y + h[2]) / w;
      const double sy = (h[3] * x + h[4] * y + h[5]) / w;
      for (int c = 0; c < t.channels; ++c) warped.at(c, y, x) = bilinear_white(t, c, sx, sy);
    }
  }
  t = std::move(warped);
}

Tensor3 gaussian3x3(const Tensor3& t) {
  // (1 2 1) x (1 2 1) / 16 with clamp-to-edge.
  Tensor3 out(t.channels, t.height, t.width);
  auto clamped = [&](int c, int y, int x) {
    return t.at(c, std::clamp(y, 0, t.height - 1), std::clamp(x, 0, t.width - 1));
  };
  static const double k[3] = {1.0, 2.0, 1.0};
  for (int c = 0; c < t.channels; ++c)
    for (int y = 0; y < t.height; ++y)
      for (int x = 0; x < t.width; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            acc += k[dy + 1] * k[dx + 1] * clamped(c, y + dy, x + dx);
        out.at(c, y, x) = acc / 16.0;
      }
  return out;
}

}  // namespace

void posterize_bits(Tensor3& tensor, int bits) {
  if (bits < 1 || bits > 8) throw std::invalid_argument("posterize: bits must be in [1, 8]");
  const int keep_mask = 0xFF << (8 - bits);
  for (double& v : tensor.data) {
    int k = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    k &= keep_mask;
    v = k / 255.0;
  }
}

Tensor3 augment(const Tensor3& tensor, double probability, Rng& rng) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw std::invalid_argument("augment: probability must be in [0, 1]");
  Tensor3 t = tensor;

  if (rng.bernoulli(probability)) perspective_warp(t, rng);

  if (rng.bernoulli(probability)) posterize_bits(t, rng.uniform_int(3, 7));

  if (rng.bernoulli(probability)) {
    const Tensor3 blurred = gaussian3x3(t);
    if (rng.bernoulli(0.5)) {
      // Unsharp mask, amount 0.5.
      for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = std::clamp(t.data[i] + 0.5 * (t.data[i] - blurred.data[i]), 0.0, 1.0);
    } else {
      t = blurred;
    }
  }
  return t;
}

}  // namespace markush
