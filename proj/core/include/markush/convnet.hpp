#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "markush/image.hpp"

namespace markush {

/// Dense channel-major tensor (c, y, x), doubles throughout.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const double* ptr(int c, int y, int x) const {
    return data.data() + (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double* ptr(int c, int y, int x) {
    return data.data() + (static_cast<std::size_t>(c) * height + y) * width + x;
  }

  /// Reshape without touching contents when the shape already matches;
  /// otherwise reallocate zero-filled.
  void ensure(int c, int h, int w) {
    if (channels == c && height == h && width == w) return;
    channels = c;
    height = h;
    width = w;
    data.assign(static_cast<std::size_t>(c) * h * w, 0.0);
  }
};

/// Intensities scaled to [0,1] and the gray channel triplicated; all three
/// channels are bit-identical.
Tensor3 preprocess(const GrayImage& patch, int input_size);

struct ConvNetConfig {
  int input_size = 224;
  std::vector<int> channels = {8, 16, 32, 64};  // one conv/relu/pool block per entry

  void validate() const;
  bool operator==(const ConvNetConfig&) const = default;
};

/// Small conv classifier: repeated (3x3 conv, ReLU, 2x2 max-pool) blocks, a
/// global average pool, and a fully connected head to 2 logits. Class index
/// 1 is "contains a Markush indicator".
class ConvNet {
 public:
  struct Workspace {
    Tensor3 input;
    std::vector<Tensor3> padded;          // zero-padded conv inputs, reused by backward
    std::vector<Tensor3> conv_z;          // pre-activation conv outputs
    std::vector<Tensor3> pooled;          // post max-pool activations
    std::vector<std::vector<int>> argmax; // winning relu index per pooled cell
    std::vector<double> gap;
    std::array<double, 2> logits{};
    Tensor3 dpooled, dz, dpad;            // backward scratch
  };

  ConvNet() = default;

  static ConvNet create(const ConvNetConfig& cfg, std::uint64_t seed);

  const ConvNetConfig& config() const { return cfg_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  /// Index of the first head (fully connected) parameter; everything below
  /// belongs to the feature blocks and is held fixed in frozen mode.
  std::size_t head_offset() const { return head_offset_; }

  /// When set, training updates only the head parameters.
  bool frozen_feature_layers = false;

  std::array<double, 2> forward(const Tensor3& input, Workspace& ws) const;
  std::array<double, 2> logits_for(const Tensor3& input) const;

  /// Backpropagate dLoss/dlogits through the workspace of the matching
  /// forward call. Parameter gradients accumulate into `grad` (same layout
  /// as parameters()). With head_only set, conv gradients and the input
  /// chain are skipped. input_grad, when non-null, receives dLoss/dinput
  /// and forces the full chain.
  void backward(Workspace& ws, const std::array<double, 2>& dlogits,
                std::vector<double>& grad, bool head_only = false,
                Tensor3* input_grad = nullptr) const;

  /// Probability of class 1 plus the raw logits.
  std::pair<double, std::array<double, 2>> predict_patch(const GrayImage& patch) const;
  double predict_proba(const GrayImage& patch) const;

  /// |d logit_argmax / d pixel|, max over channels, min-max scaled to 0..255.
  GrayImage saliency_map(const GrayImage& patch) const;

  /// Binary checkpoint, magic "TCNN", little-endian f32 parameters in
  /// declaration order.
  void save(const std::filesystem::path& path) const;
  static ConvNet load(const std::filesystem::path& path);

 private:
  struct BlockShape {
    int in_channels = 0;
    int out_channels = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  void rebuild_shapes();

  ConvNetConfig cfg_;
  std::vector<double> params_;
  std::vector<BlockShape> blocks_;
  std::size_t head_offset_ = 0;  // == fc weight offset
  std::size_t fc_bias_offset_ = 0;
};

/// Numerically stable softmax over two logits.
std::array<double, 2> softmax2(const std::array<double, 2>& logits);

/// Cross-entropy of the true class under softmax, plus dLoss/dlogits.
double softmax_cross_entropy(const std::array<double, 2>& logits, int true_class,
                             std::array<double, 2>* dlogits = nullptr);

}  // namespace markush
