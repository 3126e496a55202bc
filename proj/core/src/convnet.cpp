#include "markush/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "markush/errors.hpp"
#include "markush/rng.hpp"

namespace markush {

Tensor3 preprocess(const GrayImage& patch, int input_size) {
  if (patch.width != input_size || patch.height != input_size)
    throw std::invalid_argument("preprocess: patch size does not match model input size");
  Tensor3 t(3, input_size, input_size);
  const std::size_t plane = static_cast<std::size_t>(input_size) * input_size;
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = patch.pixels[i] / 255.0;
    t.data[i] = v;
    t.data[plane + i] = v;
    t.data[2 * plane + i] = v;
  }
  return t;
}

void ConvNetConfig::validate() const {
  if (input_size < 4) throw std::invalid_argument("convnet: input_size must be >= 4");
  if (channels.empty()) throw std::invalid_argument("convnet: need at least one block");
  for (int c : channels)
    if (c < 1) throw std::invalid_argument("convnet: channel counts must be >= 1");
  int side = input_size;
  for (std::size_t b = 0; b < channels.size(); ++b) side /= 2;
  if (side < 1) throw std::invalid_argument("convnet: too many blocks for this input size");
}

void ConvNet::rebuild_shapes() {
  blocks_.clear();
  std::size_t offset = 0;
  int in_c = 3;
  for (int out_c : cfg_.channels) {
    BlockShape s;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(out_c) * in_c * 9;
    s.bias_offset = offset;
    offset += static_cast<std::size_t>(out_c);
    blocks_.push_back(s);
    in_c = out_c;
  }
  head_offset_ = offset;
  offset += static_cast<std::size_t>(2) * in_c;  // fc weight [2 x C_last]
  fc_bias_offset_ = offset;
  offset += 2;
  params_.resize(offset, 0.0);
}

ConvNet ConvNet::create(const ConvNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ConvNet net;
  net.cfg_ = cfg;
  net.rebuild_shapes();

  // He-normal conv/fc weights, zero biases.
  Rng rng(seed ^ 0x1C2D3E4FULL);
  for (const auto& b : net.blocks_) {
    const double stddev = std::sqrt(2.0 / (b.in_channels * 9.0));
    const std::size_t count = static_cast<std::size_t>(b.out_channels) * b.in_channels * 9;
    for (std::size_t i = 0; i < count; ++i)
      net.params_[b.weight_offset + i] = rng.normal(0.0, stddev);
  }
  const int last_c = net.cfg_.channels.back();
  const double fc_std = std::sqrt(2.0 / static_cast<double>(last_c));
  for (std::size_t i = 0; i < static_cast<std::size_t>(2) * last_c; ++i)
    net.params_[net.head_offset_ + i] = rng.normal(0.0, fc_std);
  return net;
}

namespace {

// Interior rows of a zero-padded copy; the border stays zero because ensure()
// zero-fills on allocation and nothing ever writes it.
void fill_padded(const Tensor3& in, Tensor3& padded) {
  padded.ensure(in.channels, in.height + 2, in.width + 2);
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < in.height; ++y)
      std::memcpy(padded.ptr(c, y + 1, 1), in.ptr(c, y, 0),
                  static_cast<std::size_t>(in.width) * sizeof(double));
}

// 3x3 same-size convolution; `padded` is filled here and reused by backward.
void conv3x3_forward(const Tensor3& in, const double* weights, const double* bias, int out_c,
                     Tensor3& out, Tensor3& padded) {
  const int h = in.height, w = in.width;
  fill_padded(in, padded);
  out.ensure(out_c, h, w);

  for (int oc = 0; oc < out_c; ++oc) {
    double* out_plane = out.ptr(oc, 0, 0);
    const double b = bias[oc];
    for (int i = 0; i < h * w; ++i) out_plane[i] = b;
    for (int ic = 0; ic < in.channels; ++ic) {
      const double* wk = weights + (static_cast<std::size_t>(oc) * in.channels + ic) * 9;
      const double w0 = wk[0], w1 = wk[1], w2 = wk[2];
      const double w3 = wk[3], w4 = wk[4], w5 = wk[5];
      const double w6 = wk[6], w7 = wk[7], w8 = wk[8];
      for (int y = 0; y < h; ++y) {
        const double* s0 = padded.ptr(ic, y, 0);
        const double* s1 = padded.ptr(ic, y + 1, 0);
        const double* s2 = padded.ptr(ic, y + 2, 0);
        double* dst = out_plane + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          dst[x] += w0 * s0[x] + w1 * s0[x + 1] + w2 * s0[x + 2] +
                    w3 * s1[x] + w4 * s1[x + 1] + w5 * s1[x + 2] +
                    w6 * s2[x] + w7 * s2[x + 1] + w8 * s2[x + 2];
        }
      }
    }
  }
}

// Gradients for the same convolution; `padded` comes from the forward pass,
// dz is dLoss/d(conv output), dpad is caller scratch.
void conv3x3_backward(const Tensor3& padded, int in_channels, const double* weights,
                      const Tensor3& dz, double* dweights, double* dbias, Tensor3* din,
                      Tensor3& dpad) {
  const int h = dz.height, w = dz.width;
  const int out_c = dz.channels;

  if (din) {
    dpad.ensure(in_channels, h + 2, w + 2);
    std::fill(dpad.data.begin(), dpad.data.end(), 0.0);
  }

  for (int oc = 0; oc < out_c; ++oc) {
    const double* dz_plane = dz.ptr(oc, 0, 0);
    if (dbias) {
      double acc = 0.0;
      for (int i = 0; i < h * w; ++i) acc += dz_plane[i];
      dbias[oc] += acc;
    }
    for (int ic = 0; ic < in_channels; ++ic) {
      const double* wk = weights + (static_cast<std::size_t>(oc) * in_channels + ic) * 9;
      double* dwk = dweights ? dweights + (static_cast<std::size_t>(oc) * in_channels + ic) * 9
                             : nullptr;
      double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0, acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0,
             acc8 = 0;
      for (int y = 0; y < h; ++y) {
        const double* s0 = padded.ptr(ic, y, 0);
        const double* s1 = padded.ptr(ic, y + 1, 0);
        const double* s2 = padded.ptr(ic, y + 2, 0);
        const double* dzrow = dz_plane + static_cast<std::size_t>(y) * w;
        if (din) {
          double* d0 = dpad.ptr(ic, y, 0);
          double* d1 = dpad.ptr(ic, y + 1, 0);
          double* d2 = dpad.ptr(ic, y + 2, 0);
          const double w0 = wk[0], w1 = wk[1], w2 = wk[2];
          const double w3 = wk[3], w4 = wk[4], w5 = wk[5];
          const double w6 = wk[6], w7 = wk[7], w8 = wk[8];
          for (int x = 0; x < w; ++x) {
            const double v = dzrow[x];
            acc0 += v * s0[x];
            acc1 += v * s0[x + 1];
            acc2 += v * s0[x + 2];
            acc3 += v * s1[x];
            acc4 += v * s1[x + 1];
            acc5 += v * s1[x + 2];
            acc6 += v * s2[x];
            acc7 += v * s2[x + 1];
            acc8 += v * s2[x + 2];
            d0[x] += v * w0;
            d0[x + 1] += v * w1;
            d0[x + 2] += v * w2;
            d1[x] += v * w3;
            d1[x + 1] += v * w4;
            d1[x + 2] += v * w5;
            d2[x] += v * w6;
            d2[x + 1] += v * w7;
            d2[x + 2] += v * w8;
          }
        } else {
          for (int x = 0; x < w; ++x) {
            const double v = dzrow[x];
            acc0 += v * s0[x];
            acc1 += v * s0[x + 1];
            acc2 += v * s0[x + 2];
            acc3 += v * s1[x];
            acc4 += v * s1[x + 1];
            acc5 += v * s1[x + 2];
            acc6 += v * s2[x];
            acc7 += v * s2[x + 1];
            acc8 += v * s2[x + 2];
          }
        }
      }
      if (dwk) {
        dwk[0] += acc0;
        dwk[1] += acc1;
        dwk[2] += acc2;
        dwk[3] += acc3;
        dwk[4] += acc4;
        dwk[5] += acc5;
        dwk[6] += acc6;
        dwk[7] += acc7;
        dwk[8] += acc8;
      }
    }
  }

  if (din) {
    din->ensure(in_channels, h, w);
    for (int c = 0; c < in_channels; ++c)
      for (int y = 0; y < h; ++y)
        std::memcpy(din->ptr(c, y, 0), dpad.ptr(c, y + 1, 1),
                    static_cast<std::size_t>(w) * sizeof(double));
  }
}

// 2x2 stride-2 max pool over relu(z); ties keep the first cell in scan order.
void maxpool_forward(const Tensor3& z, Tensor3& pooled, std::vector<int>& argmax) {
  const int ph = z.height / 2, pw = z.width / 2;
  pooled.ensure(z.channels, ph, pw);
  argmax.resize(static_cast<std::size_t>(z.channels) * ph * pw);
  std::size_t out_idx = 0;
  for (int c = 0; c < z.channels; ++c) {
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        double best = -1.0;
        int best_idx = -1;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int zy = 2 * y + dy, zx = 2 * x + dx;
            const double v = std::max(z.at(c, zy, zx), 0.0);
            if (v > best) {
              best = v;
              best_idx = (c * z.height + zy) * z.width + zx;
            }
          }
        }
        pooled.data[out_idx] = best;
        argmax[out_idx] = best_idx;
        ++out_idx;
      }
    }
  }
}

}  // namespace

std::array<double, 2> ConvNet::forward(const Tensor3& input, Workspace& ws) const {
  if (input.channels != 3 || input.height != cfg_.input_size || input.width != cfg_.input_size)
    throw std::invalid_argument("convnet: input tensor shape mismatch");

  const std::size_t n_blocks = blocks_.size();
  ws.input = input;
  ws.padded.resize(n_blocks);
  ws.conv_z.resize(n_blocks);
  ws.pooled.resize(n_blocks);
  ws.argmax.resize(n_blocks);

  const Tensor3* current = &ws.input;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    conv3x3_forward(*current, params_.data() + blocks_[b].weight_offset,
                    params_.data() + blocks_[b].bias_offset, blocks_[b].out_channels,
                    ws.conv_z[b], ws.padded[b]);
    maxpool_forward(ws.conv_z[b], ws.pooled[b], ws.argmax[b]);
    current = &ws.pooled[b];
  }

  const Tensor3& last = *current;
  const int c_last = last.channels;
  const double inv_area = 1.0 / (static_cast<double>(last.height) * last.width);
  ws.gap.assign(static_cast<std::size_t>(c_last), 0.0);
  for (int c = 0; c < c_last; ++c) {
    double acc = 0.0;
    const double* plane = last.ptr(c, 0, 0);
    for (int i = 0; i < last.height * last.width; ++i) acc += plane[i];
    ws.gap[static_cast<std::size_t>(c)] = acc * inv_area;
  }

  const double* fc_w = params_.data() + head_offset_;
  const double* fc_b = params_.data() + fc_bias_offset_;
  for (int k = 0; k < 2; ++k) {
    double acc = fc_b[k];
    for (int c = 0; c < c_last; ++c) acc += fc_w[k * c_last + c] * ws.gap[static_cast<std::size_t>(c)];
    ws.logits[static_cast<std::size_t>(k)] = acc;
  }
  return ws.logits;
}

std::array<double, 2> ConvNet::logits_for(const Tensor3& input) const {
  Workspace ws;
  return forward(input, ws);
}

void ConvNet::backward(Workspace& ws, const std::array<double, 2>& dlogits,
                       std::vector<double>& grad, bool head_only, Tensor3* input_grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("convnet: gradient buffer size mismatch");
  const std::size_t n_blocks = blocks_.size();
  const Tensor3& last = n_blocks > 0 ? ws.pooled[n_blocks - 1] : ws.input;
  const int c_last = last.channels;

  // Head gradients.
  double* dfc_w = grad.data() + head_offset_;
  double* dfc_b = grad.data() + fc_bias_offset_;
  std::vector<double> dgap(static_cast<std::size_t>(c_last), 0.0);
  const double* fc_w = params_.data() + head_offset_;
  for (int k = 0; k < 2; ++k) {
    const double dl = dlogits[static_cast<std::size_t>(k)];
    dfc_b[k] += dl;
    for (int c = 0; c < c_last; ++c) {
      dfc_w[k * c_last + c] += dl * ws.gap[static_cast<std::size_t>(c)];
      dgap[static_cast<std::size_t>(c)] += dl * fc_w[k * c_last + c];
    }
  }
  if (head_only && !input_grad) return;

  // GAP spreads each channel gradient uniformly.
  Tensor3& dpooled = ws.dpooled;
  dpooled.ensure(last.channels, last.height, last.width);
  const double inv_area = 1.0 / (static_cast<double>(last.height) * last.width);
  for (int c = 0; c < c_last; ++c) {
    const double g = dgap[static_cast<std::size_t>(c)] * inv_area;
    double* plane = dpooled.ptr(c, 0, 0);
    for (int i = 0; i < last.height * last.width; ++i) plane[i] = g;
  }

  Tensor3& dz = ws.dz;
  for (std::size_t b = n_blocks; b-- > 0;) {
    const Tensor3& z = ws.conv_z[b];
    // Pool + ReLU backward: route each pooled gradient to its winning cell,
    // masked by relu (z <= 0 contributed a flat 0, so no gradient).
    dz.ensure(z.channels, z.height, z.width);
    std::fill(dz.data.begin(), dz.data.end(), 0.0);
    for (std::size_t i = 0; i < ws.argmax[b].size(); ++i) {
      const int zi = ws.argmax[b][i];
      if (z.data[static_cast<std::size_t>(zi)] > 0.0)
        dz.data[static_cast<std::size_t>(zi)] += dpooled.data[i];
    }

    const int in_channels = blocks_[b].in_channels;
    const bool need_din = b > 0 || input_grad != nullptr;
    Tensor3 din;
    conv3x3_backward(ws.padded[b], in_channels, params_.data() + blocks_[b].weight_offset, dz,
                     head_only ? nullptr : grad.data() + blocks_[b].weight_offset,
                     head_only ? nullptr : grad.data() + blocks_[b].bias_offset,
                     need_din ? &din : nullptr, ws.dpad);
    if (b == 0) {
      if (input_grad) *input_grad = std::move(din);
    } else {
      dpooled = std::move(din);
    }
  }
}

std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

double softmax_cross_entropy(const std::array<double, 2>& logits, int true_class,
                             std::array<double, 2>* dlogits) {
  const auto p = softmax2(logits);
  if (dlogits) {
    (*dlogits)[0] = p[0] - (true_class == 0 ? 1.0 : 0.0);
    (*dlogits)[1] = p[1] - (true_class == 1 ? 1.0 : 0.0);
  }
  const double pt = std::max(p[static_cast<std::size_t>(true_class)], 1e-300);
  return -std::log(pt);
}

std::pair<double, std::array<double, 2>> ConvNet::predict_patch(const GrayImage& patch) const {
  const auto logits = logits_for(preprocess(patch, cfg_.input_size));
  return {softmax2(logits)[1], logits};
}

double ConvNet::predict_proba(const GrayImage& patch) const { return predict_patch(patch).first; }

GrayImage ConvNet::saliency_map(const GrayImage& patch) const {
  Workspace ws;
  const auto logits = forward(preprocess(patch, cfg_.input_size), ws);
  const int cls = logits[1] >= logits[0] ? 1 : 0;
  std::array<double, 2> dlogits{0.0, 0.0};
  dlogits[static_cast<std::size_t>(cls)] = 1.0;

  std::vector<double> grad(params_.size(), 0.0);
  Tensor3 input_grad;
  backward(ws, dlogits, grad, /*head_only=*/false, &input_grad);

  GrayImage map(patch.width, patch.height, 0);
  std::vector<double> mag(static_cast<std::size_t>(patch.width) * patch.height, 0.0);
  double max_v = 0.0, min_v = 1e300;
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      double v = 0.0;
      for (int c = 0; c < 3; ++c) v = std::max(v, std::abs(input_grad.at(c, y, x)));
      mag[static_cast<std::size_t>(y) * patch.width + x] = v;
      max_v = std::max(max_v, v);
      min_v = std::min(min_v, v);
    }
  }
  if (max_v > min_v) {
    const double scale = 255.0 / (max_v - min_v);
    for (std::size_t i = 0; i < mag.size(); ++i)
      map.pixels[i] = static_cast<std::uint8_t>(std::lround((mag[i] - min_v) * scale));
  }
  return map;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& data, std::size_t& pos) {
  if (pos + 4 > data.size()) throw FormatError("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& data, std::size_t& pos) {
  if (pos + 8 > data.size()) throw FormatError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos++])) << (8 * i);
  return v;
}

}  // namespace

void ConvNet::save(const std::filesystem::path& path) const {
  std::string out;
  out += "TCNN";
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(cfg_.input_size));
  put_u32(out, static_cast<std::uint32_t>(cfg_.channels.size()));
  for (int c : cfg_.channels) put_u32(out, static_cast<std::uint32_t>(c));
  out.push_back(frozen_feature_layers ? 1 : 0);
  put_u64(out, params_.size());
  for (double p : params_) {
    const float f = static_cast<float>(p);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

ConvNet ConvNet::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < 8 || data.compare(0, 4, "TCNN") != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());

  std::size_t pos = 4;
  const std::uint32_t version = get_u32(data, pos);
  if (version != 1) throw FormatError("checkpoint: unsupported version");

  ConvNet net;
  net.cfg_.input_size = static_cast<int>(get_u32(data, pos));
  const std::uint32_t n_blocks = get_u32(data, pos);
  net.cfg_.channels.clear();
  for (std::uint32_t b = 0; b < n_blocks; ++b)
    net.cfg_.channels.push_back(static_cast<int>(get_u32(data, pos)));
  if (pos >= data.size()) throw FormatError("checkpoint: truncated");
  net.frozen_feature_layers = data[pos++] != 0;
  net.cfg_.validate();
  net.rebuild_shapes();

  const std::uint64_t count = get_u64(data, pos);
  if (count != net.params_.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(data, pos);
    float v;
    std::memcpy(&v, &bits, 4);
    net.params_[static_cast<std::size_t>(i)] = static_cast<double>(v);
  }
  return net;
}

}  // namespace markush
