// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "binio.hpp"
#include "pstyle/error.hpp"

namespace pstyle::nn {
namespace {

constexpr char kMagic[4] = {'P', 'S', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

Image normalize_input(const Normalization& norm, const Image& input) {
  if (!norm.enabled) return input;
  Image out = input;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      double* px = out.pixel(y, x);
      for (int c = 0; c < out.channels(); ++c) px[c] = (px[c] - norm.mean[c]) / norm.stddev[c];
    }
  }
  return out;
}

}  // namespace

int Network::input_channels() const {
  for (const Stage& s : stages) {
    if (!s.layers.empty()) return s.layers.front().in_channels;
  }
  return 0;
}

void Network::validate() const {
  if (stages.empty()) throw ConfigError("network has no stages");
  int channels = input_channels();
  if (normalization.enabled && channels != 3) {
    throw ConfigError("input normalization requires a 3-channel network input");
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].layers.empty()) {
      throw ConfigError("network stage " + std::to_string(s) + " has no layers");
    }
    for (const ConvLayer& layer : stages[s].layers) {
      if (layer.in_channels != channels) {
        throw ConfigError("network stage " + std::to_string(s) + " expects " +
                          std::to_string(layer.in_channels) + " input channels, got " +
                          std::to_string(channels));
      }
      if (layer.out_channels <= 0 ||
          layer.weight.size() != static_cast<std::size_t>(9) * layer.in_channels * layer.out_channels ||
          layer.bias.size() != static_cast<std::size_t>(layer.out_channels)) {
        throw ConfigError("network stage " + std::to_string(s) + " has malformed weights");
      }
      channels = layer.out_channels;
    }
  }
}

Image conv3x3(const ConvLayer& layer, const Image& input) {
  const int h = input.height();
  const int w = input.width();
  const int in_c = layer.in_channels;
  const int out_c = layer.out_channels;
  Image out(h, w, out_c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* dst = out.pixel(y, x);
      for (int o = 0; o < out_c; ++o) dst[o] = layer.bias[o];
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const double* src = input.pixel(iy, ix);
          const double* wrow = &layer.weight[(static_cast<std::size_t>(ky) * 3 + kx) * out_c * in_c];
          for (int o = 0; o < out_c; ++o) {
            const double* wo = wrow + static_cast<std::size_t>(o) * in_c;
            double acc = 0.0;
            for (int i = 0; i < in_c; ++i) acc += wo[i] * src[i];
            dst[o] += acc;
          }
        }
      }
      if (layer.relu) {
        for (int o = 0; o < out_c; ++o) dst[o] = std::max(dst[o], 0.0);
      }
    }
  }
  return out;
}

Image conv3x3_backward(const ConvLayer& layer, const Image& grad_out) {
  const int h = grad_out.height();
  const int w = grad_out.width();
  const int in_c = layer.in_channels;
  const int out_c = layer.out_channels;
  Image grad_in(h, w, in_c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* g = grad_out.pixel(y, x);
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= w) continue;
          double* dst = grad_in.pixel(iy, ix);
          const double* wrow = &layer.weight[(static_cast<std::size_t>(ky) * 3 + kx) * out_c * in_c];
          for (int o = 0; o < out_c; ++o) {
            const double go = g[o];
            if (go == 0.0) continue;
            const double* wo = wrow + static_cast<std::size_t>(o) * in_c;
            for (int i = 0; i < in_c; ++i) dst[i] += go * wo[i];
          }
        }
      }
    }
  }
  return grad_in;
}

Image pool2(Pool kind, const Image& input, std::vector<std::uint32_t>* argmax) {
  if (kind == Pool::kNone) return input;
  const int h = (input.height() + 1) / 2;
  const int w = (input.width() + 1) / 2;
  const int c = input.channels();
  Image out(h, w, c);
  if (argmax) argmax->assign(out.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int y_end = std::min(2 * y + 2, input.height());
      const int x_end = std::min(2 * x + 2, input.width());
      for (int ch = 0; ch < c; ++ch) {
        if (kind == Pool::kAverage) {
          double sum = 0.0;
          for (int yy = 2 * y; yy < y_end; ++yy) {
            for (int xx = 2 * x; xx < x_end; ++xx) sum += input.at(yy, xx, ch);
          }
          out.at(y, x, ch) = sum / ((y_end - 2 * y) * (x_end - 2 * x));
        } else {
          double best = input.at(2 * y, 2 * x, ch);
          std::size_t best_idx = input.index(2 * y, 2 * x, ch);
          for (int yy = 2 * y; yy < y_end; ++yy) {
            for (int xx = 2 * x; xx < x_end; ++xx) {
              if (input.at(yy, xx, ch) > best) {
                best = input.at(yy, xx, ch);
                best_idx = input.index(yy, xx, ch);
              }
            }
          }
          out.at(y, x, ch) = best;
          if (argmax) (*argmax)[out.index(y, x, ch)] = static_cast<std::uint32_t>(best_idx);
        }
      }
    }
  }
  return out;
}

Image pool2_backward(Pool kind, const Image& grad_out, int in_height, int in_width,
                     const std::vector<std::uint32_t>& argmax) {
  if (kind == Pool::kNone) return grad_out;
  const int c = grad_out.channels();
  Image grad_in(in_height, in_width, c);
  for (int y = 0; y < grad_out.height(); ++y) {
    for (int x = 0; x < grad_out.width(); ++x) {
      const int y_end = std::min(2 * y + 2, in_height);
      const int x_end = std::min(2 * x + 2, in_width);
      for (int ch = 0; ch < c; ++ch) {
        const double g = grad_out.at(y, x, ch);
        if (kind == Pool::kAverage) {
          const double share = g / ((y_end - 2 * y) * (x_end - 2 * x));
          for (int yy = 2 * y; yy < y_end; ++yy) {
            for (int xx = 2 * x; xx < x_end; ++xx) grad_in.at(yy, xx, ch) += share;
          }
        } else {
          grad_in.data()[argmax[grad_out.index(y, x, ch)]] += g;
        }
      }
    }
  }
  return grad_in;
}

std::vector<Image> forward(const Network& net, const Image& input, int last_stage, Tape* tape) {
  if (last_stage < 0 || last_stage >= static_cast<int>(net.stages.size())) {
    throw ArgumentError("stage index " + std::to_string(last_stage) + " out of range");
  }
  if (input.channels() != net.input_channels()) {
    throw ValidationError("network expects " + std::to_string(net.input_channels()) +
                          " input channels, got " + std::to_string(input.channels()));
  }
  std::vector<Image> outputs;
  outputs.reserve(last_stage + 1);
  if (tape) {
    tape->stages.clear();
    tape->stages.resize(last_stage + 1);
  }
  Image current = normalize_input(net.normalization, input);
  for (int s = 0; s <= last_stage; ++s) {
    const Stage& stage = net.stages[s];
    Tape::StageRecord* rec = tape ? &tape->stages[s] : nullptr;
    if (rec) {
      rec->in_height = current.height();
      rec->in_width = current.width();
    }
    current = pool2(stage.pool, current, rec ? &rec->argmax : nullptr);
    for (const ConvLayer& layer : stage.layers) {
      Image next = conv3x3(layer, current);
      if (rec) {
        rec->layer_inputs.push_back(std::move(current));
        rec->layer_outputs.push_back(next);
      }
      current = std::move(next);
    }
    outputs.push_back(current);
  }
  return outputs;
}

Image backward(const Network& net, const Tape& tape, const std::vector<Image>& stage_grads) {
  int last = static_cast<int>(stage_grads.size()) - 1;
  while (last >= 0 && stage_grads[last].empty()) --last;
  if (last >= static_cast<int>(tape.stages.size())) {
    throw ArgumentError("gradient supplied for a stage the forward pass never reached");
  }
  Image grad;
  for (int s = last; s >= 0; --s) {
    const Stage& stage = net.stages[s];
    const Tape::StageRecord& rec = tape.stages[s];
    if (!stage_grads[s].empty()) {
      if (grad.empty()) {
        grad = stage_grads[s];
      } else {
        grad += stage_grads[s];
      }
    }
    if (grad.empty()) continue;
    for (int l = static_cast<int>(stage.layers.size()) - 1; l >= 0; --l) {
      const ConvLayer& layer = stage.layers[l];
      if (layer.relu) {
        const Image& out = rec.layer_outputs[l];
        for (std::size_t i = 0; i < grad.size(); ++i) {
          if (out.data()[i] <= 0.0) grad.data()[i] = 0.0;
        }
      }
      grad = conv3x3_backward(layer, grad);
    }
    grad = pool2_backward(stage.pool, grad, rec.in_height, rec.in_width, rec.argmax);
  }
  if (grad.empty()) {
    const Tape::StageRecord& first = tape.stages.front();
    return Image(first.in_height, first.in_width, net.input_channels());
  }
  if (net.normalization.enabled) {
    for (int y = 0; y < grad.height(); ++y) {
      for (int x = 0; x < grad.width(); ++x) {
        double* px = grad.pixel(y, x);
        for (int c = 0; c < grad.channels(); ++c) px[c] /= net.normalization.stddev[c];
      }
    }
  }
  return grad;
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open weights file " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError("not a PSNN weights file: " + path.string());
  }
  const std::uint32_t version = binio::read_u32(is, "weights header");
  if (version != kVersion) {
    throw IoError("weights file version " + std::to_string(version) + " unsupported (expected " +
                  std::to_string(kVersion) + ")");
  }
  Network net;
  const std::uint32_t num_stages = binio::read_u32(is, "weights header");
  if (num_stages == 0 || num_stages > 64) throw IoError("implausible stage count in weights file");
  net.stages.resize(num_stages);
  for (Stage& stage : net.stages) {
    const std::uint8_t pool = binio::read_u8(is, "stage header");
    if (pool > 2) throw IoError("unknown pooling kind in weights file");
    stage.pool = static_cast<Pool>(pool);
    const std::uint32_t num_layers = binio::read_u32(is, "stage header");
    if (num_layers == 0 || num_layers > 64) throw IoError("implausible layer count in weights file");
    stage.layers.resize(num_layers);
    for (ConvLayer& layer : stage.layers) {
      layer.in_channels = static_cast<int>(binio::read_u32(is, "layer header"));
      layer.out_channels = static_cast<int>(binio::read_u32(is, "layer header"));
      layer.relu = binio::read_u8(is, "layer header") != 0;
      if (layer.in_channels <= 0 || layer.out_channels <= 0 || layer.in_channels > 8192 ||
          layer.out_channels > 8192) {
        throw IoError("implausible channel count in weights file");
      }
      layer.weight.assign(static_cast<std::size_t>(9) * layer.in_channels * layer.out_channels, 0.0);
      for (int o = 0; o < layer.out_channels; ++o) {
        for (int i = 0; i < layer.in_channels; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) layer.w(ky, kx, o, i) = binio::read_f32(is, "conv weights");
          }
        }
      }
      layer.bias.resize(layer.out_channels);
      for (double& b : layer.bias) b = binio::read_f32(is, "conv bias");
    }
  }
  net.normalization.enabled = binio::read_u8(is, "normalization") != 0;
  for (double& m : net.normalization.mean) m = binio::read_f32(is, "normalization");
  for (double& s : net.normalization.stddev) s = binio::read_f32(is, "normalization");
  net.validate();
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  net.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write weights file " + path.string());
  os.write(kMagic, 4);
  binio::write_u32(os, kVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(net.stages.size()));
  for (const Stage& stage : net.stages) {
    binio::write_u8(os, static_cast<std::uint8_t>(stage.pool));
    binio::write_u32(os, static_cast<std::uint32_t>(stage.layers.size()));
    for (const ConvLayer& layer : stage.layers) {
      binio::write_u32(os, static_cast<std::uint32_t>(layer.in_channels));
      binio::write_u32(os, static_cast<std::uint32_t>(layer.out_channels));
      binio::write_u8(os, layer.relu ? 1 : 0);
      for (int o = 0; o < layer.out_channels; ++o) {
        for (int i = 0; i < layer.in_channels; ++i) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              binio::write_f32(os, static_cast<float>(layer.w(ky, kx, o, i)));
            }
          }
        }
      }
      for (double b : layer.bias) binio::write_f32(os, static_cast<float>(b));
    }
  }
  binio::write_u8(os, net.normalization.enabled ? 1 : 0);
  for (double m : net.normalization.mean) binio::write_f32(os, static_cast<float>(m));
  for (double s : net.normalization.stddev) binio::write_f32(os, static_cast<float>(s));
  if (!os) throw IoError("failed writing weights file " + path.string());
}

ConvLayer seeded_layer(int in_channels, int out_channels, bool relu, std::uint32_t seed,
                       double bias_scale) {
  std::mt19937 rng(seed);
  auto uniform = [&rng]() { return (static_cast<double>(rng()) + 0.5) / 4294967296.0; };
  ConvLayer layer;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.relu = relu;
  const double bound = std::sqrt(6.0 / (9.0 * in_channels));
  layer.weight.resize(static_cast<std::size_t>(9) * in_channels * out_channels);
  for (int o = 0; o < out_channels; ++o) {
    for (int i = 0; i < in_channels; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          // Quantize through float so saved weight files reproduce the layer.
          layer.w(ky, kx, o, i) = static_cast<float>((2.0 * uniform() - 1.0) * bound);
        }
      }
    }
  }
  layer.bias.resize(out_channels);
  for (double& b : layer.bias) b = static_cast<float>((2.0 * uniform() - 1.0) * bias_scale);
  return layer;
}

}  // namespace pstyle::nn
