#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "efcn/tensor.hpp"

namespace efcn {

enum class Activation { None, Relu };

// Kernel layout is kh x kw x D x e, where the forward convolution maps D
// channels to e channels. A transposed convolution with the same kernel maps
// e channels back to D channels, so for a deconvolution layer D is its output
// and e its input channel count.
struct ConvSpec {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t depth = 1;    // D
  std::size_t filters = 1;  // e
  std::size_t stride = 1;
  Activation activation = Activation::None;
  std::vector<double> kernel;
  std::vector<double> bias;  // e for convolution, D for deconvolution

  std::size_t kernel_size() const { return kernel_h * kernel_w * depth * filters; }
};

struct PoolSpec {
  std::size_t window = 2;
};

struct ConvTrace {
  Tensor input;
  Tensor pre_activation;
};

struct PoolTrace {
  std::vector<std::size_t> input_dims;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Valid-geometry output size of a strided convolution; throws unless
// (in - kernel) is a non-negative multiple of the stride.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride);
std::size_t deconv_output_size(std::size_t in, std::size_t kernel, std::size_t stride);

// Raw linear operators without bias or activation. conv2d_transpose is the
// exact adjoint of conv2d_valid for the same kernel and stride.
Tensor conv2d_valid(const Tensor& in, const ConvSpec& spec);
Tensor conv2d_transpose(const Tensor& in, const ConvSpec& spec);

std::pair<Tensor, ConvTrace> conv_forward(const Tensor& z, const ConvSpec& spec);
std::pair<Tensor, PoolTrace> maxpool_forward(const Tensor& z, const PoolSpec& spec);
// The upsample factor is the transposed-convolution stride; the output is
// (h - 1) * factor + kernel_h rows, which equals h * factor when the kernel
// matches the factor.
std::pair<Tensor, ConvTrace> deconv_forward(const Tensor& z, const ConvSpec& spec, std::size_t upsample_factor);

// Backward passes accumulate parameter gradients and return d/d(input).
Tensor conv_backward(const Tensor& grad_out, const ConvSpec& spec, const ConvTrace& trace,
                     std::span<double> grad_kernel, std::span<double> grad_bias);
Tensor deconv_backward(const Tensor& grad_out, const ConvSpec& spec, const ConvTrace& trace,
                       std::span<double> grad_kernel, std::span<double> grad_bias);
Tensor maxpool_backward(const Tensor& grad_out, const PoolTrace& trace);

enum class LayerKind { Conv, MaxPool, Deconv, Skip };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t filters = 16;  // output channels (conv, deconv)
  std::size_t stride = 1;    // conv stride or deconv upsample factor
  std::size_t window = 2;    // pooling window
  Activation activation = Activation::Relu;
  // Skip merge: 1x1 projection of this earlier layer's output is added to the
  // current map. -1 refers to the input image.
  int from = -1;

  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  std::size_t input_channels = 3;
  std::vector<LayerSpec> layers;

  std::size_t feature_channels() const;

  // conv3x3(16)+relu, pool2, conv2x2(16)+relu, pool2, deconv 8x8 x4 (P).
  // Maps 32x32 (and 8x8) inputs back to full resolution.
  static Architecture toy(std::size_t input_channels = 3, std::size_t features = 16);
  // Same encoder; the decoder upsamples x2 twice with a 1x1-projected merge
  // of the first pooled map in between.
  static Architecture toy_skip(std::size_t input_channels = 3, std::size_t features = 16);

  bool operator==(const Architecture&) const = default;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  bool operator==(const Shape&) const = default;
};

// Output shape of every layer. Shape errors name the offending layer.
std::vector<Shape> infer_shapes(const Architecture& arch, std::size_t height, std::size_t width);

struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;
  bool operator==(const LayerParams&) const = default;
};

struct BackboneTrace {
  std::vector<Tensor> outputs;  // per layer
  std::vector<Tensor> pre_activations;
  std::vector<PoolTrace> pools;
};

class Backbone {
 public:
  Backbone() = default;
  Backbone(Architecture arch, std::vector<LayerParams> params);

  // He-style normal initialization, zero biases.
  static Backbone random(const Architecture& arch, std::mt19937_64& rng);

  const Architecture& architecture() const { return arch_; }
  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  std::vector<LayerParams> zero_grads() const;

  Tensor forward(const Tensor& image, BackboneTrace* trace = nullptr) const;
  // Accumulates parameter gradients into `grads`; returns d/d(image).
  Tensor backward(const Tensor& image, const Tensor& grad_features, const BackboneTrace& trace,
                  std::vector<LayerParams>& grads) const;

  bool operator==(const Backbone&) const = default;

 private:
  ConvSpec conv_spec(std::size_t layer, std::size_t in_channels) const;

  Architecture arch_;
  std::vector<LayerParams> params_;
};

}  // namespace efcn
