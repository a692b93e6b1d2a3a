#include "efcn/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "efcn/error.hpp"

namespace efcn {

namespace {

struct Geometry {
  std::size_t kh, kw, depth, filters, stride;
};

Geometry geometry_of(const ConvSpec& s) { return {s.kernel_h, s.kernel_w, s.depth, s.filters, s.stride}; }

void check_kernel(const ConvSpec& s) {
  if (s.kernel_h == 0 || s.kernel_w == 0 || s.depth == 0 || s.filters == 0 || s.stride == 0)
    fail(ErrorKind::Dimension, "convolution geometry must be positive");
  if (s.kernel.size() != s.kernel_size()) fail(ErrorKind::Dimension, "kernel length does not match its geometry");
}

// out[y][x][o] = sum in[y r + dy][x r + dx][i] * k[dy][dx][i][o]
Tensor valid_raw(const Tensor& in, std::span<const double> k, const Geometry& g) {
  if (in.rank() != 3 || in.channels() != g.depth) fail(ErrorKind::Dimension, "convolution input has wrong channel count");
  const std::size_t oh = conv_output_size(in.height(), g.kh, g.stride);
  const std::size_t ow = conv_output_size(in.width(), g.kw, g.stride);
  Tensor out = Tensor::hwc(oh, ow, g.filters);
  const std::size_t iw = in.width();
  const double* src = in.data().data();
  double* dst = out.data().data();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double* o = dst + (y * ow + x) * g.filters;
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          const double* z = src + ((y * g.stride + dy) * iw + (x * g.stride + dx)) * g.depth;
          const double* kk = k.data() + (dy * g.kw + dx) * g.depth * g.filters;
          for (std::size_t i = 0; i < g.depth; ++i) {
            const double zi = z[i];
            const double* kr = kk + i * g.filters;
            for (std::size_t f = 0; f < g.filters; ++f) o[f] += zi * kr[f];
          }
        }
      }
    }
  }
  return out;
}

// Adjoint of valid_raw: in has `filters` channels, output has `depth`.
Tensor transpose_raw(const Tensor& in, std::span<const double> k, const Geometry& g) {
  if (in.rank() != 3 || in.channels() != g.filters)
    fail(ErrorKind::Dimension, "transposed convolution input has wrong channel count");
  const std::size_t oh = deconv_output_size(in.height(), g.kh, g.stride);
  const std::size_t ow = deconv_output_size(in.width(), g.kw, g.stride);
  Tensor out = Tensor::hwc(oh, ow, g.depth);
  const std::size_t ih = in.height();
  const std::size_t iw = in.width();
  const double* src = in.data().data();
  double* dst = out.data().data();
  for (std::size_t y = 0; y < ih; ++y) {
    for (std::size_t x = 0; x < iw; ++x) {
      const double* z = src + (y * iw + x) * g.filters;
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          double* o = dst + ((y * g.stride + dy) * ow + (x * g.stride + dx)) * g.depth;
          const double* kk = k.data() + (dy * g.kw + dx) * g.depth * g.filters;
          for (std::size_t i = 0; i < g.depth; ++i) {
            const double* kr = kk + i * g.filters;
            double acc = 0.0;
            for (std::size_t f = 0; f < g.filters; ++f) acc += kr[f] * z[f];
            o[i] += acc;
          }
        }
      }
    }
  }
  return out;
}

// dk[dy][dx][i][o] += big[y r + dy][x r + dx][i] * small[y][x][o]
void kernel_grad_raw(const Tensor& big, const Tensor& small, const Geometry& g, std::span<double> dk) {
  const std::size_t sh = small.height();
  const std::size_t sw = small.width();
  const std::size_t bw = big.width();
  const double* b = big.data().data();
  const double* s = small.data().data();
  for (std::size_t y = 0; y < sh; ++y) {
    for (std::size_t x = 0; x < sw; ++x) {
      const double* so = s + (y * sw + x) * g.filters;
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          const double* bi = b + ((y * g.stride + dy) * bw + (x * g.stride + dx)) * g.depth;
          double* kk = dk.data() + (dy * g.kw + dx) * g.depth * g.filters;
          for (std::size_t i = 0; i < g.depth; ++i) {
            const double v = bi[i];
            double* kr = kk + i * g.filters;
            for (std::size_t f = 0; f < g.filters; ++f) kr[f] += v * so[f];
          }
        }
      }
    }
  }
}

void add_bias(Tensor& t, std::span<const double> bias) {
  const std::size_t c = t.channels();
  if (bias.size() != c) fail(ErrorKind::Dimension, "bias length does not match channel count");
  auto d = t.data();
  for (std::size_t p = 0; p < d.size(); p += c) {
    for (std::size_t k = 0; k < c; ++k) d[p + k] += bias[k];
  }
}

Tensor activate(const Tensor& pre, Activation act) {
  Tensor out = pre;
  if (act == Activation::Relu) {
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

// Gradient w.r.t. the pre-activation, plus the bias gradient.
Tensor through_activation(const Tensor& grad_out, const Tensor& pre, Activation act, std::span<double> grad_bias) {
  if (grad_out.dims() != pre.dims()) fail(ErrorKind::ContractViolation, "gradient does not match the cached layer output");
  Tensor g = grad_out;
  if (act == Activation::Relu) {
    auto gd = g.data();
    auto pd = pre.data();
    for (std::size_t i = 0; i < gd.size(); ++i) {
      if (!(pd[i] > 0.0)) gd[i] = 0.0;
    }
  }
  const std::size_t c = g.channels();
  if (grad_bias.size() != c) fail(ErrorKind::Dimension, "bias gradient length does not match channel count");
  auto gd = g.data();
  for (std::size_t p = 0; p < gd.size(); p += c) {
    for (std::size_t k = 0; k < c; ++k) grad_bias[k] += gd[p + k];
  }
  return g;
}

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.dims() != src.dims()) fail(ErrorKind::Dimension, "tensor shapes differ in elementwise sum");
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0) fail(ErrorKind::Dimension, "kernel and stride must be positive");
  if (kernel > in) fail(ErrorKind::Dimension, "kernel larger than input (" + std::to_string(kernel) + " > " + std::to_string(in) + ")");
  if ((in - kernel) % stride != 0)
    fail(ErrorKind::Dimension, "input " + std::to_string(in) + " minus kernel " + std::to_string(kernel) +
                                   " is not divisible by stride " + std::to_string(stride));
  return (in - kernel) / stride + 1;
}

std::size_t deconv_output_size(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0 || in == 0) fail(ErrorKind::Dimension, "deconvolution geometry must be positive");
  return (in - 1) * stride + kernel;
}

Tensor conv2d_valid(const Tensor& in, const ConvSpec& spec) {
  check_kernel(spec);
  return valid_raw(in, spec.kernel, geometry_of(spec));
}

Tensor conv2d_transpose(const Tensor& in, const ConvSpec& spec) {
  check_kernel(spec);
  return transpose_raw(in, spec.kernel, geometry_of(spec));
}

std::pair<Tensor, ConvTrace> conv_forward(const Tensor& z, const ConvSpec& spec) {
  Tensor pre = conv2d_valid(z, spec);
  add_bias(pre, spec.bias);
  Tensor out = activate(pre, spec.activation);
  return {std::move(out), ConvTrace{z, std::move(pre)}};
}

std::pair<Tensor, ConvTrace> deconv_forward(const Tensor& z, const ConvSpec& spec, std::size_t upsample_factor) {
  ConvSpec s = spec;
  s.stride = upsample_factor;
  Tensor pre = conv2d_transpose(z, s);
  add_bias(pre, s.bias);
  Tensor out = activate(pre, s.activation);
  return {std::move(out), ConvTrace{z, std::move(pre)}};
}

Tensor conv_backward(const Tensor& grad_out, const ConvSpec& spec, const ConvTrace& trace,
                     std::span<double> grad_kernel, std::span<double> grad_bias) {
  check_kernel(spec);
  if (grad_kernel.size() != spec.kernel_size()) fail(ErrorKind::Dimension, "kernel gradient has the wrong length");
  const Tensor g = through_activation(grad_out, trace.pre_activation, spec.activation, grad_bias);
  const Geometry geo = geometry_of(spec);
  kernel_grad_raw(trace.input, g, geo, grad_kernel);
  return transpose_raw(g, spec.kernel, geo);
}

Tensor deconv_backward(const Tensor& grad_out, const ConvSpec& spec, const ConvTrace& trace,
                       std::span<double> grad_kernel, std::span<double> grad_bias) {
  check_kernel(spec);
  if (grad_kernel.size() != spec.kernel_size()) fail(ErrorKind::Dimension, "kernel gradient has the wrong length");
  const Tensor g = through_activation(grad_out, trace.pre_activation, spec.activation, grad_bias);
  const Geometry geo = geometry_of(spec);
  kernel_grad_raw(g, trace.input, geo, grad_kernel);
  return valid_raw(g, spec.kernel, geo);
}

std::pair<Tensor, PoolTrace> maxpool_forward(const Tensor& z, const PoolSpec& spec) {
  const std::size_t s = spec.window;
  if (z.rank() != 3 || s == 0) fail(ErrorKind::Dimension, "max-pooling expects an H x W x C map");
  if (z.height() % s != 0 || z.width() % s != 0)
    fail(ErrorKind::Dimension, "max-pooling input " + std::to_string(z.height()) + "x" + std::to_string(z.width()) +
                                   " not divisible by window " + std::to_string(s));
  const std::size_t oh = z.height() / s;
  const std::size_t ow = z.width() / s;
  const std::size_t c = z.channels();
  Tensor out = Tensor::hwc(oh, ow, c);
  PoolTrace trace{z.dims(), std::vector<std::size_t>(out.size())};
  const auto zd = z.data();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        std::size_t best = ((y * s) * z.width() + x * s) * c + k;
        for (std::size_t dy = 0; dy < s; ++dy) {
          for (std::size_t dx = 0; dx < s; ++dx) {
            const std::size_t idx = ((y * s + dy) * z.width() + (x * s + dx)) * c + k;
            if (zd[idx] > zd[best]) best = idx;
          }
        }
        const std::size_t o = (y * ow + x) * c + k;
        out.data()[o] = zd[best];
        trace.argmax[o] = best;
      }
    }
  }
  return {std::move(out), std::move(trace)};
}

Tensor maxpool_backward(const Tensor& grad_out, const PoolTrace& trace) {
  if (grad_out.size() != trace.argmax.size()) fail(ErrorKind::ContractViolation, "pooling gradient does not match trace");
  Tensor g(trace.input_dims, 0.0);
  auto gd = g.data();
  const auto go = grad_out.data();
  for (std::size_t o = 0; o < go.size(); ++o) gd[trace.argmax[o]] += go[o];
  return g;
}

std::size_t Architecture::feature_channels() const {
  std::size_t c = input_channels;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Deconv) c = l.filters;
  }
  return c;
}

Architecture Architecture::toy(std::size_t input_channels, std::size_t features) {
  Architecture a;
  a.input_channels = input_channels;
  a.layers = {
      {LayerKind::Conv, 3, 3, 16, 1, 2, Activation::Relu, -1},
      {LayerKind::MaxPool, 1, 1, 0, 1, 2, Activation::None, -1},
      {LayerKind::Conv, 2, 2, 16, 1, 2, Activation::Relu, -1},
      {LayerKind::MaxPool, 1, 1, 0, 1, 2, Activation::None, -1},
      {LayerKind::Deconv, 8, 8, features, 4, 2, Activation::None, -1},
  };
  return a;
}

Architecture Architecture::toy_skip(std::size_t input_channels, std::size_t features) {
  Architecture a;
  a.input_channels = input_channels;
  a.layers = {
      {LayerKind::Conv, 3, 3, 16, 1, 2, Activation::Relu, -1},
      {LayerKind::MaxPool, 1, 1, 0, 1, 2, Activation::None, -1},
      {LayerKind::Conv, 2, 2, 16, 1, 2, Activation::Relu, -1},
      {LayerKind::MaxPool, 1, 1, 0, 1, 2, Activation::None, -1},
      {LayerKind::Deconv, 3, 3, 16, 2, 2, Activation::Relu, -1},
      {LayerKind::Skip, 1, 1, 0, 1, 2, Activation::None, 1},
      {LayerKind::Deconv, 4, 4, features, 2, 2, Activation::None, -1},
  };
  return a;
}

std::vector<Shape> infer_shapes(const Architecture& arch, std::size_t height, std::size_t width) {
  if (arch.input_channels == 0 || height == 0 || width == 0) fail(ErrorKind::Dimension, "input shape must be positive");
  std::vector<Shape> shapes;
  Shape cur{height, width, arch.input_channels};
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    try {
      switch (l.kind) {
        case LayerKind::Conv:
          if (l.filters == 0) fail(ErrorKind::Dimension, "convolution needs at least one filter");
          cur = {conv_output_size(cur.height, l.kernel_h, l.stride), conv_output_size(cur.width, l.kernel_w, l.stride),
                 l.filters};
          break;
        case LayerKind::MaxPool:
          if (l.window == 0 || cur.height % l.window != 0 || cur.width % l.window != 0)
            fail(ErrorKind::Dimension, "pooling window " + std::to_string(l.window) + " does not divide " +
                                           std::to_string(cur.height) + "x" + std::to_string(cur.width));
          cur = {cur.height / l.window, cur.width / l.window, cur.channels};
          break;
        case LayerKind::Deconv:
          if (l.filters == 0) fail(ErrorKind::Dimension, "deconvolution needs at least one filter");
          cur = {deconv_output_size(cur.height, l.kernel_h, l.stride), deconv_output_size(cur.width, l.kernel_w, l.stride),
                 l.filters};
          break;
        case LayerKind::Skip: {
          if (l.from < -1 || l.from >= static_cast<int>(i)) fail(ErrorKind::Dimension, "skip source must be an earlier layer");
          const Shape src = l.from < 0 ? Shape{height, width, arch.input_channels} : shapes[static_cast<std::size_t>(l.from)];
          if (src.height != cur.height || src.width != cur.width)
            fail(ErrorKind::Dimension, "skip source is " + std::to_string(src.height) + "x" + std::to_string(src.width) +
                                           ", merge point is " + std::to_string(cur.height) + "x" + std::to_string(cur.width));
          break;
        }
      }
    } catch (const Error& e) {
      fail(e.kind(), "layer " + std::to_string(i) + ": " + e.what());
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Backbone::Backbone(Architecture arch, std::vector<LayerParams> params) : arch_(std::move(arch)), params_(std::move(params)) {
  if (params_.size() != arch_.layers.size()) fail(ErrorKind::Dimension, "one parameter block per layer is required");
  const auto sizes = zero_grads();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].weights.size() != sizes[i].weights.size() || params_[i].bias.size() != sizes[i].bias.size())
      fail(ErrorKind::Dimension, "layer " + std::to_string(i) + ": parameter sizes do not match the architecture");
  }
}

std::vector<LayerParams> Backbone::zero_grads() const {
  std::vector<LayerParams> out(arch_.layers.size());
  std::size_t c = arch_.input_channels;
  std::vector<std::size_t> channels;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Deconv:
        out[i].weights.assign(l.kernel_h * l.kernel_w * c * l.filters, 0.0);
        out[i].bias.assign(l.filters, 0.0);
        c = l.filters;
        break;
      case LayerKind::MaxPool:
        break;
      case LayerKind::Skip: {
        const std::size_t src = l.from < 0 ? arch_.input_channels : channels.at(static_cast<std::size_t>(l.from));
        out[i].weights.assign(src * c, 0.0);
        out[i].bias.assign(c, 0.0);
        break;
      }
    }
    channels.push_back(c);
  }
  return out;
}

Backbone Backbone::random(const Architecture& arch, std::mt19937_64& rng) {
  Backbone b;
  b.arch_ = arch;
  b.params_ = b.zero_grads();
  std::size_t c = arch.input_channels;
  std::vector<std::size_t> channels;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    double fan_in = 0.0;
    switch (l.kind) {
      case LayerKind::Conv:
        fan_in = static_cast<double>(l.kernel_h * l.kernel_w * c);
        break;
      case LayerKind::Deconv:
        // Taps reaching one output pixel.
        fan_in = std::max(1.0, static_cast<double>(l.kernel_h * l.kernel_w * c) / static_cast<double>(l.stride * l.stride));
        break;
      case LayerKind::Skip:
        fan_in = static_cast<double>(l.from < 0 ? arch.input_channels : channels.at(static_cast<std::size_t>(l.from)));
        break;
      case LayerKind::MaxPool:
        break;
    }
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Deconv) c = l.filters;
    channels.push_back(c);
    if (fan_in == 0.0) continue;
    const double gain = l.activation == Activation::Relu && l.kind != LayerKind::Skip ? 2.0 : 1.0;
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    for (double& w : b.params_[i].weights) w = dist(rng);
  }
  return b;
}

ConvSpec Backbone::conv_spec(std::size_t layer, std::size_t in_channels) const {
  const LayerSpec& l = arch_.layers[layer];
  ConvSpec s;
  s.kernel_h = l.kernel_h;
  s.kernel_w = l.kernel_w;
  s.stride = l.stride;
  s.activation = l.activation;
  if (l.kind == LayerKind::Conv) {
    s.depth = in_channels;
    s.filters = l.filters;
  } else {
    s.depth = l.filters;
    s.filters = in_channels;
  }
  return s;
}

Tensor Backbone::forward(const Tensor& image, BackboneTrace* trace) const {
  if (image.rank() != 3 || image.channels() != arch_.input_channels)
    fail(ErrorKind::Dimension, "backbone input must be H x W x " + std::to_string(arch_.input_channels));
  infer_shapes(arch_, image.height(), image.width());

  BackboneTrace local;
  BackboneTrace& t = trace ? *trace : local;
  t.outputs.assign(arch_.layers.size(), Tensor{});
  t.pre_activations.assign(arch_.layers.size(), Tensor{});
  t.pools.assign(arch_.layers.size(), PoolTrace{});

  const Tensor* cur = &image;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    const LayerParams& p = params_[i];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Deconv: {
        const ConvSpec s = conv_spec(i, cur->channels());
        const Geometry g = geometry_of(s);
        Tensor pre = l.kind == LayerKind::Conv ? valid_raw(*cur, p.weights, g) : transpose_raw(*cur, p.weights, g);
        add_bias(pre, p.bias);
        t.outputs[i] = activate(pre, l.activation);
        t.pre_activations[i] = std::move(pre);
        break;
      }
      case LayerKind::MaxPool: {
        auto [out, pool] = maxpool_forward(*cur, PoolSpec{l.window});
        t.outputs[i] = std::move(out);
        t.pools[i] = std::move(pool);
        break;
      }
      case LayerKind::Skip: {
        const Tensor& src = l.from < 0 ? image : t.outputs[static_cast<std::size_t>(l.from)];
        const Geometry g{1, 1, src.channels(), cur->channels(), 1};
        Tensor merged = valid_raw(src, p.weights, g);
        add_bias(merged, p.bias);
        add_into(merged, *cur);
        t.outputs[i] = std::move(merged);
        break;
      }
    }
    cur = &t.outputs[i];
  }
  return *cur;
}

Tensor Backbone::backward(const Tensor& image, const Tensor& grad_features, const BackboneTrace& trace,
                          std::vector<LayerParams>& grads) const {
  const std::size_t n = arch_.layers.size();
  if (trace.outputs.size() != n || grads.size() != n) fail(ErrorKind::ContractViolation, "backbone trace does not match");
  std::vector<Tensor> pending(n);  // extra gradient reaching a layer output through skips
  Tensor image_extra;
  Tensor g = grad_features;
  for (std::size_t i = n; i-- > 0;) {
    if (!pending[i].empty()) add_into(g, pending[i]);
    const LayerSpec& l = arch_.layers[i];
    const LayerParams& p = params_[i];
    const Tensor& input = i == 0 ? image : trace.outputs[i - 1];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Deconv: {
        const ConvSpec s = conv_spec(i, input.channels());
        const Geometry geo = geometry_of(s);
        const Tensor gp = through_activation(g, trace.pre_activations[i], l.activation, grads[i].bias);
        if (l.kind == LayerKind::Conv) {
          kernel_grad_raw(input, gp, geo, grads[i].weights);
          g = transpose_raw(gp, p.weights, geo);
        } else {
          kernel_grad_raw(gp, input, geo, grads[i].weights);
          g = valid_raw(gp, p.weights, geo);
        }
        break;
      }
      case LayerKind::MaxPool:
        g = maxpool_backward(g, trace.pools[i]);
        break;
      case LayerKind::Skip: {
        const Tensor& src = l.from < 0 ? image : trace.outputs[static_cast<std::size_t>(l.from)];
        const Geometry geo{1, 1, src.channels(), g.channels(), 1};
        const std::size_t c = g.channels();
        auto gd = g.data();
        for (std::size_t q = 0; q < gd.size(); q += c) {
          for (std::size_t k = 0; k < c; ++k) grads[i].bias[k] += gd[q + k];
        }
        kernel_grad_raw(src, g, geo, grads[i].weights);
        Tensor to_src = transpose_raw(g, p.weights, geo);
        Tensor& slot = l.from < 0 ? image_extra : pending[static_cast<std::size_t>(l.from)];
        if (slot.empty())
          slot = std::move(to_src);
        else
          add_into(slot, to_src);
        break;  // identity path: g passes through unchanged
      }
    }
  }
  if (!image_extra.empty()) add_into(g, image_extra);
  return g;
}

}  // namespace efcn
