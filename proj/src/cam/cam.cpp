#include "ecam/cam.hpp"

#include <fmt/format.h>

#include "ecam/error.hpp"
#include "ecam/simd/kernels.hpp"

namespace ecam {
namespace {

void require_match(const ActivationMap& a, const FcKernel& w) {
  if (a.channels() != w.in_channels()) {
    throw DimensionError(fmt::format("activations have {} channels but the dense kernel expects {}", a.channels(),
                                     w.in_channels()));
  }
}

void require_match(const FcKernel& w, const ProxyVector& p) {
  if (p.dim() != w.embedding_dim()) {
    throw DimensionError(fmt::format("proxy '{}' has dimension {} but the embedding has {}", p.class_id, p.dim(),
                                     w.embedding_dim()));
  }
}

// Dense layer backward: dL/dpooled = w dL/dy.
Tensor dense_backward(const FcKernel& w, const Tensor& grad_out) { return matvec(w.data, grad_out, Transpose::no); }

// Global average pooling backward: each spatial position receives 1/Z of
// the pooled gradient of its channel.
Tensor pool_backward(const Tensor& grad_pooled, std::size_t height, std::size_t width) {
  const std::size_t z = height * width;
  const double inv_z = 1.0 / static_cast<double>(z);
  std::vector<double> out(grad_pooled.size() * z);
  for (std::size_t k = 0; k < grad_pooled.size(); ++k) {
    const double g = grad_pooled[k] * inv_z;
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(k * z), out.begin() + static_cast<std::ptrdiff_t>((k + 1) * z), g);
  }
  return Tensor({grad_pooled.size(), height, width}, std::move(out));
}

}  // namespace

ActivationMap::ActivationMap(Tensor d, std::string id) : data(std::move(d)), source_image_id(std::move(id)) {
  if (data.rank() != 3) {
    throw DimensionError(fmt::format("activation map must be K x H x W, got {}", shape_to_string(data.shape())));
  }
}

FcKernel::FcKernel(Tensor d) : data(std::move(d)) {
  if (data.rank() != 2) throw DimensionError(fmt::format("dense kernel must be K x d, got {}", shape_to_string(data.shape())));
}

std::string_view to_string(GradientPath path) { return path == GradientPath::backprop ? "backprop" : "closed_form"; }

GradientPath parse_gradient_path(std::string_view name) {
  if (name == "backprop") return GradientPath::backprop;
  if (name == "closed_form") return GradientPath::closed_form;
  throw InvalidArgumentError(fmt::format("unknown gradient path '{}' (backprop|closed_form)", name));
}

EmbeddingPair forward_head(const ActivationMap& a, const FcKernel& w) {
  require_match(a, w);
  Tensor raw = matvec(w.data, spatial_mean(a.data), Transpose::yes);
  return EmbeddingPair::from_raw(std::move(raw));
}

double proxy_loss(const EmbeddingPair& y, const ProxyVector& p) {
  if (y.raw.size() != p.dim()) {
    throw DimensionError(fmt::format("proxy_loss: embedding dimension {} vs proxy dimension {}", y.raw.size(), p.dim()));
  }
  return dot(y.raw, p.values);
}

Tensor grad_backprop(const ActivationMap& a, const FcKernel& w, const ProxyVector& p) {
  require_match(a, w);
  require_match(w, p);
  // dL/dy = p for L = y . p
  const Tensor& grad_y = p.values;
  return pool_backward(dense_backward(w, grad_y), a.height(), a.width());
}

Tensor grad_closed_form(const FcKernel& w, const ProxyVector& p, std::size_t z) {
  require_match(w, p);
  if (z == 0) throw InvalidArgumentError("grad_closed_form: spatial size must be at least 1");
  const Tensor wp = matvec(w.data, p.values, Transpose::no);
  std::vector<double> out(wp.size());
  simd::active().divide(wp.data(), static_cast<double>(z), out.data(), wp.size());
  return Tensor::vector(std::move(out));
}

ChannelWeights channel_weights(const Tensor& gradient, std::string proxy_id) {
  return {spatial_mean(gradient), std::move(proxy_id)};
}

Heatmap heatmap(const ChannelWeights& alpha, const ActivationMap& a) {
  if (alpha.alpha.rank() != 1 || alpha.alpha.size() != a.channels()) {
    throw DimensionError(fmt::format("{} channel weights for {} activation channels", alpha.alpha.size(), a.channels()));
  }
  const std::size_t z = a.spatial_size();
  const auto& k = simd::active();
  std::vector<double> acc(z, 0.0);
  for (std::size_t c = 0; c < a.channels(); ++c) k.axpy(alpha.alpha[c], a.data.data() + c * z, acc.data(), z);
  k.relu(acc.data(), acc.data(), z);
  return {Tensor({a.height(), a.width()}, std::move(acc)), false, false, std::nullopt};
}

Heatmap normalize_heatmap(const Heatmap& h) {
  const auto& k = simd::active();
  const double peak = k.max(h.grid.data(), h.grid.size());
  if (peak < 0.0) throw InvalidArgumentError("normalize_heatmap: grid has negative values");
  Heatmap out = h;
  if (peak == 0.0) {
    out.degenerate = true;
    out.normalized = false;
    return out;
  }
  std::vector<double> v(h.grid.size());
  k.divide(h.grid.data(), peak, v.data(), v.size());
  out.grid = Tensor(h.grid.shape(), std::move(v));
  out.normalized = true;
  out.degenerate = false;
  return out;
}

Heatmap upsample_heatmap(const Heatmap& h, ImageDims dims) {
  Heatmap out = h;
  out.grid = bilinear_upsample(h.grid, dims.height, dims.width);
  out.upsampled_to = dims;
  return out;
}

Heatmap embedding_cam(const ActivationMap& a, const FcKernel& w, const ProxyVector& p, GradientPath path) {
  require_match(a, w);
  require_match(w, p);
  // The closed-form gradient is spatially constant, so its spatial mean is
  // the vector itself.
  const ChannelWeights alpha = path == GradientPath::backprop
                                   ? channel_weights(grad_backprop(a, w, p), p.class_id)
                                   : ChannelWeights{grad_closed_form(w, p, a.spatial_size()), p.class_id};
  return normalize_heatmap(heatmap(alpha, a));
}

Heatmap embedding_cam_from_gradient(const ActivationMap& a, const Tensor& gradient, std::string proxy_id) {
  if (gradient.shape() != a.data.shape()) {
    throw DimensionError(fmt::format("gradient shape {} differs from activation shape {}", shape_to_string(gradient.shape()),
                                     shape_to_string(a.data.shape())));
  }
  return normalize_heatmap(heatmap(channel_weights(gradient, std::move(proxy_id)), a));
}

}  // namespace ecam
