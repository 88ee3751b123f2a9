#pragma once

// Proxy-driven class activation maps for embedding networks.
//
// The model head is global average pooling followed by a dense layer:
//   pooled_k = (1/Z) sum_ij A[k,i,j],   y = w^T pooled,   y_hat = y / |y|
// with A the K x H x W last-conv activations, Z = H W and w the K x d dense
// kernel. The score explained for a class with proxy p is the dot product of
// the unnormalized embedding with the proxy, L = y . p, so gradients flow
// through the dense and pooling layers only, never through the L2 norm.

#include <cstddef>
#include <optional>
#include <string>

#include "ecam/embedding.hpp"
#include "ecam/geometry.hpp"
#include "ecam/proxy.hpp"
#include "ecam/tensor.hpp"

namespace ecam {

struct ActivationMap {
  Tensor data;  // K x H x W
  std::string source_image_id;

  // Throws DimensionError unless data is rank 3.
  ActivationMap(Tensor data, std::string source_image_id = {});

  std::size_t channels() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
  std::size_t spatial_size() const { return height() * width(); }
};

struct FcKernel {
  Tensor data;  // K x d

  explicit FcKernel(Tensor data);

  std::size_t in_channels() const { return data.dim(0); }
  std::size_t embedding_dim() const { return data.dim(1); }
};

struct ChannelWeights {
  Tensor alpha;  // length K
  std::string proxy_id;
};

struct Heatmap {
  Tensor grid;  // H x W, nonnegative
  bool normalized = false;
  bool degenerate = false;
  // Set once the grid has been resampled to image resolution.
  std::optional<ImageDims> upsampled_to;

  std::size_t height() const { return grid.dim(0); }
  std::size_t width() const { return grid.dim(1); }
};

enum class GradientPath { backprop, closed_form };

std::string_view to_string(GradientPath path);
GradientPath parse_gradient_path(std::string_view name);

EmbeddingPair forward_head(const ActivationMap& a, const FcKernel& w);

// y.raw . p
double proxy_loss(const EmbeddingPair& y, const ProxyVector& p);

// dL/dA by reverse-mode through dense then pooling layers; K x H x W.
Tensor grad_backprop(const ActivationMap& a, const FcKernel& w, const ProxyVector& p);

// (1/z) w p, the per-channel gradient value, identical at every position.
Tensor grad_closed_form(const FcKernel& w, const ProxyVector& p, std::size_t z);

// alpha_k = (1/Z) sum_ij g[k,i,j].
ChannelWeights channel_weights(const Tensor& gradient, std::string proxy_id = {});

// ReLU(sum_k alpha_k A[k]) at native resolution, not normalized.
Heatmap heatmap(const ChannelWeights& alpha, const ActivationMap& a);

// Divide by the maximum so the peak is exactly 1. An all-zero grid comes back
// flagged degenerate and otherwise untouched.
Heatmap normalize_heatmap(const Heatmap& h);

// Resample to image resolution (corner-aligned bilinear). Keeps the flags.
Heatmap upsample_heatmap(const Heatmap& h, ImageDims dims);

Heatmap embedding_cam(const ActivationMap& a, const FcKernel& w, const ProxyVector& p, GradientPath path);

// Same pipeline from an externally computed dL/dA (for heads that are not
// plain pooling + dense).
Heatmap embedding_cam_from_gradient(const ActivationMap& a, const Tensor& gradient, std::string proxy_id = {});

}  // namespace ecam
