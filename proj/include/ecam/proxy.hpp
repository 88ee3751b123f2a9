#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecam/embedding.hpp"
#include "ecam/tensor.hpp"

namespace ecam {

enum class ProxyScheme { mean, single_point, one_hot };

std::string_view to_string(ProxyScheme scheme);
// Throws InvalidArgumentError on an unknown name.
ProxyScheme parse_proxy_scheme(std::string_view name);

// Class representative in embedding space.
//
// mean / single_point proxies are unit norm (within 1e-9); one_hot proxies
// are a standard basis vector. member_count is the number of embeddings that
// went into the proxy (1 for single_point and one_hot).
struct ProxyVector {
  Tensor values;
  ProxyScheme scheme;
  std::string class_id;
  std::size_t member_count;

  std::size_t dim() const { return values.size(); }
};

inline constexpr double kProxyNormTolerance = 1e-9;

// Throws InvariantViolationError if the scheme-specific invariant fails.
void validate_proxy(const ProxyVector& proxy);

// normalize((1/n) sum_j unit_j). Members are the L2-normalized embeddings of
// every image of the class, including the query image itself.
ProxyVector mean_proxy(std::span<const EmbeddingPair> members, std::string class_id);

// The image's own unit embedding.
ProxyVector single_point_proxy(const EmbeddingPair& embedding, std::string class_id);

ProxyVector one_hot_proxy(std::size_t class_index, std::size_t num_classes, std::string class_id = {});

// Proxies persist in the tensor container format: one f64 entry per proxy,
// named proxy/<class_id>, with scheme / class_id / member_count /
// embedding_dim metadata. Writes are whole-file atomic replace.
void save_proxies(std::span<const ProxyVector> proxies, const std::filesystem::path& path);
std::vector<ProxyVector> load_proxies(const std::filesystem::path& path);

}  // namespace ecam
