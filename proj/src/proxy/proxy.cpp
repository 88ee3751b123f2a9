#include "ecam/proxy.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "ecam/container.hpp"
#include "ecam/error.hpp"
#include "ecam/simd/kernels.hpp"

namespace ecam {

EmbeddingPair EmbeddingPair::from_raw(Tensor raw) {
  Tensor unit = l2_normalize(raw);
  return {std::move(raw), std::move(unit)};
}

std::string_view to_string(ProxyScheme scheme) {
  switch (scheme) {
    case ProxyScheme::mean:
      return "mean";
    case ProxyScheme::single_point:
      return "single_point";
    case ProxyScheme::one_hot:
      return "one_hot";
  }
  return "unknown";
}

ProxyScheme parse_proxy_scheme(std::string_view name) {
  if (name == "mean") return ProxyScheme::mean;
  if (name == "single_point") return ProxyScheme::single_point;
  if (name == "one_hot") return ProxyScheme::one_hot;
  throw InvalidArgumentError(fmt::format("unknown proxy scheme '{}' (mean|single_point|one_hot)", name));
}

void validate_proxy(const ProxyVector& p) {
  if (p.values.rank() != 1) throw InvariantViolationError(fmt::format("proxy '{}' is not a vector", p.class_id));
  if (p.scheme == ProxyScheme::one_hot) {
    std::size_t ones = 0;
    for (double v : p.values.values()) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw InvariantViolationError(fmt::format("one_hot proxy '{}' has entry {}", p.class_id, v));
      }
    }
    if (ones != 1) throw InvariantViolationError(fmt::format("one_hot proxy '{}' has {} unit entries", p.class_id, ones));
    if (p.member_count != 1) throw InvariantViolationError(fmt::format("one_hot proxy '{}' member_count != 1", p.class_id));
    return;
  }
  const double norm = l2_norm(p.values);
  if (std::abs(norm - 1.0) > kProxyNormTolerance) {
    throw InvariantViolationError(
        fmt::format("{} proxy '{}' has norm {:.17g}, expected 1", to_string(p.scheme), p.class_id, norm));
  }
  if (p.scheme == ProxyScheme::mean && p.member_count < 1) {
    throw InvariantViolationError(fmt::format("mean proxy '{}' has no members", p.class_id));
  }
  if (p.scheme == ProxyScheme::single_point && p.member_count != 1) {
    throw InvariantViolationError(fmt::format("single_point proxy '{}' member_count {} != 1", p.class_id, p.member_count));
  }
}

ProxyVector mean_proxy(std::span<const EmbeddingPair> members, std::string class_id) {
  if (members.empty()) throw MissingDataError(fmt::format("mean_proxy '{}': no member embeddings", class_id));
  const std::size_t d = members.front().unit.size();
  std::vector<double> acc(d, 0.0);
  const auto& k = simd::active();
  for (const auto& m : members) {
    if (m.unit.rank() != 1 || m.unit.size() != d) {
      throw DimensionError(fmt::format("mean_proxy '{}': member dimension {} != {}", class_id, m.unit.size(), d));
    }
    k.axpy(1.0, m.unit.data(), acc.data(), d);
  }
  const double n = static_cast<double>(members.size());
  for (double& v : acc) v /= n;
  Tensor mean = Tensor::vector(std::move(acc));
  const double norm = l2_norm(mean);
  if (!(norm > 0.0)) {
    throw DegenerateInputError(fmt::format("mean_proxy '{}': member embeddings cancel to a zero mean", class_id));
  }
  return {l2_normalize(mean), ProxyScheme::mean, std::move(class_id), members.size()};
}

ProxyVector single_point_proxy(const EmbeddingPair& embedding, std::string class_id) {
  return {embedding.unit, ProxyScheme::single_point, std::move(class_id), 1};
}

ProxyVector one_hot_proxy(std::size_t class_index, std::size_t num_classes, std::string class_id) {
  if (class_index >= num_classes) {
    throw InvalidArgumentError(fmt::format("one_hot_proxy: class index {} out of range [0, {})", class_index, num_classes));
  }
  std::vector<double> v(num_classes, 0.0);
  v[class_index] = 1.0;
  if (class_id.empty()) class_id = std::to_string(class_index);
  return {Tensor::vector(std::move(v)), ProxyScheme::one_hot, std::move(class_id), 1};
}

void save_proxies(std::span<const ProxyVector> proxies, const std::filesystem::path& path) {
  ContainerBuilder builder;
  for (const auto& p : proxies) {
    validate_proxy(p);
    builder.add("proxy/" + p.class_id, p.values, DType::f64,
                {{"scheme", std::string(to_string(p.scheme))},
                 {"class_id", p.class_id},
                 {"member_count", std::to_string(p.member_count)},
                 {"embedding_dim", std::to_string(p.dim())}});
  }
  write_container(builder.build(), path);
}

std::vector<ProxyVector> load_proxies(const std::filesystem::path& path) {
  const TensorContainer c = load_container(path);
  std::vector<ProxyVector> out;
  for (const auto& e : c.entries()) {
    auto meta = [&](const char* key) -> const std::string& {
      auto it = e.metadata.find(key);
      if (it == e.metadata.end()) {
        throw ParseError(fmt::format("{}: proxy entry '{}' lacks '{}' metadata", path.string(), e.name, key), std::nullopt);
      }
      return it->second;
    };
    if (!e.name.starts_with("proxy/")) {
      throw ParseError(fmt::format("{}: unexpected entry '{}' in proxy file", path.string(), e.name), std::nullopt);
    }
    std::size_t members = 0;
    std::size_t dim = 0;
    const std::string& mc = meta("member_count");
    const std::string& ed = meta("embedding_dim");
    if (std::from_chars(mc.data(), mc.data() + mc.size(), members).ptr != mc.data() + mc.size() ||
        std::from_chars(ed.data(), ed.data() + ed.size(), dim).ptr != ed.data() + ed.size()) {
      throw ParseError(fmt::format("{}: proxy entry '{}' has non-numeric counts", path.string(), e.name), std::nullopt);
    }
    ProxyScheme scheme;
    try {
      scheme = parse_proxy_scheme(meta("scheme"));
    } catch (const InvalidArgumentError& err) {
      throw ParseError(fmt::format("{}: {}", path.string(), err.what()), std::nullopt);
    }
    ProxyVector p{c.tensor(e.name), scheme, meta("class_id"), members};
    if (p.values.rank() != 1 || p.dim() != dim) {
      throw InvariantViolationError(fmt::format("{}: proxy '{}' shape disagrees with embedding_dim {}", path.string(), e.name, dim));
    }
    validate_proxy(p);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ecam
