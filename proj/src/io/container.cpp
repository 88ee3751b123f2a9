#include "ecam/container.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <system_error>

#include <fmt/format.h>

#include "ecam/error.hpp"

namespace ecam {
namespace {

constexpr std::string_view kMagic = "ECAM";
constexpr std::string_view kManifestHeader = "ecam-manifest 1";
constexpr std::size_t kHeaderBytes = 4 + 1 + 8;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_f32(std::vector<std::uint8_t>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

bool is_token(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) { return c <= 0x20 || c == 0x7f; });
}

bool is_metadata_key(std::string_view s) {
  return is_token(s) && s.find('=') == std::string_view::npos;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = line.find(' ', pos);
    const std::size_t end = next == std::string_view::npos ? line.size() : next;
    out.push_back(line.substr(pos, end - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <class Int>
bool parse_uint(std::string_view s, Int& out) {
  if (s.empty() || s.front() == '+' || s.front() == '-') return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_shape(std::string_view s, Shape& shape) {
  shape.clear();
  std::size_t pos = 0;
  while (true) {
    const std::size_t x = s.find('x', pos);
    std::size_t d = 0;
    if (!parse_uint(s.substr(pos, x == std::string_view::npos ? std::string_view::npos : x - pos), d) || d == 0) {
      return false;
    }
    shape.push_back(d);
    if (x == std::string_view::npos) return true;
    pos = x + 1;
  }
}

std::string manifest_line(const ManifestEntry& e) {
  std::string line = fmt::format("entry {} {} {} {} {}", e.name, to_string(e.dtype), shape_to_string(e.shape),
                                 e.byte_offset, e.byte_length);
  for (const auto& [k, v] : e.metadata) line += fmt::format(" {}={}", k, v);
  line += '\n';
  return line;
}

void validate_entry_text(const ManifestEntry& e) {
  if (!is_token(e.name)) throw InvalidArgumentError(fmt::format("container entry name '{}' is empty or has whitespace", e.name));
  for (const auto& [k, v] : e.metadata) {
    if (!is_metadata_key(k) || !is_token(v)) {
      throw InvalidArgumentError(fmt::format("entry '{}': metadata '{}={}' must be non-empty and whitespace-free", e.name, k, v));
    }
  }
}

}  // namespace

std::string_view to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

TensorContainer TensorContainer::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw ParseError("container shorter than its 13-byte header", bytes.size());
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw ParseError("bad container magic (expected ECAM)", 0);
  if (bytes[4] != kContainerVersion) throw ParseError(fmt::format("unsupported container version {}", bytes[4]), 4);
  const std::uint64_t manifest_len = get_u64(bytes.data() + 5);
  if (manifest_len > bytes.size() - kHeaderBytes) {
    throw ParseError(fmt::format("manifest length {} exceeds file size {}", manifest_len, bytes.size()), 5);
  }
  const std::string_view manifest(reinterpret_cast<const char*>(bytes.data() + kHeaderBytes), manifest_len);
  const std::size_t blob_start = kHeaderBytes + manifest_len;
  const std::uint64_t blob_size = bytes.size() - blob_start;

  TensorContainer c;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < manifest.size()) {
    const std::size_t nl = manifest.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw ParseError("manifest does not end with a newline", kHeaderBytes + manifest.size());
    }
    const std::string_view line = manifest.substr(pos, nl - pos);
    const std::size_t at = kHeaderBytes + pos;
    ++line_no;
    pos = nl + 1;

    if (line_no == 1) {
      if (line != kManifestHeader) throw ParseError(fmt::format("manifest must start with '{}'", kManifestHeader), at, 1);
      continue;
    }
    const auto fields = split_spaces(line);
    if (fields.size() < 6 || fields[0] != "entry") {
      throw ParseError(fmt::format("manifest line {}: expected 'entry <name> <dtype> <shape> <offset> <length>'", line_no), at, line_no);
    }
    ManifestEntry e;
    e.name = std::string(fields[1]);
    auto fail = [&](std::string_view why) {
      return ParseError(fmt::format("manifest entry '{}': {}", e.name, why), at, line_no);
    };
    if (!is_token(fields[1])) throw fail("invalid name");
    if (fields[2] == "f32") {
      e.dtype = DType::f32;
    } else if (fields[2] == "f64") {
      e.dtype = DType::f64;
    } else {
      throw fail(fmt::format("bad dtype tag '{}'", fields[2]));
    }
    if (!parse_shape(fields[3], e.shape)) throw fail(fmt::format("bad shape '{}'", fields[3]));
    if (!parse_uint(fields[4], e.byte_offset)) throw fail(fmt::format("bad byte offset '{}'", fields[4]));
    if (!parse_uint(fields[5], e.byte_length)) throw fail(fmt::format("bad byte length '{}'", fields[5]));
    for (std::size_t i = 6; i < fields.size(); ++i) {
      const std::size_t eq = fields[i].find('=');
      if (eq == std::string_view::npos) throw fail(fmt::format("metadata '{}' is not key=value", fields[i]));
      std::string key(fields[i].substr(0, eq));
      std::string value(fields[i].substr(eq + 1));
      if (!is_metadata_key(key) || !is_token(value)) throw fail(fmt::format("bad metadata '{}'", fields[i]));
      if (!e.metadata.emplace(std::move(key), std::move(value)).second) throw fail("duplicate metadata key");
    }

    std::uint64_t elements = 1;
    for (std::size_t d : e.shape) {
      if (elements > std::numeric_limits<std::uint64_t>::max() / d) throw fail("shape overflows");
      elements *= d;
    }
    if (elements > std::numeric_limits<std::uint64_t>::max() / dtype_size(e.dtype) ||
        elements * dtype_size(e.dtype) != e.byte_length) {
      throw fail(fmt::format("byte_length {} does not match shape {} of {}", e.byte_length, shape_to_string(e.shape),
                             to_string(e.dtype)));
    }
    if (e.byte_offset > blob_size || e.byte_length > blob_size - e.byte_offset) {
      throw fail(fmt::format("payload [{}, {}) outside blob of {} bytes", e.byte_offset, e.byte_offset + e.byte_length, blob_size));
    }
    if (c.by_name_.contains(e.name)) throw fail("duplicate entry name");
    c.by_name_.emplace(e.name, c.entries_.size());
    c.entries_.push_back(std::move(e));
  }
  if (line_no == 0) throw ParseError("empty manifest", kHeaderBytes);

  // Manifest order is free; overlap is checked in offset order.
  std::vector<const ManifestEntry*> sorted;
  sorted.reserve(c.entries_.size());
  for (const auto& e : c.entries_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const ManifestEntry* a, const ManifestEntry* b) {
    return a->byte_offset < b->byte_offset || (a->byte_offset == b->byte_offset && a->byte_length < b->byte_length);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const ManifestEntry& prev = *sorted[i - 1];
    const ManifestEntry& cur = *sorted[i];
    if (cur.byte_offset < prev.byte_offset + prev.byte_length && cur.byte_length > 0 && prev.byte_length > 0) {
      throw ParseError(fmt::format("manifest entry '{}' overlaps entry '{}'", cur.name, prev.name),
                       blob_start + cur.byte_offset);
    }
  }

  c.blob_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(blob_start), bytes.end());
  return c;
}

bool TensorContainer::contains(std::string_view name) const { return by_name_.contains(std::string(name)); }

const ManifestEntry& TensorContainer::entry(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw MissingDataError(fmt::format("container has no entry '{}'", name));
  return entries_[it->second];
}

std::span<const std::uint8_t> TensorContainer::raw(std::string_view name) const {
  const ManifestEntry& e = entry(name);
  return std::span(blob_).subspan(e.byte_offset, e.byte_length);
}

Tensor TensorContainer::tensor(std::string_view name) const {
  const ManifestEntry& e = entry(name);
  const auto bytes = raw(name);
  const std::size_t n = shape_product(e.shape);
  std::vector<double> values(n);
  if (e.dtype == DType::f64) {
    for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_u64(bytes.data() + 8 * i));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = bytes.data() + 4 * i;
      const std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                 std::uint32_t(p[3]) << 24;
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  try {
    return Tensor(e.shape, std::move(values));
  } catch (const NonFiniteError& err) {
    throw ParseError(fmt::format("entry '{}': {}", e.name, err.what()), std::nullopt);
  }
}

std::vector<std::string> TensorContainer::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::string_view(e.name).starts_with(prefix)) out.push_back(e.name);
  }
  return out;
}

std::vector<std::uint8_t> TensorContainer::serialize() const {
  std::string manifest(kManifestHeader);
  manifest += '\n';
  for (const auto& e : entries_) manifest += manifest_line(e);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + manifest.size() + blob_.size());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(kContainerVersion);
  put_u64(out, manifest.size());
  out.insert(out.end(), manifest.begin(), manifest.end());
  out.insert(out.end(), blob_.begin(), blob_.end());
  return out;
}

ContainerBuilder& ContainerBuilder::add(std::string name, const Tensor& tensor, DType dtype, Metadata metadata) {
  ManifestEntry probe{name, tensor.shape(), dtype, 0, 0, metadata};
  validate_entry_text(probe);
  if (std::any_of(items_.begin(), items_.end(), [&](const Item& it) { return it.name == name; })) {
    throw InvalidArgumentError(fmt::format("duplicate container entry '{}'", name));
  }
  if (dtype == DType::f32) {
    for (double v : tensor.values()) {
      if (!std::isfinite(static_cast<float>(v))) {
        throw InvalidArgumentError(fmt::format("entry '{}': value {} overflows f32", name, v));
      }
    }
  }
  items_.push_back({std::move(name), tensor, dtype, std::move(metadata)});
  return *this;
}

TensorContainer ContainerBuilder::build() const {
  TensorContainer c;
  for (const auto& it : items_) {
    ManifestEntry e{it.name, it.tensor.shape(), it.dtype, c.blob_.size(), it.tensor.size() * dtype_size(it.dtype),
                    it.metadata};
    for (double v : it.tensor.values()) {
      if (it.dtype == DType::f64) {
        put_f64(c.blob_, v);
      } else {
        put_f32(c.blob_, static_cast<float>(v));
      }
    }
    c.by_name_.emplace(e.name, c.entries_.size());
    c.entries_.push_back(std::move(e));
  }
  return c;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("read failed for '{}'", path.string()));
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot create '{}'", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError(fmt::format("write failed for '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
}

TensorContainer load_container(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return TensorContainer::parse(bytes);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.byte_offset(), e.line());
  }
}

void write_container(const TensorContainer& container, const std::filesystem::path& path) {
  write_file_atomic(path, container.serialize());
}

}  // namespace ecam
