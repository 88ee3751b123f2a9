#pragma once

// Manifest + blob tensor container.
//
// File layout:
//   "ECAM"                      4 bytes magic
//   version                     1 byte (currently 1)
//   manifest length             8 bytes, little-endian unsigned
//   manifest                    UTF-8 text, see below
//   blob                        remaining bytes
//
// Manifest grammar (LF line endings, single spaces between fields):
//   ecam-manifest 1
//   entry <name> <dtype> <shape> <byte_offset> <byte_length> [<key>=<value>]...
// dtype is f32 or f64, shape is dimensions joined by 'x' (e.g. 2048x7x7),
// offsets are relative to the blob start. Payloads are little-endian IEEE-754
// in row-major order. Names and metadata carry no whitespace.
//
// Conventional entry names used by exporters:
//   activations/<image_id>   K x H x W last-conv activations
//   embedding/<image_id>     d raw embedding
//   gradient/<image_id>      K x H x W externally computed dL/dA (optional)
//   fc_kernel                K x d final dense kernel

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ecam/tensor.hpp"

namespace ecam {

enum class DType { f32, f64 };

std::string_view to_string(DType dtype);
std::size_t dtype_size(DType dtype);

using Metadata = std::map<std::string, std::string>;

struct ManifestEntry {
  std::string name;
  Shape shape;
  DType dtype = DType::f64;
  std::uint64_t byte_offset = 0;
  std::uint64_t byte_length = 0;
  Metadata metadata;

  bool operator==(const ManifestEntry&) const = default;
};

inline constexpr std::uint8_t kContainerVersion = 1;

class TensorContainer {
 public:
  TensorContainer() = default;

  // Validates header, manifest and every entry; throws ParseError naming the
  // offending entry and the byte offset where validation failed.
  static TensorContainer parse(std::span<const std::uint8_t> bytes);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::span<const std::uint8_t> blob() const { return blob_; }

  bool contains(std::string_view name) const;
  const ManifestEntry& entry(std::string_view name) const;  // MissingDataError
  std::span<const std::uint8_t> raw(std::string_view name) const;

  // Payload widened to 64-bit floats.
  Tensor tensor(std::string_view name) const;

  // Names starting with prefix, in manifest order.
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  // Canonical bytes: same entries, offsets and blob. Identical to the parsed
  // input whenever that input was itself produced by this writer.
  std::vector<std::uint8_t> serialize() const;

 private:
  std::vector<ManifestEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::vector<std::uint8_t> blob_;

  friend class ContainerBuilder;
};

// Accumulates entries in insertion order and lays them out back to back.
class ContainerBuilder {
 public:
  ContainerBuilder& add(std::string name, const Tensor& tensor, DType dtype = DType::f64, Metadata metadata = {});

  TensorContainer build() const;
  std::size_t size() const { return items_.size(); }

 private:
  struct Item {
    std::string name;
    Tensor tensor;
    DType dtype;
    Metadata metadata;
  };
  std::vector<Item> items_;
};

TensorContainer load_container(const std::filesystem::path& path);

// Atomic replace: writes a sibling temp file and renames it over path.
void write_container(const TensorContainer& container, const std::filesystem::path& path);

// Writes bytes to path through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace ecam
