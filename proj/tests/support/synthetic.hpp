#pragma once

// Planted-signal dataset for end-to-end tests.
//
// Every image belongs to one of num_classes classes and has the class signal
// planted in one quadrant (image index mod 4). Each class owns three
// activation channels whose dense-kernel column points at that class's
// embedding axis; inside the planted quadrant those channels are strongly
// active, elsewhere they carry faint noise. One extra channel is pure
// texture with a zero kernel row. Ground-truth boxes are the quadrants at
// image resolution.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecam/geometry.hpp"

namespace ecam::testing {

struct SyntheticOptions {
  std::size_t num_images = 50;
  std::size_t num_classes = 5;
  std::size_t grid = 8;          // native H = W
  std::size_t image_size = 64;   // image H = W
  std::uint64_t seed = 20201014;
  bool with_segmentation = true;
  bool with_images = true;
};

struct SyntheticDataset {
  std::filesystem::path root;
  std::filesystem::path container;
  std::vector<std::string> ids;
  std::vector<std::string> class_ids;
  std::vector<BoundingBox> boxes;
  std::vector<int> quadrants;
  std::size_t channels = 0;
  std::size_t embedding_dim = 0;
};

std::size_t synthetic_channels(const SyntheticOptions& options);

// Writes the dataset files under root (created if needed) and the tensor
// container at root/export.ecam.
SyntheticDataset make_synthetic_dataset(const std::filesystem::path& root, const SyntheticOptions& options = {});

// Fresh empty directory under the system temp dir.
std::filesystem::path make_temp_dir(const std::string& tag);

}  // namespace ecam::testing
