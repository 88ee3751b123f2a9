#pragma once

// CUB-200-2011 style dataset root:
//
//   images.txt               <image_id> <relative_path>
//   image_class_labels.txt   <image_id> <class_id>
//   train_test_split.txt     <image_id> <0|1>                 (optional)
//   image_sizes.txt          <image_id> <width> <height>      (optional)
//   bounding_boxes.txt       <image_id> <x> <y> <width> <height>  (optional)
//   images/<relative_path>                                    (optional)
//   segmentations/<relative_path with .png extension>         (optional)
//
// image_sizes.txt is not part of the original release; evaluation needs the
// image resolution and reads it from there so the photographs themselves
// need not be present.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ecam/geometry.hpp"

namespace ecam {

struct ImageRecord {
  std::string image_id;
  std::string relative_path;
  std::string class_id;
  std::optional<ImageDims> dims;
  std::optional<bool> is_training;
  bool has_bbox = false;
  bool has_segmentation = false;
};

class DatasetIndex {
 public:
  // Throws ParseError (with line numbers) on malformed listing files and
  // InvalidAnnotationError on inconsistent ones.
  static DatasetIndex load(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord& record(std::string_view image_id) const;  // MissingDataError
  bool contains(std::string_view image_id) const;

  ImageDims dims(std::string_view image_id) const;  // MissingDataError if unknown

  std::filesystem::path image_path(std::string_view image_id) const;
  std::filesystem::path segmentation_path(std::string_view image_id) const;
  std::filesystem::path bbox_path() const { return root_ / "bounding_boxes.txt"; }

 private:
  std::filesystem::path root_;
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

using BoxMap = std::map<std::string, BoundingBox>;

// Records are "<image_id> <x> <y> <width> <height>" with real coordinates.
// Each coordinate is rounded half-up to an integer pixel; when dims has an
// entry for the image the box is clamped to the image (logged) and a box
// that becomes empty is an InvalidAnnotationError. Malformed lines throw
// ParseError carrying the line number; duplicate ids are rejected.
BoxMap parse_bboxes(std::string_view text, const std::map<std::string, ImageDims>& dims = {});
BoxMap load_bboxes(const std::filesystem::path& path, const std::map<std::string, ImageDims>& dims = {});

// Inverse of parse_bboxes for integer boxes.
std::string format_bboxes(const BoxMap& boxes);

// Grayscale PNG; foreground where 8-bit luminance >= 128. Throws
// InvalidAnnotationError when the file's size differs from dims.
SegmentationMask load_segmask(const std::filesystem::path& path, ImageDims dims);

inline constexpr unsigned kSegmentationThreshold = 128;

}  // namespace ecam
