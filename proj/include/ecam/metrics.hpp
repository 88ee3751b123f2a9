#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ecam/cam.hpp"
#include "ecam/geometry.hpp"

namespace ecam {

using Region = std::variant<BoundingBox, SegmentationMask>;

// Fraction of heatmap mass inside the region: sum(h in region) / sum(h).
// The heatmap must already be at image resolution. Throws
// DegenerateInputError for a degenerate (all-zero) heatmap.
double heatmap_ratio(const Heatmap& h, const Region& region);

// Region pixel count over image pixel count; equals heatmap_ratio of any
// constant positive heatmap.
double uniform_baseline(const Region& region, ImageDims dims);

// Cells with value >= t. Requires a normalized, non-degenerate heatmap.
BinaryGrid binarize(const Heatmap& h, double t);

// Largest 8-connected component of mask. Ties go to the component whose first
// cell in raster order comes first. Throws MissingDataError on an empty mask.
BinaryGrid largest_component(const BinaryGrid& mask);

// Tight half-open box around every set cell.
BoundingBox enclosing_bbox(const BinaryGrid& component);

double iou(const BoundingBox& a, const BoundingBox& b);

inline constexpr double kWslIouThreshold = 0.5;

struct RatioRecord {
  std::string image_id;
  std::optional<double> ratio;  // nullopt for degenerate heatmaps
  double baseline = 0.0;
};

struct RatioReport {
  std::vector<RatioRecord> per_image;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t evaluated = 0;
  std::size_t degenerate_count = 0;
  double baseline_mean = 0.0;
};

struct RatioItem {
  std::string image_id;
  Heatmap heatmap;
  Region region;
};

// Mean and spread over the non-degenerate items, in input order.
RatioReport mean_ratio_report(std::span<const RatioItem> items);

// Per-image step of mean_ratio_report.
RatioRecord ratio_record(std::string image_id, const Heatmap& h, const Region& region);
// Reduction step of mean_ratio_report; records in the order given.
RatioReport summarize_ratios(std::vector<RatioRecord> records);

struct WslRecord {
  std::string image_id;
  std::optional<BoundingBox> predicted;  // nullopt for degenerate heatmaps
  double iou = 0.0;
  bool hit = false;
};

struct WslReport {
  std::vector<WslRecord> per_image;
  double accuracy = 0.0;
  double threshold_t = 0.0;
  std::size_t hits = 0;
  std::size_t degenerate_count = 0;
};

struct WslItem {
  std::string image_id;
  Heatmap heatmap;
  BoundingBox ground_truth;
};

// binarize -> largest_component -> enclosing_bbox -> iou per item; a hit is
// iou >= 0.5. Degenerate heatmaps count as misses.
WslReport wsl_accuracy(std::span<const WslItem> items, double t);

WslRecord wsl_record(std::string image_id, const Heatmap& h, const BoundingBox& ground_truth, double t);
WslReport summarize_wsl(std::vector<WslRecord> records, double t);

// Per-image predicted box and IoU for a single heatmap; nullopt when the
// heatmap is degenerate.
std::optional<BoundingBox> localize(const Heatmap& h, double t);

}  // namespace ecam
