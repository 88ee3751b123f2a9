#include "ecam/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ecam/error.hpp"
#include "ecam/simd/kernels.hpp"

namespace ecam {

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

namespace {

void require_usable(const Heatmap& h, const char* what) {
  if (h.degenerate) throw DegenerateInputError(fmt::format("{}: degenerate heatmap", what));
}

double region_sum(const Heatmap& h, const BoundingBox& box) {
  const long rows = static_cast<long>(h.height());
  const long cols = static_cast<long>(h.width());
  const long y0 = std::clamp(box.y, 0L, rows);
  const long y1 = std::clamp(box.y_end(), 0L, rows);
  const long x0 = std::clamp(box.x, 0L, cols);
  const long x1 = std::clamp(box.x_end(), 0L, cols);
  if (x1 <= x0) return 0.0;
  const auto& k = simd::active();
  double acc = 0.0;
  for (long r = y0; r < y1; ++r) acc += k.sum(h.grid.data() + r * cols + x0, static_cast<std::size_t>(x1 - x0));
  return acc;
}

double region_sum(const Heatmap& h, const SegmentationMask& mask) {
  if (mask.grid.rows() != h.height() || mask.grid.cols() != h.width()) {
    throw DimensionError(fmt::format("segmentation mask {}x{} vs heatmap {}x{}", mask.grid.rows(), mask.grid.cols(),
                                     h.height(), h.width()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.grid.size(); ++i) {
    if (mask.grid[i]) acc += h.grid[i];
  }
  return acc;
}

std::size_t region_pixels(const BoundingBox& box, ImageDims dims) {
  const long y0 = std::clamp(box.y, 0L, static_cast<long>(dims.height));
  const long y1 = std::clamp(box.y_end(), 0L, static_cast<long>(dims.height));
  const long x0 = std::clamp(box.x, 0L, static_cast<long>(dims.width));
  const long x1 = std::clamp(box.x_end(), 0L, static_cast<long>(dims.width));
  return static_cast<std::size_t>(std::max(0L, y1 - y0) * std::max(0L, x1 - x0));
}

}  // namespace

double heatmap_ratio(const Heatmap& h, const Region& region) {
  require_usable(h, "heatmap_ratio");
  if (!h.normalized) {
    // Peak-1 rescaling makes constant maps sum to exact pixel counts.
    const Heatmap n = normalize_heatmap(h);
    if (n.degenerate) throw DegenerateInputError("heatmap_ratio: heatmap has no mass");
    return heatmap_ratio(n, region);
  }
  const double total = simd::active().sum(h.grid.data(), h.grid.size());
  if (!(total > 0.0)) throw DegenerateInputError("heatmap_ratio: heatmap has no mass");
  const double inside = std::visit([&](const auto& r) { return region_sum(h, r); }, region);
  return std::clamp(inside / total, 0.0, 1.0);
}

double uniform_baseline(const Region& region, ImageDims dims) {
  if (dims.pixels() == 0) throw InvalidArgumentError("uniform_baseline: empty image");
  const std::size_t inside = std::visit(
      [&](const auto& r) -> std::size_t {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, BoundingBox>) {
          return region_pixels(r, dims);
        } else {
          if (r.dims() != dims) throw DimensionError("uniform_baseline: mask dimensions differ from image");
          return r.grid.count();
        }
      },
      region);
  return static_cast<double>(inside) / static_cast<double>(dims.pixels());
}

BinaryGrid binarize(const Heatmap& h, double t) {
  require_usable(h, "binarize");
  if (!h.normalized) throw InvalidArgumentError("binarize: heatmap is not normalized");
  if (!(t > 0.0 && t < 1.0)) throw InvalidArgumentError(fmt::format("binarize: threshold {} outside (0, 1)", t));
  BinaryGrid out(h.height(), h.width());
  for (std::size_t r = 0; r < h.height(); ++r) {
    for (std::size_t c = 0; c < h.width(); ++c) out.set(r, c, h.grid[r * h.width() + c] >= t);
  }
  return out;
}

BinaryGrid largest_component(const BinaryGrid& mask) {
  const std::size_t rows = mask.rows();
  const std::size_t cols = mask.cols();
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> stack;
  int best_label = -1;
  std::size_t best_size = 0;
  int next_label = 0;

  // Raster-order seeds: the first component to reach a size keeps it on ties.
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || label[seed] >= 0) continue;
    const int current = next_label++;
    std::size_t size = 0;
    label[seed] = current;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cell = stack.back();
      stack.pop_back();
      ++size;
      const long r = static_cast<long>(cell / cols);
      const long c = static_cast<long>(cell % cols);
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          const long nr = r + dr;
          const long nc = c + dc;
          if ((dr == 0 && dc == 0) || nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols)) {
            continue;
          }
          const std::size_t n = static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc);
          if (mask[n] && label[n] < 0) {
            label[n] = current;
            stack.push_back(n);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = current;
    }
  }
  if (best_label < 0) throw MissingDataError("largest_component: mask has no set cells");

  BinaryGrid out(rows, cols);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (label[i] == best_label) out.set(i / cols, i % cols, true);
  }
  return out;
}

BoundingBox enclosing_bbox(const BinaryGrid& component) {
  long r0 = -1, r1 = -1, c0 = -1, c1 = -1;
  for (std::size_t r = 0; r < component.rows(); ++r) {
    for (std::size_t c = 0; c < component.cols(); ++c) {
      if (!component.get(r, c)) continue;
      const long lr = static_cast<long>(r);
      const long lc = static_cast<long>(c);
      if (r0 < 0) {
        r0 = r1 = lr;
        c0 = c1 = lc;
      } else {
        r1 = lr;
        c0 = std::min(c0, lc);
        c1 = std::max(c1, lc);
      }
    }
  }
  if (r0 < 0) throw MissingDataError("enclosing_bbox: component is empty");
  return {c0, r0, c1 - c0 + 1, r1 - r0 + 1};
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const long ix = std::max(0L, std::min(a.x_end(), b.x_end()) - std::max(a.x, b.x));
  const long iy = std::max(0L, std::min(a.y_end(), b.y_end()) - std::max(a.y, b.y));
  const long inter = ix * iy;
  const long uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RatioRecord ratio_record(std::string image_id, const Heatmap& h, const Region& region) {
  RatioRecord rec{std::move(image_id), std::nullopt, uniform_baseline(region, {h.height(), h.width()})};
  if (h.degenerate) {
    spdlog::debug("ratio: {} has a degenerate heatmap, excluded from the mean", rec.image_id);
  } else {
    rec.ratio = heatmap_ratio(h, region);
  }
  return rec;
}

RatioReport summarize_ratios(std::vector<RatioRecord> records) {
  RatioReport report;
  report.per_image = std::move(records);
  double sum = 0.0;
  double baseline_sum = 0.0;
  for (const auto& rec : report.per_image) {
    if (!rec.ratio) {
      ++report.degenerate_count;
      continue;
    }
    sum += *rec.ratio;
    baseline_sum += rec.baseline;
    ++report.evaluated;
  }
  if (report.evaluated > 0) {
    const double n = static_cast<double>(report.evaluated);
    report.mean = sum / n;
    report.baseline_mean = baseline_sum / n;
    double sq = 0.0;
    for (const auto& rec : report.per_image) {
      if (rec.ratio) sq += (*rec.ratio - report.mean) * (*rec.ratio - report.mean);
    }
    report.std = std::sqrt(sq / n);
  }
  return report;
}

RatioReport mean_ratio_report(std::span<const RatioItem> items) {
  std::vector<RatioRecord> records;
  records.reserve(items.size());
  for (const auto& item : items) records.push_back(ratio_record(item.image_id, item.heatmap, item.region));
  return summarize_ratios(std::move(records));
}

std::optional<BoundingBox> localize(const Heatmap& h, double t) {
  if (h.degenerate) return std::nullopt;
  return enclosing_bbox(largest_component(binarize(h, t)));
}

namespace {

void require_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw InvalidArgumentError(fmt::format("wsl threshold {} outside (0, 1)", t));
}

}  // namespace

WslRecord wsl_record(std::string image_id, const Heatmap& h, const BoundingBox& ground_truth, double t) {
  require_threshold(t);
  WslRecord rec{std::move(image_id), localize(h, t), 0.0, false};
  if (rec.predicted) {
    rec.iou = iou(*rec.predicted, ground_truth);
    rec.hit = rec.iou >= kWslIouThreshold;
  } else {
    spdlog::info("wsl: {} has a degenerate heatmap, counted as a miss", rec.image_id);
  }
  return rec;
}

WslReport summarize_wsl(std::vector<WslRecord> records, double t) {
  require_threshold(t);
  WslReport report;
  report.threshold_t = t;
  report.per_image = std::move(records);
  for (const auto& rec : report.per_image) {
    if (!rec.predicted) ++report.degenerate_count;
    if (rec.hit) ++report.hits;
  }
  if (!report.per_image.empty()) {
    report.accuracy = static_cast<double>(report.hits) / static_cast<double>(report.per_image.size());
  }
  return report;
}

WslReport wsl_accuracy(std::span<const WslItem> items, double t) {
  require_threshold(t);
  std::vector<WslRecord> records;
  records.reserve(items.size());
  for (const auto& item : items) records.push_back(wsl_record(item.image_id, item.heatmap, item.ground_truth, t));
  return summarize_wsl(std::move(records), t);
}

}  // namespace ecam
