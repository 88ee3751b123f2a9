#include "ecam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ecam/container.hpp"
#include "ecam/error.hpp"
#include "ecam/image_io.hpp"

namespace ecam {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Calls fn(fields, line_no) for every non-blank line.
template <class Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    const auto fields = split_fields(text.substr(pos, nl - pos));
    if (!fields.empty()) fn(fields, line_no);
    pos = nl + 1;
  }
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

bool parse_real(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_size(std::string_view s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

ParseError line_error(const std::filesystem::path& file, std::size_t line, std::string_view why) {
  return ParseError(fmt::format("{}:{}: {}", file.string(), line, why), std::nullopt, line);
}

}  // namespace

DatasetIndex DatasetIndex::load(const std::filesystem::path& root) {
  DatasetIndex idx;
  idx.root_ = root;
  const auto images_txt = root / "images.txt";
  for_each_record(read_text(images_txt), [&](const auto& f, std::size_t line) {
    if (f.size() != 2) throw line_error(images_txt, line, "expected '<image_id> <relative_path>'");
    std::string id(f[0]);
    if (idx.by_id_.contains(id)) throw line_error(images_txt, line, fmt::format("duplicate image id '{}'", id));
    idx.by_id_.emplace(id, idx.records_.size());
    idx.records_.push_back({std::move(id), std::string(f[1]), {}, std::nullopt, std::nullopt});
  });

  auto lookup = [&](const std::filesystem::path& file, std::size_t line, std::string_view id) -> ImageRecord& {
    auto it = idx.by_id_.find(std::string(id));
    if (it == idx.by_id_.end()) throw line_error(file, line, fmt::format("unknown image id '{}'", id));
    return idx.records_[it->second];
  };

  const auto labels_txt = root / "image_class_labels.txt";
  for_each_record(read_text(labels_txt), [&](const auto& f, std::size_t line) {
    if (f.size() != 2) throw line_error(labels_txt, line, "expected '<image_id> <class_id>'");
    ImageRecord& rec = lookup(labels_txt, line, f[0]);
    if (!rec.class_id.empty()) throw line_error(labels_txt, line, "duplicate class label");
    rec.class_id = std::string(f[1]);
  });
  for (const auto& rec : idx.records_) {
    if (rec.class_id.empty()) {
      throw InvalidAnnotationError(fmt::format("{}: image '{}' has no class label", labels_txt.string(), rec.image_id));
    }
  }

  const auto split_txt = root / "train_test_split.txt";
  if (std::filesystem::exists(split_txt)) {
    for_each_record(read_text(split_txt), [&](const auto& f, std::size_t line) {
      if (f.size() != 2 || (f[1] != "0" && f[1] != "1")) throw line_error(split_txt, line, "expected '<image_id> <0|1>'");
      lookup(split_txt, line, f[0]).is_training = f[1] == "1";
    });
  }

  const auto sizes_txt = root / "image_sizes.txt";
  if (std::filesystem::exists(sizes_txt)) {
    for_each_record(read_text(sizes_txt), [&](const auto& f, std::size_t line) {
      std::size_t w = 0, h = 0;
      if (f.size() != 3 || !parse_size(f[1], w) || !parse_size(f[2], h) || w == 0 || h == 0) {
        throw line_error(sizes_txt, line, "expected '<image_id> <width> <height>' with positive sizes");
      }
      ImageRecord& rec = lookup(sizes_txt, line, f[0]);
      if (rec.dims) throw line_error(sizes_txt, line, "duplicate size record");
      rec.dims = ImageDims{h, w};
    });
  }

  if (std::filesystem::exists(idx.bbox_path())) {
    for_each_record(read_text(idx.bbox_path()), [&](const auto& f, std::size_t) {
      auto it = idx.by_id_.find(std::string(f[0]));
      if (it != idx.by_id_.end()) idx.records_[it->second].has_bbox = true;
    });
  }
  for (auto& rec : idx.records_) {
    rec.has_segmentation = std::filesystem::exists(idx.segmentation_path(rec.image_id));
  }
  return idx;
}

const ImageRecord& DatasetIndex::record(std::string_view image_id) const {
  auto it = by_id_.find(std::string(image_id));
  if (it == by_id_.end()) throw MissingDataError(fmt::format("dataset has no image '{}'", image_id));
  return records_[it->second];
}

bool DatasetIndex::contains(std::string_view image_id) const { return by_id_.contains(std::string(image_id)); }

ImageDims DatasetIndex::dims(std::string_view image_id) const {
  const auto& rec = record(image_id);
  if (!rec.dims) throw MissingDataError(fmt::format("no image_sizes.txt record for image '{}'", image_id));
  return *rec.dims;
}

std::filesystem::path DatasetIndex::image_path(std::string_view image_id) const {
  return root_ / "images" / record(image_id).relative_path;
}

std::filesystem::path DatasetIndex::segmentation_path(std::string_view image_id) const {
  std::filesystem::path p = root_ / "segmentations" / record(image_id).relative_path;
  p.replace_extension(".png");
  return p;
}

BoxMap parse_bboxes(std::string_view text, const std::map<std::string, ImageDims>& dims) {
  BoxMap out;
  for_each_record(text, [&](const auto& f, std::size_t line) {
    double v[4];
    if (f.size() != 5 || !parse_real(f[1], v[0]) || !parse_real(f[2], v[1]) || !parse_real(f[3], v[2]) ||
        !parse_real(f[4], v[3])) {
      throw ParseError(fmt::format("bounding boxes line {}: expected '<image_id> <x> <y> <width> <height>'", line),
                       std::nullopt, line);
    }
    std::string id(f[0]);
    BoundingBox box{round_half_up(v[0]), round_half_up(v[1]), round_half_up(v[2]), round_half_up(v[3])};
    if (auto it = dims.find(id); it != dims.end()) {
      const long w = static_cast<long>(it->second.width);
      const long h = static_cast<long>(it->second.height);
      const long x0 = std::clamp(box.x, 0L, w);
      const long y0 = std::clamp(box.y, 0L, h);
      const long x1 = std::clamp(box.x_end(), 0L, w);
      const long y1 = std::clamp(box.y_end(), 0L, h);
      BoundingBox clamped{x0, y0, x1 - x0, y1 - y0};
      if (clamped != box) {
        spdlog::info("bounding box for '{}' clamped to its {}x{} image", id, w, h);
        box = clamped;
      }
    }
    if (box.width <= 0 || box.height <= 0) {
      throw InvalidAnnotationError(fmt::format("bounding boxes line {}: box for '{}' is empty ({}x{})", line, id,
                                               box.width, box.height));
    }
    if (!out.emplace(id, box).second) {
      throw ParseError(fmt::format("bounding boxes line {}: duplicate image id '{}'", line, id), std::nullopt, line);
    }
  });
  return out;
}

BoxMap load_bboxes(const std::filesystem::path& path, const std::map<std::string, ImageDims>& dims) {
  const std::string text = read_text(path);
  try {
    return parse_bboxes(text, dims);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()), e.byte_offset(), e.line());
  } catch (const InvalidAnnotationError& e) {
    throw InvalidAnnotationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string format_bboxes(const BoxMap& boxes) {
  std::string out;
  for (const auto& [id, b] : boxes) out += fmt::format("{} {}.0 {}.0 {}.0 {}.0\n", id, b.x, b.y, b.width, b.height);
  return out;
}

SegmentationMask load_segmask(const std::filesystem::path& path, ImageDims dims) {
  const GrayImage img = read_gray_png(path);
  if (img.dims != dims) {
    throw InvalidAnnotationError(fmt::format("{}: mask is {}x{} but the image is {}x{}", path.string(), img.dims.width,
                                             img.dims.height, dims.width, dims.height));
  }
  SegmentationMask mask{BinaryGrid(dims.height, dims.width)};
  for (std::size_t r = 0; r < dims.height; ++r) {
    for (std::size_t c = 0; c < dims.width; ++c) mask.grid.set(r, c, img.luma[r * dims.width + c] >= kSegmentationThreshold);
  }
  return mask;
}

}  // namespace ecam
