#include "ecam/render.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ecam/error.hpp"

namespace ecam {
namespace {

std::uint8_t round_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

std::array<std::uint8_t, 3> Colormap::operator()(double value) const {
  const double v = std::clamp(value, 0.0, 1.0);
  if (v <= stops.front().position) return stops.front().rgb;
  if (v >= stops.back().position) return stops.back().rgb;
  auto hi = std::upper_bound(stops.begin(), stops.end(), v,
                             [](double x, const ColorStop& s) { return x < s.position; });
  auto lo = hi - 1;
  const double t = (v - lo->position) / (hi->position - lo->position);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) out[c] = round_byte(std::lerp(double(lo->rgb[c]), double(hi->rgb[c]), t));
  return out;
}

const Colormap& jet_colormap() {
  static const Colormap map{"jet",
                            {{0.0, {0, 0, 255}},
                             {0.25, {0, 255, 255}},
                             {0.5, {0, 255, 0}},
                             {0.75, {255, 255, 0}},
                             {1.0, {255, 0, 0}}}};
  return map;
}

void validate(const OverlaySpec& spec) {
  if (!(spec.blend_alpha >= 0.0 && spec.blend_alpha <= 1.0)) {
    throw InvalidArgumentError(fmt::format("blend alpha {} outside [0, 1]", spec.blend_alpha));
  }
  const auto& s = spec.colormap.stops;
  if (s.size() < 2 || s.front().position != 0.0 || s.back().position != 1.0) {
    throw InvalidArgumentError("colormap stops must span positions 0 to 1");
  }
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i].position > s[i - 1].position)) throw InvalidArgumentError("colormap stop positions must increase strictly");
  }
}

RgbImage colormap_image(const Heatmap& h, const OverlaySpec& spec) {
  validate(spec);
  if (h.degenerate) spdlog::warn("rendering a degenerate heatmap as ramp start");
  RgbImage img{{h.height(), h.width()}, std::vector<std::uint8_t>(h.grid.size() * 3)};
  for (std::size_t i = 0; i < h.grid.size(); ++i) {
    const auto rgb = spec.colormap(h.degenerate ? 0.0 : h.grid[i]);
    std::copy(rgb.begin(), rgb.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return img;
}

RgbImage overlay_image(const RgbImage& image, const Heatmap& h, const OverlaySpec& spec) {
  if (image.dims != ImageDims{h.height(), h.width()}) {
    throw DimensionError(fmt::format("overlay: image is {}x{} but heatmap is {}x{}", image.dims.width, image.dims.height,
                                     h.width(), h.height()));
  }
  const RgbImage colors = colormap_image(h, spec);
  const double a = spec.blend_alpha;
  RgbImage out = image;
  for (std::size_t i = 0; i < out.rgb.size(); ++i) {
    out.rgb[i] = round_byte((1.0 - a) * image.rgb[i] + a * colors.rgb[i]);
  }
  return out;
}

void colormap_png(const Heatmap& h, const OverlaySpec& spec, const std::filesystem::path& path) {
  write_png(path, colormap_image(h, spec));
}

void overlay_png(const std::filesystem::path& image_path, const Heatmap& h, const OverlaySpec& spec,
                 const std::filesystem::path& out_path) {
  write_png(out_path, overlay_image(read_rgb_image(image_path), h, spec));
}

std::string render_file_name(std::string_view image_id, std::string_view scheme) {
  return fmt::format("{}__{}.png", image_id, scheme);
}

}  // namespace ecam
