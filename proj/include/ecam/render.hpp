#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ecam/cam.hpp"
#include "ecam/image_io.hpp"

namespace ecam {

struct ColorStop {
  double position;
  std::array<std::uint8_t, 3> rgb;
};

// Piecewise-linear ramp through its stops; positions strictly increasing
// from 0 to 1.
struct Colormap {
  std::string name;
  std::vector<ColorStop> stops;

  std::array<std::uint8_t, 3> operator()(double value) const;
};

// blue -> cyan -> green -> yellow -> red at 0, 0.25, 0.5, 0.75, 1.
const Colormap& jet_colormap();

struct OverlaySpec {
  Colormap colormap = jet_colormap();
  double blend_alpha = 0.5;
};

// Throws InvalidArgumentError if alpha is outside [0, 1] or the stops are
// not strictly increasing over [0, 1].
void validate(const OverlaySpec& spec);

// Degenerate heatmaps render as ramp start everywhere (with a warning).
RgbImage colormap_image(const Heatmap& h, const OverlaySpec& spec);

// (1 - alpha) image + alpha colormap(h), per channel, rounded half-up.
RgbImage overlay_image(const RgbImage& image, const Heatmap& h, const OverlaySpec& spec);

void colormap_png(const Heatmap& h, const OverlaySpec& spec, const std::filesystem::path& path);
void overlay_png(const std::filesystem::path& image_path, const Heatmap& h, const OverlaySpec& spec,
                 const std::filesystem::path& out_path);

// <image_id>__<scheme>.png
std::string render_file_name(std::string_view image_id, std::string_view scheme);

}  // namespace ecam
