#include "ecam/report.hpp"

#include <fmt/format.h>

namespace ecam {

std::string format_ratio_report(const RatioReport& report, std::string_view region_kind) {
  std::string out = fmt::format("# ecam ratio-report 1 region={}\n", region_kind);
  for (const auto& rec : report.per_image) {
    if (rec.ratio) {
      out += fmt::format("image {} ratio={:.17g} baseline={:.17g}\n", rec.image_id, *rec.ratio, rec.baseline);
    } else {
      out += fmt::format("image {} ratio=degenerate baseline={:.17g}\n", rec.image_id, rec.baseline);
    }
  }
  out += fmt::format("summary count={} evaluated={} degenerate={} mean={:.17g} std={:.17g} baseline_mean={:.17g}\n",
                     report.per_image.size(), report.evaluated, report.degenerate_count, report.mean, report.std,
                     report.baseline_mean);
  return out;
}

std::string format_wsl_report(const WslReport& report) {
  std::string out = "# ecam wsl-report 1\n";
  for (const auto& rec : report.per_image) {
    if (rec.predicted) {
      const auto& b = *rec.predicted;
      out += fmt::format("image {} box={},{},{},{} iou={:.17g} hit={}\n", rec.image_id, b.x, b.y, b.width, b.height,
                         rec.iou, rec.hit ? 1 : 0);
    } else {
      out += fmt::format("image {} box=none iou=0 hit=0\n", rec.image_id);
    }
  }
  out += fmt::format("summary count={} hits={} degenerate={} accuracy={:.17g} threshold={:.17g}\n",
                     report.per_image.size(), report.hits, report.degenerate_count, report.accuracy,
                     report.threshold_t);
  return out;
}

}  // namespace ecam
