#pragma once

// Line-oriented report text. Field order is fixed:
//
//   # ecam ratio-report 1
//   image <id> ratio=<r> baseline=<b>          (or ratio=degenerate)
//   summary count=<n> evaluated=<m> degenerate=<d> mean=<m> std=<s> baseline_mean=<b>
//
//   # ecam wsl-report 1
//   image <id> box=<x>,<y>,<w>,<h> iou=<v> hit=<0|1>   (or box=none for degenerate)
//   summary count=<n> hits=<h> degenerate=<d> accuracy=<a> threshold=<t>
//
// Reals are printed with %.17g so they round-trip exactly.

#include <string>
#include <string_view>

#include "ecam/metrics.hpp"

namespace ecam {

std::string format_ratio_report(const RatioReport& report, std::string_view region_kind);
std::string format_wsl_report(const WslReport& report);

}  // namespace ecam
