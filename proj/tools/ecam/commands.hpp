#pragma once

// Subcommands of the ecam tool, callable in-process.
//
// Every command returns a process exit code: 0 when every item succeeded,
// 1 when at least one item failed (the run continues past failures), 2 for
// configuration or setup errors that stop the run before any work.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecam/cam.hpp"
#include "ecam/proxy.hpp"

namespace ecam::cli {

enum class RegionKind { bbox, segmentation };
enum class GradientSource { backprop, closed_form, external };

struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path container;
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> proxies;   // default <out>/proxies.ecam
  std::optional<std::filesystem::path> heatmaps;  // default <out>/heatmaps.ecam
  ProxyScheme proxy_scheme = ProxyScheme::single_point;
  GradientSource gradient_path = GradientSource::closed_form;
  std::vector<double> thresholds{0.2};
  RegionKind region_kind = RegionKind::bbox;
  std::size_t parallelism = 1;
  std::optional<std::vector<std::string>> ids;
  bool write_png = false;
  bool store_upsampled = false;
  bool constant_heatmap = false;
  double blend_alpha = 0.5;

  std::filesystem::path proxies_path() const { return proxies.value_or(output_dir / "proxies.ecam"); }
  std::filesystem::path heatmaps_path() const { return heatmaps.value_or(output_dir / "heatmaps.ecam"); }
};

// Throws InvalidArgumentError for out-of-domain values.
void validate(const RunConfig& config);

// key=value lines ('#' comments, blank lines ignored) using the long flag
// names without the leading dashes, e.g. "dataset-root=/data/CUB_200_2011".
// Throws ParseError with the line number on malformed lines.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Applies recognised keys to config; unknown keys are an InvalidArgumentError.
void apply_config(const std::map<std::string, std::string>& values, RunConfig& config);

// "1,2,3" -> {"1","2","3"}; "" -> {}.
std::vector<std::string> split_ids(const std::string& text);

int cmd_proxy(const RunConfig& config, std::ostream& out);
int cmd_cam(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_overlay(const RunConfig& config, std::ostream& out);

// File names written by cmd_eval.
std::string ratio_report_name(RegionKind region);
std::string wsl_report_name(double threshold);

std::string_view to_string(RegionKind region);
std::string_view to_string(GradientSource path);
RegionKind parse_region_kind(std::string_view name);
GradientSource parse_gradient_source(std::string_view name);

}  // namespace ecam::cli
