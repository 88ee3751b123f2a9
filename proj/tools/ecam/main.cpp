// ecam: proxy-based class activation maps for embedding networks.
//
//   ecam proxy   --dataset-root D --container C --scheme mean|single_point|one_hot --out O
//   ecam cam     --dataset-root D --container C --scheme S --path backprop|closed_form|external --out O
//   ecam eval    --dataset-root D --region bbox|segmentation --threshold 0.2 --out O
//   ecam overlay --dataset-root D --out O
//
// Flags override --config key=value files, which override defaults.
// ECAM_LOG_LEVEL selects log verbosity (trace|debug|info|warn|error|off).

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "ecam/error.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ecam");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("ECAM_LOG_LEVEL");
  spdlog::set_level(level != nullptr ? spdlog::level::from_str(level) : spdlog::level::warn);
}

// The config file has to be read before flags are bound so flags win.
std::optional<std::string> find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.starts_with("--config=")) return std::string(arg.substr(9));
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ecam::cli;
  setup_logging();

  RunConfig config;
  try {
    if (auto path = find_config_arg(argc, argv)) apply_config(read_config_file(*path), config);
  } catch (const ecam::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }

  CLI::App app{"proxy-based class activation maps for embedding networks"};
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "key=value config file");

  std::string scheme{to_string(config.proxy_scheme)};
  std::string path{to_string(config.gradient_path)};
  std::string region{to_string(config.region_kind)};
  std::string ids;
  std::string thresholds;
  std::string dataset_root = config.dataset_root.string();
  std::string container = config.container.string();
  std::string out_dir = config.output_dir.string();
  std::string proxies = config.proxies ? config.proxies->string() : "";
  std::string heatmaps = config.heatmaps ? config.heatmaps->string() : "";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value config file");
    sub->add_option("--dataset-root", dataset_root, "CUB-style dataset root");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", config.parallelism, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--ids", ids, "comma-separated image ids (default: all available)");
    sub->add_option("--heatmaps", heatmaps, "heatmap container (default <out>/heatmaps.ecam)");
  };

  auto* proxy = app.add_subcommand("proxy", "compute class proxies from exported embeddings");
  auto* cam = app.add_subcommand("cam", "compute heatmaps");
  auto* eval = app.add_subcommand("eval", "mean heatmap ratio and localization accuracy");
  auto* overlay = app.add_subcommand("overlay", "blend heatmaps over source images");
  for (auto* sub : {proxy, cam, eval, overlay}) add_common(sub);
  for (auto* sub : {proxy, cam}) {
    sub->add_option("--container", container, "tensor container with activations/embeddings/fc_kernel");
    sub->add_option("--scheme", scheme, "mean|single_point|one_hot");
    sub->add_option("--proxies", proxies, "proxy container (default <out>/proxies.ecam)");
  }
  cam->add_option("--path", path, "backprop|closed_form|external");
  cam->add_flag("--png", config.write_png, "also write colormapped PNGs");
  cam->add_flag("--store-upsampled", config.store_upsampled, "also store image-resolution heatmaps (f32)");
  eval->add_option("--region", region, "bbox|segmentation");
  eval->add_option("--threshold", thresholds, "binarization threshold(s), comma-separated");
  eval->add_flag("--constant-heatmap", config.constant_heatmap, "evaluate a constant heatmap (uniform baseline)");
  overlay->add_option("--alpha", config.blend_alpha, "blend weight of the heatmap colors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    config.dataset_root = dataset_root;
    config.container = container;
    config.output_dir = out_dir;
    if (!proxies.empty()) config.proxies = proxies;
    if (!heatmaps.empty()) config.heatmaps = heatmaps;
    config.proxy_scheme = ecam::parse_proxy_scheme(scheme);
    config.gradient_path = parse_gradient_source(path);
    config.region_kind = parse_region_kind(region);
    if (!thresholds.empty()) {
      config.thresholds.clear();
      for (const auto& t : split_ids(thresholds)) config.thresholds.push_back(std::stod(t));
    }
    for (auto* sub : {proxy, cam, eval, overlay}) {
      if (sub->count("--ids") > 0) config.ids = split_ids(ids);
    }
    validate(config);

    if (*proxy) return cmd_proxy(config, std::cout);
    if (*cam) return cmd_cam(config, std::cout);
    if (*eval) return cmd_eval(config, std::cout);
    if (*overlay) return cmd_overlay(config, std::cout);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 2;
}
