#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "ecam/container.hpp"
#include "ecam/dataset.hpp"
#include "ecam/error.hpp"
#include "ecam/metrics.hpp"
#include "ecam/render.hpp"
#include "ecam/report.hpp"

namespace ecam::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitItemFailures = 1;
constexpr int kExitSetup = 2;

// Runs fn(i) for i in [0, n) on up to `jobs` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
}

std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > limit) out += fmt::format(", ... ({} total)", ids.size());
  return out;
}

std::string proxy_key(ProxyScheme scheme, const ImageRecord& rec) {
  return scheme == ProxyScheme::single_point ? rec.image_id : rec.class_id;
}

// Class labels are 1-based integers (CUB convention); one-hot index = label - 1.
ProxyVector one_hot_for_class(const std::string& class_id, std::size_t num_classes) {
  std::size_t label = 0;
  auto [ptr, ec] = std::from_chars(class_id.data(), class_id.data() + class_id.size(), label);
  if (ec != std::errc() || ptr != class_id.data() + class_id.size() || label == 0) {
    throw InvalidArgumentError(fmt::format("one_hot scheme needs positive integer class labels, got '{}'", class_id));
  }
  return one_hot_proxy(label - 1, num_classes, class_id);
}

std::size_t embedding_dim_of(const TensorContainer& c) {
  if (c.contains("fc_kernel")) return c.entry("fc_kernel").shape.back();
  const auto names = c.names_with_prefix("embedding/");
  if (names.empty()) throw MissingDataError("container has neither fc_kernel nor embedding/<id> entries");
  return c.entry(names.front()).shape.back();
}

// Requested ids, or every dataset image for which `has` holds, in dataset order.
std::vector<std::string> select_ids(const RunConfig& config, const DatasetIndex& index,
                                    const std::function<bool(const std::string&)>& has) {
  if (config.ids) return *config.ids;
  std::vector<std::string> ids;
  for (const auto& rec : index.records()) {
    if (has(rec.image_id)) ids.push_back(rec.image_id);
  }
  return ids;
}

Metadata heatmap_metadata(const Heatmap& h, const RunConfig& config, const std::string& proxy_id) {
  return {{"degenerate", h.degenerate ? "1" : "0"},
          {"normalized", h.normalized ? "1" : "0"},
          {"scheme", std::string(to_string(config.proxy_scheme))},
          {"path", std::string(to_string(config.gradient_path))},
          {"proxy", proxy_id.empty() ? "none" : proxy_id}};
}

Heatmap load_native_heatmap(const TensorContainer& c, const std::string& image_id) {
  const std::string name = "heatmap/" + image_id;
  const auto& e = c.entry(name);
  auto flag = [&](const char* key) {
    auto it = e.metadata.find(key);
    return it != e.metadata.end() && it->second == "1";
  };
  Heatmap h{c.tensor(name), flag("normalized"), flag("degenerate"), std::nullopt};
  if (h.grid.rank() != 2) throw DimensionError(fmt::format("heatmap '{}' is not a 2-D grid", image_id));
  return h;
}

std::string heatmap_scheme(const TensorContainer& c, const std::string& image_id) {
  const auto& meta = c.entry("heatmap/" + image_id).metadata;
  auto it = meta.find("scheme");
  return it == meta.end() ? "unknown" : it->second;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgumentError(fmt::format("expected a boolean, got '{}'", v));
}

double parse_double(const std::string& v) {
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgumentError(fmt::format("expected a number, got '{}'", v));
  return d;
}

}  // namespace

std::string_view to_string(RegionKind region) { return region == RegionKind::bbox ? "bbox" : "segmentation"; }

std::string_view to_string(GradientSource path) {
  switch (path) {
    case GradientSource::backprop:
      return "backprop";
    case GradientSource::closed_form:
      return "closed_form";
    case GradientSource::external:
      return "external";
  }
  return "unknown";
}

RegionKind parse_region_kind(std::string_view name) {
  if (name == "bbox") return RegionKind::bbox;
  if (name == "segmentation") return RegionKind::segmentation;
  throw InvalidArgumentError(fmt::format("unknown region '{}' (bbox|segmentation)", name));
}

GradientSource parse_gradient_source(std::string_view name) {
  if (name == "external") return GradientSource::external;
  return parse_gradient_path(name) == GradientPath::backprop ? GradientSource::backprop : GradientSource::closed_form;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string id = text.substr(pos, comma - pos);
    if (!id.empty()) out.push_back(std::move(id));
    pos = comma + 1;
  }
  return out;
}

void validate(const RunConfig& config) {
  if (config.thresholds.empty()) throw InvalidArgumentError("at least one threshold is required");
  for (double t : config.thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw InvalidArgumentError(fmt::format("threshold {} outside (0, 1)", t));
  }
  if (!(config.blend_alpha >= 0.0 && config.blend_alpha <= 1.0)) {
    throw InvalidArgumentError(fmt::format("blend alpha {} outside [0, 1]", config.blend_alpha));
  }
  if (config.parallelism == 0) throw InvalidArgumentError("--jobs must be at least 1");
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config file '{}'", path.string()));
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(fmt::format("{}:{}: expected key=value", path.string(), line_no), std::nullopt, line_no);
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& values, RunConfig& c) {
  for (const auto& [key, v] : values) {
    if (key == "dataset-root") {
      c.dataset_root = v;
    } else if (key == "container") {
      c.container = v;
    } else if (key == "out") {
      c.output_dir = v;
    } else if (key == "proxies") {
      c.proxies = v;
    } else if (key == "heatmaps") {
      c.heatmaps = v;
    } else if (key == "scheme") {
      c.proxy_scheme = parse_proxy_scheme(v);
    } else if (key == "path") {
      c.gradient_path = parse_gradient_source(v);
    } else if (key == "threshold") {
      c.thresholds.clear();
      for (const auto& t : split_ids(v)) c.thresholds.push_back(parse_double(t));
    } else if (key == "region") {
      c.region_kind = parse_region_kind(v);
    } else if (key == "jobs") {
      c.parallelism = static_cast<std::size_t>(parse_double(v));
    } else if (key == "ids") {
      c.ids = split_ids(v);
    } else if (key == "png") {
      c.write_png = parse_bool(v);
    } else if (key == "store-upsampled") {
      c.store_upsampled = parse_bool(v);
    } else if (key == "constant-heatmap") {
      c.constant_heatmap = parse_bool(v);
    } else if (key == "alpha") {
      c.blend_alpha = parse_double(v);
    } else {
      throw InvalidArgumentError(fmt::format("unknown config key '{}'", key));
    }
  }
}

std::string ratio_report_name(RegionKind region) { return fmt::format("ratio_{}.txt", to_string(region)); }

std::string wsl_report_name(double threshold) { return fmt::format("wsl_t{:g}.txt", threshold); }

int cmd_proxy(const RunConfig& config, std::ostream& out) {
  validate(config);
  const DatasetIndex index = DatasetIndex::load(config.dataset_root);
  const TensorContainer container = load_container(config.container);
  const auto ids = select_ids(config, index, [](const std::string&) { return true; });

  for (const auto& id : ids) index.record(id);
  std::vector<ProxyVector> proxies;
  std::vector<std::string> failures;

  if (config.proxy_scheme == ProxyScheme::one_hot) {
    const std::size_t d = embedding_dim_of(container);
    std::set<std::string> seen;
    for (const auto& id : ids) {
      const auto& cls = index.record(id).class_id;
      if (seen.insert(cls).second) proxies.push_back(one_hot_for_class(cls, d));
    }
  } else {
    std::vector<std::string> missing;
    for (const auto& id : ids) {
      if (!container.contains("embedding/" + id)) missing.push_back(id);
    }
    if (!missing.empty()) {
      spdlog::error("container '{}' lacks embedding/<id> for {} image(s): {}", config.container.string(), missing.size(),
                    join_ids(missing));
      return kExitSetup;
    }
    if (config.proxy_scheme == ProxyScheme::single_point) {
      for (const auto& id : ids) {
        try {
          proxies.push_back(single_point_proxy(EmbeddingPair::from_raw(container.tensor("embedding/" + id)), id));
        } catch (const Error& e) {
          spdlog::error("proxy for image {}: {}", id, e.what());
          failures.push_back(id);
        }
      }
    } else {
      // Classes in order of first appearance; members in dataset order.
      std::vector<std::string> classes;
      std::unordered_map<std::string, std::vector<EmbeddingPair>> members;
      for (const auto& id : ids) {
        const auto& cls = index.record(id).class_id;
        auto [it, inserted] = members.try_emplace(cls);
        if (inserted) classes.push_back(cls);
        try {
          it->second.push_back(EmbeddingPair::from_raw(container.tensor("embedding/" + id)));
        } catch (const Error& e) {
          spdlog::error("embedding for image {}: {}", id, e.what());
          failures.push_back(id);
        }
      }
      for (const auto& cls : classes) {
        try {
          proxies.push_back(mean_proxy(members[cls], cls));
        } catch (const Error& e) {
          spdlog::error("mean proxy for class {}: {}", cls, e.what());
          failures.push_back("class:" + cls);
        }
      }
    }
  }

  if (config.proxies_path().has_parent_path()) std::filesystem::create_directories(config.proxies_path().parent_path());
  save_proxies(proxies, config.proxies_path());
  fmt::print(out, "proxy: scheme={} proxies={} failed={} -> {}\n", to_string(config.proxy_scheme), proxies.size(),
             failures.size(), config.proxies_path().string());
  return failures.empty() ? kExitOk : kExitItemFailures;
}

int cmd_cam(const RunConfig& config, std::ostream& out) {
  validate(config);
  const DatasetIndex index = DatasetIndex::load(config.dataset_root);
  const TensorContainer container = load_container(config.container);
  const auto ids = select_ids(config, index, [&](const std::string& id) { return container.contains("activations/" + id); });

  std::optional<FcKernel> kernel;
  std::unordered_map<std::string, ProxyVector> proxies;
  std::size_t one_hot_dim = 0;
  if (config.gradient_path != GradientSource::external && !ids.empty()) {
    kernel.emplace(container.tensor("fc_kernel"));
    if (config.proxy_scheme == ProxyScheme::one_hot) {
      one_hot_dim = kernel->embedding_dim();
    } else {
      for (auto& p : load_proxies(config.proxies_path())) {
        if (p.scheme != config.proxy_scheme) {
          spdlog::error("proxy file '{}' holds {} proxies but --scheme is {}", config.proxies_path().string(),
                        to_string(p.scheme), to_string(config.proxy_scheme));
          return kExitSetup;
        }
        std::string key = p.class_id;
        proxies.emplace(std::move(key), std::move(p));
      }
    }
  }

  struct Result {
    std::optional<Heatmap> native;
    std::optional<Heatmap> upsampled;
    std::string proxy_id;
    std::string error;
  };
  std::vector<Result> results(ids.size());
  const bool want_upsampled = config.store_upsampled || config.write_png;

  parallel_for(ids.size(), config.parallelism, [&](std::size_t i) {
    const std::string& id = ids[i];
    Result& r = results[i];
    try {
      const auto& rec = index.record(id);
      const ActivationMap a(container.tensor("activations/" + id), id);
      if (config.gradient_path == GradientSource::external) {
        r.proxy_id = "external";
        r.native = embedding_cam_from_gradient(a, container.tensor("gradient/" + id), r.proxy_id);
      } else {
        ProxyVector p = config.proxy_scheme == ProxyScheme::one_hot
                            ? one_hot_for_class(rec.class_id, one_hot_dim)
                            : [&] {
                                const std::string key = proxy_key(config.proxy_scheme, rec);
                                auto it = proxies.find(key);
                                if (it == proxies.end()) {
                                  throw MissingDataError(fmt::format("no {} proxy '{}' in '{}'", to_string(config.proxy_scheme), key,
                                                                     config.proxies_path().string()));
                                }
                                return it->second;
                              }();
        r.proxy_id = p.class_id;
        const GradientPath path = config.gradient_path == GradientSource::backprop ? GradientPath::backprop : GradientPath::closed_form;
        r.native = embedding_cam(a, *kernel, p, path);
      }
      if (want_upsampled) r.upsampled = upsample_heatmap(*r.native, index.dims(id));
    } catch (const std::exception& e) {
      r.error = e.what();
      r.native.reset();
    }
  });

  ContainerBuilder builder;
  std::size_t failed = 0;
  std::size_t degenerate = 0;
  std::size_t written = 0;
  const OverlaySpec spec;
  if (config.write_png) std::filesystem::create_directories(config.output_dir / "png");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Result& r = results[i];
    if (!r.native) {
      ++failed;
      spdlog::error("cam {}: {}", ids[i], r.error);
      continue;
    }
    if (r.native->degenerate) ++degenerate;
    const Metadata meta = heatmap_metadata(*r.native, config, r.proxy_id);
    builder.add("heatmap/" + ids[i], r.native->grid, DType::f64, meta);
    if (r.upsampled && config.store_upsampled) builder.add("heatmap_up/" + ids[i], r.upsampled->grid, DType::f32, meta);
    if (r.upsampled && config.write_png) {
      colormap_png(*r.upsampled, spec, config.output_dir / "png" / render_file_name(ids[i], to_string(config.proxy_scheme)));
    }
    ++written;
  }
  if (!ids.empty()) {
    const auto path = config.heatmaps_path();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_container(builder.build(), path);
  }
  fmt::print(out, "cam: scheme={} path={} images={} written={} degenerate={} failed={}\n", to_string(config.proxy_scheme),
             to_string(config.gradient_path), ids.size(), written, degenerate, failed);
  return failed == 0 ? kExitOk : kExitItemFailures;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  validate(config);
  const DatasetIndex index = DatasetIndex::load(config.dataset_root);
  const TensorContainer heat = load_container(config.heatmaps_path());
  const auto ids = select_ids(config, index, [&](const std::string& id) { return heat.contains("heatmap/" + id); });

  std::vector<std::string> no_dims;
  std::map<std::string, ImageDims> dims;
  for (const auto& rec : index.records()) {
    if (rec.dims) dims.emplace(rec.image_id, *rec.dims);
  }
  for (const auto& id : ids) {
    if (!index.contains(id) || !dims.contains(id)) no_dims.push_back(id);
  }
  if (!no_dims.empty()) {
    spdlog::error("no image_sizes.txt record for {} image(s): {}", no_dims.size(), join_ids(no_dims));
    return kExitSetup;
  }

  BoxMap boxes;
  if (std::filesystem::exists(index.bbox_path())) boxes = load_bboxes(index.bbox_path(), dims);
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const bool ok = config.region_kind == RegionKind::bbox ? boxes.contains(id)
                                                           : std::filesystem::exists(index.segmentation_path(id));
    if (!ok) missing.push_back(id);
  }
  if (!missing.empty()) {
    spdlog::error("missing {} annotation for {} image(s): {}", to_string(config.region_kind), missing.size(), join_ids(missing));
    return kExitSetup;
  }

  struct Result {
    std::optional<RatioRecord> ratio;
    std::vector<WslRecord> wsl;  // one per threshold, empty without a box
    std::string error;
  };
  std::vector<Result> results(ids.size());
  parallel_for(ids.size(), config.parallelism, [&](std::size_t i) {
    const std::string& id = ids[i];
    Result& r = results[i];
    try {
      const ImageDims d = dims.at(id);
      Heatmap h = config.constant_heatmap ? Heatmap{Tensor::filled({d.height, d.width}, 1.0), true, false, d}
                                          : upsample_heatmap(load_native_heatmap(heat, id), d);
      if (config.region_kind == RegionKind::bbox) {
        r.ratio = ratio_record(id, h, boxes.at(id));
      } else {
        r.ratio = ratio_record(id, h, load_segmask(index.segmentation_path(id), d));
      }
      if (auto it = boxes.find(id); it != boxes.end()) {
        for (double t : config.thresholds) r.wsl.push_back(wsl_record(id, h, it->second, t));
      }
    } catch (const std::exception& e) {
      r.error = e.what();
      r.ratio.reset();
    }
  });

  std::vector<RatioRecord> ratio_records;
  std::vector<std::vector<WslRecord>> wsl_records(config.thresholds.size());
  std::size_t failed = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Result& r = results[i];
    if (!r.ratio) {
      ++failed;
      spdlog::error("eval {}: {}", ids[i], r.error);
      continue;
    }
    ratio_records.push_back(std::move(*r.ratio));
    for (std::size_t t = 0; t < r.wsl.size(); ++t) wsl_records[t].push_back(std::move(r.wsl[t]));
  }

  std::filesystem::create_directories(config.output_dir);
  const RatioReport ratio = summarize_ratios(std::move(ratio_records));
  {
    const std::string text = format_ratio_report(ratio, to_string(config.region_kind));
    write_file_atomic(config.output_dir / ratio_report_name(config.region_kind),
                      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  fmt::print(out, "{:<14}{:>8}{:>12}{:>14}{:>12}{:>12}\n", "region", "images", "degenerate", "mean_ratio", "std", "baseline");
  fmt::print(out, "{:<14}{:>8}{:>12}{:>14.6f}{:>12.6f}{:>12.6f}\n", to_string(config.region_kind), ratio.per_image.size(),
             ratio.degenerate_count, ratio.mean, ratio.std, ratio.baseline_mean);

  bool any_wsl = false;
  for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
    if (wsl_records[t].empty()) continue;
    if (!any_wsl) fmt::print(out, "{:<14}{:>12}{:>12}\n", "threshold", "accuracy", "hits");
    any_wsl = true;
    const WslReport wsl = summarize_wsl(std::move(wsl_records[t]), config.thresholds[t]);
    const std::string text = format_wsl_report(wsl);
    write_file_atomic(config.output_dir / wsl_report_name(config.thresholds[t]),
                      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    fmt::print(out, "{:<14g}{:>12.6f}{:>12}\n", wsl.threshold_t, wsl.accuracy, fmt::format("{}/{}", wsl.hits, wsl.per_image.size()));
  }
  if (!any_wsl) spdlog::warn("no bounding boxes available; weakly supervised localization skipped");
  if (failed > 0) fmt::print(out, "failed={}\n", failed);
  return failed == 0 ? kExitOk : kExitItemFailures;
}

int cmd_overlay(const RunConfig& config, std::ostream& out) {
  validate(config);
  const DatasetIndex index = DatasetIndex::load(config.dataset_root);
  const TensorContainer heat = load_container(config.heatmaps_path());
  const auto ids = select_ids(config, index, [&](const std::string& id) { return heat.contains("heatmap/" + id); });
  OverlaySpec spec;
  spec.blend_alpha = config.blend_alpha;
  const auto dir = config.output_dir / "overlay";
  std::filesystem::create_directories(dir);

  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), config.parallelism, [&](std::size_t i) {
    const std::string& id = ids[i];
    try {
      const RgbImage image = read_rgb_image(index.image_path(id));
      const Heatmap h = upsample_heatmap(load_native_heatmap(heat, id), image.dims);
      write_png(dir / render_file_name(id, heatmap_scheme(heat, id)), overlay_image(image, h, spec));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failed = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failed;
    spdlog::error("overlay {}: {}", ids[i], errors[i]);
  }
  fmt::print(out, "overlay: images={} written={} failed={} -> {}\n", ids.size(), ids.size() - failed, failed, dir.string());
  return failed == 0 ? kExitOk : kExitItemFailures;
}

}  // namespace ecam::cli
