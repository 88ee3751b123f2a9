#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "ecam/container.hpp"
#include "ecam/dataset.hpp"
#include "ecam/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace ecam::cli {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new std::filesystem::path(testing::make_temp_dir("cli_data"));
    data_ = new testing::SyntheticDataset(testing::make_synthetic_dataset(*root_, {.num_images = 12, .num_classes = 3}));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete root_;
  }

  RunConfig config(const std::string& tag) const {
    RunConfig c;
    c.dataset_root = *root_;
    c.container = data_->container;
    c.output_dir = testing::make_temp_dir(tag);
    return c;
  }

  static std::filesystem::path* root_;
  static testing::SyntheticDataset* data_;
  std::ostringstream out_;
};

std::filesystem::path* CliTest::root_ = nullptr;
testing::SyntheticDataset* CliTest::data_ = nullptr;

TEST(CliConfig, ReadAndApply) {
  const auto dir = testing::make_temp_dir("cli_cfg");
  std::ofstream(dir / "run.cfg") << "# comment\n\ndataset-root = /data/cub\nscheme=mean\nthreshold=0.1,0.3\njobs=4\n"
                                    "ids=3,1\npng=true\nregion=segmentation\n";
  RunConfig c;
  apply_config(read_config_file(dir / "run.cfg"), c);
  EXPECT_EQ(c.dataset_root, "/data/cub");
  EXPECT_EQ(c.proxy_scheme, ProxyScheme::mean);
  EXPECT_EQ(c.thresholds, (std::vector<double>{0.1, 0.3}));
  EXPECT_EQ(c.parallelism, 4u);
  EXPECT_EQ(c.ids, (std::vector<std::string>{"3", "1"}));
  EXPECT_TRUE(c.write_png);
  EXPECT_EQ(c.region_kind, RegionKind::segmentation);
  EXPECT_EQ(c.gradient_path, GradientSource::closed_form);
  EXPECT_EQ(c.proxies_path(), std::filesystem::path(".") / "proxies.ecam");

  std::ofstream(dir / "bad.cfg") << "scheme=mean\nnot a pair\n";
  try {
    read_config_file(dir / "bad.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(apply_config({{"colour", "red"}}, c), InvalidArgumentError);
  EXPECT_THROW(apply_config({{"png", "maybe"}}, c), InvalidArgumentError);
}

TEST(CliConfig, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  c.thresholds = {0.0};
  EXPECT_THROW(validate(c), InvalidArgumentError);
  c.thresholds = {};
  EXPECT_THROW(validate(c), InvalidArgumentError);
  c = {};
  c.parallelism = 0;
  EXPECT_THROW(validate(c), InvalidArgumentError);
  EXPECT_EQ(split_ids(""), std::vector<std::string>{});
  EXPECT_EQ(split_ids("a,,b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(wsl_report_name(0.2), "wsl_t0.2.txt");
  EXPECT_EQ(ratio_report_name(RegionKind::bbox), "ratio_bbox.txt");
}

TEST_F(CliTest, EmptyIdListIsANoOp) {
  RunConfig c = config("cli_empty");
  c.ids = std::vector<std::string>{};
  c.proxy_scheme = ProxyScheme::one_hot;
  EXPECT_EQ(cmd_cam(c, out_), 0);
  EXPECT_FALSE(std::filesystem::exists(c.heatmaps_path()));
}

TEST_F(CliTest, GradientPathsProduceSameHeatmaps) {
  RunConfig c = config("cli_paths");
  c.proxy_scheme = ProxyScheme::mean;
  ASSERT_EQ(cmd_proxy(c, out_), 0);
  c.gradient_path = GradientSource::backprop;
  c.heatmaps = c.output_dir / "bp.ecam";
  ASSERT_EQ(cmd_cam(c, out_), 0);
  c.gradient_path = GradientSource::closed_form;
  c.heatmaps = c.output_dir / "cf.ecam";
  ASSERT_EQ(cmd_cam(c, out_), 0);
  const TensorContainer bp = load_container(c.output_dir / "bp.ecam");
  const TensorContainer cf = load_container(c.output_dir / "cf.ecam");
  ASSERT_EQ(bp.entries().size(), data_->ids.size());
  for (const auto& id : data_->ids) {
    const Tensor a = bp.tensor("heatmap/" + id), b = cf.tensor("heatmap/" + id);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
    EXPECT_EQ(cf.entry("heatmap/" + id).metadata.at("proxy"), data_->class_ids[&id - data_->ids.data()]);
  }
}

TEST_F(CliTest, OneHotMatchesClassColumnReference) {
  RunConfig c = config("cli_onehot");
  c.proxy_scheme = ProxyScheme::one_hot;
  ASSERT_EQ(cmd_cam(c, out_), 0);
  const TensorContainer heat = load_container(c.heatmaps_path());
  const TensorContainer src = load_container(data_->container);
  const Tensor w = src.tensor("fc_kernel");
  const std::size_t k = w.dim(0), d = w.dim(1);
  for (std::size_t n = 0; n < data_->ids.size(); ++n) {
    const Tensor a = src.tensor("activations/" + data_->ids[n]);
    const std::size_t col = std::stoul(data_->class_ids[n]) - 1;
    oracle::Vec alpha(k);
    for (std::size_t ch = 0; ch < k; ++ch) alpha[ch] = w.at(ch, col);
    const oracle::Vec act(a.values().begin(), a.values().end());
    const oracle::Vec ref = oracle::weighted_heatmap(alpha, act, k, a.dim(1), a.dim(2));
    const double peak = oracle::max_abs(ref);
    const Tensor got = heat.tensor("heatmap/" + data_->ids[n]);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i] / peak, 1e-9);
  }
  EXPECT_EQ(d, 3u);
}

TEST_F(CliTest, ConstantHeatmapReproducesBaseline) {
  RunConfig c = config("cli_const");
  c.proxy_scheme = ProxyScheme::single_point;
  ASSERT_EQ(cmd_proxy(c, out_), 0);
  ASSERT_EQ(cmd_cam(c, out_), 0);
  c.constant_heatmap = true;
  for (auto region : {RegionKind::bbox, RegionKind::segmentation}) {
    c.region_kind = region;
    ASSERT_EQ(cmd_eval(c, out_), 0);
    const std::string text = slurp(c.output_dir / ratio_report_name(region));
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.starts_with("image ")) continue;
      const auto r = line.find("ratio="), b = line.find("baseline=");
      const double ratio = std::stod(line.substr(r + 6)), base = std::stod(line.substr(b + 9));
      EXPECT_NEAR(ratio, base, 1e-12) << line;
    }
  }
}

TEST_F(CliTest, SinglePointHeatmapsAreReadBackByEval) {
  RunConfig c = config("cli_eval");
  c.thresholds = {0.2, 0.4};
  ASSERT_EQ(cmd_proxy(c, out_), 0);
  ASSERT_EQ(cmd_cam(c, out_), 0);
  ASSERT_EQ(cmd_eval(c, out_), 0);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "wsl_t0.2.txt"));
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "wsl_t0.4.txt"));
  EXPECT_NE(out_.str().find("mean_ratio"), std::string::npos);
  EXPECT_TRUE(slurp(c.output_dir / "ratio_bbox.txt").starts_with("# ecam ratio-report 1 region=bbox\n"));
}

TEST_F(CliTest, PngAndOverlayOutputs) {
  RunConfig c = config("cli_png");
  c.proxy_scheme = ProxyScheme::one_hot;
  c.write_png = true;
  c.store_upsampled = true;
  c.ids = std::vector<std::string>{data_->ids[0], data_->ids[1]};
  ASSERT_EQ(cmd_cam(c, out_), 0);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "png" / (data_->ids[0] + "__one_hot.png")));
  const TensorContainer heat = load_container(c.heatmaps_path());
  EXPECT_EQ(heat.entry("heatmap_up/" + data_->ids[1]).dtype, DType::f32);
  ASSERT_EQ(cmd_overlay(c, out_), 0);
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "overlay" / (data_->ids[1] + "__one_hot.png")));
}

TEST_F(CliTest, MissingEmbeddingsIsSetupError) {
  RunConfig c = config("cli_missing");
  c.proxy_scheme = ProxyScheme::mean;
  ContainerBuilder b;
  b.add("embedding/" + data_->ids[0], Tensor::vector({1, 0, 0}));
  write_container(b.build(), c.output_dir / "partial.ecam");
  c.container = c.output_dir / "partial.ecam";
  EXPECT_EQ(cmd_proxy(c, out_), 2);
  EXPECT_FALSE(std::filesystem::exists(c.proxies_path()));
}

TEST_F(CliTest, MissingAnnotationsIsSetupError) {
  RunConfig c = config("cli_noanno");
  c.proxy_scheme = ProxyScheme::one_hot;
  ASSERT_EQ(cmd_cam(c, out_), 0);
  const auto copy = testing::make_temp_dir("cli_noanno_root");
  for (const auto& f : std::filesystem::directory_iterator(*root_)) {
    if (f.is_regular_file() && f.path().filename() != "bounding_boxes.txt") std::filesystem::copy(f.path(), copy / f.path().filename());
  }
  c.dataset_root = copy;
  EXPECT_EQ(cmd_eval(c, out_), 2);
  c.region_kind = RegionKind::segmentation;
  EXPECT_EQ(cmd_eval(c, out_), 2);
}

TEST_F(CliTest, UnknownImageAndPerItemFailures) {
  RunConfig c = config("cli_fail");
  c.proxy_scheme = ProxyScheme::one_hot;
  c.ids = std::vector<std::string>{data_->ids[0], "no-such-image"};
  EXPECT_EQ(cmd_cam(c, out_), 1);
  const TensorContainer heat = load_container(c.heatmaps_path());
  EXPECT_TRUE(heat.contains("heatmap/" + data_->ids[0]));
  EXPECT_EQ(heat.entries().size(), 1u);
}

TEST_F(CliTest, ProxySchemeMismatchIsSetupError) {
  RunConfig c = config("cli_mismatch");
  c.proxy_scheme = ProxyScheme::single_point;
  ASSERT_EQ(cmd_proxy(c, out_), 0);
  c.proxy_scheme = ProxyScheme::mean;
  EXPECT_EQ(cmd_cam(c, out_), 2);
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(ECAM_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, ToolFlagsOverrideConfigFile) {
  const auto dir = testing::make_temp_dir("cli_tool");
  std::ofstream(dir / "run.cfg") << "dataset-root=" << root_->string() << "\ncontainer=" << data_->container.string()
                                 << "\nout=" << dir.string() << "\nscheme=mean\n";
  ASSERT_EQ(run_tool("proxy --config " + (dir / "run.cfg").string() + " --scheme one_hot"), 0);
  const auto proxies = load_proxies(dir / "proxies.ecam");
  ASSERT_FALSE(proxies.empty());
  EXPECT_EQ(proxies.front().scheme, ProxyScheme::one_hot);
  EXPECT_EQ(run_tool("proxy --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_tool("eval --config " + (dir / "run.cfg").string() + " --threshold 1.5"), 2);
  EXPECT_NE(run_tool("frobnicate"), 0);
}

}  // namespace
}  // namespace ecam::cli
