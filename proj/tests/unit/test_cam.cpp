#include <gtest/gtest.h>
#include <algorithm>

#include <random>

#include "ecam/cam.hpp"
#include "ecam/error.hpp"
#include "oracles.hpp"

namespace ecam {
namespace {

using oracle::Vec;

Vec to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

struct Instance {
  std::size_t k, d, h, w;
  Vec act, kernel, proxy;

  ActivationMap activations() const { return ActivationMap(Tensor({k, h, w}, act), "x"); }
  FcKernel fc() const { return FcKernel(Tensor({k, d}, kernel)); }
  ProxyVector p() const { return {Tensor::vector(proxy), ProxyScheme::mean, "c", 1}; }
};

Instance random_instance(std::mt19937_64& rng, std::size_t max_k, std::size_t max_d, std::size_t max_hw) {
  std::uniform_int_distribution<std::size_t> dk(1, max_k), dd(1, max_d), dhw(1, max_hw);
  Instance in{dk(rng), dd(rng), dhw(rng), 0, {}, {}, {}};
  in.w = in.h;
  in.act = oracle::random_vec(rng, in.k * in.h * in.w, -1, 2);
  in.kernel = oracle::random_vec(rng, in.k * in.d);
  in.proxy = oracle::random_vec(rng, in.d);
  const double n = oracle::norm(in.proxy);
  for (double& v : in.proxy) v /= n;
  return in;
}

TEST(ForwardHead, IdentityKernelPoolsConstantChannels) {
  const ActivationMap a(Tensor({3, 2, 2}, {2, 2, 2, 2, 5, 5, 5, 5, 1, 1, 1, 1}));
  const FcKernel w(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const EmbeddingPair y = forward_head(a, w);
  EXPECT_EQ(y.raw, Tensor::vector({2, 5, 1}));
  EXPECT_NEAR(oracle::norm(to_vec(y.unit)), 1.0, 1e-12);
}

TEST(ForwardHead, MatchesGapMatvecOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec act = oracle::random_vec(rng, 4 * 3 * 3);
    const Vec ker = oracle::random_vec(rng, 4 * 2);
    const EmbeddingPair y = forward_head(ActivationMap(Tensor({4, 3, 3}, act)), FcKernel(Tensor({4, 2}, ker)));
    const Vec raw = oracle::matvec_t(ker, 4, 2, oracle::spatial_mean(act, 4, 3, 3));
    EXPECT_LT(oracle::max_abs_diff(to_vec(y.raw), raw), 1e-12);
    const double n = oracle::norm(raw);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(y.unit[i], raw[i] / n, 1e-12);
    EXPECT_NEAR(oracle::norm(to_vec(y.unit)), 1.0, 1e-12);
  }
}

TEST(ForwardHead, Errors) {
  EXPECT_THROW(forward_head(ActivationMap(Tensor::filled({2, 2, 2}, 1.0)), FcKernel(Tensor::filled({3, 2}, 1.0))),
               DimensionError);
  EXPECT_THROW(forward_head(ActivationMap(Tensor::zeros({2, 2, 2})), FcKernel(Tensor::filled({2, 2}, 1.0))),
               DegenerateInputError);
  EXPECT_THROW(ActivationMap(Tensor::zeros({2, 2})), DimensionError);
  EXPECT_THROW(FcKernel(Tensor::zeros({2})), DimensionError);
}

TEST(ProxyLoss, Examples) {
  const EmbeddingPair aligned = EmbeddingPair::from_raw(Tensor::vector({0, 2, 0}));
  const ProxyVector p{Tensor::vector({0, 1, 0}), ProxyScheme::mean, "c", 1};
  EXPECT_EQ(proxy_loss(aligned, p), 2.0);
  const EmbeddingPair ortho = EmbeddingPair::from_raw(Tensor::vector({3, 0, 0}));
  EXPECT_EQ(proxy_loss(ortho, p), 0.0);
  std::mt19937_64 rng(22);
  const Vec raw = oracle::random_vec(rng, 16);
  const Vec pv = oracle::random_vec(rng, 16);
  EXPECT_NEAR(proxy_loss(EmbeddingPair::from_raw(Tensor::vector(raw)), {Tensor::vector(pv), ProxyScheme::mean, "", 1}),
              oracle::dot(raw, pv), 1e-12);
  EXPECT_THROW(proxy_loss(aligned, {Tensor::vector({1, 0}), ProxyScheme::mean, "", 1}), DimensionError);
}

TEST(GradBackprop, SingleChannelQuarterPerPixel) {
  const ActivationMap a(Tensor({1, 2, 2}, {1, 2, 3, 4}));
  const FcKernel w(Tensor({1, 1}, {1}));
  const Tensor g = grad_backprop(a, w, {Tensor::vector({1}), ProxyScheme::mean, "", 1});
  EXPECT_EQ(g, Tensor::filled({1, 2, 2}, 0.25));
}

TEST(GradBackprop, ZeroProxyGivesZeroGradient) {
  std::mt19937_64 rng(23);
  const Instance in = random_instance(rng, 6, 4, 4);
  const ProxyVector zero{Tensor::zeros({in.d}), ProxyScheme::mean, "", 1};
  const Tensor g = grad_backprop(in.activations(), in.fc(), zero);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(GradBackprop, MatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(rng, 8, 8, 5);
    const Tensor g = grad_backprop(in.activations(), in.fc(), in.p());
    const Vec fd = oracle::finite_difference_gradient(in.act, in.k, in.h, in.w, in.kernel, in.d, in.proxy, 1e-5);
    EXPECT_LT(oracle::relative_error(to_vec(g), fd), 1e-6) << "trial " << trial;
  }
}

TEST(GradBackprop, ShapeMismatch) {
  std::mt19937_64 rng(25);
  const Instance in = random_instance(rng, 4, 4, 3);
  EXPECT_THROW(grad_backprop(in.activations(), in.fc(), {Tensor::zeros({in.d + 1}), ProxyScheme::mean, "", 1}),
               DimensionError);
}

TEST(GradClosedForm, Examples) {
  const FcKernel eye(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const Tensor g = grad_closed_form(eye, one_hot_proxy(1, 3), 4);
  EXPECT_EQ(g, Tensor::vector({0, 0.25, 0}));
  std::mt19937_64 rng(26);
  const Instance in = random_instance(rng, 8, 5, 3);
  const Tensor g1 = grad_closed_form(in.fc(), in.p(), 1);
  const Vec wp = oracle::matvec(in.kernel, in.k, in.d, in.proxy);
  EXPECT_LT(oracle::max_abs_diff(to_vec(g1), wp), 1e-15);
  EXPECT_THROW(grad_closed_form(in.fc(), in.p(), 0), InvalidArgumentError);
}

TEST(GradClosedForm, EqualsPooledBackprop) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = random_instance(rng, 16, 8, 7);
    const Tensor cf = grad_closed_form(in.fc(), in.p(), in.h * in.w);
    const Tensor pooled = spatial_mean(grad_backprop(in.activations(), in.fc(), in.p()));
    EXPECT_LT(oracle::max_abs_diff(to_vec(cf), to_vec(pooled)), 1e-12);
  }
}

TEST(ChannelWeights, Examples) {
  const Tensor g({2, 2, 2}, {3, 3, 3, 3, -1, -1, -1, -1});
  EXPECT_EQ(channel_weights(g).alpha, Tensor::vector({3, -1}));
  EXPECT_EQ(channel_weights(Tensor::zeros({3, 2, 2})).alpha, Tensor::zeros({3}));
  std::mt19937_64 rng(28);
  const Vec r = oracle::random_vec(rng, 5 * 4 * 6);
  const Tensor alpha = channel_weights(Tensor({5, 4, 6}, r)).alpha;
  EXPECT_LT(oracle::max_abs_diff(to_vec(alpha), oracle::spatial_mean(r, 5, 4, 6)), 1e-12);
}

TEST(Heatmap, SelectsChannelWithBasisWeights) {
  const ActivationMap a(Tensor({2, 2, 2}, {0.5, 1, 2, 0, -9, 9, -9, 9}));
  const Heatmap h = heatmap({Tensor::vector({1, 0}), ""}, a);
  EXPECT_EQ(h.grid, Tensor({2, 2}, {0.5, 1, 2, 0}));
  EXPECT_FALSE(h.normalized);
}

TEST(Heatmap, NegativeEvidenceClampsToZero) {
  const ActivationMap a(Tensor::filled({2, 3, 3}, 1.0));
  const Heatmap h = heatmap({Tensor::vector({-1, 0.5}), ""}, a);
  EXPECT_EQ(h.grid, Tensor::zeros({3, 3}));
  EXPECT_TRUE(normalize_heatmap(h).degenerate);
}

TEST(Heatmap, MatchesWeightedSumClampOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec act = oracle::random_vec(rng, 12 * 7 * 7);
    const Vec alpha = oracle::random_vec(rng, 12);
    const Heatmap h = heatmap({Tensor::vector(alpha), ""}, ActivationMap(Tensor({12, 7, 7}, act)));
    EXPECT_LT(oracle::max_abs_diff(to_vec(h.grid), oracle::weighted_heatmap(alpha, act, 12, 7, 7)), 1e-12);
    for (double v : h.grid.values()) EXPECT_GE(v, 0.0);
  }
  EXPECT_THROW(heatmap({Tensor::vector({1}), ""}, ActivationMap(Tensor::zeros({2, 2, 2}))), DimensionError);
}

TEST(NormalizeHeatmap, DividesByMax) {
  const Heatmap h{Tensor({2, 2}, {1, 4, 2, 0}), false, false, std::nullopt};
  const Heatmap n = normalize_heatmap(h);
  EXPECT_TRUE(n.normalized);
  EXPECT_FALSE(n.degenerate);
  EXPECT_EQ(n.grid, Tensor({2, 2}, {0.25, 1, 0.5, 0}));
}

TEST(NormalizeHeatmap, AllZeroIsFlaggedNotRescaled) {
  const Heatmap n = normalize_heatmap({Tensor::zeros({3, 3}), false, false, std::nullopt});
  EXPECT_TRUE(n.degenerate);
  EXPECT_FALSE(n.normalized);
  EXPECT_EQ(n.grid, Tensor::zeros({3, 3}));
}

TEST(NormalizeHeatmap, PositiveScaleInvariant) {
  std::mt19937_64 rng(30);
  const Vec v = oracle::random_vec(rng, 49, 0, 3);
  Vec scaled = v;
  for (double& x : scaled) x *= 17.25;
  const Heatmap a = normalize_heatmap({Tensor({7, 7}, v), false, false, std::nullopt});
  const Heatmap b = normalize_heatmap({Tensor({7, 7}, scaled), false, false, std::nullopt});
  EXPECT_LT(oracle::max_abs_diff(to_vec(a.grid), to_vec(b.grid)), 1e-15);
  EXPECT_EQ(*std::max_element(a.grid.values().begin(), a.grid.values().end()), 1.0);
}

TEST(EmbeddingCam, BackpropAndClosedFormAgree) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = random_instance(rng, 32, 16, 7);
    const Heatmap a = embedding_cam(in.activations(), in.fc(), in.p(), GradientPath::backprop);
    const Heatmap b = embedding_cam(in.activations(), in.fc(), in.p(), GradientPath::closed_form);
    EXPECT_EQ(a.degenerate, b.degenerate);
    EXPECT_LT(oracle::max_abs_diff(to_vec(a.grid), to_vec(b.grid)), 1e-9);
  }
}

TEST(EmbeddingCam, OneHotProxyReducesToClassColumn) {
  std::mt19937_64 rng(32);
  const std::size_t k = 10, classes = 4, hw = 5;
  const Vec act = oracle::random_vec(rng, k * hw * hw, 0, 1);
  const Vec ker = oracle::random_vec(rng, k * classes);
  const ActivationMap a(Tensor({k, hw, hw}, act));
  const FcKernel w(Tensor({k, classes}, ker));
  for (std::size_t c = 0; c < classes; ++c) {
    const ProxyVector p = one_hot_proxy(c, classes);
    const ChannelWeights alpha = channel_weights(grad_backprop(a, w, p));
    for (std::size_t ch = 0; ch < k; ++ch) EXPECT_NEAR(alpha.alpha[ch] * hw * hw, ker[ch * classes + c], 1e-12);
    // GradCAM with the CAM weights column c.
    Vec column(k);
    for (std::size_t ch = 0; ch < k; ++ch) column[ch] = ker[ch * classes + c];
    const Vec ref = oracle::weighted_heatmap(column, act, k, hw, hw);
    const Heatmap h = embedding_cam(a, w, p, GradientPath::closed_form);
    const double peak = oracle::max_abs(ref);
    if (peak == 0.0) {
      EXPECT_TRUE(h.degenerate);
      continue;
    }
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(h.grid[i], ref[i] / peak, 1e-9);
    EXPECT_NEAR(proxy_loss(forward_head(a, w), p), forward_head(a, w).raw[c], 0.0);
  }
}

TEST(EmbeddingCam, ProxyScaleDoesNotChangeNormalizedMap) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    Instance in = random_instance(rng, 16, 8, 7);
    ProxyVector scaled = in.p();
    Vec sv = in.proxy;
    for (double& v : sv) v *= 3.5;
    scaled.values = Tensor::vector(sv);
    for (auto path : {GradientPath::backprop, GradientPath::closed_form}) {
      const Heatmap a = embedding_cam(in.activations(), in.fc(), in.p(), path);
      const Heatmap b = embedding_cam(in.activations(), in.fc(), scaled, path);
      EXPECT_LT(oracle::max_abs_diff(to_vec(a.grid), to_vec(b.grid)), 1e-12);
    }
  }
}

TEST(EmbeddingCam, SinglePointProxyIsNeverDegenerate) {
  // sum_ij of the pre-ReLU map equals y . y_hat = |y| > 0.
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(rng, 16, 8, 7);
    const EmbeddingPair y = forward_head(in.activations(), in.fc());
    const Heatmap h = embedding_cam(in.activations(), in.fc(), single_point_proxy(y, "self"), GradientPath::backprop);
    EXPECT_FALSE(h.degenerate);
    EXPECT_TRUE(h.normalized);
  }
}

TEST(EmbeddingCam, PlantedBlobDominates) {
  // Channel 0 carries the class signal in the top-left 2x2 block of a 4x4 map.
  Vec act(3 * 16, 0.05);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) act[r * 4 + c] = 1.0;
  }
  const Vec ker{1, 0, 0, 1, 0, 0};  // 3 x 2
  const ActivationMap a(Tensor({3, 4, 4}, act));
  const FcKernel w(Tensor({3, 2}, ker));
  const Heatmap h = embedding_cam(a, w, one_hot_proxy(0, 2), GradientPath::backprop);
  double inside = 0, total = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    total += h.grid[i];
    if (i / 4 < 2 && i % 4 < 2) inside += h.grid[i];
  }
  EXPECT_GT(inside / total, 0.5);
}

TEST(EmbeddingCam, ExternalGradientMatchesBackprop) {
  std::mt19937_64 rng(35);
  const Instance in = random_instance(rng, 8, 4, 5);
  const Tensor g = grad_backprop(in.activations(), in.fc(), in.p());
  const Heatmap a = embedding_cam_from_gradient(in.activations(), g);
  const Heatmap b = embedding_cam(in.activations(), in.fc(), in.p(), GradientPath::backprop);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_THROW(embedding_cam_from_gradient(in.activations(), Tensor::zeros({1, 1, 1})), DimensionError);
}

TEST(UpsampleHeatmap, KeepsFlagsAndRecordsResolution) {
  const Heatmap h = normalize_heatmap({Tensor({2, 2}, {0, 1, 2, 4}), false, false, std::nullopt});
  const Heatmap up = upsample_heatmap(h, {5, 7});
  EXPECT_TRUE(up.normalized);
  ASSERT_TRUE(up.upsampled_to.has_value());
  EXPECT_EQ(*up.upsampled_to, (ImageDims{5, 7}));
  EXPECT_EQ(up.height(), 5u);
  EXPECT_EQ(up.width(), 7u);
}

}  // namespace
}  // namespace ecam
