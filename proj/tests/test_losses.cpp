#include "lgs/losses.hpp"

#include <gtest/gtest.h>

using namespace lgs;

namespace {

Image constant_image(int w, int h, int c, double v) { return Image::constant(w, h, c, v); }

std::vector<Vec3> random_points(Rng& rng, int n, double span = 1.0) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.uniform_vec3(-span, span));
    return pts;
}

}  // namespace

TEST(GemanMcclure, PinnedValues) {
    EXPECT_DOUBLE_EQ(geman_mcclure(0.0, 0.7), 0.0);
    EXPECT_DOUBLE_EQ(geman_mcclure(0.7, 0.7), 0.5);
    EXPECT_NEAR(geman_mcclure(1e6 * 0.3, 0.3), 1.0, 1e-9);
    EXPECT_THROW(geman_mcclure(1.0, 0.0), InvalidConfig);
    EXPECT_THROW(geman_mcclure(1.0, -2.0), InvalidConfig);
}

TEST(ChamferSim, IdenticalSetsAreZero) {
    Rng rng(41);
    const auto pts = random_points(rng, 20);
    LossConfig cfg;
    EXPECT_DOUBLE_EQ(chamfer_sim_loss(pts, pts, cfg), 0.0);
}

TEST(ChamferSim, SinglePairExample) {
    LossConfig cfg;
    cfg.gm_scale = 1.0;
    const double loss = chamfer_sim_loss({Vec3::Zero()}, {Vec3(1, 0, 0)}, cfg);
    EXPECT_NEAR(loss, 0.5, 1e-9);
}

TEST(ChamferSim, TwoToOneExample) {
    LossConfig cfg;
    cfg.gm_scale = 1.0;
    const double loss = chamfer_sim_loss({Vec3::Zero(), Vec3(2, 0, 0)}, {Vec3::Zero()}, cfg);
    EXPECT_NEAR(loss, 0.2, 1e-9);
}

TEST(ChamferSim, SymmetricUnderSwap) {
    Rng rng(42);
    LossConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_points(rng, 13);
        const auto b = random_points(rng, 9);
        EXPECT_EQ(chamfer_sim_loss(a, b, cfg), chamfer_sim_loss(b, a, cfg));  // bit-exact
    }
}

TEST(ChamferSim, BoundedBelowOne) {
    Rng rng(43);
    LossConfig cfg;
    cfg.gm_scale = 0.01;
    const auto a = random_points(rng, 30, 100.0);
    const auto b = random_points(rng, 30, 100.0);
    const double loss = chamfer_sim_loss(a, b, cfg);
    EXPECT_GE(loss, 0.0);
    EXPECT_LT(loss, 1.0);
}

TEST(ChamferSim, HashGridEqualsBruteForce) {
    Rng rng(44);
    LossConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        const int na = 20 + int(rng.next_below(1980));
        const int nb = 20 + int(rng.next_below(1980));
        const auto a = random_points(rng, na, 1.5);
        const auto b = random_points(rng, nb, 1.5);
        const double brute = chamfer_sim_loss(a, b, cfg, NearestMode::BruteForce);
        const double hashed = chamfer_sim_loss(a, b, cfg, NearestMode::HashGrid);
        EXPECT_EQ(brute, hashed);  // bit-exact agreement
    }
}

TEST(ChamferSim, EmptySetThrows) {
    LossConfig cfg;
    EXPECT_THROW(chamfer_sim_loss({}, {Vec3::Zero()}, cfg), EmptyPointSet);
    EXPECT_THROW(chamfer_sim_loss({Vec3::Zero()}, {}, cfg), EmptyPointSet);
}

TEST(Arap, UniformLengthsAreZero) {
    const std::vector<Vec3> square = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    const std::vector<std::array<int, 2>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    EXPECT_DOUBLE_EQ(arap_loss(square, edges), 0.0);
}

TEST(Arap, PinnedVarianceExample) {
    // Edge lengths {1, 1, 2}: population variance 2/9.
    const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 2}};
    const std::vector<std::array<int, 2>> edges = {{0, 1}, {1, 2}, {2, 3}};
    EXPECT_NEAR(arap_loss(pts, edges), 2.0 / 9.0, 1e-9);
}

TEST(Arap, ExactInvarianceUnderExactIsometry) {
    Rng rng(45);
    const auto pts = random_points(rng, 12);
    std::vector<std::array<int, 2>> edges;
    for (int i = 0; i + 1 < 12; ++i) edges.push_back({i, i + 1});
    const double base = arap_loss(pts, edges);
    // Proper rotation by pi about z (sign flips only): exactly representable,
    // and edge-length arithmetic sees bit-identical squared terms.
    std::vector<Vec3> moved(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
        moved[i] = Vec3(-pts[i].x(), -pts[i].y(), pts[i].z());
    EXPECT_EQ(arap_loss(moved, edges), base);  // bit-exact
    // General rotation: invariant to rounding.
    const Mat3 r = axis_angle_to_matrix(Vec3(0.3, 1.1, -0.4));
    for (size_t i = 0; i < pts.size(); ++i) moved[i] = r * pts[i] + Vec3(1, 2, 3);
    EXPECT_NEAR(arap_loss(moved, edges), base, 1e-12);
}

TEST(Arap, EdgePermutationInvariant) {
    Rng rng(46);
    const auto pts = random_points(rng, 10);
    std::vector<std::array<int, 2>> edges = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {0, 5}};
    const double base = arap_loss(pts, edges);
    std::reverse(edges.begin(), edges.end());
    EXPECT_EQ(arap_loss(pts, edges), base);
}

TEST(Arap, NoEdgesThrows) {
    EXPECT_THROW(arap_loss({Vec3::Zero()}, {}), EmptyEdgeSet);
}

TEST(MaskLoss, PinnedValues) {
    const Image a = constant_image(8, 4, 1, 1.0);
    const Image b = constant_image(8, 4, 1, 0.0);
    EXPECT_DOUBLE_EQ(mask_loss(a, a), 0.0);
    EXPECT_DOUBLE_EQ(mask_loss(a, b), 1.0);
    Image half = constant_image(8, 4, 1, 0.0);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) half.at(x, y, 0) = 0.5;
    EXPECT_NEAR(mask_loss(half, b), 0.125, 1e-9);
    EXPECT_THROW(mask_loss(a, constant_image(4, 8, 1, 0.0)), DimensionMismatch);
}

TEST(ClothLbsLoss, PinnedValues) {
    SkinWeights a, b;
    a.w = MatX::Constant(6, 4, 0.25);
    b.w = a.w;
    EXPECT_DOUBLE_EQ(cloth_lbs_loss(a, b), 0.0);
    b.w.array() += 0.03;
    EXPECT_NEAR(cloth_lbs_loss(a, b), 0.03 * 0.03, 1e-12);
    SkinWeights c, d;
    c.w = MatX::Zero(2, 2);
    d.w = MatX::Zero(2, 2);
    d.w(0, 1) = 0.1;
    EXPECT_NEAR(cloth_lbs_loss(c, d), 0.0025, 1e-12);
    SkinWeights wrong;
    wrong.w = MatX::Zero(3, 4);
    EXPECT_THROW(cloth_lbs_loss(c, wrong), DimensionMismatch);
}

TEST(L1Loss, PinnedValues) {
    const Image a = constant_image(6, 6, 3, 0.0);
    const Image b = constant_image(6, 6, 3, 1.0);
    EXPECT_DOUBLE_EQ(l1_loss(a, a), 0.0);
    EXPECT_DOUBLE_EQ(l1_loss(a, b), 1.0);
    EXPECT_THROW(l1_loss(a, constant_image(6, 6, 1, 0.0)), DimensionMismatch);
}

TEST(SsimLoss, IdenticalImagesAreZero) {
    Rng rng(47);
    Image img = Image::zeros(16, 16, 3);
    for (double& v : img.data) v = rng.uniform();
    LossConfig cfg;
    EXPECT_NEAR(ssim_loss(img, img, cfg), 0.0, 1e-12);
    EXPECT_NEAR(ssim_mean(img, img, cfg), 1.0, 1e-12);
}

TEST(SsimLoss, ConstantImagesClosedForm) {
    LossConfig cfg;
    const Image a = constant_image(16, 16, 3, 0.25);
    const Image b = constant_image(16, 16, 3, 0.75);
    // Zero variances collapse the structural term to c2/c2 = 1.
    const double c1 = cfg.ssim_c1;
    const double expected = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
    EXPECT_NEAR(ssim_mean(a, b, cfg), expected, 1e-12);
    EXPECT_NEAR(ssim_loss(a, b, cfg), 1.0 - expected, 1e-12);
}

TEST(SsimLoss, RejectsUndersizedImages) {
    LossConfig cfg;
    const Image tiny = constant_image(8, 8, 3, 0.5);
    EXPECT_THROW(ssim_loss(tiny, tiny, cfg), DimensionMismatch);
}

TEST(TotalLoss, PinnedValues) {
    LossConfig cfg;
    LossParts parts;
    EXPECT_DOUBLE_EQ(total_loss(parts, cfg), 0.0);
    parts.l1 = 0.5;
    EXPECT_NEAR(total_loss(parts, cfg), 0.4, 1e-12);  // 0.8 * 0.5 at defaults
    parts = LossParts{};
    parts.l1 = 0.1;
    parts.ssim = 0.2;
    parts.sim = 0.3;
    parts.arap = 0.2;
    parts.mask = 0.1;
    parts.cloth_lbs = 1e-4;
    EXPECT_NEAR(total_loss(parts, cfg), 0.72, 1e-12);
}

TEST(TotalLoss, DefaultsMatchTrainingRecipe) {
    const LossConfig cfg;
    EXPECT_EQ(cfg.lambda_l1, 0.8);
    EXPECT_EQ(cfg.lambda_ssim, 0.2);
    EXPECT_EQ(cfg.lambda_lpips, 1.0);
    EXPECT_EQ(cfg.lambda_sim, 1.0);
    EXPECT_EQ(cfg.lambda_arap, 0.5);
    EXPECT_EQ(cfg.lambda_mask, 1.0);
    EXPECT_EQ(cfg.lambda_cloth_lbs, 1000.0);
}

TEST(Losses, AllNonNegativeOnRandomInstances) {
    Rng rng(48);
    LossConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_points(rng, 8);
        const auto b = random_points(rng, 6);
        EXPECT_GE(chamfer_sim_loss(a, b, cfg), 0.0);
        std::vector<std::array<int, 2>> edges = {{0, 1}, {2, 3}, {4, 5}};
        EXPECT_GE(arap_loss(a, edges), 0.0);
        Image x = Image::zeros(13, 13, 3), y = Image::zeros(13, 13, 3);
        for (double& v : x.data) v = rng.uniform();
        for (double& v : y.data) v = rng.uniform();
        EXPECT_GE(l1_loss(x, y), 0.0);
        EXPECT_GE(ssim_loss(x, y, cfg), 0.0);
    }
}
