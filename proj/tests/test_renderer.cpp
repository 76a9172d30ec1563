#include "lgs/renderer.hpp"

#include <gtest/gtest.h>

using namespace lgs;

namespace {

Camera simple_camera(int side = 32, double focal = 50.0) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = side / 2.0;
    cam.cy = side / 2.0;
    cam.width = cam.height = side;
    cam.near = 0.1;
    return cam;
}

Splat2D disk_splat(double px, double py, double depth, const Vec3& color, double alpha,
                   double radius_px = 2.0) {
    Splat2D s;
    s.mean2d = {px, py};
    s.cov_xx = s.cov_yy = radius_px * radius_px;
    s.cov_xy = 0.0;
    s.depth = depth;
    s.color = color;
    s.alpha_base = alpha;
    return s;
}

}  // namespace

TEST(Project, OnAxisPointHitsPrincipalPoint) {
    const Camera cam = simple_camera();
    const auto s = project(Vec3(0, 0, 2.0), Mat3::Identity(), Vec3(0.1, 0.1, 0.1), cam);
    ASSERT_TRUE(s.has_value());
    EXPECT_DOUBLE_EQ(s->mean2d.x(), cam.cx);
    EXPECT_DOUBLE_EQ(s->mean2d.y(), cam.cy);
    EXPECT_DOUBLE_EQ(s->depth, 2.0);
}

TEST(Project, OnAxisIsotropicCovariance) {
    const Camera cam = simple_camera();
    const double d = 3.0, scale = 0.2;
    const auto s = project(Vec3(0, 0, d), Mat3::Identity(), Vec3::Constant(scale), cam);
    ASSERT_TRUE(s.has_value());
    const double expected = (cam.fx * scale / d) * (cam.fx * scale / d) + kCovDilation;
    EXPECT_NEAR(s->cov_xx, expected, 1e-12);
    EXPECT_NEAR(s->cov_yy, expected, 1e-12);
    EXPECT_NEAR(s->cov_xy, 0.0, 1e-12);
}

TEST(Project, CullsBehindNearPlane) {
    const Camera cam = simple_camera();
    EXPECT_FALSE(project(Vec3(0, 0, cam.near / 2), Mat3::Identity(), Vec3::Ones(), cam));
    EXPECT_FALSE(project(Vec3(0, 0, -1.0), Mat3::Identity(), Vec3::Ones(), cam));
    EXPECT_TRUE(project(Vec3(0, 0, cam.near * 2), Mat3::Identity(), Vec3::Ones(), cam));
}

TEST(Project, BackwardMatchesFiniteDifferences) {
    const Camera cam = simple_camera();
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 center = Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                 rng.uniform(1.5, 4.0));
        Mat3 factor;
        for (int i = 0; i < 9; ++i) factor.data()[i] = rng.uniform(-0.2, 0.2);
        factor.diagonal().array() += 0.3;
        Splat2DGrad up;
        up.d_mean2d = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        up.d_cov_xx = rng.uniform(-1, 1);
        up.d_cov_xy = rng.uniform(-1, 1);
        up.d_cov_yy = rng.uniform(-1, 1);
        Vec3 d_center = Vec3::Zero();
        Mat3 d_factor = Mat3::Zero();
        project_backward(center, factor, cam, up, d_center, d_factor);
        const auto loss = [&](const Vec3& c, const Mat3& f) {
            const auto s = project(c, f, cam);
            return up.d_mean2d.x() * s->mean2d.x() + up.d_mean2d.y() * s->mean2d.y() +
                   up.d_cov_xx * s->cov_xx + up.d_cov_xy * s->cov_xy + up.d_cov_yy * s->cov_yy;
        };
        const double h = 1e-6;
        for (int a = 0; a < 3; ++a) {
            Vec3 probe = center;
            probe[a] += h;
            const double hi = loss(probe, factor);
            probe[a] -= 2 * h;
            const double lo = loss(probe, factor);
            EXPECT_NEAR(d_center[a], (hi - lo) / (2 * h), 1e-5);
        }
        for (int i = 0; i < 9; ++i) {
            Mat3 probe = factor;
            probe.data()[i] += h;
            const double hi = loss(center, probe);
            probe.data()[i] -= 2 * h;
            const double lo = loss(center, probe);
            EXPECT_NEAR(d_factor.data()[i], (hi - lo) / (2 * h), 1e-5);
        }
    }
}

TEST(Rasterize, EmptySceneShowsBackground) {
    const Vec3 bg(0.2, 0.4, 0.6);
    const RenderOutput out = rasterize({}, bg, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            EXPECT_EQ(out.rgb.rgb(x, y), bg);
            EXPECT_EQ(out.alpha.at(x, y, 0), 0.0);
        }
}

TEST(Rasterize, SingleSplatCompositesOverBackground) {
    const Vec3 bg(0.0, 0.0, 1.0);
    const Vec3 red(1.0, 0.0, 0.0);
    // Centered on pixel (4,4)'s sample point.
    const RenderOutput out = rasterize({disk_splat(4.5, 4.5, 1.0, red, 0.5)}, bg, 8, 8);
    const Vec3 expected = 0.5 * red + 0.5 * bg;
    EXPECT_LT((out.rgb.rgb(4, 4) - expected).norm(), 1e-12);
    EXPECT_NEAR(out.alpha.at(4, 4, 0), 0.5, 1e-12);
    EXPECT_NEAR(out.depth.at(4, 4, 0), 1.0, 1e-9);
}

TEST(Rasterize, TwoCoincidentSplatsFrontToBack) {
    const Vec3 red(1, 0, 0), blue(0, 0, 1);
    const RenderOutput out = rasterize(
        {disk_splat(4.5, 4.5, 2.0, blue, 0.5), disk_splat(4.5, 4.5, 1.0, red, 0.5)},
        Vec3::Zero(), 8, 8);
    EXPECT_LT((out.rgb.rgb(4, 4) - Vec3(0.5, 0.0, 0.25)).norm(), 1e-12);
}

TEST(Rasterize, OrderInvariantWithDistinctDepths) {
    Rng rng(9);
    std::vector<Splat2D> splats;
    for (int i = 0; i < 40; ++i)
        splats.push_back(disk_splat(rng.uniform(0, 32), rng.uniform(0, 32), 1.0 + i * 0.01,
                                    rng.uniform_vec3(0, 1), rng.uniform(0.2, 0.9),
                                    rng.uniform(1.0, 4.0)));
    const RenderOutput base = rasterize(splats, Vec3(0.1, 0.2, 0.3), 32, 32);
    std::vector<Splat2D> permuted;
    for (size_t i = 0; i < splats.size(); ++i) permuted.push_back(splats[(i * 17 + 5) % splats.size()]);
    const RenderOutput shuffled = rasterize(permuted, Vec3(0.1, 0.2, 0.3), 32, 32);
    EXPECT_EQ(base.rgb.data, shuffled.rgb.data);  // bit-identical
    EXPECT_EQ(base.alpha.data, shuffled.alpha.data);
}

TEST(Rasterize, TiledMatchesReference) {
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Splat2D> splats;
        for (int i = 0; i < 60; ++i)
            splats.push_back(disk_splat(rng.uniform(-4, 36), rng.uniform(-4, 36),
                                        rng.uniform(0.5, 5.0), rng.uniform_vec3(0, 1),
                                        rng.uniform(0.05, 0.98), rng.uniform(0.8, 6.0)));
        const Vec3 bg(0.3, 0.1, 0.2);
        const RenderOutput tiled = rasterize(splats, bg, 33, 27);  // non-multiple of tile size
        const Image reference = rasterize_reference(splats, bg, 33, 27);
        EXPECT_EQ(tiled.rgb.data, reference.data);
    }
}

TEST(Rasterize, TransmittanceMonotoneAlphaBounded) {
    Rng rng(11);
    std::vector<Splat2D> splats;
    for (int i = 0; i < 100; ++i)
        splats.push_back(disk_splat(rng.uniform(0, 16), rng.uniform(0, 16), rng.uniform(0.5, 3.0),
                                    rng.uniform_vec3(0, 1), 0.97, 5.0));
    const RenderOutput out = rasterize(splats, Vec3::Zero(), 16, 16);
    for (double a : out.alpha.data) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
}

TEST(RasterizeBackward, ZeroUpstreamZeroGrads) {
    const auto splats = std::vector<Splat2D>{disk_splat(4.5, 4.5, 1.0, Vec3(1, 0, 0), 0.5)};
    const RenderOutput out = rasterize(splats, Vec3::Zero(), 8, 8);
    const auto grads = rasterize_backward(splats, out, Vec3::Zero(), Image::zeros(8, 8, 3));
    EXPECT_EQ(grads[0].d_color.norm(), 0.0);
    EXPECT_EQ(grads[0].d_mean2d.norm(), 0.0);
    EXPECT_EQ(grads[0].d_alpha_base, 0.0);
}

TEST(RasterizeBackward, SingleSplatColorGradientIsAlpha) {
    const auto splats = std::vector<Splat2D>{disk_splat(4.5, 4.5, 1.0, Vec3(1, 0, 0), 0.5)};
    const RenderOutput out = rasterize(splats, Vec3::Zero(), 8, 8);
    Image d_rgb = Image::zeros(8, 8, 3);
    d_rgb.at(4, 4, 0) = 1.0;  // d(loss)/d(red at the center pixel)
    const auto grads = rasterize_backward(splats, out, Vec3::Zero(), d_rgb);
    EXPECT_NEAR(grads[0].d_color.x(), 0.5, 1e-12);  // T0 * alpha with T0 = 1
    EXPECT_EQ(grads[0].d_color.y(), 0.0);
}

TEST(RasterizeBackward, FiniteDifferenceOnFiveSplatPixel) {
    Rng rng(12);
    std::vector<Splat2D> splats;
    for (int i = 0; i < 5; ++i)
        splats.push_back(disk_splat(7.5 + rng.uniform(-1, 1), 7.5 + rng.uniform(-1, 1),
                                    1.0 + 0.3 * i, rng.uniform_vec3(0.1, 0.9),
                                    rng.uniform(0.3, 0.7), rng.uniform(1.5, 3.0)));
    const Vec3 bg(0.25, 0.5, 0.75);
    Image d_rgb = Image::zeros(16, 16, 3);
    Rng up_rng(13);
    for (double& v : d_rgb.data) v = up_rng.uniform(-1, 1);
    const RenderOutput out = rasterize(splats, bg, 16, 16);
    const auto grads = rasterize_backward(splats, out, bg, d_rgb);

    const auto loss = [&](const std::vector<Splat2D>& probe) {
        const RenderOutput o = rasterize(probe, bg, 16, 16);
        double acc = 0.0;
        for (size_t i = 0; i < o.rgb.data.size(); ++i) acc += o.rgb.data[i] * d_rgb.data[i];
        return acc;
    };
    const double h = 1e-6;
    for (size_t i = 0; i < splats.size(); ++i) {
        auto fd = [&](auto setter, double analytic) {
            std::vector<Splat2D> probe = splats;
            setter(probe[i], h);
            const double hi = loss(probe);
            probe = splats;
            setter(probe[i], -h);
            const double lo = loss(probe);
            const double numeric = (hi - lo) / (2 * h);
            EXPECT_NEAR(analytic, numeric, 1e-4 * std::max(1.0, std::abs(numeric)));
        };
        fd([](Splat2D& s, double d) { s.mean2d.x() += d; }, grads[i].d_mean2d.x());
        fd([](Splat2D& s, double d) { s.mean2d.y() += d; }, grads[i].d_mean2d.y());
        fd([](Splat2D& s, double d) { s.cov_xx += d; }, grads[i].d_cov_xx);
        fd([](Splat2D& s, double d) { s.cov_xy += d; }, grads[i].d_cov_xy);
        fd([](Splat2D& s, double d) { s.cov_yy += d; }, grads[i].d_cov_yy);
        fd([](Splat2D& s, double d) { s.alpha_base += d; }, grads[i].d_alpha_base);
        fd([](Splat2D& s, double d) { s.color.x() += d; }, grads[i].d_color.x());
    }
}

TEST(RenderPasses, EmptyBodyEqualsSceneOnly) {
    Rng rng(14);
    std::vector<WorldSplat> scene;
    for (int i = 0; i < 10; ++i) {
        WorldSplat s;
        s.center = rng.uniform_vec3(-0.5, 0.5) + Vec3(0, 0, 3);
        s.cov_factor = 0.1 * Mat3::Identity();
        s.opacity = 0.8;
        s.sh.row(0) = Eigen::RowVector3d(0.3, -0.2, 0.5);
        scene.push_back(s);
    }
    const Camera cam = simple_camera();
    const Vec3 bg(1, 1, 1);
    const RenderPass with_empty = render_base({}, scene, cam, bg);
    const RenderPass direct = render_splats(scene, cam, bg);
    EXPECT_EQ(with_empty.out.rgb.data, direct.out.rgb.data);
}

TEST(RenderPasses, DepthSortResolvesOcclusion) {
    WorldSplat front, back;
    front.center = Vec3(0, 0, 1.0);
    back.center = Vec3(0, 0, 3.0);
    front.cov_factor = back.cov_factor = 0.3 * Mat3::Identity();
    front.opacity = back.opacity = 0.99;
    front.sh.row(0) = ((Vec3(1.0, 0, 0).array() - 0.5) / sh::kC0).matrix().transpose();
    back.sh.row(0) = ((Vec3(0, 1.0, 0).array() - 0.5) / sh::kC0).matrix().transpose();
    const Camera cam = simple_camera();
    // Scene splat strictly in front of the body splat: pixel shows the scene.
    const RenderPass pass = render_base({back}, {front}, cam, Vec3::Zero());
    const Vec3 center_px = pass.out.rgb.rgb(16, 16);
    EXPECT_GT(center_px.x(), 0.9);
    EXPECT_LT(center_px.y(), 0.05);
}

TEST(RenderPasses, MergedListOracle) {
    Rng rng(15);
    std::vector<WorldSplat> body, scene;
    for (int i = 0; i < 12; ++i) {
        WorldSplat s;
        s.center = rng.uniform_vec3(-0.4, 0.4) + Vec3(0, 0, rng.uniform(2.0, 4.0));
        s.cov_factor = rng.uniform(0.05, 0.2) * Mat3::Identity();
        s.opacity = rng.uniform(0.3, 0.9);
        s.sh.row(0) = Eigen::RowVector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                         rng.uniform(-0.5, 0.5));
        (i % 2 == 0 ? body : scene).push_back(s);
    }
    const Camera cam = simple_camera();
    const Vec3 bg(0.1, 0.1, 0.1);
    const RenderPass pass = render_base(body, scene, cam, bg);
    std::vector<WorldSplat> merged = body;
    merged.insert(merged.end(), scene.begin(), scene.end());
    const RenderPass oracle = render_splats(merged, cam, bg);
    EXPECT_EQ(pass.out.rgb.data, oracle.out.rgb.data);
}

TEST(RenderMatte, ClothOnlyShowsClothAlpha) {
    WorldSplat cloth;
    cloth.center = Vec3(0, 0, 2.0);
    cloth.cov_factor = 0.3 * Mat3::Identity();
    cloth.opacity = 0.9;
    // Odd image side puts the principal point on a pixel sample center.
    const Camera cam = simple_camera(33);
    const Matte matte = matte_from_pass(render_matte_pass({cloth}, {}, cam));
    EXPECT_NEAR(matte.values.at(16, 16, 0), 0.9, 1e-9);
}

TEST(RenderMatte, OpaqueSceneOccludesCloth) {
    WorldSplat cloth, scene;
    cloth.center = Vec3(0, 0, 3.0);
    scene.center = Vec3(0, 0, 1.0);
    cloth.cov_factor = scene.cov_factor = 0.3 * Mat3::Identity();
    cloth.opacity = 0.95;
    scene.opacity = 0.999;  // clamped to 0.99 at compositing
    const Camera cam = simple_camera();
    const Matte matte = matte_from_pass(render_matte_pass({cloth}, {scene}, cam));
    EXPECT_LT(matte.values.at(16, 16, 0), 0.01);
}

TEST(RenderMatte, SemiTransparentClothOverScene) {
    WorldSplat cloth, scene;
    cloth.center = Vec3(0, 0, 1.0);
    scene.center = Vec3(0, 0, 3.0);
    cloth.cov_factor = scene.cov_factor = 0.3 * Mat3::Identity();
    cloth.opacity = 0.5;
    scene.opacity = 0.99;
    const Camera cam = simple_camera(33);
    const Matte matte = matte_from_pass(render_matte_pass({cloth}, {scene}, cam));
    EXPECT_NEAR(matte.values.at(16, 16, 0), 0.5, 1e-9);
}

TEST(RenderMatte, OptionalBodyPassOccludes) {
    WorldSplat cloth, body;
    cloth.center = Vec3(0, 0, 3.0);
    body.center = Vec3(0, 0, 1.0);
    cloth.cov_factor = body.cov_factor = 0.3 * Mat3::Identity();
    cloth.opacity = 0.95;
    body.opacity = 0.99;
    const Camera cam = simple_camera();
    const Matte without = matte_from_pass(render_matte_pass({cloth}, {}, cam));
    const std::vector<WorldSplat> body_list = {body};
    const Matte with = matte_from_pass(render_matte_pass({cloth}, {}, cam, &body_list));
    EXPECT_GT(without.values.at(16, 16, 0), 0.9);  // body ignored by default
    EXPECT_LT(with.values.at(16, 16, 0), 0.02);
}

TEST(CompositeFinal, EdgeCasesBitExact) {
    Rng rng(16);
    Image cloth = Image::zeros(8, 8, 3), base = Image::zeros(8, 8, 3);
    for (double& v : cloth.data) v = rng.uniform();
    for (double& v : base.data) v = rng.uniform();
    Matte ones, zeros;
    ones.values = Image::constant(8, 8, 1, 1.0);
    zeros.values = Image::constant(8, 8, 1, 0.0);
    EXPECT_EQ(composite_final(cloth, base, ones).data, cloth.data);
    EXPECT_EQ(composite_final(cloth, base, zeros).data, base.data);
}

TEST(CompositeFinal, HalfBlendAndBounds) {
    Image cloth = Image::constant(4, 4, 3, 0.0), base = Image::constant(4, 4, 3, 0.0);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            cloth.at(x, y, 0) = 1.0;  // red
            base.at(x, y, 2) = 1.0;   // blue
        }
    Matte half;
    half.values = Image::constant(4, 4, 1, 0.5);
    const Image out = composite_final(cloth, base, half);
    EXPECT_LT((out.rgb(2, 2) - Vec3(0.5, 0.0, 0.5)).norm(), 1e-15);

    Rng rng(17);
    Image a = Image::zeros(6, 6, 3), b = Image::zeros(6, 6, 3);
    Matte v;
    v.values = Image::zeros(6, 6, 1);
    for (double& x : a.data) x = rng.uniform();
    for (double& x : b.data) x = rng.uniform();
    for (double& x : v.values.data) x = rng.uniform();
    const Image blended = composite_final(a, b, v);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c) {
                const double lo = std::min(a.at(x, y, c), b.at(x, y, c));
                const double hi = std::max(a.at(x, y, c), b.at(x, y, c));
                EXPECT_GE(blended.at(x, y, c), lo - 1e-15);
                EXPECT_LE(blended.at(x, y, c), hi + 1e-15);
            }
}

TEST(CompositeFinal, BackwardMatchesFiniteDifferences) {
    Rng rng(18);
    Image cloth = Image::zeros(5, 4, 3), base = Image::zeros(5, 4, 3);
    Matte matte;
    matte.values = Image::zeros(5, 4, 1);
    for (double& v : cloth.data) v = rng.uniform();
    for (double& v : base.data) v = rng.uniform();
    for (double& v : matte.values.data) v = rng.uniform();
    Image upstream = Image::zeros(5, 4, 3);
    for (double& v : upstream.data) v = rng.uniform(-1, 1);
    Image d_cloth, d_base, d_matte;
    composite_final_backward(cloth, base, matte, upstream, d_cloth, d_base, d_matte);
    const auto loss = [&](const Image& c, const Image& b, const Matte& m) {
        const Image out = composite_final(c, b, m);
        double acc = 0;
        for (size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * upstream.data[i];
        return acc;
    };
    const double h = 1e-7;
    for (size_t i = 0; i < cloth.data.size(); i += 7) {
        Image probe = cloth;
        probe.data[i] += h;
        const double hi = loss(probe, base, matte);
        probe.data[i] -= 2 * h;
        const double lo = loss(probe, base, matte);
        EXPECT_NEAR(d_cloth.data[i], (hi - lo) / (2 * h), 1e-6);
    }
    for (size_t i = 0; i < matte.values.data.size(); i += 3) {
        Matte probe = matte;
        probe.values.data[i] += h;
        const double hi = loss(cloth, base, probe);
        probe.values.data[i] -= 2 * h;
        const double lo = loss(cloth, base, probe);
        EXPECT_NEAR(d_matte.data[i], (hi - lo) / (2 * h), 1e-6);
    }
}
