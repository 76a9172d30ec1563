// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
// Run via ctest or directly:  ./acceptance_test

#include "lgs/gradcheck.hpp"
#include "lgs/scene_io.hpp"
#include "lgs/synth.hpp"
#include "lgs/training.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>

using namespace lgs;

namespace {

class Acceptance : public ::testing::Test {
protected:
    void TearDown() override {
        std::printf("[ACCEPTANCE] %s: %s\n",
                    ::testing::UnitTest::GetInstance()->current_test_info()->name(),
                    HasFailure() ? "FAIL" : "PASS");
        std::fflush(stdout);
    }
};

double wall_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// Analytic vs central finite differences, 100 seeded instances per stage,
// rel err < 1e-4 (< 1e-3 for the full splat pipeline), under 5 minutes.
TEST_F(Acceptance, GradientSuite) {
    const auto start = std::chrono::steady_clock::now();
    const auto reports = run_gradcheck_suite(/*seed=*/0, /*instances=*/100);
    ASSERT_EQ(reports.size(), 10u);
    for (const auto& rep : reports) {
        EXPECT_TRUE(rep.pass) << rep.stage << " max_rel_err=" << rep.max_rel_err;
        std::printf("  gradient %-16s max_rel_err=%.3e tol=%.0e\n", rep.stage.c_str(),
                    rep.max_rel_err, rep.tolerance);
    }
    const double elapsed = wall_seconds(start);
    std::printf("  gradient suite runtime: %.1f s\n", elapsed);
    EXPECT_LT(elapsed, 300.0);
}

// Hand-computed loss values reproduced to 1e-9; hash-grid nearest neighbors
// agree with brute force exactly.
TEST_F(Acceptance, LossValueOracles) {
    LossConfig cfg;
    EXPECT_NEAR(geman_mcclure(1e6 * 0.3, 0.3), 1.0, 1e-9);

    LossConfig unit_sigma;
    unit_sigma.gm_scale = 1.0;
    EXPECT_NEAR(chamfer_sim_loss({Vec3::Zero()}, {Vec3(1, 0, 0)}, unit_sigma), 0.5, 1e-9);
    EXPECT_NEAR(chamfer_sim_loss({Vec3::Zero(), Vec3(2, 0, 0)}, {Vec3::Zero()}, unit_sigma), 0.2,
                1e-9);

    const std::vector<Vec3> arap_pts = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 2}};
    EXPECT_NEAR(arap_loss(arap_pts, {{0, 1}, {1, 2}, {2, 3}}), 2.0 / 9.0, 1e-9);

    Image half = Image::constant(8, 4, 1, 0.0);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) half.at(x, y, 0) = 0.5;
    EXPECT_NEAR(mask_loss(half, Image::constant(8, 4, 1, 0.0)), 0.125, 1e-9);

    SkinWeights wa, wb;
    wa.w = MatX::Zero(2, 2);
    wb.w = MatX::Zero(2, 2);
    wb.w(0, 1) = 0.1;
    EXPECT_NEAR(cloth_lbs_loss(wa, wb), 0.0025, 1e-9);

    const Image img_a = Image::constant(16, 16, 3, 0.25);
    const Image img_b = Image::constant(16, 16, 3, 0.75);
    const double expected_ssim =
        (2 * 0.25 * 0.75 + cfg.ssim_c1) / (0.25 * 0.25 + 0.75 * 0.75 + cfg.ssim_c1);
    EXPECT_NEAR(ssim_mean(img_a, img_b, cfg), expected_ssim, 1e-9);
    EXPECT_NEAR(l1_loss(Image::constant(4, 4, 3, 0.0), Image::constant(4, 4, 3, 1.0)), 1.0, 1e-9);

    LossParts parts;
    parts.l1 = 0.1;
    parts.ssim = 0.2;
    parts.sim = 0.3;
    parts.arap = 0.2;
    parts.mask = 0.1;
    parts.cloth_lbs = 1e-4;
    EXPECT_NEAR(total_loss(parts, cfg), 0.72, 1e-9);

    // Hash-grid path equals brute force bit-exactly on 50 random sets.
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const int na = 10 + int(rng.next_below(1990));
        const int nb = 10 + int(rng.next_below(1990));
        std::vector<Vec3> a, b;
        for (int i = 0; i < na; ++i) a.push_back(rng.uniform_vec3(-1.5, 1.5));
        for (int i = 0; i < nb; ++i) b.push_back(rng.uniform_vec3(-1.5, 1.5));
        EXPECT_EQ(chamfer_sim_loss(a, b, cfg, NearestMode::BruteForce),
                  chamfer_sim_loss(a, b, cfg, NearestMode::HashGrid));
    }
}

// Zero-initialized decoders at the rest pose must reproduce a direct render
// of the initialized canonical layers, pixel for pixel.
TEST_F(Acceptance, RestPoseIdentity) {
    Config cfg;
    cfg.seed = 5;
    cfg.synth.joints = 12;
    cfg.synth.frames = 2;
    cfg.synth.train_cameras = 2;
    cfg.synth.holdout_cameras = 0;
    cfg.synth.resolution = 96;
    cfg.synth.body_splats = 400;
    cfg.synth.cloth_splats = 200;
    cfg.synth.scene_splats = 100;
    const SyntheticScene scene = synth_scene(cfg.seed, cfg.synth);
    TrainState st = init_training(scene, cfg);

    const Pose rest = Pose::rest(scene.skeleton.joint_count());
    const Camera& cam = scene.cameras[0];
    const ViewRender piped = render_view(st.model, st.scene_layer, scene.skeleton, rest, cam,
                                         scene.background, false);

    // Direct render of the initialized layers, bypassing triplanes, decoders
    // and articulation entirely.
    const auto body = synth_detail::plain_splats(st.model.body);
    const auto cloth = synth_detail::plain_splats(st.model.cloth);
    const auto scene_world = synth_detail::plain_splats(st.scene_layer);
    const RenderPass base = render_base(body, scene_world, cam, scene.background);
    const RenderPass cloth_pass = render_cloth(cloth, cam);
    const Matte matte = matte_from_pass(render_matte_pass(cloth, scene_world, cam));
    const Image direct_final = composite_final(cloth_pass.out.rgb, base.out.rgb, matte);

    int max_diff = 0;
    for (size_t i = 0; i < direct_final.data.size(); ++i)
        max_diff = std::max(max_diff, std::abs(int(quantize8(piped.final.data[i])) -
                                               int(quantize8(direct_final.data[i]))));
    EXPECT_EQ(max_diff, 0);
    int max_diff_matte = 0;
    for (size_t i = 0; i < matte.values.data.size(); ++i)
        max_diff_matte =
            std::max(max_diff_matte, std::abs(int(quantize8(piped.matte.values.data[i])) -
                                              int(quantize8(matte.values.data[i]))));
    EXPECT_EQ(max_diff_matte, 0);
}

// Layer compositing: identity edge cases bit-exact and the depth-matte
// occlusion regressions.
TEST_F(Acceptance, CompositingCorrectness) {
    Rng rng(77);
    Image cloth = Image::zeros(24, 24, 3), base = Image::zeros(24, 24, 3);
    for (double& v : cloth.data) v = rng.uniform();
    for (double& v : base.data) v = rng.uniform();
    Matte all_cloth, all_base;
    all_cloth.values = Image::constant(24, 24, 1, 1.0);
    all_base.values = Image::constant(24, 24, 1, 0.0);
    EXPECT_EQ(composite_final(cloth, base, all_cloth).data, cloth.data);
    EXPECT_EQ(composite_final(cloth, base, all_base).data, base.data);

    Camera cam;
    cam.fx = cam.fy = 60.0;
    cam.cx = cam.cy = 16.5;
    cam.width = cam.height = 33;
    cam.near = 0.1;

    WorldSplat cloth_splat, scene_splat;
    cloth_splat.cov_factor = scene_splat.cov_factor = 0.4 * Mat3::Identity();

    // Opaque scene splat in front of cloth: matte collapses at covered pixels.
    cloth_splat.center = Vec3(0, 0, 3.0);
    cloth_splat.opacity = 0.95;
    scene_splat.center = Vec3(0, 0, 1.0);
    scene_splat.opacity = 0.9999;
    const Matte occluded = matte_from_pass(render_matte_pass({cloth_splat}, {scene_splat}, cam));
    EXPECT_LT(occluded.values.at(16, 16, 0), 0.01);

    // Cloth in front of the scene: matte tracks the cloth alpha.
    cloth_splat.center = Vec3(0, 0, 1.0);
    scene_splat.center = Vec3(0, 0, 3.0);
    const Matte in_front = matte_from_pass(render_matte_pass({cloth_splat}, {scene_splat}, cam));
    EXPECT_GT(in_front.values.at(16, 16, 0), 0.94);
}

// ARAP rigid invariance, Chamfer symmetry, render order invariance, softmax
// simplex/shift invariance, rot6d orthonormality.
TEST_F(Acceptance, InvarianceSuite) {
    Rng rng(4242);

    // ARAP: bit-exact under an exactly representable proper rotation, and
    // invariant to rounding under arbitrary rigid motion.
    std::vector<Vec3> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(rng.uniform_vec3(-1, 1));
    std::vector<std::array<int, 2>> edges;
    for (int i = 0; i + 1 < 20; ++i) edges.push_back({i, i + 1});
    const double arap_base = arap_loss(pts, edges);
    std::vector<Vec3> flipped(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
        flipped[i] = Vec3(-pts[i].x(), -pts[i].y(), pts[i].z());
    EXPECT_EQ(arap_loss(flipped, edges), arap_base);
    const Mat3 rot = axis_angle_to_matrix(Vec3(0.7, -0.3, 0.5));
    std::vector<Vec3> rotated(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) rotated[i] = rot * pts[i] + Vec3(4, 5, 6);
    EXPECT_NEAR(arap_loss(rotated, edges), arap_base, 1e-12);

    // Chamfer symmetry: bit-exact.
    LossConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> a, b;
        for (int i = 0; i < 17; ++i) a.push_back(rng.uniform_vec3(-1, 1));
        for (int i = 0; i < 11; ++i) b.push_back(rng.uniform_vec3(-1, 1));
        EXPECT_EQ(chamfer_sim_loss(a, b, cfg), chamfer_sim_loss(b, a, cfg));
    }

    // Render order invariance: permuting distinct-depth splats is bit-exact.
    std::vector<Splat2D> splats;
    for (int i = 0; i < 50; ++i) {
        Splat2D s;
        s.mean2d = {rng.uniform(0, 48), rng.uniform(0, 48)};
        s.cov_xx = s.cov_yy = rng.uniform(1.0, 9.0);
        s.cov_xy = rng.uniform(-0.5, 0.5);
        s.depth = 1.0 + 0.013 * i;
        s.color = rng.uniform_vec3(0, 1);
        s.alpha_base = rng.uniform(0.1, 0.95);
        splats.push_back(s);
    }
    const RenderOutput forward_order = rasterize(splats, Vec3(0.2, 0.3, 0.4), 48, 48);
    std::vector<Splat2D> reversed(splats.rbegin(), splats.rend());
    const RenderOutput reverse_order = rasterize(reversed, Vec3(0.2, 0.3, 0.4), 48, 48);
    EXPECT_EQ(forward_order.rgb.data, reverse_order.rgb.data);
    EXPECT_EQ(forward_order.alpha.data, reverse_order.alpha.data);

    // Softmax: simplex within 1e-6 and shift invariance.
    for (int trial = 0; trial < 100; ++trial) {
        VecX logits(24);
        for (int i = 0; i < 24; ++i) logits[i] = rng.uniform(-8, 8);
        const VecX p = softmax(logits);
        EXPECT_NEAR(p.sum(), 1.0, 1e-6);
        EXPECT_GE(p.minCoeff(), 0.0);
        const VecX shifted = softmax(logits.array() + rng.uniform(-50, 50));
        EXPECT_LT((p - shifted).cwiseAbs().maxCoeff(), 1e-6);
    }

    // rot6d: orthonormality and det +1 within 1e-9 over 1000 samples.
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::Matrix<double, 6, 1> r6;
        do {
            for (int i = 0; i < 6; ++i) r6[i] = rng.uniform(-2, 2);
        } while (r6.head<3>().norm() < 1e-2 ||
                 r6.head<3>().normalized().cross(r6.tail<3>()).norm() < 1e-2);
        const Mat3 r = rot6d_to_matrix(r6);
        EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    }
}

// Desk-scale recovery: seed 0, 12 joints, 40 frames, 30 train + 5 held-out
// cameras, 128x128, ~800/400/300 splats, 2000 iterations at the default loss
// weights. Thresholds are repository targets.
TEST_F(Acceptance, SyntheticRecovery) {
    const auto start = std::chrono::steady_clock::now();
    Config cfg;  // defaults pin the scene and schedule
    cfg.seed = 0;
    ASSERT_EQ(cfg.synth.joints, 12);
    ASSERT_EQ(cfg.synth.frames, 40);
    ASSERT_EQ(cfg.synth.train_cameras, 30);
    ASSERT_EQ(cfg.synth.holdout_cameras, 5);
    ASSERT_EQ(cfg.synth.resolution, 128);
    ASSERT_EQ(cfg.train.iterations, 2000);

    const SyntheticScene scene = synth_scene(0, cfg.synth);
    EXPECT_NEAR(double(scene.body_rest.vertices.size()), 800.0, 100.0);
    EXPECT_NEAR(double(scene.cloth_rest.vertices.size()), 400.0, 50.0);
    EXPECT_EQ(int(scene.scene_splats.size()), 300);

    TrainState st = init_training(scene, cfg);
    const EvalResult before = evaluate_holdout(st.model, st.scene_layer, scene, cfg);
    for (long t = 0; t < cfg.train.iterations; ++t) train_step(st);
    const EvalResult after = evaluate_holdout(st.model, st.scene_layer, scene, cfg);
    const double elapsed = wall_seconds(start);

    std::printf("  recovery: PSNR %.3f -> %.3f dB, SSIM %.4f -> %.4f, matte MSE %.5f -> %.5f "
                "(%.1f s)\n",
                before.mean_psnr, after.mean_psnr, before.mean_ssim, after.mean_ssim,
                before.mean_matte_mse, after.mean_matte_mse, elapsed);
    EXPECT_GT(after.mean_psnr, before.mean_psnr);
    EXPECT_GE(after.mean_psnr, 28.0);
    EXPECT_GE(after.mean_ssim, 0.90);
    EXPECT_LE(after.mean_matte_mse, 0.01);
    EXPECT_LT(elapsed, 30.0 * 60.0);
}

// The published schedule endpoints and loss weights, exactly.
TEST_F(Acceptance, ScheduleCheck) {
    const Config cfg;
    const ScheduleSpec positions{cfg.optim.lr_position_init, cfg.optim.lr_position_final, 20000};
    EXPECT_EQ(lr_at(positions, 0), 1.6e-4);
    EXPECT_EQ(lr_at(positions, 20000), 1.6e-6);

    const nlohmann::json j = config_to_json(cfg);
    EXPECT_EQ(j["losses"]["lambda_l1"].get<double>(), 0.8);
    EXPECT_EQ(j["losses"]["lambda_ssim"].get<double>(), 0.2);
    EXPECT_EQ(j["losses"]["lambda_lpips"].get<double>(), 1.0);
    EXPECT_EQ(j["losses"]["lambda_sim"].get<double>(), 1.0);
    EXPECT_EQ(j["losses"]["lambda_arap"].get<double>(), 0.5);
    EXPECT_EQ(j["losses"]["lambda_mask"].get<double>(), 1.0);
    EXPECT_EQ(j["losses"]["lambda_cloth_lbs"].get<double>(), 1000.0);
    EXPECT_EQ(j["optim"]["lr_rotation"].get<double>(), 1.0e-3);
    EXPECT_EQ(j["optim"]["lr_scale"].get<double>(), 5.0e-3);
    EXPECT_EQ(j["optim"]["lr_opacity"].get<double>(), 5.0e-2);
    // And the schema round-trips without drift.
    EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

// Identical seeds and thread counts give byte-identical loss CSVs.
TEST_F(Acceptance, Determinism) {
    Config cfg;
    cfg.seed = 0;
    cfg.synth.resolution = 64;
    cfg.synth.frames = 8;
    cfg.synth.train_cameras = 6;
    cfg.synth.holdout_cameras = 2;
    cfg.synth.body_splats = 300;
    cfg.synth.cloth_splats = 150;
    cfg.synth.scene_splats = 100;
    cfg.train.iterations = 25;
    cfg.train.schedule_horizon = 25;
    cfg.train.checkpoint_every = 0;
    const SyntheticScene scene = synth_scene(cfg.seed, cfg.synth);

    const auto run_once = [&]() {
        TrainState st = init_training(scene, cfg);
        std::string csv = "iteration,l1,ssim,lpips,cloth_lbs,sim,arap,mask,total\n";
        for (long t = 0; t < cfg.train.iterations; ++t) {
            const StepResult r = train_step(st);
            csv += csv_row(st.iteration - 1, r.parts, r.total);
        }
        return csv;
    };
    const std::string csv_a = run_once();
    const std::string csv_b = run_once();
    EXPECT_EQ(csv_a, csv_b);
    EXPECT_GT(csv_a.size(), 200u);
}
