#pragma once

#include "lgs/camera.hpp"
#include "lgs/config.hpp"
#include "lgs/core.hpp"
#include "lgs/gaussians.hpp"
#include "lgs/image.hpp"
#include "lgs/mesh.hpp"
#include "lgs/renderer.hpp"
#include "lgs/skeleton.hpp"

namespace lgs {

// One animation frame: pose, the pseudo-ground-truth cloth mesh in world
// space (the simulator stand-in), and the camera used for the GT image.
struct FrameData {
    Pose pose;
    TriMesh cloth_mesh;
    int camera_index = 0;
};

// Extra (frame, camera) pairs never used in training.
struct HoldoutView {
    int frame_index = 0;
    int camera_index = 0;
    Image gt_image;
    Image gt_mask;
};

struct SyntheticScene {
    std::uint64_t seed = 0;
    SynthParams params;
    Skeleton skeleton;
    SkinWeights body_weights;
    TriMesh body_rest;
    TriMesh cloth_rest;
    std::vector<Camera> cameras;  // train cameras first, then holdout
    std::vector<FrameData> frames;
    std::vector<Image> gt_images;  // one per frame
    std::vector<Image> gt_masks;   // one per frame, binary
    std::vector<HoldoutView> holdout;
    GaussianLayer scene_splats;  // GT scene layer
    Vec3 background = Vec3(0.82, 0.86, 0.90);
};

namespace synth_detail {

struct JointSpec {
    const char* name;
    int parent;
    Vec3 offset;
    double radius;  // capsule radius of the bone ending at this joint
};

// Humanoid template in canonical T-pose (y up, meters). Truncating at J >= 6
// keeps a valid topologically-ordered tree.
inline const std::vector<JointSpec>& joint_table() {
    static const std::vector<JointSpec> table = {
        {"pelvis", -1, {0.0, 1.00, 0.0}, 0.00},   {"spine", 0, {0.0, 0.22, 0.0}, 0.13},
        {"chest", 1, {0.0, 0.22, 0.0}, 0.13},     {"head", 2, {0.0, 0.28, 0.0}, 0.09},
        {"l_upper_arm", 2, {0.22, 0.12, 0.0}, 0.05}, {"l_forearm", 4, {0.26, 0.0, 0.0}, 0.045},
        {"r_upper_arm", 2, {-0.22, 0.12, 0.0}, 0.05}, {"r_forearm", 6, {-0.26, 0.0, 0.0}, 0.045},
        {"l_thigh", 0, {0.11, -0.06, 0.0}, 0.07}, {"l_shin", 8, {0.0, -0.42, 0.0}, 0.055},
        {"r_thigh", 0, {-0.11, -0.06, 0.0}, 0.07}, {"r_shin", 10, {0.0, -0.42, 0.0}, 0.055},
        {"l_hand", 5, {0.16, 0.0, 0.0}, 0.04},    {"r_hand", 7, {-0.16, 0.0, 0.0}, 0.04},
        {"l_foot", 9, {0.0, -0.40, 0.06}, 0.05},  {"r_foot", 11, {0.0, -0.40, 0.06}, 0.05},
        {"neck", 2, {0.0, 0.16, 0.05}, 0.05},     {"spine2", 1, {0.0, 0.12, 0.06}, 0.10},
        {"l_shoulder", 2, {0.13, 0.10, 0.0}, 0.06}, {"r_shoulder", 2, {-0.13, 0.10, 0.0}, 0.06},
        {"l_toe", 14, {0.0, -0.02, 0.08}, 0.03},  {"r_toe", 15, {0.0, -0.02, 0.08}, 0.03},
        {"l_hip_twist", 8, {0.02, -0.20, 0.04}, 0.05}, {"r_hip_twist", 10, {-0.02, -0.20, 0.04}, 0.05},
    };
    return table;
}

inline Skeleton humanoid_skeleton(int joints) {
    const auto& table = joint_table();
    Skeleton s;
    for (int j = 0; j < joints; ++j) {
        Skeleton::Joint joint;
        joint.parent = table[size_t(j)].parent;
        joint.rest_local = {Mat3::Identity(), table[size_t(j)].offset};
        s.joints.push_back(joint);
    }
    s.validate();
    return s;
}

// Rest-pose world origin of every joint.
inline std::vector<Vec3> rest_joint_origins(const Skeleton& s) {
    const auto fk = forward_kinematics(s, Pose::rest(s.joint_count()));
    std::vector<Vec3> out(fk.world.size());
    for (size_t j = 0; j < fk.world.size(); ++j) out[j] = fk.world[j].translation;
    return out;
}

// Smooth 0 -> 1 ramp.
inline double smoothstep(double x) {
    x = std::min(std::max(x, 0.0), 1.0);
    return x * x * (3.0 - 2.0 * x);
}

struct BodyBuild {
    TriMesh mesh;
    SkinWeights weights;
};

// Capsule-sampled surface around every bone. Ring vertices attach to the
// bone's parent joint, blending toward the child joint near its end.
inline BodyBuild build_body(const Skeleton& skeleton, int target_vertices, Rng& rng) {
    const auto& table = joint_table();
    const auto origins = rest_joint_origins(skeleton);
    const int j_count = skeleton.joint_count();

    struct Bone {
        int parent, child;
        double radius;
    };
    std::vector<Bone> bones;
    for (int j = 0; j < j_count; ++j)
        if (skeleton.joints[size_t(j)].parent >= 0 &&
            table[size_t(j)].offset.norm() > 1e-9)
            bones.push_back({skeleton.joints[size_t(j)].parent, j, table[size_t(j)].radius});

    constexpr int kRingVerts = 8;
    const int rings =
        std::max(3, int(std::lround(double(target_vertices) / (double(bones.size()) * kRingVerts))));

    BodyBuild out;
    out.weights.w = MatX::Zero(0, j_count);
    std::vector<Eigen::RowVectorXd> weight_rows;
    for (const Bone& bone : bones) {
        const Vec3 a = origins[size_t(bone.parent)];
        const Vec3 b = origins[size_t(bone.child)];
        const Vec3 axis = (b - a).normalized();
        // Stable frame orthogonal to the bone.
        Vec3 side = axis.cross(Vec3::UnitY());
        if (side.squaredNorm() < 1e-6) side = axis.cross(Vec3::UnitX());
        side.normalize();
        const Vec3 up = axis.cross(side);

        // Skin-tone torso/limbs with a clothing-like band on the chest bone.
        const bool torso = bone.child == 1 || bone.child == 2;
        const Vec3 base_color = torso ? Vec3(0.25, 0.35, 0.65)
                                      : (bone.child == 3 ? Vec3(0.85, 0.65, 0.55)
                                                         : Vec3(0.80, 0.62, 0.52));
        const int base_index = int(out.mesh.vertices.size());
        for (int r = 0; r < rings; ++r) {
            const double s = rings == 1 ? 0.0 : double(r) / double(rings - 1);
            const Vec3 ring_center = a + s * (b - a);
            // Taper slightly toward the child end.
            const double radius = bone.radius * (1.05 - 0.25 * s);
            for (int k = 0; k < kRingVerts; ++k) {
                const double angle = 2.0 * M_PI * double(k) / kRingVerts;
                const Vec3 normal = std::cos(angle) * side + std::sin(angle) * up;
                out.mesh.vertices.push_back(ring_center + radius * normal);
                out.mesh.normals.push_back(normal);
                const double tint = 0.92 + 0.16 * rng.uniform();
                out.mesh.colors.push_back((base_color * tint).cwiseMin(1.0));
                Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(j_count);
                const double child_share = 0.5 * smoothstep((s - 0.7) / 0.3);
                w[bone.child] = child_share;
                w[bone.parent] = 1.0 - child_share;
                weight_rows.push_back(w);
            }
        }
        for (int r = 0; r + 1 < rings; ++r)
            for (int k = 0; k < kRingVerts; ++k) {
                const int k1 = (k + 1) % kRingVerts;
                const int v00 = base_index + r * kRingVerts + k;
                const int v01 = base_index + r * kRingVerts + k1;
                const int v10 = base_index + (r + 1) * kRingVerts + k;
                const int v11 = base_index + (r + 1) * kRingVerts + k1;
                out.mesh.faces.push_back({v00, v01, v11});
                out.mesh.faces.push_back({v00, v11, v10});
            }
    }
    out.weights.w.resize(Eigen::Index(weight_rows.size()), j_count);
    for (size_t i = 0; i < weight_rows.size(); ++i) out.weights.w.row(Eigen::Index(i)) = weight_rows[i];
    return out;
}

// Open flared tube (skirt) around the torso and upper legs.
inline TriMesh build_cloth(int target_vertices, double waist_y, Rng& rng) {
    constexpr int kCols = 25;
    const int rows = std::max(4, int(std::lround(double(target_vertices) / kCols)));
    const double hem_y = waist_y - 0.55;
    TriMesh mesh;
    for (int r = 0; r < rows; ++r) {
        const double s = double(r) / double(rows - 1);  // 0 waist, 1 hem
        const double y = waist_y + s * (hem_y - waist_y);
        const double radius = 0.17 + 0.13 * s;
        for (int k = 0; k < kCols; ++k) {
            const double angle = 2.0 * M_PI * double(k) / kCols;
            const Vec3 normal(std::cos(angle), 0.0, std::sin(angle));
            mesh.vertices.push_back(Vec3(0, y, 0) + radius * normal);
            mesh.normals.push_back(normal);
            // Horizontal color bands with mild speckle.
            const Vec3 band = (r / 3) % 2 == 0 ? Vec3(0.75, 0.30, 0.30) : Vec3(0.85, 0.70, 0.35);
            const double tint = 0.92 + 0.16 * rng.uniform();
            mesh.colors.push_back((band * tint).cwiseMin(1.0));
        }
    }
    for (int r = 0; r + 1 < rows; ++r)
        for (int k = 0; k < kCols; ++k) {
            const int k1 = (k + 1) % kCols;
            const int v00 = r * kCols + k;
            const int v01 = r * kCols + k1;
            const int v10 = (r + 1) * kCols + k;
            const int v11 = (r + 1) * kCols + k1;
            mesh.faces.push_back({v00, v01, v11});
            mesh.faces.push_back({v00, v11, v10});
        }
    return mesh;
}

// Ground plane grid plus floating blobs, with hand-assigned appearance.
inline GaussianLayer build_scene(int target_splats, Rng& rng) {
    GaussianLayer layer;
    layer.tag = LayerTag::Scene;
    const int grid = std::max(8, int(std::floor(std::sqrt(double(target_splats) * 0.85))));
    const double extent = 2.6;
    const double spacing = 2.0 * extent / (grid - 1);
    for (int gz = 0; gz < grid; ++gz)
        for (int gx = 0; gx < grid; ++gx) {
            GaussianPrimitive p;
            p.center = {-extent + gx * spacing, 0.0, -extent + gz * spacing};
            p.set_rotation(shortest_arc_quat(Vec3::UnitZ(), Vec3::UnitY()));
            const double tangential = spacing * 0.75;
            p.log_scale = {std::log(tangential), std::log(tangential), std::log(0.1 * tangential)};
            p.opacity_logit = logit(0.95);
            const bool checker = (gx + gz) % 2 == 0;
            const Vec3 color = checker ? Vec3(0.55, 0.55, 0.58) : Vec3(0.38, 0.40, 0.44);
            p.sh_coeffs.row(0) = ((color.array() - 0.5) / sh::kC0).matrix().transpose();
            layer.primitives.push_back(p);
        }
    while (int(layer.primitives.size()) < target_splats) {
        GaussianPrimitive p;
        const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
        const double radius = rng.uniform(1.6, 2.4);
        p.center = {radius * std::cos(azimuth), rng.uniform(0.15, 1.9), radius * std::sin(azimuth)};
        Vec4 q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (q.norm() < 1e-3) q = {1, 0, 0, 0};
        p.set_rotation(q);
        const double s = rng.uniform(0.05, 0.14);
        p.log_scale = Vec3::Constant(std::log(s));
        p.opacity_logit = logit(0.95);
        const Vec3 color(0.35 + 0.6 * rng.uniform(), 0.35 + 0.6 * rng.uniform(),
                         0.35 + 0.6 * rng.uniform());
        p.sh_coeffs.row(0) = ((color.cwiseMin(1.0).array() - 0.5) / sh::kC0).matrix().transpose();
        layer.primitives.push_back(p);
    }
    return layer;
}

// GT layers render as near-opaque splats; mesh colors carry the appearance.
inline GaussianLayer gt_layer_from_mesh(const TriMesh& mesh, LayerTag tag) {
    GaussianLayer layer = init_from_mesh(mesh, tag);
    for (auto& p : layer.primitives) p.opacity_logit = logit(0.95);
    return layer;
}

// Articulated world splats for a canonical layer under given weights.
inline std::vector<WorldSplat> articulate_layer(const GaussianLayer& layer,
                                                const SkinWeights& weights,
                                                const std::vector<RigidTransform>& skinning) {
    std::vector<WorldSplat> out(layer.size());
    for (size_t i = 0; i < layer.size(); ++i) {
        const GaussianPrimitive& p = layer.primitives[i];
        const int row = (*layer.skin_binding)[i];
        Mat3 blend_rot = Mat3::Zero();
        Vec3 blend_trans = Vec3::Zero();
        for (int j = 0; j < weights.joints(); ++j) {
            const double w = weights.w(row, j);
            if (w == 0.0) continue;
            blend_rot += w * skinning[size_t(j)].rotation;
            blend_trans += w * skinning[size_t(j)].translation;
        }
        out[i].center = blend_rot * p.center + blend_trans;
        out[i].cov_factor = blend_rot * p.rotation_matrix() * p.scale().asDiagonal();
        out[i].opacity = p.opacity();
        out[i].sh = p.sh_coeffs;
    }
    return out;
}

inline std::vector<WorldSplat> plain_splats(const GaussianLayer& layer) {
    std::vector<WorldSplat> out(layer.size());
    for (size_t i = 0; i < layer.size(); ++i) out[i] = world_splat(layer.primitives[i]);
    return out;
}

}  // namespace synth_detail

// Canned motion: sinusoidal limb swings, zero at phase 0.
inline Pose synth_pose(int joints, double phase, double amplitude) {
    Pose pose = Pose::rest(joints);
    const double s = std::sin(phase);
    const double c = std::sin(2.0 * phase);
    auto set = [&](int j, const Vec3& aa) {
        if (j < joints) pose.joint_rotations[size_t(j)] = amplitude * aa;
    };
    set(1, {0.0, 0.10 * s, 0.04 * s});          // spine twist/side bend
    set(3, {0.08 * c, 0.12 * s, 0.0});          // head
    set(4, {0.0, 0.0, 0.38 * s});               // left shoulder swing
    set(5, {0.0, 0.0, 0.22 * s});               // left elbow
    set(6, {0.0, 0.0, 0.38 * s});               // right shoulder (opposite sign via -x offset)
    set(7, {0.0, 0.0, 0.22 * s});
    set(8, {0.30 * s, 0.0, 0.0});               // left thigh
    set(9, {0.18 * std::max(0.0, -s), 0.0, 0.0});  // left knee
    set(10, {-0.30 * s, 0.0, 0.0});             // right thigh
    set(11, {0.18 * std::max(0.0, s), 0.0, 0.0});
    pose.root_translation = amplitude * Vec3(0.04 * s, 0.015 * c, 0.0);
    return pose;
}

// Swing of the pseudo-simulated skirt: lateral offset growing from waist to
// hem, in phase with the body motion.
inline TriMesh synth_cloth_frame(const TriMesh& cloth_rest, const SkinWeights& cloth_weights,
                                 const std::vector<RigidTransform>& skinning, double phase,
                                 double amplitude, double waist_y) {
    std::vector<Vec3> posed = lbs_apply(cloth_rest.vertices, cloth_weights, skinning);
    TriMesh mesh = cloth_rest;
    const double hem_span = 0.55;
    const double swing = 0.06 * amplitude * std::sin(phase);
    for (size_t i = 0; i < posed.size(); ++i) {
        const double hem_frac =
            std::min(std::max((waist_y - cloth_rest.vertices[i].y()) / hem_span, 0.0), 1.0);
        posed[i].x() += swing * hem_frac * hem_frac;
        posed[i].z() += 0.35 * swing * hem_frac;
    }
    mesh.vertices = std::move(posed);
    return mesh;
}

// Procedurally generated desk-scale scene: humanoid on a ground plane,
// orbiting cameras, GT rendered from splat layers built out of the same
// meshes the trainee initializes from.
inline SyntheticScene synth_scene(std::uint64_t seed, const SynthParams& params) {
    params.validate();
    Rng rng(seed ^ 0x5eed5eed12345678ull);

    SyntheticScene scene;
    scene.seed = seed;
    scene.params = params;
    scene.skeleton = synth_detail::humanoid_skeleton(params.joints);

    auto body = synth_detail::build_body(scene.skeleton, params.body_splats, rng);
    scene.body_rest = std::move(body.mesh);
    scene.body_weights = std::move(body.weights);
    const double waist_y = 0.96;
    scene.cloth_rest = synth_detail::build_cloth(params.cloth_splats, waist_y, rng);
    scene.scene_splats = synth_detail::build_scene(params.scene_splats, rng);

    const SkinWeights cloth_weights =
        transfer_skin_weights(scene.cloth_rest, scene.body_rest, scene.body_weights);

    // Cameras: orbit around the figure; holdout azimuths interleave.
    const int total_cams = params.train_cameras + params.holdout_cameras;
    const Vec3 target(0.0, 0.85, 0.0);
    for (int k = 0; k < total_cams; ++k) {
        const bool holdout = k >= params.train_cameras;
        const double frac = holdout
                                ? (double(k - params.train_cameras) + 0.5) / params.holdout_cameras
                                : double(k) / params.train_cameras;
        const double azimuth = 2.0 * M_PI * frac;
        const double height = 1.15 + 0.45 * std::sin(3.0 * azimuth);
        const Vec3 eye(2.8 * std::cos(azimuth), height, 2.8 * std::sin(azimuth));
        scene.cameras.push_back(Camera::look_at(eye, target, Vec3::UnitY(),
                                                0.9 * params.resolution, params.resolution,
                                                params.resolution, 0.05));
    }

    // GT splat layers.
    const GaussianLayer gt_body = synth_detail::gt_layer_from_mesh(scene.body_rest, LayerTag::Body);
    const auto scene_world = synth_detail::plain_splats(scene.scene_splats);

    for (int t = 0; t < params.frames; ++t) {
        const double phase = 2.0 * M_PI * double(t) / double(params.frames);
        FrameData frame;
        frame.pose = synth_pose(params.joints, phase, params.pose_amplitude);
        frame.camera_index = t % params.train_cameras;
        const auto fk = forward_kinematics(scene.skeleton, frame.pose);
        frame.cloth_mesh = synth_cloth_frame(scene.cloth_rest, cloth_weights, fk.skinning, phase,
                                             params.pose_amplitude, waist_y);

        const Camera& cam = scene.cameras[size_t(frame.camera_index)];
        const auto body_world = synth_detail::articulate_layer(gt_body, scene.body_weights, fk.skinning);
        const GaussianLayer gt_cloth =
            synth_detail::gt_layer_from_mesh(frame.cloth_mesh, LayerTag::Cloth);
        const auto cloth_world = synth_detail::plain_splats(gt_cloth);

        const RenderPass base = render_base(body_world, scene_world, cam, scene.background);
        const RenderPass cloth_pass = render_cloth(cloth_world, cam);
        const RenderPass matte_pass = render_matte_pass(cloth_world, scene_world, cam);
        const Matte matte = matte_from_pass(matte_pass);
        scene.gt_images.push_back(composite_final(cloth_pass.out.rgb, base.out.rgb, matte));
        Image mask = Image::zeros(cam.width, cam.height, 1);
        for (size_t i = 0; i < mask.data.size(); ++i)
            mask.data[i] = matte.values.data[i] > 0.5 ? 1.0 : 0.0;
        scene.gt_masks.push_back(std::move(mask));
        scene.frames.push_back(std::move(frame));
    }

    // Holdout views: unseen cameras at frames spread over the sequence.
    for (int h = 0; h < params.holdout_cameras; ++h) {
        HoldoutView view;
        view.camera_index = params.train_cameras + h;
        view.frame_index = (h * params.frames) / std::max(1, params.holdout_cameras);
        const FrameData& frame = scene.frames[size_t(view.frame_index)];
        const Camera& cam = scene.cameras[size_t(view.camera_index)];
        const auto fk = forward_kinematics(scene.skeleton, frame.pose);
        const auto body_world = synth_detail::articulate_layer(gt_body, scene.body_weights, fk.skinning);
        const GaussianLayer gt_cloth =
            synth_detail::gt_layer_from_mesh(frame.cloth_mesh, LayerTag::Cloth);
        const auto cloth_world = synth_detail::plain_splats(gt_cloth);
        const RenderPass base = render_base(body_world, scene_world, cam, scene.background);
        const RenderPass cloth_pass = render_cloth(cloth_world, cam);
        const Matte matte = matte_from_pass(render_matte_pass(cloth_world, scene_world, cam));
        view.gt_image = composite_final(cloth_pass.out.rgb, base.out.rgb, matte);
        view.gt_mask = Image::zeros(cam.width, cam.height, 1);
        for (size_t i = 0; i < view.gt_mask.data.size(); ++i)
            view.gt_mask.data[i] = matte.values.data[i] > 0.5 ? 1.0 : 0.0;
        scene.holdout.push_back(std::move(view));
    }
    return scene;
}

}  // namespace lgs
