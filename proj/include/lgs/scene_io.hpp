#pragma once

#include "lgs/camera.hpp"
#include "lgs/config.hpp"
#include "lgs/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace lgs {

// ---------------------------------------------------------------------------
// Skeleton / pose JSON.

inline nlohmann::json skeleton_to_json(const Skeleton& s) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& joint : s.joints) {
        const Vec4 q = detail::matrix_to_quat(joint.rest_local.rotation);
        joints.push_back({{"parent", joint.parent},
                          {"rest_rotation_quat", {q[0], q[1], q[2], q[3]}},
                          {"rest_translation", detail::vec_to_json(joint.rest_local.translation)}});
    }
    return joints;
}

inline Skeleton skeleton_from_json(const nlohmann::json& joints) {
    Skeleton s;
    for (const auto& j : joints) {
        Skeleton::Joint joint;
        joint.parent = j.at("parent").get<int>();
        const auto& q = j.at("rest_rotation_quat");
        Vec4 quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                  q.at(3).get<double>());
        joint.rest_local.rotation = quat_to_matrix(quat / quat.norm());
        joint.rest_local.translation = detail::vec_from_json(j.at("rest_translation"));
        s.joints.push_back(joint);
    }
    s.validate();
    return s;
}

inline nlohmann::json pose_to_json(const Pose& pose) {
    nlohmann::json axis_angles = nlohmann::json::array();
    for (const Vec3& aa : pose.joint_rotations) axis_angles.push_back(detail::vec_to_json(aa));
    return {{"axis_angles", axis_angles},
            {"root_translation", detail::vec_to_json(pose.root_translation)}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
    Pose pose;
    for (const auto& aa : j.at("axis_angles")) pose.joint_rotations.push_back(detail::vec_from_json(aa));
    pose.root_translation = detail::vec_from_json(j.at("root_translation"));
    pose.validate();
    return pose;
}

// ---------------------------------------------------------------------------
// Scene directory layout:
//   meta.json, cameras.json, skeleton.json, weights.json
//   meshes/body_rest.obj, meshes/cloth_rest.obj, meshes/cloth_gt_####.obj
//   frames/frame_####.png (8-bit RGB), masks/mask_####.png (16-bit gray)
//   holdout/view_####.png, holdout/mask_####.png
//   splats/scene.lgs

namespace detail {
inline std::string index_name(const char* stem, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d%s", stem, index, ext);
    return buf;
}
}  // namespace detail

inline void save_scene_dir(const SyntheticScene& scene, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const char* sub : {"meshes", "frames", "masks", "holdout", "splats"})
        fs::create_directories(fs::path(dir) / sub);

    {
        nlohmann::json meta = {{"seed", scene.seed},
                               {"background",
                                {scene.background.x(), scene.background.y(), scene.background.z()}},
                               {"params",
                                {{"joints", scene.params.joints},
                                 {"frames", scene.params.frames},
                                 {"train_cameras", scene.params.train_cameras},
                                 {"holdout_cameras", scene.params.holdout_cameras},
                                 {"resolution", scene.params.resolution},
                                 {"body_splats", scene.params.body_splats},
                                 {"cloth_splats", scene.params.cloth_splats},
                                 {"scene_splats", scene.params.scene_splats},
                                 {"pose_amplitude", scene.params.pose_amplitude}}}};
        std::ofstream(fs::path(dir) / "meta.json") << meta.dump(2) << "\n";
    }
    {
        nlohmann::json cams = nlohmann::json::array();
        for (const Camera& cam : scene.cameras) cams.push_back(camera_to_json(cam));
        nlohmann::json frame_cams = nlohmann::json::array();
        for (const auto& frame : scene.frames) frame_cams.push_back(frame.camera_index);
        nlohmann::json holdout = nlohmann::json::array();
        for (const auto& view : scene.holdout)
            holdout.push_back({{"frame_index", view.frame_index},
                               {"camera_index", view.camera_index}});
        nlohmann::json doc = {{"cameras", cams},
                              {"frame_camera_index", frame_cams},
                              {"holdout_views", holdout}};
        std::ofstream(fs::path(dir) / "cameras.json") << doc.dump(2) << "\n";
    }
    {
        nlohmann::json poses = nlohmann::json::array();
        for (const auto& frame : scene.frames) poses.push_back(pose_to_json(frame.pose));
        nlohmann::json doc = {{"joints", skeleton_to_json(scene.skeleton)}, {"poses", poses}};
        std::ofstream(fs::path(dir) / "skeleton.json") << doc.dump(2) << "\n";
    }
    {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < scene.body_weights.w.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < scene.body_weights.w.cols(); ++j)
                row.push_back(scene.body_weights.w(i, j));
            rows.push_back(row);
        }
        std::ofstream(fs::path(dir) / "weights.json") << nlohmann::json{{"body", rows}}.dump() << "\n";
    }

    save_obj(scene.body_rest, (fs::path(dir) / "meshes/body_rest.obj").string());
    save_obj(scene.cloth_rest, (fs::path(dir) / "meshes/cloth_rest.obj").string());
    for (size_t t = 0; t < scene.frames.size(); ++t)
        save_obj(scene.frames[t].cloth_mesh,
                 (fs::path(dir) / "meshes" / detail::index_name("cloth_gt", int(t), ".obj")).string());
    for (size_t t = 0; t < scene.gt_images.size(); ++t)
        save_png_rgb8(scene.gt_images[t],
                      (fs::path(dir) / "frames" / detail::index_name("frame", int(t), ".png")).string());
    for (size_t t = 0; t < scene.gt_masks.size(); ++t)
        save_png_gray16(scene.gt_masks[t],
                        (fs::path(dir) / "masks" / detail::index_name("mask", int(t), ".png")).string());
    for (size_t h = 0; h < scene.holdout.size(); ++h) {
        save_png_rgb8(scene.holdout[h].gt_image,
                      (fs::path(dir) / "holdout" / detail::index_name("view", int(h), ".png")).string());
        save_png_gray16(
            scene.holdout[h].gt_mask,
            (fs::path(dir) / "holdout" / detail::index_name("mask", int(h), ".png")).string());
    }
    save_layer(scene.scene_splats, (fs::path(dir) / "splats/scene.lgs").string());
}

inline SyntheticScene load_scene_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    auto read_json = [&](const char* name) {
        std::ifstream in(fs::path(dir) / name);
        if (!in) throw IoError("scene directory missing " + std::string(name) + ": " + dir);
        nlohmann::json j;
        in >> j;
        return j;
    };

    SyntheticScene scene;
    {
        const nlohmann::json meta = read_json("meta.json");
        scene.seed = meta.at("seed").get<std::uint64_t>();
        const auto& b = meta.at("background");
        scene.background = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
        const auto& p = meta.at("params");
        scene.params.joints = p.at("joints").get<int>();
        scene.params.frames = p.at("frames").get<int>();
        scene.params.train_cameras = p.at("train_cameras").get<int>();
        scene.params.holdout_cameras = p.at("holdout_cameras").get<int>();
        scene.params.resolution = p.at("resolution").get<int>();
        scene.params.body_splats = p.at("body_splats").get<int>();
        scene.params.cloth_splats = p.at("cloth_splats").get<int>();
        scene.params.scene_splats = p.at("scene_splats").get<int>();
        scene.params.pose_amplitude = p.at("pose_amplitude").get<double>();
    }
    const nlohmann::json cams = read_json("cameras.json");
    for (const auto& c : cams.at("cameras")) scene.cameras.push_back(camera_from_json(c));
    const nlohmann::json skel = read_json("skeleton.json");
    scene.skeleton = skeleton_from_json(skel.at("joints"));
    {
        const nlohmann::json weights = read_json("weights.json");
        const auto& rows = weights.at("body");
        scene.body_weights.w.resize(Eigen::Index(rows.size()),
                                    Eigen::Index(rows.empty() ? 0 : rows.at(0).size()));
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = 0; j < rows.at(i).size(); ++j)
                scene.body_weights.w(Eigen::Index(i), Eigen::Index(j)) =
                    rows.at(i).at(j).get<double>();
    }
    scene.body_rest = load_obj((fs::path(dir) / "meshes/body_rest.obj").string());
    scene.cloth_rest = load_obj((fs::path(dir) / "meshes/cloth_rest.obj").string());

    const auto& frame_cams = cams.at("frame_camera_index");
    const auto& poses = skel.at("poses");
    for (int t = 0; t < scene.params.frames; ++t) {
        FrameData frame;
        frame.pose = pose_from_json(poses.at(size_t(t)));
        frame.camera_index = frame_cams.at(size_t(t)).get<int>();
        frame.cloth_mesh = load_obj(
            (fs::path(dir) / "meshes" / detail::index_name("cloth_gt", t, ".obj")).string());
        scene.frames.push_back(std::move(frame));
        scene.gt_images.push_back(
            load_png((fs::path(dir) / "frames" / detail::index_name("frame", t, ".png")).string()));
        Image mask =
            load_png((fs::path(dir) / "masks" / detail::index_name("mask", t, ".png")).string());
        for (double& v : mask.data) v = v > 0.5 ? 1.0 : 0.0;
        scene.gt_masks.push_back(std::move(mask));
    }
    const auto& holdout = cams.at("holdout_views");
    for (size_t h = 0; h < holdout.size(); ++h) {
        HoldoutView view;
        view.frame_index = holdout.at(h).at("frame_index").get<int>();
        view.camera_index = holdout.at(h).at("camera_index").get<int>();
        view.gt_image = load_png(
            (fs::path(dir) / "holdout" / detail::index_name("view", int(h), ".png")).string());
        view.gt_mask = load_png(
            (fs::path(dir) / "holdout" / detail::index_name("mask", int(h), ".png")).string());
        for (double& v : view.gt_mask.data) v = v > 0.5 ? 1.0 : 0.0;
        scene.holdout.push_back(std::move(view));
    }
    scene.scene_splats = load_layer((fs::path(dir) / "splats/scene.lgs").string());
    return scene;
}

}  // namespace lgs
