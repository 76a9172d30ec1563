#pragma once

#include "lgs/core.hpp"

#include <json.hpp>

namespace lgs {

// Pinhole camera. world_to_camera maps world points into the camera frame
// (+z forward); pixels are (fx x / z + cx, fy y / z + cy).
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    RigidTransform world_to_camera;
    int width = 0, height = 0;
    double near = 0.01;

    void validate() const {
        if (!(fx > 0) || !(fy > 0)) throw InvalidConfig("camera focal lengths must be positive");
        if (!(near > 0)) throw InvalidConfig("camera near plane must be positive");
        if (width <= 0 || height <= 0) throw InvalidConfig("camera size must be positive");
        if (cx < 0 || cx >= width || cy < 0 || cy >= height)
            throw InvalidConfig("camera principal point must lie inside the image");
    }

    Vec3 center() const {
        // Camera center in world coordinates: -R^T t.
        return -(world_to_camera.rotation.transpose() * world_to_camera.translation);
    }

    // Camera placed at `eye` looking toward `target` with +y image axis
    // pointing along -up (image rows grow downward).
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                          int width, int height, double near = 0.01) {
        Camera cam;
        cam.fx = cam.fy = focal;
        cam.cx = width / 2.0;
        cam.cy = height / 2.0;
        cam.width = width;
        cam.height = height;
        cam.near = near;
        const Vec3 forward = (target - eye).normalized();
        Vec3 right = forward.cross(up).normalized();
        const Vec3 down = forward.cross(right);
        Mat3 r;
        r.row(0) = right;
        r.row(1) = down;
        r.row(2) = forward;
        cam.world_to_camera = {r, -(r * eye)};
        return cam;
    }
};

namespace detail {
inline nlohmann::json vec_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 vec_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
// Rotation matrix <-> unit quaternion (w, x, y, z).
inline Vec4 matrix_to_quat(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    return {q.w(), q.x(), q.y(), q.z()};
}
}  // namespace detail

inline nlohmann::json camera_to_json(const Camera& cam) {
    const Vec4 q = detail::matrix_to_quat(cam.world_to_camera.rotation);
    return {{"fx", cam.fx},
            {"fy", cam.fy},
            {"cx", cam.cx},
            {"cy", cam.cy},
            {"w2c_rotation_quat", {q[0], q[1], q[2], q[3]}},
            {"w2c_translation", detail::vec_to_json(cam.world_to_camera.translation)},
            {"width", cam.width},
            {"height", cam.height},
            {"near", cam.near}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    const auto& q = j.at("w2c_rotation_quat");
    Vec4 quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
              q.at(3).get<double>());
    cam.world_to_camera.rotation = quat_to_matrix(quat / quat.norm());
    cam.world_to_camera.translation = detail::vec_from_json(j.at("w2c_translation"));
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.near = j.at("near").get<double>();
    cam.validate();
    return cam;
}

}  // namespace lgs
