#pragma once

#include "lgs/core.hpp"
#include "lgs/mesh.hpp"
#include "lgs/nearest.hpp"

namespace lgs {

// Kinematic tree in topological order: joint 0 is the single root and every
// joint's parent index is smaller than its own.
struct Skeleton {
    struct Joint {
        int parent = -1;  // -1 for the root
        RigidTransform rest_local;
    };
    std::vector<Joint> joints;

    int joint_count() const { return int(joints.size()); }

    void validate() const {
        if (joints.empty()) throw InvalidConfig("skeleton has no joints");
        int roots = 0;
        for (size_t j = 0; j < joints.size(); ++j) {
            const int parent = joints[j].parent;
            if (parent < 0) {
                ++roots;
            } else if (parent >= int(j)) {
                throw InvalidConfig("skeleton joints must be in topological order");
            }
        }
        if (roots != 1) throw InvalidConfig("skeleton must have exactly one root");
    }
};

// Per-joint axis-angle rotations plus a root translation.
struct Pose {
    std::vector<Vec3> joint_rotations;
    Vec3 root_translation = Vec3::Zero();

    static Pose rest(int joint_count) {
        Pose p;
        p.joint_rotations.assign(size_t(joint_count), Vec3::Zero());
        return p;
    }

    void validate() const {
        if (!root_translation.allFinite()) throw InvalidConfig("pose root translation not finite");
        for (const Vec3& aa : joint_rotations) {
            if (!aa.allFinite()) throw InvalidConfig("pose rotation not finite");
            if (aa.norm() >= M_PI) throw InvalidConfig("pose rotation magnitude must be < pi");
        }
    }
};

// Row-stochastic N x J matrix: entry (i, j) is the influence of joint j on
// point i.
struct SkinWeights {
    MatX w;

    int rows() const { return int(w.rows()); }
    int joints() const { return int(w.cols()); }

    void validate() const {
        for (Eigen::Index i = 0; i < w.rows(); ++i) validate_row(w.row(i));
    }

    template <typename Row>
    static void validate_row(const Row& row) {
        if ((row.array() < -1e-9).any()) throw InvalidWeights("negative skin weight");
        if (std::abs(row.sum() - 1.0) > 1e-6) throw InvalidWeights("skin weight row does not sum to 1");
    }
};

struct FkResult {
    std::vector<RigidTransform> world;     // joint frame -> world
    std::vector<RigidTransform> skinning;  // world(pose) o world(rest)^-1
};

namespace detail {
inline std::vector<RigidTransform> accumulate_world(const Skeleton& skeleton, const Pose& pose) {
    std::vector<RigidTransform> world(skeleton.joints.size());
    for (size_t j = 0; j < skeleton.joints.size(); ++j) {
        const auto& joint = skeleton.joints[j];
        RigidTransform local = joint.rest_local.compose(
            {axis_angle_to_matrix(pose.joint_rotations[j]), Vec3::Zero()});
        if (joint.parent < 0) {
            local.translation += pose.root_translation;
            world[j] = local;
        } else {
            world[j] = world[size_t(joint.parent)].compose(local);
        }
    }
    return world;
}
}  // namespace detail

// Root-first accumulation of posed joint transforms. Skinning transforms are
// world(pose) composed with the inverse rest world transform, so they are all
// (numerically) the identity at the rest pose.
inline FkResult forward_kinematics(const Skeleton& skeleton, const Pose& pose) {
    skeleton.validate();
    if (int(pose.joint_rotations.size()) != skeleton.joint_count())
        throw DimensionMismatch("pose joint count does not match skeleton");
    pose.validate();
    FkResult out;
    out.world = detail::accumulate_world(skeleton, pose);
    const std::vector<RigidTransform> rest =
        detail::accumulate_world(skeleton, Pose::rest(skeleton.joint_count()));
    out.skinning.resize(out.world.size());
    for (size_t j = 0; j < out.world.size(); ++j)
        out.skinning[j] = out.world[j].compose(rest[j].inverse());
    return out;
}

// Linear blend skinning: p' = sum_j w_j * (A_j p).
inline std::vector<Vec3> lbs_apply(const std::vector<Vec3>& points, const SkinWeights& weights,
                                   const std::vector<RigidTransform>& skinning) {
    if (weights.rows() != int(points.size()))
        throw DimensionMismatch("skin weight rows do not match point count");
    if (weights.joints() != int(skinning.size()))
        throw DimensionMismatch("skin weight columns do not match joint count");
    weights.validate();
    std::vector<Vec3> out(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        Vec3 p = Vec3::Zero();
        for (int j = 0; j < weights.joints(); ++j) {
            const double wj = weights.w(Eigen::Index(i), j);
            if (wj != 0.0) p += wj * skinning[size_t(j)].apply(points[i]);
        }
        out[i] = p;
    }
    return out;
}

// Pose feature: concatenation over non-root joints of flatten(R(theta_j) - I),
// row-major. Length 9 * (J - 1); zero at the rest pose.
inline VecX pose_feature(const Pose& pose) {
    pose.validate();
    const int j_count = int(pose.joint_rotations.size());
    if (j_count < 1) throw InvalidConfig("pose has no joints");
    VecX f(9 * (j_count - 1));
    for (int j = 1; j < j_count; ++j) {
        const Mat3 d = axis_angle_to_matrix(pose.joint_rotations[size_t(j)]) - Mat3::Identity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) f[9 * (j - 1) + 3 * r + c] = d(r, c);
    }
    return f;
}

inline int pose_feature_dim(int joint_count) { return 9 * (joint_count - 1); }

// point + feature^T * offsets, with offsets an F x 3 matrix.
inline Vec3 apply_pose_offsets(const Vec3& point, const MatX& offsets, const VecX& feature) {
    if (offsets.rows() != feature.size() || offsets.cols() != 3)
        throw DimensionMismatch("pose offset matrix must be F x 3 with F = feature length");
    return point + (offsets.transpose() * feature);
}

// Each cloth vertex copies the weight row of its Euclidean-nearest body
// vertex (ties to the lowest body-vertex index). Both meshes must be in the
// canonical pose.
inline SkinWeights transfer_skin_weights(const TriMesh& cloth_mesh, const TriMesh& body_mesh,
                                         const SkinWeights& body_weights) {
    if (body_mesh.vertices.empty()) throw InvalidMesh("body mesh is empty");
    if (body_weights.rows() != int(body_mesh.vertices.size()))
        throw DimensionMismatch("body weights do not match body mesh");
    body_weights.validate();
    SkinWeights out;
    out.w.resize(Eigen::Index(cloth_mesh.vertices.size()), body_weights.w.cols());
    for (size_t i = 0; i < cloth_mesh.vertices.size(); ++i) {
        const int nearest = nearest_point_brute(cloth_mesh.vertices[i], body_mesh.vertices).index;
        out.w.row(Eigen::Index(i)) = body_weights.w.row(nearest);
    }
    return out;
}

}  // namespace lgs
