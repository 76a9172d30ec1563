#pragma once

#include "lgs/core.hpp"
#include "lgs/decoders.hpp"
#include "lgs/gaussians.hpp"
#include "lgs/renderer.hpp"
#include "lgs/skeleton.hpp"
#include "lgs/triplane.hpp"

namespace lgs {

// Canonical body/cloth layers with their triplane fields and the three
// shared decoder heads. Decoded appearance is a residual on the canonical
// per-primitive SH/opacity, so zero-initialized decoders reproduce the
// initialized layers exactly.
struct AvatarModel {
    GaussianLayer body;
    GaussianLayer cloth;
    AvatarField fields;
    MlpParams appearance;   // D_A
    MlpParams geometry;     // D_G
    MlpParams deformation;  // D_D
    int joint_count = 0;

    const GaussianLayer& layer(LayerTag tag) const { return tag == LayerTag::Body ? body : cloth; }
    GaussianLayer& layer(LayerTag tag) { return tag == LayerTag::Body ? body : cloth; }
    const TriPlaneField& field(LayerTag tag) const {
        return tag == LayerTag::Body ? fields.body_field : fields.cloth_field;
    }
    TriPlaneField& field(LayerTag tag) {
        return tag == LayerTag::Body ? fields.body_field : fields.cloth_field;
    }
};

struct AvatarConfig {
    int triplane_res = 64;
    int triplane_channels = 16;
    std::vector<int> mlp_hidden = {128, 128};
    double bbox_padding = 0.25;  // meters around the canonical mesh extent
    double plane_init_scale = 1e-2;
};

namespace detail {
inline BBox padded_bbox(const std::vector<Vec3>& points, double pad) {
    BBox box;
    box.lo = points.front();
    box.hi = points.front();
    for (const Vec3& p : points) {
        box.lo = box.lo.cwiseMin(p);
        box.hi = box.hi.cwiseMax(p);
    }
    box.lo.array() -= pad;
    box.hi.array() += pad;
    return box;
}
}  // namespace detail

inline AvatarModel make_avatar(const TriMesh& body_mesh, const TriMesh& cloth_mesh,
                               int joint_count, const AvatarConfig& cfg, Rng& rng) {
    AvatarModel m;
    m.joint_count = joint_count;
    m.body = init_from_mesh(body_mesh, LayerTag::Body);
    m.cloth = init_from_mesh(cloth_mesh, LayerTag::Cloth);
    m.fields.body_field = TriPlaneField::random_init(
        cfg.triplane_res, cfg.triplane_channels,
        detail::padded_bbox(body_mesh.vertices, cfg.bbox_padding), rng, cfg.plane_init_scale);
    m.fields.cloth_field = TriPlaneField::random_init(
        cfg.triplane_res, cfg.triplane_channels,
        detail::padded_bbox(cloth_mesh.vertices, cfg.bbox_padding), rng, cfg.plane_init_scale);
    const int feat = 3 * cfg.triplane_channels;
    m.appearance = make_mlp(feat, cfg.mlp_hidden, kAppearanceHeadDim, rng);
    m.geometry = make_mlp(feat, cfg.mlp_hidden, kGeometryHeadDim, rng, geometry_head_identity_bias());
    m.deformation = make_mlp(feat, cfg.mlp_hidden, deformation_head_dim(joint_count), rng);
    return m;
}

// ---------------------------------------------------------------------------
// Forward: canonical primitives -> decoded, deformed, articulated splats.

struct LayerForward {
    LayerTag tag = LayerTag::Body;
    MatX features;  // N x 3C
    MlpCache app_cache, geo_cache, def_cache;
    MatX app_raw, geo_raw, def_raw;  // N x head_dim

    MatX weights;                  // N x J (softmax rows)
    std::vector<Mat3> rot_delta;   // R(d_rot6)
    std::vector<Mat3> rot_def;     // R_canon * rot_delta
    std::vector<Vec3> scale_def;   // exp(log_scale + d_log_scale)
    std::vector<Vec3> center_def;  // center + d_center
    std::vector<Vec3> center_off;  // + pose offsets
    std::vector<Mat3> blend_rot;   // sum_j w_j A_j rotation part
    std::vector<WorldSplat> splats;
};

inline LayerForward avatar_layer_forward(const AvatarModel& model, LayerTag tag,
                                         const std::vector<RigidTransform>& skinning,
                                         const VecX& pose_feat) {
    const GaussianLayer& layer = model.layer(tag);
    const TriPlaneField& field = model.field(tag);
    const int n = int(layer.size());
    const int j_count = model.joint_count;
    const int offset_rows = deformation_offset_rows(j_count);
    if (int(skinning.size()) != j_count) throw DimensionMismatch("skinning joint count mismatch");
    if (pose_feat.size() != offset_rows) throw DimensionMismatch("pose feature length mismatch");

    LayerForward fwd;
    fwd.tag = tag;
    fwd.features.resize(n, field.feature_dim());
    for (int i = 0; i < n; ++i)
        fwd.features.row(i) = sample(field, layer.primitives[size_t(i)].center).transpose();

    fwd.app_raw = mlp_forward_batch(model.appearance, fwd.features, &fwd.app_cache);
    fwd.geo_raw = mlp_forward_batch(model.geometry, fwd.features, &fwd.geo_cache);
    fwd.def_raw = mlp_forward_batch(model.deformation, fwd.features, &fwd.def_cache);

    fwd.weights.resize(n, j_count);
    fwd.rot_delta.resize(size_t(n));
    fwd.rot_def.resize(size_t(n));
    fwd.scale_def.resize(size_t(n));
    fwd.center_def.resize(size_t(n));
    fwd.center_off.resize(size_t(n));
    fwd.blend_rot.resize(size_t(n));
    fwd.splats.resize(size_t(n));

    for (int i = 0; i < n; ++i) {
        const GaussianPrimitive& prim = layer.primitives[size_t(i)];
        const auto geo = fwd.geo_raw.row(i);

        fwd.rot_delta[size_t(i)] = rot6d_to_matrix(geo.segment<6>(3).transpose());
        fwd.rot_def[size_t(i)] = prim.rotation_matrix() * fwd.rot_delta[size_t(i)];
        fwd.scale_def[size_t(i)] =
            (prim.log_scale + geo.segment<3>(9).transpose()).array().exp();
        fwd.center_def[size_t(i)] = prim.center + geo.segment<3>(0).transpose();

        // Pose-corrective offsets: center + feature^T dP, dP row-major F x 3.
        Vec3 offset = Vec3::Zero();
        const auto def = fwd.def_raw.row(i);
        for (int r = 0; r < offset_rows; ++r) {
            const double f = pose_feat[r];
            if (f == 0.0) continue;
            offset.x() += f * def[j_count + 3 * r + 0];
            offset.y() += f * def[j_count + 3 * r + 1];
            offset.z() += f * def[j_count + 3 * r + 2];
        }
        fwd.center_off[size_t(i)] = fwd.center_def[size_t(i)] + offset;

        fwd.weights.row(i) = softmax(def.head(j_count).transpose()).transpose();
        Mat3 blend_rot = Mat3::Zero();
        Vec3 blend_trans = Vec3::Zero();
        for (int j = 0; j < j_count; ++j) {
            const double w = fwd.weights(i, j);
            blend_rot += w * skinning[size_t(j)].rotation;
            blend_trans += w * skinning[size_t(j)].translation;
        }
        fwd.blend_rot[size_t(i)] = blend_rot;

        WorldSplat& splat = fwd.splats[size_t(i)];
        splat.center = blend_rot * fwd.center_off[size_t(i)] + blend_trans;
        splat.cov_factor = blend_rot * fwd.rot_def[size_t(i)] * fwd.scale_def[size_t(i)].asDiagonal();
        splat.opacity = sigmoid(prim.opacity_logit + fwd.app_raw(i, 3 * sh::kCoeffs));
        splat.sh = prim.sh_coeffs;
        for (int r = 0; r < sh::kCoeffs; ++r)
            for (int c = 0; c < 3; ++c) splat.sh(r, c) += fwd.app_raw(i, 3 * r + c);
    }
    return fwd;
}

// Predicted skinning weights aligned with the layer's reference rows.
inline SkinWeights predicted_weights(const LayerForward& fwd) {
    SkinWeights w;
    w.w = fwd.weights;
    return w;
}

// ---------------------------------------------------------------------------
// Backward.

struct LayerGrads {
    std::vector<Vec3> d_center;
    std::vector<Vec4> d_rotation;  // w.r.t. the stored unit quaternion, tangent-projected
    std::vector<Vec3> d_log_scale;
    VecX d_opacity_logit;
    std::vector<ShCoeffs> d_sh;

    explicit LayerGrads(int n)
        : d_center(size_t(n), Vec3::Zero()),
          d_rotation(size_t(n), Vec4::Zero()),
          d_log_scale(size_t(n), Vec3::Zero()),
          d_opacity_logit(VecX::Zero(n)),
          d_sh(size_t(n), ShCoeffs::Zero()) {}
};

struct AvatarGrads {
    LayerGrads body;
    LayerGrads cloth;
    TriPlaneGrad body_field;
    TriPlaneGrad cloth_field;
    MlpGrad appearance;
    MlpGrad geometry;
    MlpGrad deformation;

    explicit AvatarGrads(const AvatarModel& m)
        : body(int(m.body.size())),
          cloth(int(m.cloth.size())),
          body_field(m.fields.body_field),
          cloth_field(m.fields.cloth_field),
          appearance(m.appearance),
          geometry(m.geometry),
          deformation(m.deformation) {}

    LayerGrads& layer(LayerTag tag) { return tag == LayerTag::Body ? body : cloth; }
    TriPlaneGrad& field(LayerTag tag) { return tag == LayerTag::Body ? body_field : cloth_field; }
};

// Routes world-splat gradients (plus optional direct gradients on the
// predicted weight rows) back to canonical primitives, plane features and
// decoder parameters. `splat_grads` must pair with the forward's splats.
inline void avatar_layer_backward(const AvatarModel& model, const LayerForward& fwd,
                                  const std::vector<RigidTransform>& skinning,
                                  const VecX& pose_feat,
                                  const std::vector<WorldSplatGrad>& splat_grads,
                                  const MatX* d_weights, AvatarGrads& grads) {
    const GaussianLayer& layer = model.layer(fwd.tag);
    const TriPlaneField& field = model.field(fwd.tag);
    LayerGrads& lg = grads.layer(fwd.tag);
    const int n = int(layer.size());
    const int j_count = model.joint_count;
    const int offset_rows = deformation_offset_rows(j_count);

    MatX d_app_raw = MatX::Zero(n, kAppearanceHeadDim);
    MatX d_geo_raw = MatX::Zero(n, kGeometryHeadDim);
    MatX d_def_raw = MatX::Zero(n, deformation_head_dim(j_count));

    for (int i = 0; i < n; ++i) {
        const GaussianPrimitive& prim = layer.primitives[size_t(i)];
        const WorldSplatGrad& up = splat_grads[size_t(i)];
        const WorldSplat& splat = fwd.splats[size_t(i)];

        // Appearance: residual on canonical SH / opacity logit.
        const double d_logit = up.d_opacity * splat.opacity * (1.0 - splat.opacity);
        lg.d_opacity_logit[i] += d_logit;
        d_app_raw(i, 3 * sh::kCoeffs) += d_logit;
        lg.d_sh[size_t(i)] += up.d_sh;
        for (int r = 0; r < sh::kCoeffs; ++r)
            for (int c = 0; c < 3; ++c) d_app_raw(i, 3 * r + c) += up.d_sh(r, c);

        // cov_factor = B * R_def * diag(s_def)
        const Mat3& blend = fwd.blend_rot[size_t(i)];
        const Mat3 rs = fwd.rot_def[size_t(i)] * fwd.scale_def[size_t(i)].asDiagonal();
        Mat3 d_blend = up.d_cov_factor * rs.transpose();
        const Mat3 d_rs = blend.transpose() * up.d_cov_factor;
        Mat3 d_rot_def = d_rs * fwd.scale_def[size_t(i)].asDiagonal();
        Vec3 d_scale_def;
        for (int k = 0; k < 3; ++k)
            d_scale_def[k] = fwd.rot_def[size_t(i)].col(k).dot(d_rs.col(k));

        // center_world = B * center_off + blend_trans
        const Vec3 d_center_off = blend.transpose() * up.d_center;
        d_blend += up.d_center * fwd.center_off[size_t(i)].transpose();

        // Blend weights: B = sum w_j A_j.
        VecX d_w = VecX::Zero(j_count);
        for (int j = 0; j < j_count; ++j) {
            d_w[j] = (d_blend.array() * skinning[size_t(j)].rotation.array()).sum() +
                     up.d_center.dot(skinning[size_t(j)].translation);
        }
        if (d_weights) d_w += d_weights->row(i).transpose();
        d_def_raw.row(i).head(j_count) =
            softmax_backward(fwd.weights.row(i).transpose(), d_w).transpose();

        // Pose offsets: center_off = center_def + dP^T f.
        for (int r = 0; r < offset_rows; ++r) {
            const double f = pose_feat[r];
            if (f == 0.0) continue;
            d_def_raw(i, j_count + 3 * r + 0) += f * d_center_off.x();
            d_def_raw(i, j_count + 3 * r + 1) += f * d_center_off.y();
            d_def_raw(i, j_count + 3 * r + 2) += f * d_center_off.z();
        }

        // Geometry: center_def = center + d_mu.
        lg.d_center[size_t(i)] += d_center_off;
        d_geo_raw.row(i).segment<3>(0) = d_center_off.transpose();

        // R_def = R_canon * Q.
        const Mat3 d_q = prim.rotation_matrix().transpose() * d_rot_def;
        const Mat3 d_r_canon = d_rot_def * fwd.rot_delta[size_t(i)].transpose();
        d_geo_raw.row(i).segment<6>(3) =
            rot6d_backward(fwd.geo_raw.row(i).segment<6>(3).transpose(), d_q).transpose();
        const Vec4 q = prim.rotation();
        Vec4 d_quat = quat_to_matrix_backward(q, d_r_canon);
        d_quat -= q * q.dot(d_quat);  // tangent projection (renormalize-on-write)
        lg.d_rotation[size_t(i)] += d_quat;

        // s_def = exp(log_scale + d_s).
        const Vec3 d_log = fwd.scale_def[size_t(i)].cwiseProduct(d_scale_def);
        lg.d_log_scale[size_t(i)] += d_log;
        d_geo_raw.row(i).segment<3>(9) = d_log.transpose();
    }

    // Decoder and plane gradients.
    MatX d_features = mlp_backward_batch(model.appearance, fwd.app_cache, d_app_raw, grads.appearance);
    d_features += mlp_backward_batch(model.geometry, fwd.geo_cache, d_geo_raw, grads.geometry);
    d_features += mlp_backward_batch(model.deformation, fwd.def_cache, d_def_raw, grads.deformation);
    TriPlaneGrad& fg = grads.field(fwd.tag);
    for (int i = 0; i < n; ++i)
        sample_backward(field, layer.primitives[size_t(i)].center, d_features.row(i).transpose(), fg);
}

}  // namespace lgs
