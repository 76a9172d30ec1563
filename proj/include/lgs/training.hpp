#pragma once

#include "lgs/avatar.hpp"
#include "lgs/config.hpp"
#include "lgs/losses.hpp"
#include "lgs/optimizer.hpp"
#include "lgs/renderer.hpp"
#include "lgs/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace lgs {

// ---------------------------------------------------------------------------
// Metrics.

inline double psnr(const Image& img, const Image& gt) {
    if (!img.same_shape(gt)) throw DimensionMismatch("psnr shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i) {
        const double d = img.data[i] - gt.data[i];
        mse += d * d;
    }
    mse /= double(img.data.size());
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

inline double ssim_metric(const Image& img, const Image& gt, const LossConfig& cfg = LossConfig()) {
    return ssim_mean(img, gt, cfg);
}

// ---------------------------------------------------------------------------
// Gradients of a plain (unskinned) primitive from its world-splat gradient.

inline void primitive_backward(const GaussianPrimitive& p, const WorldSplatGrad& up,
                               LayerGrads& lg, size_t i) {
    lg.d_center[i] += up.d_center;
    const Mat3 rot = p.rotation_matrix();
    const Vec3 scale = p.scale();
    const Mat3 d_rot = up.d_cov_factor * scale.asDiagonal();
    Vec3 d_scale;
    for (int k = 0; k < 3; ++k) d_scale[k] = rot.col(k).dot(up.d_cov_factor.col(k));
    lg.d_log_scale[i] += scale.cwiseProduct(d_scale);
    const Vec4 q = p.rotation();
    Vec4 d_quat = quat_to_matrix_backward(q, d_rot);
    d_quat -= q * q.dot(d_quat);
    lg.d_rotation[i] += d_quat;
    const double o = p.opacity();
    lg.d_opacity_logit[Eigen::Index(i)] += up.d_opacity * o * (1.0 - o);
    lg.d_sh[i] += up.d_sh;
}

// ---------------------------------------------------------------------------
// Parameter groups. Canonical flattening order is body, cloth, scene; the
// gather/scatter/grad views must stay in lockstep.

namespace groups {
enum Id {
    kPositions = 0,
    kRotations,
    kScales,
    kOpacities,
    kSh,
    kTriplanes,
    kDecoders,
    kCount
};
inline const char* name(int id) {
    static const char* names[] = {"positions", "rotations", "scales", "opacities",
                                  "sh",        "triplanes", "decoders"};
    return names[id];
}
}  // namespace groups

struct ParamGroups {
    std::array<VecX, groups::kCount> values;
    VecX& operator[](int id) { return values[size_t(id)]; }
    const VecX& operator[](int id) const { return values[size_t(id)]; }
};

namespace detail {

template <typename LayerFn, typename PlaneFn, typename MlpFn>
void for_each_block(AvatarModel& model, GaussianLayer& scene, const LayerFn& layer_fn,
                    const PlaneFn& plane_fn, const MlpFn& mlp_fn) {
    layer_fn(model.body);
    layer_fn(model.cloth);
    layer_fn(scene);
    plane_fn(model.fields.body_field);
    plane_fn(model.fields.cloth_field);
    mlp_fn(model.appearance);
    mlp_fn(model.geometry);
    mlp_fn(model.deformation);
}

}  // namespace detail

inline ParamGroups gather_params(AvatarModel& model, GaussianLayer& scene) {
    ParamGroups g;
    std::array<std::vector<double>, groups::kCount> buf;
    detail::for_each_block(
        model, scene,
        [&](GaussianLayer& layer) {
            for (auto& p : layer.primitives) {
                for (int k = 0; k < 3; ++k) buf[groups::kPositions].push_back(p.center[k]);
                for (int k = 0; k < 4; ++k) buf[groups::kRotations].push_back(p.rotation()[k]);
                for (int k = 0; k < 3; ++k) buf[groups::kScales].push_back(p.log_scale[k]);
                buf[groups::kOpacities].push_back(p.opacity_logit);
                for (int r = 0; r < sh::kCoeffs; ++r)
                    for (int c = 0; c < 3; ++c) buf[groups::kSh].push_back(p.sh_coeffs(r, c));
            }
        },
        [&](TriPlaneField& field) {
            for (int pl = 0; pl < 3; ++pl)
                for (double v : field.plane(pl)) buf[groups::kTriplanes].push_back(v);
        },
        [&](MlpParams& mlp) {
            for (auto& layer : mlp.layers) {
                for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
                    buf[groups::kDecoders].push_back(layer.weight.data()[i]);
                for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                    buf[groups::kDecoders].push_back(layer.bias[i]);
            }
        });
    for (int id = 0; id < groups::kCount; ++id)
        g[id] = Eigen::Map<const VecX>(buf[size_t(id)].data(), Eigen::Index(buf[size_t(id)].size()));
    return g;
}

inline void scatter_params(const ParamGroups& g, AvatarModel& model, GaussianLayer& scene) {
    std::array<Eigen::Index, groups::kCount> cursor{};
    detail::for_each_block(
        model, scene,
        [&](GaussianLayer& layer) {
            for (auto& p : layer.primitives) {
                for (int k = 0; k < 3; ++k) p.center[k] = g[groups::kPositions][cursor[groups::kPositions]++];
                Vec4 q;
                for (int k = 0; k < 4; ++k) q[k] = g[groups::kRotations][cursor[groups::kRotations]++];
                p.set_rotation(q);  // renormalize-on-write
                for (int k = 0; k < 3; ++k) p.log_scale[k] = g[groups::kScales][cursor[groups::kScales]++];
                p.opacity_logit = g[groups::kOpacities][cursor[groups::kOpacities]++];
                for (int r = 0; r < sh::kCoeffs; ++r)
                    for (int c = 0; c < 3; ++c) p.sh_coeffs(r, c) = g[groups::kSh][cursor[groups::kSh]++];
            }
        },
        [&](TriPlaneField& field) {
            for (int pl = 0; pl < 3; ++pl)
                for (double& v : field.plane(pl)) v = g[groups::kTriplanes][cursor[groups::kTriplanes]++];
        },
        [&](MlpParams& mlp) {
            for (auto& layer : mlp.layers) {
                for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
                    layer.weight.data()[i] = g[groups::kDecoders][cursor[groups::kDecoders]++];
                for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                    layer.bias[i] = g[groups::kDecoders][cursor[groups::kDecoders]++];
            }
        });
}

inline ParamGroups gather_grads(const AvatarGrads& ag, const LayerGrads& scene_lg,
                                const AvatarModel& model, const GaussianLayer& scene) {
    ParamGroups g;
    std::array<std::vector<double>, groups::kCount> buf;
    auto push_layer = [&](const LayerGrads& lg, size_t n) {
        for (size_t i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) buf[groups::kPositions].push_back(lg.d_center[i][k]);
            for (int k = 0; k < 4; ++k) buf[groups::kRotations].push_back(lg.d_rotation[i][k]);
            for (int k = 0; k < 3; ++k) buf[groups::kScales].push_back(lg.d_log_scale[i][k]);
            buf[groups::kOpacities].push_back(lg.d_opacity_logit[Eigen::Index(i)]);
            for (int r = 0; r < sh::kCoeffs; ++r)
                for (int c = 0; c < 3; ++c) buf[groups::kSh].push_back(lg.d_sh[i](r, c));
        }
    };
    push_layer(ag.body, model.body.size());
    push_layer(ag.cloth, model.cloth.size());
    push_layer(scene_lg, scene.size());
    for (const TriPlaneGrad* fg : {&ag.body_field, &ag.cloth_field})
        for (int pl = 0; pl < 3; ++pl)
            for (double v : fg->planes[size_t(pl)]) buf[groups::kTriplanes].push_back(v);
    for (const MlpGrad* mg : {&ag.appearance, &ag.geometry, &ag.deformation})
        for (const auto& layer : mg->layers) {
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
                buf[groups::kDecoders].push_back(layer.weight.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                buf[groups::kDecoders].push_back(layer.bias[i]);
        }
    for (int id = 0; id < groups::kCount; ++id)
        g[id] = Eigen::Map<const VecX>(buf[size_t(id)].data(), Eigen::Index(buf[size_t(id)].size()));
    return g;
}

// ---------------------------------------------------------------------------
// Multi-pass avatar view rendering (shared by training, eval and the CLI).

struct ViewRender {
    Image final;
    Image base;
    Image cloth;
    Matte matte;
};

inline ViewRender render_view(const AvatarModel& model, const GaussianLayer& scene_layer,
                              const Skeleton& skeleton, const Pose& pose, const Camera& cam,
                              const Vec3& background, bool matte_includes_body = false) {
    const auto fk = forward_kinematics(skeleton, pose);
    const VecX feat = pose_feature(pose);
    const auto body_fwd = avatar_layer_forward(model, LayerTag::Body, fk.skinning, feat);
    const auto cloth_fwd = avatar_layer_forward(model, LayerTag::Cloth, fk.skinning, feat);
    const auto scene_world = synth_detail::plain_splats(scene_layer);
    const RenderPass base = render_base(body_fwd.splats, scene_world, cam, background);
    const RenderPass cloth_pass = render_cloth(cloth_fwd.splats, cam);
    const RenderPass matte_pass = render_matte_pass(
        cloth_fwd.splats, scene_world, cam, matte_includes_body ? &body_fwd.splats : nullptr);
    ViewRender out;
    out.matte = matte_from_pass(matte_pass);
    out.final = composite_final(cloth_pass.out.rgb, base.out.rgb, out.matte);
    out.base = base.out.rgb;
    out.cloth = cloth_pass.out.rgb;
    return out;
}

// ---------------------------------------------------------------------------
// Training state and the per-iteration step.

struct TrainState {
    Config cfg;
    SyntheticScene scene;
    AvatarModel model;
    GaussianLayer scene_layer;
    SkinWeights cloth_gt_weights;  // per-cloth-primitive reference rows
    std::vector<std::array<int, 2>> cloth_edges;
    std::vector<FkResult> frame_fk;
    std::vector<VecX> frame_feat;
    std::array<AdamGroupState, groups::kCount> opt;
    Rng rng{0};
    long iteration = 0;
    PerceptualMetric lpips;  // optional plug-in; zero term when absent
};

// The trainee's scene layer starts from the GT scene geometry (the stand-in
// for an SfM point cloud) with neutral appearance.
inline GaussianLayer neutral_scene_init(const GaussianLayer& gt_scene) {
    GaussianLayer layer = gt_scene;
    for (auto& p : layer.primitives) {
        p.opacity_logit = logit(0.1);
        p.sh_coeffs.setZero();  // DC 0 renders the 0.5 grey neutral
    }
    return layer;
}

inline TrainState init_training(const SyntheticScene& scene, const Config& cfg) {
    TrainState st;
    st.cfg = cfg;
    st.scene = scene;
    st.rng = Rng(cfg.seed ^ 0xf17f17f17ull);
    AvatarConfig ac;
    ac.triplane_res = cfg.avatar.triplane_res;
    ac.triplane_channels = cfg.avatar.triplane_channels;
    ac.mlp_hidden = cfg.avatar.mlp_hidden;
    ac.bbox_padding = cfg.avatar.bbox_padding;
    ac.plane_init_scale = cfg.avatar.plane_init_scale;
    Rng model_rng(cfg.seed ^ 0xab1eab1eull);
    st.model = make_avatar(scene.body_rest, scene.cloth_rest, scene.skeleton.joint_count(), ac,
                           model_rng);
    st.scene_layer = neutral_scene_init(scene.scene_splats);
    const SkinWeights transferred =
        transfer_skin_weights(scene.cloth_rest, scene.body_rest, scene.body_weights);
    // Expand to one reference row per cloth primitive via the skin binding.
    st.cloth_gt_weights.w.resize(Eigen::Index(st.model.cloth.size()), transferred.w.cols());
    for (size_t i = 0; i < st.model.cloth.size(); ++i)
        st.cloth_gt_weights.w.row(Eigen::Index(i)) =
            transferred.w.row((*st.model.cloth.skin_binding)[i]);
    st.cloth_edges = scene.cloth_rest.edges();
    st.frame_fk.reserve(scene.frames.size());
    st.frame_feat.reserve(scene.frames.size());
    for (const auto& frame : scene.frames) {
        st.frame_fk.push_back(forward_kinematics(scene.skeleton, frame.pose));
        st.frame_feat.push_back(pose_feature(frame.pose));
    }
    return st;
}

struct StepResult {
    LossParts parts;
    double total = 0.0;
    int frame = 0;
};

inline StepResult train_step(TrainState& st) {
    const Config& cfg = st.cfg;
    const int frame_idx = int(st.rng.next_below(std::uint32_t(st.scene.frames.size())));
    const FrameData& frame = st.scene.frames[size_t(frame_idx)];
    const Camera& cam = st.scene.cameras[size_t(frame.camera_index)];
    const Image& gt_img = st.scene.gt_images[size_t(frame_idx)];
    const Image& gt_mask = st.scene.gt_masks[size_t(frame_idx)];
    const auto& skinning = st.frame_fk[size_t(frame_idx)].skinning;
    const VecX& feat = st.frame_feat[size_t(frame_idx)];

    // Forward.
    const auto body_fwd = avatar_layer_forward(st.model, LayerTag::Body, skinning, feat);
    const auto cloth_fwd = avatar_layer_forward(st.model, LayerTag::Cloth, skinning, feat);
    const auto scene_world = synth_detail::plain_splats(st.scene_layer);
    const size_t n_body = body_fwd.splats.size();
    const size_t n_cloth = cloth_fwd.splats.size();
    const size_t n_scene = scene_world.size();

    std::vector<WorldSplat> base_merged;
    base_merged.reserve(n_body + n_scene);
    base_merged.insert(base_merged.end(), body_fwd.splats.begin(), body_fwd.splats.end());
    base_merged.insert(base_merged.end(), scene_world.begin(), scene_world.end());
    // The base pass composites over the scene's own background so the
    // reconstruction target is consistent with how the GT frames were made.
    const RenderPass base_pass = render_splats(base_merged, cam, st.scene.background);

    const RenderPass cloth_pass = render_cloth(cloth_fwd.splats, cam);

    const bool matte_body = cfg.train.matte_includes_body;
    std::vector<WorldSplat> matte_merged;
    std::vector<Vec3> matte_colors;
    matte_merged.reserve(n_cloth + n_scene + (matte_body ? n_body : 0));
    for (const auto& s : cloth_fwd.splats) {
        matte_merged.push_back(s);
        matte_colors.push_back(Vec3::Ones());
    }
    for (const auto& s : scene_world) {
        matte_merged.push_back(s);
        matte_colors.push_back(Vec3::Zero());
    }
    if (matte_body)
        for (const auto& s : body_fwd.splats) {
            matte_merged.push_back(s);
            matte_colors.push_back(Vec3::Zero());
        }
    const RenderPass matte_pass = render_splats_flat(matte_merged, matte_colors, cam, Vec3::Zero());
    const Matte matte = matte_from_pass(matte_pass);
    const Image final = composite_final(cloth_pass.out.rgb, base_pass.out.rgb, matte);

    // Losses (sub-losses unweighted; lambdas applied in total and on the
    // upstream gradients).
    StepResult res;
    res.frame = frame_idx;
    Image d_final_l1, d_final_ssim, d_matte_mse;
    res.parts.l1 = l1_loss_grad(final, gt_img, d_final_l1);
    res.parts.ssim = ssim_loss_grad(final, gt_img, cfg.losses, d_final_ssim);
    Image d_final_lpips;
    if (st.lpips) res.parts.lpips = st.lpips(final, gt_img, &d_final_lpips);
    res.parts.mask = mask_loss_grad(matte.values, gt_mask, d_matte_mse);

    std::vector<Vec3> cloth_centers(n_cloth);
    for (size_t i = 0; i < n_cloth; ++i) cloth_centers[i] = cloth_fwd.splats[i].center;
    std::vector<Vec3> d_sim_pred, d_sim_gt;
    res.parts.sim = chamfer_sim_loss_grad(cloth_centers, frame.cloth_mesh.vertices, cfg.losses,
                                          d_sim_pred, d_sim_gt);
    std::vector<Vec3> d_arap;
    res.parts.arap = arap_loss_grad(cloth_centers, st.cloth_edges, d_arap);
    MatX d_w_pred;
    res.parts.cloth_lbs = cloth_lbs_loss_grad(predicted_weights(cloth_fwd), st.cloth_gt_weights,
                                              d_w_pred);
    res.total = total_loss(res.parts, cfg.losses);
    if (!std::isfinite(res.total)) throw NumericalFailure("loss is not finite");

    // Backward through the final layer compositing.
    Image d_final = Image::zeros(final.width, final.height, 3);
    for (size_t i = 0; i < d_final.data.size(); ++i) {
        d_final.data[i] = cfg.losses.lambda_l1 * d_final_l1.data[i] +
                          cfg.losses.lambda_ssim * d_final_ssim.data[i];
        if (st.lpips) d_final.data[i] += cfg.losses.lambda_lpips * d_final_lpips.data[i];
    }
    Image d_cloth_img, d_base_img, d_matte_img;
    composite_final_backward(cloth_pass.out.rgb, base_pass.out.rgb, matte, d_final, d_cloth_img,
                             d_base_img, d_matte_img);
    Image d_matte_rgb = Image::zeros(final.width, final.height, 3);
    for (int y = 0; y < final.height; ++y)
        for (int x = 0; x < final.width; ++x)
            d_matte_rgb.at(x, y, 0) = d_matte_img.at(x, y, 0) +
                                      cfg.losses.lambda_mask * d_matte_mse.at(x, y, 0);

    // Backward through the three passes.
    std::vector<WorldSplatGrad> base_grads(base_merged.size());
    render_splats_backward(base_merged, cam, base_pass, st.scene.background, d_base_img,
                           base_grads);
    std::vector<WorldSplatGrad> cloth_grads(n_cloth);
    render_splats_backward(cloth_fwd.splats, cam, cloth_pass, Vec3::Zero(), d_cloth_img,
                           cloth_grads);
    std::vector<WorldSplatGrad> matte_grads(matte_merged.size());
    render_splats_backward(matte_merged, cam, matte_pass, Vec3::Zero(), d_matte_rgb, matte_grads);

    std::vector<WorldSplatGrad> body_grads(base_grads.begin(), base_grads.begin() + long(n_body));
    LayerGrads scene_lg{int(n_scene)};
    for (size_t i = 0; i < n_scene; ++i) {
        WorldSplatGrad merged = base_grads[n_body + i];
        const WorldSplatGrad& from_matte = matte_grads[n_cloth + i];
        merged.d_center += from_matte.d_center;
        merged.d_cov_factor += from_matte.d_cov_factor;
        merged.d_opacity += from_matte.d_opacity;
        primitive_backward(st.scene_layer.primitives[i], merged, scene_lg, i);
    }
    for (size_t i = 0; i < n_cloth; ++i) {
        cloth_grads[i].d_center += matte_grads[i].d_center;
        cloth_grads[i].d_cov_factor += matte_grads[i].d_cov_factor;
        cloth_grads[i].d_opacity += matte_grads[i].d_opacity;
        cloth_grads[i].d_center += cfg.losses.lambda_sim * d_sim_pred[i] +
                                   cfg.losses.lambda_arap * d_arap[i];
    }
    if (matte_body)
        for (size_t i = 0; i < n_body; ++i) {
            const WorldSplatGrad& g = matte_grads[n_cloth + n_scene + i];
            body_grads[i].d_center += g.d_center;
            body_grads[i].d_cov_factor += g.d_cov_factor;
            body_grads[i].d_opacity += g.d_opacity;
        }

    AvatarGrads grads(st.model);
    const MatX d_weights = cfg.losses.lambda_cloth_lbs * d_w_pred;
    avatar_layer_backward(st.model, body_fwd, skinning, feat, body_grads, nullptr, grads);
    avatar_layer_backward(st.model, cloth_fwd, skinning, feat, cloth_grads, &d_weights, grads);

    // Optimizer step.
    ParamGroups params = gather_params(st.model, st.scene_layer);
    const ParamGroups grad_vecs = gather_grads(grads, scene_lg, st.model, st.scene_layer);
    const AdamParams hp{cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps};
    const ScheduleSpec position_schedule{cfg.optim.lr_position_init, cfg.optim.lr_position_final,
                                         std::max(1l, cfg.train.schedule_horizon)};
    const std::array<double, groups::kCount> lrs = {
        lr_at(position_schedule, st.iteration), cfg.optim.lr_rotation, cfg.optim.lr_scale,
        cfg.optim.lr_opacity, cfg.optim.lr_sh, cfg.optim.lr_triplane, cfg.optim.lr_decoder};
    for (int id = 0; id < groups::kCount; ++id)
        adam_step_group(params[id], grad_vecs[id], st.opt[size_t(id)], lrs[size_t(id)], hp,
                        groups::name(id));
    scatter_params(params, st.model, st.scene_layer);

    ++st.iteration;
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoint container: one file, named sections, versioned header. Writes
// are atomic (temp file + rename).

namespace ckpt {

constexpr char kMagic[8] = {'L', 'G', 'S', 'C', 'K', 'P', 'T', '1'};

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(char((v >> (8 * k)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(char((v >> (8 * k)) & 0xff));
}
inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& bytes;
    size_t off = 0;
    std::string section;

    void need(size_t n) const {
        if (off + n > bytes.size())
            throw IoError("checkpoint: truncated while reading section '" + section + "'");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) v = (v << 8) | std::uint8_t(bytes[off + size_t(k)]);
        off += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 7; k >= 0; --k) v = (v << 8) | std::uint8_t(bytes[off + size_t(k)]);
        off += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string raw(size_t n) {
        need(n);
        std::string s = bytes.substr(off, n);
        off += n;
        return s;
    }
};

inline void put_layer(std::string& out, const GaussianLayer& layer) {
    out.push_back(char(std::uint8_t(layer.tag)));
    put_u32(out, std::uint32_t(layer.size()));
    for (const auto& p : layer.primitives) {
        for (int k = 0; k < 3; ++k) put_f64(out, p.center[k]);
        for (int k = 0; k < 4; ++k) put_f64(out, p.rotation()[k]);
        for (int k = 0; k < 3; ++k) put_f64(out, p.log_scale[k]);
        put_f64(out, p.opacity_logit);
        for (int r = 0; r < sh::kCoeffs; ++r)
            for (int c = 0; c < 3; ++c) put_f64(out, p.sh_coeffs(r, c));
    }
}

inline GaussianLayer get_layer(Reader& r) {
    GaussianLayer layer;
    r.need(1);
    layer.tag = LayerTag(std::uint8_t(r.bytes[r.off++]));
    const std::uint32_t count = r.u32();
    layer.primitives.resize(count);
    for (auto& p : layer.primitives) {
        for (int k = 0; k < 3; ++k) p.center[k] = r.f64();
        Vec4 q;
        for (int k = 0; k < 4; ++k) q[k] = r.f64();
        p.set_rotation(q);
        for (int k = 0; k < 3; ++k) p.log_scale[k] = r.f64();
        p.opacity_logit = r.f64();
        for (int rr = 0; rr < sh::kCoeffs; ++rr)
            for (int c = 0; c < 3; ++c) p.sh_coeffs(rr, c) = r.f64();
    }
    if (layer.tag != LayerTag::Scene) {
        layer.skin_binding.emplace(count);
        for (std::uint32_t i = 0; i < count; ++i) (*layer.skin_binding)[i] = int(i);
    }
    return layer;
}

inline void put_field(std::string& out, const TriPlaneField& f) {
    put_u32(out, std::uint32_t(f.res()));
    put_u32(out, std::uint32_t(f.channels()));
    for (int k = 0; k < 3; ++k) put_f64(out, f.bbox().lo[k]);
    for (int k = 0; k < 3; ++k) put_f64(out, f.bbox().hi[k]);
    for (int pl = 0; pl < 3; ++pl)
        for (double v : f.plane(pl)) put_f64(out, v);
}

inline TriPlaneField get_field(Reader& r) {
    const int res = int(r.u32());
    const int channels = int(r.u32());
    BBox box;
    for (int k = 0; k < 3; ++k) box.lo[k] = r.f64();
    for (int k = 0; k < 3; ++k) box.hi[k] = r.f64();
    TriPlaneField f(res, channels, box);
    for (int pl = 0; pl < 3; ++pl)
        for (double& v : f.plane(pl)) v = r.f64();
    return f;
}

inline void put_mlp(std::string& out, const MlpParams& mlp) {
    put_u32(out, std::uint32_t(mlp.layers.size()));
    for (const auto& layer : mlp.layers) {
        put_u32(out, std::uint32_t(layer.weight.rows()));
        put_u32(out, std::uint32_t(layer.weight.cols()));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) put_f64(out, layer.weight.data()[i]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put_f64(out, layer.bias[i]);
    }
}

inline MlpParams get_mlp(Reader& r) {
    MlpParams mlp;
    const std::uint32_t n_layers = r.u32();
    mlp.layers.resize(n_layers);
    for (auto& layer : mlp.layers) {
        const int rows = int(r.u32());
        const int cols = int(r.u32());
        layer.weight.resize(rows, cols);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = r.f64();
        layer.bias.resize(rows);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = r.f64();
    }
    mlp.validate();
    return mlp;
}

}  // namespace ckpt

struct Checkpoint {
    AvatarModel model;
    GaussianLayer scene_layer;
    Skeleton skeleton;
    Vec3 background = Vec3::Ones();
    std::array<AdamGroupState, groups::kCount> opt;
    Config cfg;
    std::uint64_t rng_state = 0;
    long iteration = 0;
};

inline std::string encode_checkpoint(const Checkpoint& c) {
    std::string out(ckpt::kMagic, 8);
    ckpt::put_u32(out, 1);  // version
    auto section = [&](const char* name, const std::string& payload) {
        ckpt::put_u32(out, std::uint32_t(std::strlen(name)));
        out.append(name);
        ckpt::put_u64(out, payload.size());
        out += payload;
    };
    {
        std::string s;
        ckpt::put_u32(s, 3);
        ckpt::put_layer(s, c.model.body);
        ckpt::put_layer(s, c.model.cloth);
        ckpt::put_layer(s, c.scene_layer);
        section("layers", s);
    }
    {
        std::string s;
        ckpt::put_u32(s, std::uint32_t(c.model.joint_count));
        ckpt::put_field(s, c.model.fields.body_field);
        ckpt::put_field(s, c.model.fields.cloth_field);
        section("triplanes", s);
    }
    {
        std::string s;
        for (const char* name : {"D_A", "D_G", "D_D"}) {
            ckpt::put_u32(s, std::uint32_t(std::strlen(name)));
            s.append(name);
        }
        ckpt::put_mlp(s, c.model.appearance);
        ckpt::put_mlp(s, c.model.geometry);
        ckpt::put_mlp(s, c.model.deformation);
        section("decoders", s);
    }
    {
        std::string s;
        ckpt::put_u64(s, std::uint64_t(c.iteration));
        for (int id = 0; id < groups::kCount; ++id) {
            const auto& g = c.opt[size_t(id)];
            ckpt::put_u64(s, std::uint64_t(g.step));
            ckpt::put_u64(s, std::uint64_t(g.m.size()));
            for (Eigen::Index i = 0; i < g.m.size(); ++i) ckpt::put_f64(s, g.m[i]);
            for (Eigen::Index i = 0; i < g.v.size(); ++i) ckpt::put_f64(s, g.v[i]);
        }
        section("optimizer", s);
    }
    {
        std::string s;
        ckpt::put_u32(s, std::uint32_t(c.skeleton.joint_count()));
        for (const auto& joint : c.skeleton.joints) {
            ckpt::put_u32(s, std::uint32_t(joint.parent + 1));
            for (int r = 0; r < 3; ++r)
                for (int col = 0; col < 3; ++col) ckpt::put_f64(s, joint.rest_local.rotation(r, col));
            for (int k = 0; k < 3; ++k) ckpt::put_f64(s, joint.rest_local.translation[k]);
        }
        for (int k = 0; k < 3; ++k) ckpt::put_f64(s, c.background[k]);
        section("skeleton", s);
    }
    section("config", config_to_json(c.cfg).dump());
    {
        std::string s;
        ckpt::put_u64(s, c.rng_state);
        section("rng-state", s);
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), ckpt::kMagic, 8) != 0)
        throw IoError("checkpoint: bad magic");
    Checkpoint c;
    ckpt::Reader top{bytes, 8, "header"};
    const std::uint32_t version = top.u32();
    if (version != 1) throw IoError("checkpoint: unsupported version");
    bool saw_layers = false, saw_planes = false, saw_decoders = false, saw_config = false;
    while (top.off < bytes.size()) {
        const std::uint32_t name_len = top.u32();
        const std::string name = top.raw(name_len);
        const std::uint64_t payload_len = top.u64();
        const std::string payload = top.raw(payload_len);
        ckpt::Reader r{payload, 0, name};
        if (name == "layers") {
            if (r.u32() != 3) throw IoError("checkpoint: section 'layers' must hold 3 layers");
            c.model.body = ckpt::get_layer(r);
            c.model.cloth = ckpt::get_layer(r);
            c.scene_layer = ckpt::get_layer(r);
            saw_layers = true;
        } else if (name == "triplanes") {
            c.model.joint_count = int(r.u32());
            c.model.fields.body_field = ckpt::get_field(r);
            c.model.fields.cloth_field = ckpt::get_field(r);
            saw_planes = true;
        } else if (name == "decoders") {
            for (const char* expect : {"D_A", "D_G", "D_D"}) {
                const std::uint32_t n = r.u32();
                if (r.raw(n) != expect)
                    throw IoError("checkpoint: section 'decoders' missing group " +
                                  std::string(expect));
            }
            c.model.appearance = ckpt::get_mlp(r);
            c.model.geometry = ckpt::get_mlp(r);
            c.model.deformation = ckpt::get_mlp(r);
            saw_decoders = true;
        } else if (name == "optimizer") {
            c.iteration = long(r.u64());
            for (int id = 0; id < groups::kCount; ++id) {
                auto& g = c.opt[size_t(id)];
                g.step = long(r.u64());
                const std::uint64_t n = r.u64();
                g.m.resize(Eigen::Index(n));
                for (Eigen::Index i = 0; i < g.m.size(); ++i) g.m[i] = r.f64();
                g.v.resize(Eigen::Index(n));
                for (Eigen::Index i = 0; i < g.v.size(); ++i) g.v[i] = r.f64();
            }
        } else if (name == "skeleton") {
            const std::uint32_t n = r.u32();
            c.skeleton.joints.resize(n);
            for (auto& joint : c.skeleton.joints) {
                joint.parent = int(r.u32()) - 1;
                for (int rr = 0; rr < 3; ++rr)
                    for (int col = 0; col < 3; ++col) joint.rest_local.rotation(rr, col) = r.f64();
                for (int k = 0; k < 3; ++k) joint.rest_local.translation[k] = r.f64();
            }
            for (int k = 0; k < 3; ++k) c.background[k] = r.f64();
        } else if (name == "config") {
            c.cfg = config_from_json(nlohmann::json::parse(payload));
            saw_config = true;
        } else if (name == "rng-state") {
            c.rng_state = r.u64();
        }
    }
    if (!saw_layers) throw IoError("checkpoint: missing section 'layers'");
    if (!saw_planes) throw IoError("checkpoint: missing section 'triplanes'");
    if (!saw_decoders) throw IoError("checkpoint: missing section 'decoders'");
    if (!saw_config) throw IoError("checkpoint: missing section 'config'");
    return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    const std::string bytes = encode_checkpoint(c);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out.write(bytes.data(), std::streamsize(bytes.size())))
            throw IoError("cannot write checkpoint: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

inline Checkpoint snapshot(const TrainState& st) {
    Checkpoint c;
    c.model = st.model;
    c.scene_layer = st.scene_layer;
    c.skeleton = st.scene.skeleton;
    c.background = st.scene.background;
    c.opt = st.opt;
    c.cfg = st.cfg;
    c.rng_state = st.rng.state();
    c.iteration = st.iteration;
    return c;
}

// ---------------------------------------------------------------------------
// Full fitting loop. Emits a loss CSV ("iteration,l1,ssim,lpips,cloth_lbs,
// sim,arap,mask,total") and periodic checkpoints under out_dir.

struct FitResult {
    std::string loss_csv;
    std::string checkpoint_path;
    long iterations = 0;
};

inline std::string csv_row(long iteration, const LossParts& p, double total) {
    char buf[340];
    std::snprintf(buf, sizeof(buf),
                  "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", iteration, p.l1,
                  p.ssim, p.lpips, p.cloth_lbs, p.sim, p.arap, p.mask, total);
    return buf;
}

inline FitResult fit(TrainState& st, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    FitResult result;
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.lgsc").string();
    result.loss_csv = "iteration,l1,ssim,lpips,cloth_lbs,sim,arap,mask,total\n";

    save_checkpoint(snapshot(st), result.checkpoint_path);
    const long total_iters = st.cfg.train.iterations;
    for (long t = 0; t < total_iters; ++t) {
        StepResult step;
        try {
            step = train_step(st);
        } catch (const NumericalFailure& failure) {
            // Last good checkpoint stays on disk.
            std::ofstream(fs::path(out_dir) / "ABORTED.txt")
                << "aborted at iteration " << st.iteration << ": " << failure.what() << "\n";
            throw;
        }
        result.loss_csv += csv_row(st.iteration - 1, step.parts, step.total);
        if (st.cfg.train.checkpoint_every > 0 && st.iteration % st.cfg.train.checkpoint_every == 0)
            save_checkpoint(snapshot(st), result.checkpoint_path);
    }
    save_checkpoint(snapshot(st), result.checkpoint_path);
    std::ofstream csv(fs::path(out_dir) / "loss.csv");
    csv << result.loss_csv;
    result.iterations = total_iters;
    return result;
}

// ---------------------------------------------------------------------------
// Held-out evaluation.

struct EvalView {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double matte_mse = 0.0;
};

struct EvalResult {
    std::vector<EvalView> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_matte_mse = 0.0;
};

inline EvalResult evaluate_holdout(const AvatarModel& model, const GaussianLayer& scene_layer,
                                   const SyntheticScene& scene, const Config& cfg) {
    EvalResult out;
    for (const HoldoutView& view : scene.holdout) {
        const FrameData& frame = scene.frames[size_t(view.frame_index)];
        const ViewRender render =
            render_view(model, scene_layer, scene.skeleton, frame.pose,
                        scene.cameras[size_t(view.camera_index)], scene.background,
                        cfg.train.matte_includes_body);
        EvalView ev;
        ev.psnr_db = psnr(render.final, view.gt_image);
        ev.ssim = ssim_metric(render.final, view.gt_image, cfg.losses);
        ev.matte_mse = mask_loss(render.matte.values, view.gt_mask);
        out.views.push_back(ev);
        out.mean_psnr += ev.psnr_db;
        out.mean_ssim += ev.ssim;
        out.mean_matte_mse += ev.matte_mse;
    }
    if (!out.views.empty()) {
        out.mean_psnr /= double(out.views.size());
        out.mean_ssim /= double(out.views.size());
        out.mean_matte_mse /= double(out.views.size());
    }
    return out;
}

}  // namespace lgs
