#pragma once

#include "lgs/avatar.hpp"
#include "lgs/losses.hpp"
#include "lgs/renderer.hpp"
#include "lgs/training.hpp"
#include "lgs/triplane.hpp"

#include <functional>

namespace lgs {

// Central-difference verification of analytic gradients. Each stage draws
// seeded random instances kept away from the known kinks (ReLU zeros, alpha
// thresholds, clamp saturation, nearest-neighbor switches).

struct GradCheckReport {
    std::string stage;
    int instances = 0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace gradcheck_detail {

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Max relative error between `analytic` and central differences of `f`.
inline double check(const std::function<double(const VecX&)>& f, const VecX& x,
                    const VecX& analytic, double h = 1e-5) {
    double worst = 0.0;
    VecX probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double hi = f(probe);
        probe[i] = x[i] - h;
        const double lo = f(probe);
        probe[i] = x[i];
        worst = std::max(worst, rel_err(analytic[i], (hi - lo) / (2.0 * h)));
    }
    return worst;
}

inline Image random_image(Rng& rng, int w, int h, int c, double lo = 0.05, double hi = 0.95) {
    Image img = Image::zeros(w, h, c);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

inline VecX image_to_vec(const Image& img) {
    return Eigen::Map<const VecX>(img.data.data(), Eigen::Index(img.data.size()));
}

inline Image vec_to_image(const VecX& v, int w, int h, int c) {
    Image img = Image::zeros(w, h, c);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = v[Eigen::Index(i)];
    return img;
}

}  // namespace gradcheck_detail

inline GradCheckReport gradcheck_l1(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"l1", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x11);
    for (int k = 0; k < instances; ++k) {
        Image gt = random_image(rng, 6, 5, 3);
        Image img = random_image(rng, 6, 5, 3);
        // Keep every pixel away from the |x| kink.
        for (size_t i = 0; i < img.data.size(); ++i)
            while (std::abs(img.data[i] - gt.data[i]) < 1e-3) img.data[i] = rng.uniform(0.05, 0.95);
        Image d_img;
        l1_loss_grad(img, gt, d_img);
        const auto f = [&](const VecX& x) { return l1_loss(vec_to_image(x, 6, 5, 3), gt); };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, image_to_vec(img), image_to_vec(d_img)));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_ssim(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"ssim", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x22);
    LossConfig cfg;
    cfg.ssim_window = 5;
    for (int k = 0; k < instances; ++k) {
        const Image gt = random_image(rng, 9, 8, 3);
        const Image img = random_image(rng, 9, 8, 3);
        Image d_img;
        ssim_loss_grad(img, gt, cfg, d_img);
        const auto f = [&](const VecX& x) { return ssim_loss(vec_to_image(x, 9, 8, 3), gt, cfg); };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, image_to_vec(img), image_to_vec(d_img)));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_chamfer(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"chamfer_gm", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x33);
    LossConfig cfg;
    cfg.gm_scale = 0.3;
    for (int k = 0; k < instances; ++k) {
        std::vector<Vec3> pred, gt;
        // Resample until nearest-neighbor assignments have a safe margin, so
        // the finite-difference probes cannot flip them.
        bool valid = false;
        while (!valid) {
            pred.clear();
            gt.clear();
            for (int i = 0; i < 9; ++i) pred.push_back(rng.uniform_vec3(-1, 1));
            for (int i = 0; i < 7; ++i) gt.push_back(rng.uniform_vec3(-1, 1));
            valid = true;
            auto margin_ok = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
                for (const Vec3& p : from) {
                    double best = 1e30, second = 1e30;
                    for (const Vec3& q : to) {
                        const double d = (p - q).norm();
                        if (d < best) {
                            second = best;
                            best = d;
                        } else {
                            second = std::min(second, d);
                        }
                    }
                    if (second - best < 1e-3 || best < 1e-3) return false;
                }
                return true;
            };
            valid = margin_ok(pred, gt) && margin_ok(gt, pred);
        }
        std::vector<Vec3> d_pred, d_gt;
        chamfer_sim_loss_grad(pred, gt, cfg, d_pred, d_gt);
        VecX x(3 * (pred.size() + gt.size()));
        VecX analytic(x.size());
        for (size_t i = 0; i < pred.size(); ++i)
            for (int a = 0; a < 3; ++a) {
                x[Eigen::Index(3 * i + size_t(a))] = pred[i][a];
                analytic[Eigen::Index(3 * i + size_t(a))] = d_pred[i][a];
            }
        const size_t off = 3 * pred.size();
        for (size_t i = 0; i < gt.size(); ++i)
            for (int a = 0; a < 3; ++a) {
                x[Eigen::Index(off + 3 * i + size_t(a))] = gt[i][a];
                analytic[Eigen::Index(off + 3 * i + size_t(a))] = d_gt[i][a];
            }
        const auto f = [&](const VecX& v) {
            std::vector<Vec3> p(pred.size()), g(gt.size());
            for (size_t i = 0; i < p.size(); ++i)
                p[i] = {v[Eigen::Index(3 * i)], v[Eigen::Index(3 * i + 1)], v[Eigen::Index(3 * i + 2)]};
            for (size_t i = 0; i < g.size(); ++i)
                g[i] = {v[Eigen::Index(off + 3 * i)], v[Eigen::Index(off + 3 * i + 1)],
                        v[Eigen::Index(off + 3 * i + 2)]};
            return chamfer_sim_loss(p, g, cfg);
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_arap(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"arap", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x44);
    for (int k = 0; k < instances; ++k) {
        std::vector<Vec3> vertices;
        for (int i = 0; i < 8; ++i) vertices.push_back(rng.uniform_vec3(-1, 1));
        std::vector<std::array<int, 2>> edges;
        for (int i = 0; i < 8; ++i) edges.push_back({i, (i + 1) % 8});
        edges.push_back({0, 4});
        edges.push_back({2, 6});
        std::vector<Vec3> d_vertices;
        arap_loss_grad(vertices, edges, d_vertices);
        VecX x(3 * vertices.size()), analytic(x.size());
        for (size_t i = 0; i < vertices.size(); ++i)
            for (int a = 0; a < 3; ++a) {
                x[Eigen::Index(3 * i + size_t(a))] = vertices[i][a];
                analytic[Eigen::Index(3 * i + size_t(a))] = d_vertices[i][a];
            }
        const auto f = [&](const VecX& v) {
            std::vector<Vec3> pts(vertices.size());
            for (size_t i = 0; i < pts.size(); ++i)
                pts[i] = {v[Eigen::Index(3 * i)], v[Eigen::Index(3 * i + 1)],
                          v[Eigen::Index(3 * i + 2)]};
            return arap_loss(pts, edges);
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_mask(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"mask", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x55);
    for (int k = 0; k < instances; ++k) {
        Image gt = Image::zeros(7, 6, 1);
        for (double& v : gt.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        const Image matte = random_image(rng, 7, 6, 1);
        Image d_matte;
        mask_loss_grad(matte, gt, d_matte);
        const auto f = [&](const VecX& x) { return mask_loss(vec_to_image(x, 7, 6, 1), gt); };
        rep.max_rel_err =
            std::max(rep.max_rel_err, check(f, image_to_vec(matte), image_to_vec(d_matte)));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_cloth_lbs(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"cloth_lbs", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x66);
    for (int k = 0; k < instances; ++k) {
        SkinWeights pred, gt;
        pred.w.resize(5, 4);
        gt.w.resize(5, 4);
        for (Eigen::Index i = 0; i < pred.w.size(); ++i) {
            pred.w.data()[i] = rng.uniform();
            gt.w.data()[i] = rng.uniform();
        }
        MatX d_pred;
        cloth_lbs_loss_grad(pred, gt, d_pred);
        VecX x = Eigen::Map<const VecX>(pred.w.data(), pred.w.size());
        VecX analytic = Eigen::Map<const VecX>(d_pred.data(), d_pred.size());
        const auto f = [&](const VecX& v) {
            SkinWeights w;
            w.w = Eigen::Map<const MatX>(v.data(), pred.w.rows(), pred.w.cols());
            return cloth_lbs_loss(w, gt);
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_triplane(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"triplane", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x77);
    for (int k = 0; k < instances; ++k) {
        BBox box;
        box.lo = Vec3(-1, -1, -1);
        box.hi = Vec3(1, 1, 1);
        TriPlaneField field = TriPlaneField::random_init(5, 3, box, rng, 0.5);
        // Query away from grid-node kinks.
        Vec3 p;
        bool valid = false;
        while (!valid) {
            p = rng.uniform_vec3(-0.95, 0.95);
            valid = true;
            for (int a = 0; a < 3; ++a) {
                const double g = (p[a] + 1.0) / 2.0 * (field.res() - 1);
                if (std::abs(g - std::round(g)) < 1e-3) valid = false;
            }
        }
        VecX upstream(field.feature_dim());
        for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream[i] = rng.uniform(-1, 1);
        TriPlaneGrad grad(field);
        sample_backward(field, p, upstream, grad);

        const size_t plane_len = field.plane(0).size();
        VecX x(3 * plane_len), analytic(3 * plane_len);
        for (int pl = 0; pl < 3; ++pl)
            for (size_t i = 0; i < plane_len; ++i) {
                x[Eigen::Index(size_t(pl) * plane_len + i)] = field.plane(pl)[i];
                analytic[Eigen::Index(size_t(pl) * plane_len + i)] = grad.planes[size_t(pl)][i];
            }
        const auto f = [&](const VecX& v) {
            TriPlaneField probe = field;
            for (int pl = 0; pl < 3; ++pl)
                for (size_t i = 0; i < plane_len; ++i)
                    probe.plane(pl)[i] = v[Eigen::Index(size_t(pl) * plane_len + i)];
            return upstream.dot(sample(probe, p));
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_mlp(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"mlp_heads", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x88);
    for (int k = 0; k < instances; ++k) {
        MlpParams mlp = make_mlp(4, {6, 6}, 5, rng);
        // Non-zero head so output gradients flow, then nudge pre-activations
        // away from the ReLU kink.
        for (Eigen::Index i = 0; i < mlp.layers.back().weight.size(); ++i)
            mlp.layers.back().weight.data()[i] = rng.uniform(-1, 1);
        VecX input(4), upstream(5);
        MlpCache cache;
        bool valid = false;
        while (!valid) {
            for (int i = 0; i < 4; ++i) input[i] = rng.uniform(-1, 1);
            mlp_forward(mlp, input, &cache);
            // Every hidden pre-activation must sit clear of the ReLU kink on
            // either side, or a probe step can flip its gate.
            valid = true;
            VecX h = input;
            for (size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
                VecX z = mlp.layers[l].weight * h + mlp.layers[l].bias;
                for (Eigen::Index i = 0; i < z.size(); ++i)
                    if (std::abs(z[i]) < 1e-3) valid = false;
                h = z.cwiseMax(0.0);
            }
        }
        for (int i = 0; i < 5; ++i) upstream[i] = rng.uniform(-1, 1);
        MlpGrad grad(mlp);
        const VecX d_input = mlp_backward(mlp, cache, upstream, grad);

        const size_t n_params = mlp.parameter_count();
        VecX x(Eigen::Index(n_params) + 4), analytic(Eigen::Index(n_params) + 4);
        Eigen::Index c = 0;
        for (size_t l = 0; l < mlp.layers.size(); ++l) {
            for (Eigen::Index i = 0; i < mlp.layers[l].weight.size(); ++i, ++c) {
                x[c] = mlp.layers[l].weight.data()[i];
                analytic[c] = grad.layers[l].weight.data()[i];
            }
            for (Eigen::Index i = 0; i < mlp.layers[l].bias.size(); ++i, ++c) {
                x[c] = mlp.layers[l].bias[i];
                analytic[c] = grad.layers[l].bias[i];
            }
        }
        for (int i = 0; i < 4; ++i, ++c) {
            x[c] = input[i];
            analytic[c] = d_input[i];
        }
        const auto f = [&](const VecX& v) {
            MlpParams probe = mlp;
            Eigen::Index cc = 0;
            for (auto& layer : probe.layers) {
                for (Eigen::Index i = 0; i < layer.weight.size(); ++i, ++cc)
                    layer.weight.data()[i] = v[cc];
                for (Eigen::Index i = 0; i < layer.bias.size(); ++i, ++cc) layer.bias[i] = v[cc];
            }
            VecX in(4);
            for (int i = 0; i < 4; ++i, ++cc) in[i] = v[cc];
            return upstream.dot(mlp_forward(probe, in));
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline GradCheckReport gradcheck_rot6d(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"rot6d", instances, 0.0, tol, false};
    Rng rng(seed ^ 0x99);
    for (int k = 0; k < instances; ++k) {
        Eigen::Matrix<double, 6, 1> r6;
        do {
            for (int i = 0; i < 6; ++i) r6[i] = rng.uniform(-1.5, 1.5);
        } while (r6.head<3>().norm() < 0.3 ||
                 (r6.tail<3>() - r6.tail<3>().dot(r6.head<3>().normalized()) *
                                     r6.head<3>().normalized())
                         .norm() < 0.3);
        Mat3 g;
        for (int i = 0; i < 9; ++i) g.data()[i] = rng.uniform(-1, 1);
        const auto analytic = rot6d_backward(r6, g);
        const auto f = [&](const VecX& v) {
            Eigen::Matrix<double, 6, 1> probe = v;
            return (g.array() * rot6d_to_matrix(probe).array()).sum();
        };
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, VecX(r6), VecX(analytic)));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

// End-to-end: primitive parameters -> projection -> compositing -> L1 + SSIM
// against a fixed target, on a 16x16 image.
inline GradCheckReport gradcheck_splat_pipeline(std::uint64_t seed, int instances, double tol) {
    using namespace gradcheck_detail;
    GradCheckReport rep{"splat_pipeline", instances, 0.0, tol, false};
    Rng rng(seed ^ 0xaa);
    LossConfig loss_cfg;
    const Vec3 background(0.3, 0.3, 0.35);
    constexpr int kSplats = 5;
    constexpr int kSide = 16;

    Camera cam = Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 20.0, kSide, kSide,
                                 0.1);
    const int per_splat = 3 + 4 + 3 + 1 + 3 * sh::kCoeffs;

    auto build_layer = [&](const VecX& v) {
        GaussianLayer layer;
        layer.tag = LayerTag::Scene;
        layer.primitives.resize(kSplats);
        for (int s = 0; s < kSplats; ++s) {
            GaussianPrimitive& p = layer.primitives[size_t(s)];
            Eigen::Index o = s * per_splat;
            p.center = {v[o + 0], v[o + 1], v[o + 2]};
            p.set_rotation({v[o + 3], v[o + 4], v[o + 5], v[o + 6]});
            p.log_scale = {v[o + 7], v[o + 8], v[o + 9]};
            p.opacity_logit = v[o + 10];
            for (int r = 0; r < sh::kCoeffs; ++r)
                for (int c = 0; c < 3; ++c) p.sh_coeffs(r, c) = v[o + 11 + 3 * r + c];
        }
        return layer;
    };

    for (int k = 0; k < instances; ++k) {
        const Image target = random_image(rng, kSide, kSide, 3, 0.2, 0.8);
        VecX x(kSplats * per_splat);
        bool valid = false;
        while (!valid) {
            for (int s = 0; s < kSplats; ++s) {
                Eigen::Index o = s * per_splat;
                x[o + 0] = rng.uniform(-0.5, 0.5);
                x[o + 1] = rng.uniform(-0.5, 0.5);
                x[o + 2] = rng.uniform(-0.4, 0.4);
                Vec4 q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                       rng.uniform(-1, 1));
                q.normalize();
                for (int i = 0; i < 4; ++i) x[o + 3 + i] = q[i];
                for (int i = 0; i < 3; ++i) x[o + 7 + i] = std::log(rng.uniform(0.10, 0.30));
                x[o + 10] = logit(rng.uniform(0.25, 0.75));
                // DC keeps colors inside the clamp; higher bands small.
                for (int r = 0; r < sh::kCoeffs; ++r)
                    for (int c = 0; c < 3; ++c)
                        x[o + 11 + 3 * r + c] =
                            r == 0 ? rng.uniform(-0.8, 0.8) : rng.uniform(-0.02, 0.02);
            }
            // Reject configurations near compositing thresholds: the alpha
            // skip/clamp levels, the transmittance stop, near-tied depths
            // (probes must not flip the sort) and SH clamp saturation.
            GaussianLayer layer = build_layer(x);
            valid = true;
            const Vec3 cam_center = cam.center();
            std::vector<Splat2D> screen;
            for (const auto& p : layer.primitives) {
                const WorldSplat w = world_splat(p);
                auto projected = project(w.center, w.cov_factor, cam);
                if (!projected) {
                    valid = false;
                    break;
                }
                const Vec3 dir = (w.center - cam_center).normalized();
                double basis[sh::kCoeffs];
                sh::basis(dir, basis);
                Vec3 raw = Vec3::Constant(0.5);
                for (int r = 0; r < sh::kCoeffs; ++r) raw += basis[r] * w.sh.row(r).transpose();
                for (int c = 0; c < 3; ++c)
                    if (raw[c] < 5e-3 || raw[c] > 1.0 - 5e-3) valid = false;
                projected->alpha_base = w.opacity;
                screen.push_back(*projected);
            }
            if (!valid) continue;
            for (size_t i = 0; i < screen.size() && valid; ++i)
                for (size_t j = i + 1; j < screen.size(); ++j)
                    if (std::abs(screen[i].depth - screen[j].depth) < 1e-3) valid = false;
            if (!valid) continue;
            std::sort(screen.begin(), screen.end(),
                      [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; });
            for (int py = 0; py < kSide && valid; ++py)
                for (int px = 0; px < kSide && valid; ++px) {
                    double transmittance = 1.0;
                    for (const auto& s : screen) {
                        const double dx = px + 0.5 - s.mean2d.x();
                        const double dy = py + 0.5 - s.mean2d.y();
                        const double det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
                        const double q =
                            (s.cov_yy * dx * dx - 2 * s.cov_xy * dx * dy + s.cov_xx * dy * dy) /
                            det;
                        const double a = s.alpha_base * std::exp(-0.5 * q);
                        if (std::abs(a - kAlphaSkip) < 2e-4 || a > kAlphaClamp - 5e-3) valid = false;
                        if (a >= kAlphaSkip) {
                            transmittance *= (1.0 - std::min(a, kAlphaClamp));
                            if (std::abs(transmittance - kTransmittanceStop) < 2e-5) valid = false;
                            if (transmittance < kTransmittanceStop) break;
                        }
                    }
                }
        }

        const auto f = [&](const VecX& v) {
            GaussianLayer layer = build_layer(v);
            std::vector<WorldSplat> world(layer.size());
            for (size_t i = 0; i < layer.size(); ++i) world[i] = world_splat(layer.primitives[i]);
            const RenderPass pass = render_splats(world, cam, background);
            return loss_cfg.lambda_l1 * l1_loss(pass.out.rgb, target) +
                   loss_cfg.lambda_ssim * ssim_loss(pass.out.rgb, target, loss_cfg);
        };

        // Analytic gradient through the full stack.
        GaussianLayer layer = build_layer(x);
        std::vector<WorldSplat> world(layer.size());
        for (size_t i = 0; i < layer.size(); ++i) world[i] = world_splat(layer.primitives[i]);
        const RenderPass pass = render_splats(world, cam, background);
        Image d_l1, d_ssim;
        l1_loss_grad(pass.out.rgb, target, d_l1);
        ssim_loss_grad(pass.out.rgb, target, loss_cfg, d_ssim);
        Image d_rgb = Image::zeros(kSide, kSide, 3);
        for (size_t i = 0; i < d_rgb.data.size(); ++i)
            d_rgb.data[i] =
                loss_cfg.lambda_l1 * d_l1.data[i] + loss_cfg.lambda_ssim * d_ssim.data[i];
        std::vector<WorldSplatGrad> world_grads(world.size());
        render_splats_backward(world, cam, pass, background, d_rgb, world_grads);
        LayerGrads lg(kSplats);
        for (size_t i = 0; i < world.size(); ++i)
            primitive_backward(layer.primitives[i], world_grads[i], lg, i);

        VecX analytic(x.size());
        for (int s = 0; s < kSplats; ++s) {
            Eigen::Index o = s * per_splat;
            for (int i = 0; i < 3; ++i) analytic[o + i] = lg.d_center[size_t(s)][i];
            for (int i = 0; i < 4; ++i) analytic[o + 3 + i] = lg.d_rotation[size_t(s)][i];
            for (int i = 0; i < 3; ++i) analytic[o + 7 + i] = lg.d_log_scale[size_t(s)][i];
            analytic[o + 10] = lg.d_opacity_logit[s];
            for (int r = 0; r < sh::kCoeffs; ++r)
                for (int c = 0; c < 3; ++c) analytic[o + 11 + 3 * r + c] = lg.d_sh[size_t(s)](r, c);
        }
        rep.max_rel_err = std::max(rep.max_rel_err, check(f, x, analytic, 1e-5));
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

inline std::vector<GradCheckReport> run_gradcheck_suite(std::uint64_t seed, int instances = 100,
                                                        double tol = 1e-4,
                                                        double pipeline_tol = 1e-3) {
    return {
        gradcheck_l1(seed, instances, tol),
        gradcheck_ssim(seed, instances, tol),
        gradcheck_chamfer(seed, instances, tol),
        gradcheck_arap(seed, instances, tol),
        gradcheck_mask(seed, instances, tol),
        gradcheck_cloth_lbs(seed, instances, tol),
        gradcheck_triplane(seed, instances, tol),
        gradcheck_mlp(seed, instances, tol),
        gradcheck_rot6d(seed, instances, tol),
        gradcheck_splat_pipeline(seed, instances, pipeline_tol),
    };
}

}  // namespace lgs
