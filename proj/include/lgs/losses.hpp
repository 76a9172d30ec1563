#pragma once

#include "lgs/core.hpp"
#include "lgs/image.hpp"
#include "lgs/nearest.hpp"
#include "lgs/skeleton.hpp"

#include <functional>

namespace lgs {

// Loss weights and kernel constants. The lambdas follow the training recipe
// defaults; sub-losses are unweighted and total_loss applies each lambda
// exactly once.
struct LossConfig {
    double lambda_l1 = 0.8;
    double lambda_ssim = 0.2;
    double lambda_lpips = 1.0;
    double lambda_sim = 1.0;
    double lambda_arap = 0.5;
    double lambda_mask = 1.0;
    double lambda_cloth_lbs = 1000.0;
    double gm_scale = 0.05;  // meters
    int ssim_window = 11;
    double ssim_c1 = 0.01 * 0.01;
    double ssim_c2 = 0.03 * 0.03;

    void validate() const {
        if (!(gm_scale > 0.0)) throw InvalidConfig("gm_scale must be positive");
        if (ssim_window < 1 || ssim_window % 2 == 0)
            throw InvalidConfig("ssim_window must be a positive odd integer");
        if (!(ssim_c1 > 0.0) || !(ssim_c2 > 0.0)) throw InvalidConfig("ssim constants must be positive");
        for (double l : {lambda_l1, lambda_ssim, lambda_lpips, lambda_sim, lambda_arap, lambda_mask,
                         lambda_cloth_lbs})
            if (l < 0.0) throw InvalidConfig("loss weights must be nonnegative");
    }
};

// ---------------------------------------------------------------------------
// Geman-McClure robustifier: rho(x) = x^2 / (x^2 + sigma^2), in [0, 1).

inline double geman_mcclure(double x, double sigma) {
    if (!(sigma > 0.0)) throw InvalidConfig("Geman-McClure scale must be positive");
    const double x2 = x * x;
    return x2 / (x2 + sigma * sigma);
}

inline double geman_mcclure_derivative(double x, double sigma) {
    const double s2 = sigma * sigma;
    const double denom = x * x + s2;
    return 2.0 * x * s2 / (denom * denom);
}

// ---------------------------------------------------------------------------
// Simulation-alignment loss: bidirectional Chamfer with the Geman-McClure
// kernel on Euclidean nearest-neighbor distances.

enum class NearestMode { Auto, BruteForce, HashGrid };

namespace detail {

inline std::vector<NearestHit> all_nearest(const std::vector<Vec3>& queries,
                                           const std::vector<Vec3>& targets, NearestMode mode) {
    const bool use_grid = mode == NearestMode::HashGrid ||
                          (mode == NearestMode::Auto && targets.size() > 5000);
    std::vector<NearestHit> hits(queries.size());
    if (use_grid) {
        SpatialHashGrid grid(targets);
        for (size_t i = 0; i < queries.size(); ++i) hits[i] = grid.nearest(queries[i]);
    } else {
        for (size_t i = 0; i < queries.size(); ++i) hits[i] = nearest_point_brute(queries[i], targets);
    }
    return hits;
}

}  // namespace detail

inline double chamfer_sim_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                               const LossConfig& cfg, NearestMode mode = NearestMode::Auto) {
    if (pred.empty() || gt.empty()) throw EmptyPointSet("chamfer loss needs non-empty point sets");
    cfg.validate();
    const auto pred_hits = detail::all_nearest(pred, gt, mode);
    const auto gt_hits = detail::all_nearest(gt, pred, mode);
    double sum_pred = 0.0, sum_gt = 0.0;
    for (const auto& h : pred_hits) sum_pred += geman_mcclure(std::sqrt(h.sq_dist), cfg.gm_scale);
    for (const auto& h : gt_hits) sum_gt += geman_mcclure(std::sqrt(h.sq_dist), cfg.gm_scale);
    return 0.5 * (sum_pred / double(pred.size()) + sum_gt / double(gt.size()));
}

// Value plus gradients w.r.t. both point sets. Nearest-neighbor indices are
// held fixed (the usual subgradient choice); the kernel gradient is smooth
// through coincident points.
inline double chamfer_sim_loss_grad(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                                    const LossConfig& cfg, std::vector<Vec3>& d_pred,
                                    std::vector<Vec3>& d_gt, NearestMode mode = NearestMode::Auto) {
    if (pred.empty() || gt.empty()) throw EmptyPointSet("chamfer loss needs non-empty point sets");
    cfg.validate();
    d_pred.assign(pred.size(), Vec3::Zero());
    d_gt.assign(gt.size(), Vec3::Zero());
    const double s2 = cfg.gm_scale * cfg.gm_scale;
    const auto pred_hits = detail::all_nearest(pred, gt, mode);
    const auto gt_hits = detail::all_nearest(gt, pred, mode);
    double value = 0.0;
    const double w_pred = 0.5 / double(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const auto& h = pred_hits[i];
        value += w_pred * geman_mcclure(std::sqrt(h.sq_dist), cfg.gm_scale);
        // d rho(|d|) / d p = 2 sigma^2 / (|d|^2 + sigma^2)^2 * (p - q)
        const double denom = h.sq_dist + s2;
        const Vec3 diff = pred[i] - gt[size_t(h.index)];
        const Vec3 g = (2.0 * s2 / (denom * denom)) * diff * w_pred;
        d_pred[i] += g;
        d_gt[size_t(h.index)] -= g;
    }
    const double w_gt = 0.5 / double(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) {
        const auto& h = gt_hits[i];
        value += w_gt * geman_mcclure(std::sqrt(h.sq_dist), cfg.gm_scale);
        const double denom = h.sq_dist + s2;
        const Vec3 diff = gt[i] - pred[size_t(h.index)];
        const Vec3 g = (2.0 * s2 / (denom * denom)) * diff * w_gt;
        d_gt[i] += g;
        d_pred[size_t(h.index)] -= g;
    }
    return value;
}

// ---------------------------------------------------------------------------
// ARAP regularizer: population variance of edge lengths.

inline double arap_loss(const std::vector<Vec3>& vertices,
                        const std::vector<std::array<int, 2>>& edges) {
    if (edges.empty()) throw EmptyEdgeSet("arap loss needs at least one edge");
    const double n = double(edges.size());
    double sum = 0.0, sum2 = 0.0;
    for (const auto& e : edges) {
        const double len = (vertices[size_t(e[0])] - vertices[size_t(e[1])]).norm();
        sum += len;
        sum2 += len * len;
    }
    const double mean = sum / n;
    return sum2 / n - mean * mean;
}

inline double arap_loss_grad(const std::vector<Vec3>& vertices,
                             const std::vector<std::array<int, 2>>& edges,
                             std::vector<Vec3>& d_vertices) {
    if (edges.empty()) throw EmptyEdgeSet("arap loss needs at least one edge");
    d_vertices.assign(vertices.size(), Vec3::Zero());
    const double n = double(edges.size());
    std::vector<double> lengths(edges.size());
    double sum = 0.0;
    for (size_t k = 0; k < edges.size(); ++k) {
        lengths[k] = (vertices[size_t(edges[k][0])] - vertices[size_t(edges[k][1])]).norm();
        sum += lengths[k];
    }
    const double mean = sum / n;
    double value = 0.0;
    for (size_t k = 0; k < edges.size(); ++k) {
        const double dev = lengths[k] - mean;
        value += dev * dev / n;
        if (lengths[k] < 1e-12) continue;  // degenerate edge: no direction
        const Vec3 dir = (vertices[size_t(edges[k][0])] - vertices[size_t(edges[k][1])]) / lengths[k];
        const Vec3 g = (2.0 * dev / n) * dir;
        d_vertices[size_t(edges[k][0])] += g;
        d_vertices[size_t(edges[k][1])] -= g;
    }
    return value;
}

// ---------------------------------------------------------------------------
// Mask consistency: per-pixel MSE between the rendered matte and a
// ground-truth silhouette.

inline double mask_loss(const Image& rendered, const Image& gt) {
    if (rendered.width != gt.width || rendered.height != gt.height ||
        rendered.channels != gt.channels)
        throw DimensionMismatch("mask loss shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - gt.data[i];
        sum += d * d;
    }
    return sum / double(rendered.data.size());
}

inline double mask_loss_grad(const Image& rendered, const Image& gt, Image& d_rendered) {
    if (rendered.width != gt.width || rendered.height != gt.height ||
        rendered.channels != gt.channels)
        throw DimensionMismatch("mask loss shape mismatch");
    d_rendered = Image::zeros(rendered.width, rendered.height, rendered.channels);
    const double inv_n = 1.0 / double(rendered.data.size());
    double sum = 0.0;
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - gt.data[i];
        sum += d * d;
        d_rendered.data[i] = 2.0 * d * inv_n;
    }
    return sum * inv_n;
}

// ---------------------------------------------------------------------------
// Cloth-LBS regularizer: mean squared difference between predicted and
// reference skinning weights. Mean (not sum) so the 1000x weight behaves
// uniformly across mesh resolutions.

inline double cloth_lbs_loss(const SkinWeights& pred, const SkinWeights& gt) {
    if (pred.w.rows() != gt.w.rows() || pred.w.cols() != gt.w.cols())
        throw DimensionMismatch("cloth-lbs loss shape mismatch");
    return (pred.w - gt.w).squaredNorm() / double(pred.w.size());
}

inline double cloth_lbs_loss_grad(const SkinWeights& pred, const SkinWeights& gt, MatX& d_pred) {
    if (pred.w.rows() != gt.w.rows() || pred.w.cols() != gt.w.cols())
        throw DimensionMismatch("cloth-lbs loss shape mismatch");
    const MatX diff = pred.w - gt.w;
    d_pred = 2.0 * diff / double(pred.w.size());
    return diff.squaredNorm() / double(pred.w.size());
}

// ---------------------------------------------------------------------------
// Reconstruction terms: L1 and SSIM.

inline double l1_loss(const Image& img, const Image& gt) {
    if (img.width != gt.width || img.height != gt.height || img.channels != gt.channels)
        throw DimensionMismatch("l1 loss shape mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i) sum += std::abs(img.data[i] - gt.data[i]);
    return sum / double(img.data.size());
}

inline double l1_loss_grad(const Image& img, const Image& gt, Image& d_img) {
    if (img.width != gt.width || img.height != gt.height || img.channels != gt.channels)
        throw DimensionMismatch("l1 loss shape mismatch");
    d_img = Image::zeros(img.width, img.height, img.channels);
    const double inv_n = 1.0 / double(img.data.size());
    double sum = 0.0;
    for (size_t i = 0; i < img.data.size(); ++i) {
        const double d = img.data[i] - gt.data[i];
        sum += std::abs(d);
        d_img.data[i] = (d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0));
    }
    return sum * inv_n;
}

namespace detail {

// Window statistics for the uniform (box) SSIM kernel, over valid windows
// only. Population variances.
struct SsimAccum {
    double value = 0.0;
    long windows = 0;
};

template <typename PerWindow>
void ssim_windows(const Image& x, const Image& y, int window, const PerWindow& fn) {
    const int half = window / 2;
    for (int c = 0; c < x.channels; ++c)
        for (int wy = half; wy < x.height - half; ++wy)
            for (int wx = half; wx < x.width - half; ++wx) fn(c, wx, wy);
}

}  // namespace detail

// Mean SSIM with a uniform window, valid (fully interior) windows only.
inline double ssim_mean(const Image& img, const Image& gt, const LossConfig& cfg) {
    if (img.width != gt.width || img.height != gt.height || img.channels != gt.channels)
        throw DimensionMismatch("ssim shape mismatch");
    cfg.validate();
    const int w = cfg.ssim_window;
    if (img.width < w || img.height < w)
        throw DimensionMismatch("image smaller than the ssim window");
    const int half = w / 2;
    const double n = double(w) * double(w);
    detail::SsimAccum acc;
    detail::ssim_windows(img, gt, w, [&](int c, int wx, int wy) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                const double a = img.at(wx + dx, wy + dy, c);
                const double b = gt.at(wx + dx, wy + dy, c);
                sx += a;
                sy += b;
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
            }
        const double mx = sx / n, my = sy / n;
        const double vx = sxx / n - mx * mx;
        const double vy = syy / n - my * my;
        const double cov = sxy / n - mx * my;
        const double s = ((2 * mx * my + cfg.ssim_c1) * (2 * cov + cfg.ssim_c2)) /
                         ((mx * mx + my * my + cfg.ssim_c1) * (vx + vy + cfg.ssim_c2));
        acc.value += s;
        ++acc.windows;
    });
    return acc.value / double(acc.windows);
}

inline double ssim_loss(const Image& img, const Image& gt, const LossConfig& cfg) {
    return 1.0 - ssim_mean(img, gt, cfg);
}

// Analytic gradient of ssim_loss w.r.t. `img`. Each pixel participates in
// every valid window containing it; the per-window derivative w.r.t. pixel a
// is affine in (a, b), so contributions accumulate directly.
inline double ssim_loss_grad(const Image& img, const Image& gt, const LossConfig& cfg,
                             Image& d_img) {
    if (img.width != gt.width || img.height != gt.height || img.channels != gt.channels)
        throw DimensionMismatch("ssim shape mismatch");
    cfg.validate();
    const int w = cfg.ssim_window;
    if (img.width < w || img.height < w)
        throw DimensionMismatch("image smaller than the ssim window");
    const int half = w / 2;
    const double n = double(w) * double(w);
    d_img = Image::zeros(img.width, img.height, img.channels);
    double total = 0.0;
    long windows = 0;
    detail::ssim_windows(img, gt, w, [&](int c, int wx, int wy) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                const double a = img.at(wx + dx, wy + dy, c);
                const double b = gt.at(wx + dx, wy + dy, c);
                sx += a;
                sy += b;
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
            }
        const double mx = sx / n, my = sy / n;
        const double vx = sxx / n - mx * mx;
        const double vy = syy / n - my * my;
        const double cov = sxy / n - mx * my;
        const double a1 = 2 * mx * my + cfg.ssim_c1;
        const double a2 = 2 * cov + cfg.ssim_c2;
        const double b1 = mx * mx + my * my + cfg.ssim_c1;
        const double b2 = vx + vy + cfg.ssim_c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        ++windows;
        // ds/dmx, ds/dvx, ds/dcov (my, vy are constants of img).
        const double ds_dmx = (2 * my * a2 * b1 * b2 - a1 * a2 * b2 * 2 * mx) / (b1 * b1 * b2 * b2);
        const double ds_dvx = -(a1 * a2) / (b1 * b2 * b2);
        const double ds_dcov = 2 * a1 / (b1 * b2);
        for (int dy = -half; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx) {
                const double a = img.at(wx + dx, wy + dy, c);
                const double b = gt.at(wx + dx, wy + dy, c);
                // dmx/da = 1/n; dvx/da = 2(a - mx)/n; dcov/da = (b - my)/n
                const double ds_da =
                    ds_dmx / n + ds_dvx * 2 * (a - mx) / n + ds_dcov * (b - my) / n;
                d_img.at(wx + dx, wy + dy, c) -= ds_da;  // loss = 1 - mean(s)
            }
    });
    const double inv_w = 1.0 / double(windows);
    for (double& v : d_img.data) v *= inv_w;
    return 1.0 - total * inv_w;
}

// ---------------------------------------------------------------------------
// Combined objective. Sub-losses arrive unweighted; each lambda is applied
// exactly once here.

struct LossParts {
    double l1 = 0.0;
    double ssim = 0.0;
    double lpips = 0.0;
    double cloth_lbs = 0.0;
    double sim = 0.0;
    double arap = 0.0;
    double mask = 0.0;
};

// Optional perceptual-metric plug-in: value plus gradient images. None ships
// with the repository; when absent the LPIPS term is zero.
using PerceptualMetric =
    std::function<double(const Image& img, const Image& gt, Image* d_img)>;

inline double total_loss(const LossParts& parts, const LossConfig& cfg) {
    return cfg.lambda_l1 * parts.l1 + cfg.lambda_ssim * parts.ssim +
           cfg.lambda_lpips * parts.lpips + cfg.lambda_cloth_lbs * parts.cloth_lbs +
           cfg.lambda_sim * parts.sim + cfg.lambda_arap * parts.arap +
           cfg.lambda_mask * parts.mask;
}

}  // namespace lgs
