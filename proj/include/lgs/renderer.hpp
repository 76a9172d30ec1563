#pragma once

#include "lgs/camera.hpp"
#include "lgs/core.hpp"
#include "lgs/gaussians.hpp"
#include "lgs/image.hpp"

#include <algorithm>
#include <numeric>

namespace lgs {

// Compositing thresholds, following common splatting practice.
constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kTransmittanceStop = 1e-4;
constexpr double kCovDilation = 0.3;  // px^2, added to the cov2d diagonal
constexpr int kTileSize = 16;

// A splat in world space, ready for projection. cov_factor is any matrix F
// with Sigma = F F^T; for an undeformed primitive F = R diag(s).
struct WorldSplat {
    Vec3 center = Vec3::Zero();
    Mat3 cov_factor = Mat3::Identity();
    double opacity = 0.0;
    ShCoeffs sh = ShCoeffs::Zero();
};

inline WorldSplat world_splat(const GaussianPrimitive& p) {
    WorldSplat s;
    s.center = p.center;
    s.cov_factor = p.rotation_matrix() * p.scale().asDiagonal();
    s.opacity = p.opacity();
    s.sh = p.sh_coeffs;
    return s;
}

struct WorldSplatGrad {
    Vec3 d_center = Vec3::Zero();
    Mat3 d_cov_factor = Mat3::Zero();
    double d_opacity = 0.0;
    ShCoeffs d_sh = ShCoeffs::Zero();
};

// Screen-space splat. cov2d is stored as (xx, xy, yy); its eigenvalues are
// at least kCovDilation by construction.
struct Splat2D {
    Vec2 mean2d = Vec2::Zero();  // pixels
    double cov_xx = 0, cov_xy = 0, cov_yy = 0;
    double depth = 0;  // camera-space z, meters
    Vec3 color = Vec3::Zero();
    double alpha_base = 0.0;
};

struct Splat2DGrad {
    Vec2 d_mean2d = Vec2::Zero();
    double d_cov_xx = 0, d_cov_xy = 0, d_cov_yy = 0;
    Vec3 d_color = Vec3::Zero();
    double d_alpha_base = 0.0;
};

// ---------------------------------------------------------------------------
// Perspective projection (EWA-style local affine approximation).

inline std::optional<Splat2D> project(const Vec3& center_world, const Mat3& cov_factor,
                                      const Camera& cam) {
    const Vec3 mu_c = cam.world_to_camera.apply(center_world);
    if (mu_c.z() <= cam.near) return std::nullopt;
    const double x = mu_c.x(), y = mu_c.y(), z = mu_c.z();

    Splat2D s;
    s.depth = z;
    s.mean2d = {cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy};

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0, -cam.fx * x / (z * z), 0, cam.fy / z, -cam.fy * y / (z * z);
    const Eigen::Matrix<double, 2, 3> t = jac * cam.world_to_camera.rotation;
    const Mat3 sigma3d = cov_factor * cov_factor.transpose();
    const Mat2 cov = t * sigma3d * t.transpose();
    s.cov_xx = cov(0, 0) + kCovDilation;
    s.cov_xy = 0.5 * (cov(0, 1) + cov(1, 0));
    s.cov_yy = cov(1, 1) + kCovDilation;
    return s;
}

// Convenience overload for an undeformed primitive world state.
inline std::optional<Splat2D> project(const Vec3& center_world, const Mat3& rotation,
                                      const Vec3& scale, const Camera& cam) {
    return project(center_world, Mat3(rotation * scale.asDiagonal()), cam);
}

// Reverse of project. Adds into d_center / d_cov_factor. The depth channel
// feeds only the (unsupervised) expected-depth map, so no depth upstream.
inline void project_backward(const Vec3& center_world, const Mat3& cov_factor, const Camera& cam,
                             const Splat2DGrad& up, Vec3& d_center, Mat3& d_cov_factor) {
    const Mat3& w = cam.world_to_camera.rotation;
    const Vec3 mu_c = cam.world_to_camera.apply(center_world);
    const double x = mu_c.x(), y = mu_c.y(), z = mu_c.z();

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0, -cam.fx * x / (z * z), 0, cam.fy / z, -cam.fy * y / (z * z);
    const Eigen::Matrix<double, 2, 3> t = jac * w;
    const Mat3 sigma3d = cov_factor * cov_factor.transpose();

    // mean2d path.
    Vec3 d_mu_c(up.d_mean2d.x() * cam.fx / z, up.d_mean2d.y() * cam.fy / z,
                -up.d_mean2d.x() * cam.fx * x / (z * z) - up.d_mean2d.y() * cam.fy * y / (z * z));

    // cov2d path: cov = T Sigma T^T (+ const), with storage grad (xx, xy, yy)
    // lifted to the symmetric matrix G.
    Mat2 g;
    g << up.d_cov_xx, 0.5 * up.d_cov_xy, 0.5 * up.d_cov_xy, up.d_cov_yy;
    const Mat3 d_sigma3d = t.transpose() * g * t;
    d_cov_factor += 2.0 * d_sigma3d * cov_factor;
    const Eigen::Matrix<double, 2, 3> d_t = 2.0 * g * t * sigma3d;
    const Eigen::Matrix<double, 2, 3> d_jac = d_t * w.transpose();

    // J depends on mu_c.
    d_mu_c.x() += d_jac(0, 2) * (-cam.fx / (z * z));
    d_mu_c.y() += d_jac(1, 2) * (-cam.fy / (z * z));
    d_mu_c.z() += d_jac(0, 0) * (-cam.fx / (z * z)) + d_jac(1, 1) * (-cam.fy / (z * z)) +
                  d_jac(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
                  d_jac(1, 2) * (2.0 * cam.fy * y / (z * z * z));

    d_center += w.transpose() * d_mu_c;
}

// ---------------------------------------------------------------------------
// Rasterization.

struct RenderOutput {
    Image rgb;    // H x W x 3
    Image alpha;  // H x W x 1
    Image depth;  // H x W x 1, expected depth in meters
    // Contribution records: per pixel, the depth-ordered splat indices that
    // were composited. Alphas are recomputed exactly in the backward pass.
    std::vector<std::uint32_t> contribs;
    std::vector<std::uint32_t> pixel_offset;  // H*W + 1 prefix offsets into contribs
};

namespace detail {

// Conservative pixel-space support radius: outside it alpha < kAlphaSkip for
// every pixel, so tile binning and the per-pixel skip test agree bit-exactly.
inline double support_radius(const Splat2D& s) {
    const double o = std::min(s.alpha_base, kAlphaClamp);
    if (o < kAlphaSkip) return -1.0;
    const double q_max = 2.0 * std::log(o / kAlphaSkip);
    const double half_trace = 0.5 * (s.cov_xx + s.cov_yy);
    const double half_diff = 0.5 * (s.cov_xx - s.cov_yy);
    const double lambda_max = half_trace + std::sqrt(half_diff * half_diff + s.cov_xy * s.cov_xy);
    return std::sqrt(std::max(q_max, 0.0) * lambda_max) * (1.0 + 1e-9) + 1e-9;
}

struct SortedSplats {
    std::vector<std::uint32_t> order;  // indices into the input array, front to back
};

inline SortedSplats depth_sort(const std::vector<Splat2D>& splats) {
    SortedSplats s;
    s.order.resize(splats.size());
    std::iota(s.order.begin(), s.order.end(), 0u);
    std::sort(s.order.begin(), s.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
        return a < b;
    });
    return s;
}

struct TileBins {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> bins;  // splat indices, front to back
};

inline TileBins bin_tiles(const std::vector<Splat2D>& splats, const SortedSplats& sorted, int width,
                          int height) {
    TileBins tb;
    tb.tiles_x = (width + kTileSize - 1) / kTileSize;
    tb.tiles_y = (height + kTileSize - 1) / kTileSize;
    tb.bins.resize(size_t(tb.tiles_x) * size_t(tb.tiles_y));
    for (const std::uint32_t idx : sorted.order) {
        const Splat2D& s = splats[idx];
        const double r = support_radius(s);
        if (r < 0.0) continue;
        // Pixel centers are at integer + 0.5.
        const int px0 = std::max(0, int(std::ceil(s.mean2d.x() - r - 0.5)));
        const int px1 = std::min(width - 1, int(std::floor(s.mean2d.x() + r - 0.5)));
        const int py0 = std::max(0, int(std::ceil(s.mean2d.y() - r - 0.5)));
        const int py1 = std::min(height - 1, int(std::floor(s.mean2d.y() + r - 0.5)));
        if (px0 > px1 || py0 > py1) continue;
        for (int ty = py0 / kTileSize; ty <= py1 / kTileSize; ++ty)
            for (int tx = px0 / kTileSize; tx <= px1 / kTileSize; ++tx)
                tb.bins[size_t(ty) * size_t(tb.tiles_x) + size_t(tx)].push_back(idx);
    }
    return tb;
}

// alpha at a pixel center, or a negative value when below the skip threshold.
inline double splat_alpha(const Splat2D& s, double px, double py) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    const double det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
    const double q = (s.cov_yy * dx * dx - 2.0 * s.cov_xy * dx * dy + s.cov_xx * dy * dy) / det;
    const double alpha = std::min(kAlphaClamp, s.alpha_base * std::exp(-0.5 * q));
    return alpha < kAlphaSkip ? -1.0 : alpha;
}

}  // namespace detail

// Depth-sorted front-to-back alpha compositing over 16x16 pixel tiles.
// Stores per-pixel contribution records for the analytic backward pass.
inline RenderOutput rasterize(const std::vector<Splat2D>& splats, const Vec3& background,
                              int width, int height) {
    for (const auto& s : splats)
        if (!s.mean2d.allFinite() || !std::isfinite(s.depth) || !std::isfinite(s.alpha_base))
            throw NumericalFailure("rasterize: non-finite splat");

    RenderOutput out;
    out.rgb = Image::zeros(width, height, 3);
    out.alpha = Image::zeros(width, height, 1);
    out.depth = Image::zeros(width, height, 1);

    const auto sorted = detail::depth_sort(splats);
    const auto bins = detail::bin_tiles(splats, sorted, width, height);

    const size_t n_tiles = bins.bins.size();
    std::vector<std::vector<std::uint32_t>> tile_contribs(n_tiles);
    std::vector<std::vector<std::uint32_t>> tile_counts(n_tiles);

    parallel_for(std::int64_t(n_tiles), [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t tile = begin; tile < end; ++tile) {
            const int tx = int(tile % bins.tiles_x), ty = int(tile / bins.tiles_x);
            const int x0 = tx * kTileSize, y0 = ty * kTileSize;
            const int x1 = std::min(width, x0 + kTileSize), y1 = std::min(height, y0 + kTileSize);
            const auto& bin = bins.bins[size_t(tile)];
            auto& contribs = tile_contribs[size_t(tile)];
            auto& counts = tile_counts[size_t(tile)];
            counts.reserve(size_t((x1 - x0) * (y1 - y0)));
            for (int py = y0; py < y1; ++py) {
                for (int px = x0; px < x1; ++px) {
                    const double sx = px + 0.5, sy = py + 0.5;
                    double transmittance = 1.0;
                    Vec3 color = Vec3::Zero();
                    double depth_acc = 0.0;
                    std::uint32_t count = 0;
                    for (const std::uint32_t idx : bin) {
                        const Splat2D& s = splats[idx];
                        const double alpha = detail::splat_alpha(s, sx, sy);
                        if (alpha < 0.0) continue;
                        const double w = transmittance * alpha;
                        color += w * s.color;
                        depth_acc += w * s.depth;
                        transmittance *= (1.0 - alpha);
                        contribs.push_back(idx);
                        ++count;
                        if (transmittance < kTransmittanceStop) break;
                    }
                    counts.push_back(count);
                    out.rgb.at(px, py, 0) = color.x() + transmittance * background.x();
                    out.rgb.at(px, py, 1) = color.y() + transmittance * background.y();
                    out.rgb.at(px, py, 2) = color.z() + transmittance * background.z();
                    const double a = 1.0 - transmittance;
                    out.alpha.at(px, py, 0) = a;
                    out.depth.at(px, py, 0) = depth_acc / std::max(a, 1e-12);
                }
            }
        }
    });

    // Stitch per-tile records into flat image-indexed arrays.
    out.pixel_offset.assign(size_t(width) * size_t(height) + 1, 0);
    for (size_t tile = 0; tile < n_tiles; ++tile) {
        const int tx = int(tile % size_t(bins.tiles_x)), ty = int(tile / size_t(bins.tiles_x));
        const int x0 = tx * kTileSize, y0 = ty * kTileSize;
        const int x1 = std::min(width, x0 + kTileSize), y1 = std::min(height, y0 + kTileSize);
        size_t k = 0;
        for (int py = y0; py < y1; ++py)
            for (int px = x0; px < x1; ++px)
                out.pixel_offset[size_t(py) * size_t(width) + size_t(px) + 1] =
                    tile_counts[tile][k++];
    }
    for (size_t i = 1; i < out.pixel_offset.size(); ++i) out.pixel_offset[i] += out.pixel_offset[i - 1];
    out.contribs.resize(out.pixel_offset.back());
    for (size_t tile = 0; tile < n_tiles; ++tile) {
        const int tx = int(tile % size_t(bins.tiles_x)), ty = int(tile / size_t(bins.tiles_x));
        const int x0 = tx * kTileSize, y0 = ty * kTileSize;
        const int x1 = std::min(width, x0 + kTileSize), y1 = std::min(height, y0 + kTileSize);
        size_t src = 0, k = 0;
        for (int py = y0; py < y1; ++py)
            for (int px = x0; px < x1; ++px) {
                const size_t pix = size_t(py) * size_t(width) + size_t(px);
                const std::uint32_t count = tile_counts[tile][k++];
                std::copy_n(tile_contribs[tile].begin() + long(src), count,
                            out.contribs.begin() + out.pixel_offset[pix]);
                src += count;
            }
    }
    return out;
}

// Reference rasterizer: every pixel tests every splat (same per-pixel math,
// no tiling, no records). Oracle for the tiled path.
inline Image rasterize_reference(const std::vector<Splat2D>& splats, const Vec3& background,
                                 int width, int height) {
    const auto sorted = detail::depth_sort(splats);
    Image img = Image::zeros(width, height, 3);
    for (int py = 0; py < height; ++py)
        for (int px = 0; px < width; ++px) {
            const double sx = px + 0.5, sy = py + 0.5;
            double transmittance = 1.0;
            Vec3 color = Vec3::Zero();
            for (const std::uint32_t idx : sorted.order) {
                const double alpha = detail::splat_alpha(splats[idx], sx, sy);
                if (alpha < 0.0) continue;
                color += transmittance * alpha * splats[idx].color;
                transmittance *= (1.0 - alpha);
                if (transmittance < kTransmittanceStop) break;
            }
            for (int c = 0; c < 3; ++c) img.at(px, py, c) = color[c] + transmittance * background[c];
        }
    return img;
}

// Exact reverse of the compositing recurrence. `d_rgb` is dL/d(out.rgb);
// gradients arrive per splat. Alphas clamped at kAlphaClamp in the forward
// pass are treated as constants (zero gradient), matching the kink.
inline std::vector<Splat2DGrad> rasterize_backward(const std::vector<Splat2D>& splats,
                                                   const RenderOutput& out, const Vec3& background,
                                                   const Image& d_rgb) {
    const int width = out.rgb.width, height = out.rgb.height;
    const std::int64_t n_pixels = std::int64_t(width) * height;
    const int workers = std::max(1, std::min(global_thread_count(), int(n_pixels)));
    std::vector<std::vector<Splat2DGrad>> partial(
        size_t(workers), std::vector<Splat2DGrad>(splats.size()));

    parallel_for(n_pixels, [&](std::int64_t begin, std::int64_t end, int worker) {
        auto& grads = partial[size_t(worker)];
        std::vector<double> alphas;
        std::vector<double> trans;
        for (std::int64_t pix = begin; pix < end; ++pix) {
            const std::uint32_t c0 = out.pixel_offset[size_t(pix)];
            const std::uint32_t c1 = out.pixel_offset[size_t(pix) + 1];
            if (c0 == c1) continue;
            const int px = int(pix % width), py = int(pix / width);
            const Vec3 up(d_rgb.at(px, py, 0), d_rgb.at(px, py, 1), d_rgb.at(px, py, 2));
            if (up.isZero(0.0)) continue;
            const double sx = px + 0.5, sy = py + 0.5;

            const std::uint32_t m = c1 - c0;
            alphas.resize(m);
            trans.resize(m + 1);
            trans[0] = 1.0;
            for (std::uint32_t i = 0; i < m; ++i) {
                alphas[i] = detail::splat_alpha(splats[out.contribs[c0 + i]], sx, sy);
                trans[i + 1] = trans[i] * (1.0 - alphas[i]);
            }
            Vec3 suffix = trans[m] * background;
            for (std::uint32_t i = m; i-- > 0;) {
                const std::uint32_t idx = out.contribs[c0 + i];
                const Splat2D& s = splats[idx];
                Splat2DGrad& g = grads[idx];
                const double alpha = alphas[i];
                const double w = trans[i] * alpha;
                g.d_color += w * up;
                const double d_alpha = up.dot(trans[i] * s.color - suffix / (1.0 - alpha));
                suffix += w * s.color;
                // alpha = min(clamp, base * exp(-q/2))
                const double dx = sx - s.mean2d.x();
                const double dy = sy - s.mean2d.y();
                const double det = s.cov_xx * s.cov_yy - s.cov_xy * s.cov_xy;
                const double gauss = std::exp(
                    -0.5 * (s.cov_yy * dx * dx - 2.0 * s.cov_xy * dx * dy + s.cov_xx * dy * dy) /
                    det);
                if (s.alpha_base * gauss >= kAlphaClamp) continue;
                g.d_alpha_base += gauss * d_alpha;
                const double d_gauss = s.alpha_base * d_alpha;
                const double dq = -0.5 * gauss * d_gauss;
                // q = d^T P d with P = cov2d^{-1}
                const double p_xx = s.cov_yy / det, p_xy = -s.cov_xy / det, p_yy = s.cov_xx / det;
                const double qx = 2.0 * (p_xx * dx + p_xy * dy);
                const double qy = 2.0 * (p_xy * dx + p_yy * dy);
                g.d_mean2d.x() -= qx * dq;
                g.d_mean2d.y() -= qy * dq;
                // dq/dP = d d^T ; dP = -P dSigma P
                const double gp_xx = dq * dx * dx, gp_xy = dq * dx * dy, gp_yy = dq * dy * dy;
                // M = -P G P with G = [[gp_xx, gp_xy],[gp_xy, gp_yy]]
                const double a0 = p_xx * gp_xx + p_xy * gp_xy, a1 = p_xx * gp_xy + p_xy * gp_yy;
                const double b0 = p_xy * gp_xx + p_yy * gp_xy, b1 = p_xy * gp_xy + p_yy * gp_yy;
                const double m00 = -(a0 * p_xx + a1 * p_xy);
                const double m01 = -(a0 * p_xy + a1 * p_yy);
                const double m10 = -(b0 * p_xx + b1 * p_xy);
                const double m11 = -(b0 * p_xy + b1 * p_yy);
                g.d_cov_xx += m00;
                g.d_cov_xy += m01 + m10;
                g.d_cov_yy += m11;
            }
        }
    }, workers);

    std::vector<Splat2DGrad> total(splats.size());
    for (int w = 0; w < workers; ++w)
        for (size_t i = 0; i < splats.size(); ++i) {
            total[i].d_mean2d += partial[size_t(w)][i].d_mean2d;
            total[i].d_cov_xx += partial[size_t(w)][i].d_cov_xx;
            total[i].d_cov_xy += partial[size_t(w)][i].d_cov_xy;
            total[i].d_cov_yy += partial[size_t(w)][i].d_cov_yy;
            total[i].d_color += partial[size_t(w)][i].d_color;
            total[i].d_alpha_base += partial[size_t(w)][i].d_alpha_base;
        }
    return total;
}

// ---------------------------------------------------------------------------
// Shaded render passes over world splats.

struct RenderPass {
    RenderOutput out;
    std::vector<Splat2D> screen;    // surviving projected splats
    std::vector<std::uint32_t> source;  // index into the world-splat input
    bool shaded = true;
};

// Projects, shades (SH evaluated toward the camera center) and rasterizes.
inline RenderPass render_splats(const std::vector<WorldSplat>& splats, const Camera& cam,
                                const Vec3& background) {
    cam.validate();
    RenderPass pass;
    const Vec3 cam_center = cam.center();
    for (size_t i = 0; i < splats.size(); ++i) {
        auto projected = project(splats[i].center, splats[i].cov_factor, cam);
        if (!projected) continue;
        projected->alpha_base = splats[i].opacity;
        projected->color = eval_sh(splats[i].sh, (splats[i].center - cam_center).normalized());
        pass.screen.push_back(*projected);
        pass.source.push_back(std::uint32_t(i));
    }
    pass.out = rasterize(pass.screen, background, cam.width, cam.height);
    return pass;
}

// Fixed-color variant (used by the matte pass); `colors` pairs with `splats`.
inline RenderPass render_splats_flat(const std::vector<WorldSplat>& splats,
                                     const std::vector<Vec3>& colors, const Camera& cam,
                                     const Vec3& background) {
    cam.validate();
    RenderPass pass;
    pass.shaded = false;
    for (size_t i = 0; i < splats.size(); ++i) {
        auto projected = project(splats[i].center, splats[i].cov_factor, cam);
        if (!projected) continue;
        projected->alpha_base = splats[i].opacity;
        projected->color = colors[i];
        pass.screen.push_back(*projected);
        pass.source.push_back(std::uint32_t(i));
    }
    pass.out = rasterize(pass.screen, background, cam.width, cam.height);
    return pass;
}

// Backward through rasterize + shading + projection. Accumulates into
// `grads` (size of the world-splat input). Flat passes route no color grads.
inline void render_splats_backward(const std::vector<WorldSplat>& splats, const Camera& cam,
                                   const RenderPass& pass, const Vec3& background,
                                   const Image& d_rgb, std::vector<WorldSplatGrad>& grads) {
    const auto screen_grads = rasterize_backward(pass.screen, pass.out, background, d_rgb);
    const Vec3 cam_center = cam.center();
    for (size_t k = 0; k < pass.screen.size(); ++k) {
        const std::uint32_t i = pass.source[k];
        const WorldSplat& s = splats[i];
        WorldSplatGrad& g = grads[i];
        const Splat2DGrad& up = screen_grads[k];
        // opacity feeds alpha_base directly.
        g.d_opacity += up.d_alpha_base;
        project_backward(s.center, s.cov_factor, cam, up, g.d_center, g.d_cov_factor);
        if (pass.shaded) {
            const Vec3 to_splat = s.center - cam_center;
            const double dist = to_splat.norm();
            const Vec3 dir = to_splat / dist;
            const Vec3 d_dir = eval_sh_backward(s.sh, dir, up.d_color, g.d_sh);
            g.d_center += (d_dir - dir * dir.dot(d_dir)) / dist;
        }
    }
}

// ---------------------------------------------------------------------------
// Multi-pass layer compositing.

struct Matte {
    Image values;  // H x W x 1 in [0,1]
};

// Pass 1: body and scene rendered jointly.
inline RenderPass render_base(const std::vector<WorldSplat>& body,
                              const std::vector<WorldSplat>& scene, const Camera& cam,
                              const Vec3& background) {
    std::vector<WorldSplat> merged;
    merged.reserve(body.size() + scene.size());
    merged.insert(merged.end(), body.begin(), body.end());
    merged.insert(merged.end(), scene.begin(), scene.end());
    return render_splats(merged, cam, background);
}

// Pass 2: cloth only, black background.
inline RenderPass render_cloth(const std::vector<WorldSplat>& cloth, const Camera& cam,
                               const Vec3& background = Vec3::Zero()) {
    return render_splats(cloth, cam, background);
}

// Pass 3: depth matte. Cloth splats render white, scene splats black over a
// black background; depth ordering resolves occlusion. Body splats can be
// opted in (off by default, matching the layer enumeration of the method).
inline RenderPass render_matte_pass(const std::vector<WorldSplat>& cloth,
                                    const std::vector<WorldSplat>& scene, const Camera& cam,
                                    const std::vector<WorldSplat>* body = nullptr) {
    std::vector<WorldSplat> merged;
    std::vector<Vec3> colors;
    merged.reserve(cloth.size() + scene.size() + (body ? body->size() : 0));
    for (const auto& s : cloth) {
        merged.push_back(s);
        colors.push_back(Vec3::Ones());
    }
    for (const auto& s : scene) {
        merged.push_back(s);
        colors.push_back(Vec3::Zero());
    }
    if (body)
        for (const auto& s : *body) {
            merged.push_back(s);
            colors.push_back(Vec3::Zero());
        }
    return render_splats_flat(merged, colors, cam, Vec3::Zero());
}

inline Matte matte_from_pass(const RenderPass& pass) {
    Matte m;
    m.values = Image::zeros(pass.out.rgb.width, pass.out.rgb.height, 1);
    for (int y = 0; y < pass.out.rgb.height; ++y)
        for (int x = 0; x < pass.out.rgb.width; ++x) m.values.at(x, y, 0) = pass.out.rgb.at(x, y, 0);
    return m;
}

// I_final = I_cloth * V + I_base * (1 - V), per pixel per channel.
inline Image composite_final(const Image& cloth, const Image& base, const Matte& matte) {
    if (!cloth.same_shape(base) || matte.values.width != cloth.width ||
        matte.values.height != cloth.height)
        throw DimensionMismatch("composite_final shape mismatch");
    Image out = Image::zeros(cloth.width, cloth.height, cloth.channels);
    for (int y = 0; y < cloth.height; ++y)
        for (int x = 0; x < cloth.width; ++x) {
            const double v = matte.values.at(x, y, 0);
            for (int c = 0; c < cloth.channels; ++c)
                out.at(x, y, c) = cloth.at(x, y, c) * v + base.at(x, y, c) * (1.0 - v);
        }
    return out;
}

inline void composite_final_backward(const Image& cloth, const Image& base, const Matte& matte,
                                     const Image& d_out, Image& d_cloth, Image& d_base,
                                     Image& d_matte) {
    d_cloth = Image::zeros(cloth.width, cloth.height, cloth.channels);
    d_base = Image::zeros(base.width, base.height, base.channels);
    d_matte = Image::zeros(matte.values.width, matte.values.height, 1);
    for (int y = 0; y < cloth.height; ++y)
        for (int x = 0; x < cloth.width; ++x) {
            const double v = matte.values.at(x, y, 0);
            double dv = 0.0;
            for (int c = 0; c < cloth.channels; ++c) {
                const double up = d_out.at(x, y, c);
                d_cloth.at(x, y, c) = up * v;
                d_base.at(x, y, c) = up * (1.0 - v);
                dv += up * (cloth.at(x, y, c) - base.at(x, y, c));
            }
            d_matte.at(x, y, 0) = dv;
        }
}

}  // namespace lgs
