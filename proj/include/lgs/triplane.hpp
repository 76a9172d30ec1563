#pragma once

#include "lgs/core.hpp"

namespace lgs {

// Axis-aligned box mapping world coordinates into [0,1]^3.
struct BBox {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();

    void validate() const {
        if (!((hi - lo).array() > 0.0).all())
            throw InvalidConfig("bounding box must have positive extent on all axes");
    }

    Vec3 normalize(const Vec3& p) const {
        return ((p - lo).array() / (hi - lo).array()).cwiseMax(0.0).cwiseMin(1.0);
    }
};

// Three node-centered 2D feature grids (XY, XZ, YZ) sharing resolution and
// channel count. Features at normalized coordinate i / (res - 1); bilinear
// samples from the three projections are concatenated in plane order.
class TriPlaneField {
public:
    enum Plane { XY = 0, XZ = 1, YZ = 2 };

    TriPlaneField() = default;
    TriPlaneField(int res, int channels, const BBox& bbox)
        : res_(res), channels_(channels), bbox_(bbox) {
        if (res < 2) throw InvalidConfig("triplane resolution must be >= 2");
        if (channels < 1) throw InvalidConfig("triplane channel count must be >= 1");
        bbox.validate();
        for (auto& plane : planes_) plane.assign(size_t(res) * size_t(res) * size_t(channels), 0.0);
    }

    static TriPlaneField random_init(int res, int channels, const BBox& bbox, Rng& rng,
                                     double scale = 1e-2) {
        TriPlaneField f(res, channels, bbox);
        for (auto& plane : f.planes_)
            for (double& v : plane) v = rng.uniform(-scale, scale);
        return f;
    }

    int res() const { return res_; }
    int channels() const { return channels_; }
    int feature_dim() const { return 3 * channels_; }
    const BBox& bbox() const { return bbox_; }

    std::vector<double>& plane(int p) { return planes_[size_t(p)]; }
    const std::vector<double>& plane(int p) const { return planes_[size_t(p)]; }

    double& at(int p, int row, int col, int c) {
        return planes_[size_t(p)][(size_t(row) * size_t(res_) + size_t(col)) * size_t(channels_) +
                                  size_t(c)];
    }
    double at(int p, int row, int col, int c) const {
        return planes_[size_t(p)][(size_t(row) * size_t(res_) + size_t(col)) * size_t(channels_) +
                                  size_t(c)];
    }

private:
    int res_ = 0;
    int channels_ = 0;
    BBox bbox_;
    std::array<std::vector<double>, 3> planes_;
};

namespace detail {

struct BilinearTap {
    int i0, i1;      // column nodes (first normalized axis)
    int j0, j1;      // row nodes (second normalized axis)
    double fx, fy;   // fractional weights toward i1 / j1
};

inline BilinearTap bilinear_tap(double u, double v, int res) {
    // u, v in [0,1]; node-centered grid with `res` nodes per axis.
    const double gx = u * (res - 1);
    const double gy = v * (res - 1);
    int i0 = int(std::floor(gx));
    int j0 = int(std::floor(gy));
    i0 = std::min(std::max(i0, 0), res - 2);
    j0 = std::min(std::max(j0, 0), res - 2);
    return {i0, i0 + 1, j0, j0 + 1, gx - i0, gy - j0};
}

inline Vec2 plane_uv(TriPlaneField::Plane p, const Vec3& n) {
    switch (p) {
        case TriPlaneField::XY: return {n.x(), n.y()};
        case TriPlaneField::XZ: return {n.x(), n.z()};
        default: return {n.y(), n.z()};
    }
}

}  // namespace detail

// Bilinear sample of all three planes at p, concatenated XY || XZ || YZ.
// Out-of-box queries clamp to the box surface.
inline VecX sample(const TriPlaneField& field, const Vec3& p) {
    if (!p.allFinite()) throw InvalidConfig("triplane query must be finite");
    const Vec3 n = field.bbox().normalize(p);
    const int c_count = field.channels();
    VecX out(field.feature_dim());
    for (int pl = 0; pl < 3; ++pl) {
        const Vec2 uv = detail::plane_uv(TriPlaneField::Plane(pl), n);
        const auto t = detail::bilinear_tap(uv.x(), uv.y(), field.res());
        const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
        const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
        for (int c = 0; c < c_count; ++c) {
            out[pl * c_count + c] = w00 * field.at(pl, t.j0, t.i0, c) +
                                    w10 * field.at(pl, t.j0, t.i1, c) +
                                    w01 * field.at(pl, t.j1, t.i0, c) +
                                    w11 * field.at(pl, t.j1, t.i1, c);
        }
    }
    return out;
}

// Gradient buffers mirroring a field's plane layout.
struct TriPlaneGrad {
    std::array<std::vector<double>, 3> planes;

    explicit TriPlaneGrad(const TriPlaneField& field) {
        for (auto& p : planes)
            p.assign(size_t(field.res()) * size_t(field.res()) * size_t(field.channels()), 0.0);
    }

    double& at(const TriPlaneField& f, int p, int row, int col, int c) {
        return planes[size_t(p)][(size_t(row) * size_t(f.res()) + size_t(col)) * size_t(f.channels()) +
                                 size_t(c)];
    }
};

// Scatter of bilinear weights times the upstream gradient onto the (up to 12)
// grid nodes touched by sample(field, p).
inline void sample_backward(const TriPlaneField& field, const Vec3& p, const VecX& upstream,
                            TriPlaneGrad& grad) {
    if (upstream.size() != field.feature_dim())
        throw DimensionMismatch("upstream gradient length does not match feature dim");
    const Vec3 n = field.bbox().normalize(p);
    const int c_count = field.channels();
    for (int pl = 0; pl < 3; ++pl) {
        const Vec2 uv = detail::plane_uv(TriPlaneField::Plane(pl), n);
        const auto t = detail::bilinear_tap(uv.x(), uv.y(), field.res());
        const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
        const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
        for (int c = 0; c < c_count; ++c) {
            const double g = upstream[pl * c_count + c];
            if (g == 0.0) continue;
            grad.at(field, pl, t.j0, t.i0, c) += w00 * g;
            grad.at(field, pl, t.j0, t.i1, c) += w10 * g;
            grad.at(field, pl, t.j1, t.i0, c) += w01 * g;
            grad.at(field, pl, t.j1, t.i1, c) += w11 * g;
        }
    }
}

// Separate canonical-space fields for the body and the (shared upper/lower
// garment) cloth layer.
struct AvatarField {
    TriPlaneField body_field;
    TriPlaneField cloth_field;
};

}  // namespace lgs
