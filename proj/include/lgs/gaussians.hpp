#pragma once

#include "lgs/core.hpp"
#include "lgs/mesh.hpp"

#include <cstring>
#include <fstream>
#include <optional>

namespace lgs {

// Real spherical harmonics, degree 3, with the sign/constant conventions of
// splatting renderers. Color is clamp(sum + 0.5, 0, 1).
namespace sh {

constexpr int kCoeffs = 16;
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

// Basis values at a unit direction, ordered (0,0), (1,-1), (1,0), (1,1),
// (2,-2)..(2,2), (3,-3)..(3,3).
inline void basis(const Vec3& d, double out[kCoeffs]) {
    const double x = d.x(), y = d.y(), z = d.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    out[0] = kC0;
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    out[9] = kC3[0] * y * (3 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4 * zz - xx - yy);
    out[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    out[13] = kC3[4] * x * (4 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3 * yy);
}

// Jacobian of each basis value w.r.t. the (unnormalized-direction) components;
// the caller chains through direction normalization.
inline void basis_jacobian(const Vec3& d, Vec3 out[kCoeffs]) {
    const double x = d.x(), y = d.y(), z = d.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    out[0] = Vec3::Zero();
    out[1] = {0, -kC1, 0};
    out[2] = {0, 0, kC1};
    out[3] = {-kC1, 0, 0};
    out[4] = {kC2[0] * y, kC2[0] * x, 0};
    out[5] = {0, kC2[1] * z, kC2[1] * y};
    out[6] = {kC2[2] * -2 * x, kC2[2] * -2 * y, kC2[2] * 4 * z};
    out[7] = {kC2[3] * z, 0, kC2[3] * x};
    out[8] = {kC2[4] * 2 * x, kC2[4] * -2 * y, 0};
    out[9] = {kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0};
    out[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
    out[11] = {kC3[2] * -2 * x * y, kC3[2] * (4 * zz - xx - 3 * yy), kC3[2] * 8 * y * z};
    out[12] = {kC3[3] * -6 * x * z, kC3[3] * -6 * y * z, kC3[3] * (6 * zz - 3 * xx - 3 * yy)};
    out[13] = {kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * -2 * x * y, kC3[4] * 8 * x * z};
    out[14] = {kC3[5] * 2 * x * z, kC3[5] * -2 * y * z, kC3[5] * (xx - yy)};
    out[15] = {kC3[6] * (3 * xx - 3 * yy), kC3[6] * -6 * x * y, 0};
}

}  // namespace sh

using ShCoeffs = Eigen::Matrix<double, sh::kCoeffs, 3>;

// View-dependent color from SH coefficients. `view_dir` must be unit length.
inline Vec3 eval_sh(const ShCoeffs& coeffs, const Vec3& view_dir) {
    double y[sh::kCoeffs];
    sh::basis(view_dir, y);
    Vec3 rgb = Vec3::Constant(0.5);
    for (int i = 0; i < sh::kCoeffs; ++i) rgb += y[i] * coeffs.row(i).transpose();
    return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

// Backward of eval_sh. Accumulates dL/dcoeffs and returns dL/dview_dir
// (the gradient w.r.t. the *unit* direction; normalization is chained by the
// caller). Channels clamped in the forward pass contribute no gradient.
inline Vec3 eval_sh_backward(const ShCoeffs& coeffs, const Vec3& view_dir, const Vec3& d_rgb,
                             ShCoeffs& d_coeffs) {
    double y[sh::kCoeffs];
    Vec3 jac[sh::kCoeffs];
    sh::basis(view_dir, y);
    sh::basis_jacobian(view_dir, jac);
    Vec3 raw = Vec3::Constant(0.5);
    for (int i = 0; i < sh::kCoeffs; ++i) raw += y[i] * coeffs.row(i).transpose();
    Vec3 gate;
    for (int c = 0; c < 3; ++c) gate[c] = (raw[c] > 0.0 && raw[c] < 1.0) ? d_rgb[c] : 0.0;
    Vec3 d_dir = Vec3::Zero();
    for (int i = 0; i < sh::kCoeffs; ++i) {
        d_coeffs.row(i) += y[i] * gate.transpose();
        d_dir += jac[i] * gate.dot(coeffs.row(i).transpose());
    }
    return d_dir;
}

// ---------------------------------------------------------------------------

enum class LayerTag : std::uint8_t { Body = 0, Cloth = 1, Scene = 2 };

inline const char* to_string(LayerTag tag) {
    switch (tag) {
        case LayerTag::Body: return "body";
        case LayerTag::Cloth: return "cloth";
        case LayerTag::Scene: return "scene";
    }
    return "?";
}

// One anisotropic splat in canonical space.
struct GaussianPrimitive {
    Vec3 center = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();  // log-meters per local axis
    double opacity_logit = 0.0;
    ShCoeffs sh_coeffs = ShCoeffs::Zero();

    const Vec4& rotation() const { return rotation_; }
    Mat3 rotation_matrix() const { return quat_to_matrix(rotation_); }
    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 scale() const { return log_scale.array().exp(); }

    // Renormalize-on-write keeps the unit-norm invariant regardless of what
    // the optimizer produced. Already-unit inputs are stored verbatim so
    // serialization round trips are byte-stable.
    void set_rotation(const Vec4& q) {
        const double n2 = q.squaredNorm();
        if (!(n2 > 0.0) || !std::isfinite(n2)) throw NumericalFailure("degenerate quaternion");
        rotation_ = std::abs(n2 - 1.0) < 1e-12 ? q : Vec4(q / std::sqrt(n2));
    }

private:
    Vec4 rotation_ = {1.0, 0.0, 0.0, 0.0};  // (w, x, y, z), unit norm
};

// A tagged collection of primitives. Body and Cloth layers carry a
// per-primitive row index into their skinning-weight matrix.
struct GaussianLayer {
    LayerTag tag = LayerTag::Scene;
    std::vector<GaussianPrimitive> primitives;
    std::optional<std::vector<int>> skin_binding;

    size_t size() const { return primitives.size(); }

    void validate(int weight_rows = -1) const {
        const bool skinned = tag != LayerTag::Scene;
        if (skinned != skin_binding.has_value())
            throw InvalidConfig("skin binding must be present iff layer is body or cloth");
        if (skin_binding) {
            if (skin_binding->size() != primitives.size())
                throw InvalidConfig("skin binding size mismatch");
            for (int idx : *skin_binding)
                if (idx < 0 || (weight_rows >= 0 && idx >= weight_rows))
                    throw InvalidConfig("skin binding index out of range");
        }
    }
};

// ---------------------------------------------------------------------------
// Mesh-based initialization: one primitive per vertex, oriented to the vertex
// normal, sized from incident edge lengths, flat along the normal.

inline GaussianLayer init_from_mesh(const TriMesh& mesh, LayerTag tag) {
    if (mesh.vertices.empty()) throw InvalidMesh("cannot initialize from an empty mesh");
    mesh.validate();
    const size_t n = mesh.vertices.size();

    std::vector<double> edge_sum(n, 0.0);
    std::vector<int> edge_count(n, 0);
    for (const auto& e : mesh.edges()) {
        const double len = (mesh.vertices[size_t(e[0])] - mesh.vertices[size_t(e[1])]).norm();
        edge_sum[size_t(e[0])] += len;
        edge_sum[size_t(e[1])] += len;
        ++edge_count[size_t(e[0])];
        ++edge_count[size_t(e[1])];
    }

    std::vector<Vec3> normals;
    if (mesh.has_normals()) {
        normals = mesh.normals;
    } else {
        // Area-weighted face normals.
        normals.assign(n, Vec3::Zero());
        for (const auto& f : mesh.faces) {
            const Vec3 fn = (mesh.vertices[size_t(f[1])] - mesh.vertices[size_t(f[0])])
                                .cross(mesh.vertices[size_t(f[2])] - mesh.vertices[size_t(f[0])]);
            for (int idx : f) normals[size_t(idx)] += fn;
        }
    }

    GaussianLayer layer;
    layer.tag = tag;
    layer.primitives.resize(n);
    for (size_t i = 0; i < n; ++i) {
        if (edge_count[i] == 0) throw InvalidMesh("vertex " + std::to_string(i) + " has no incident edge");
        const double nlen = normals[i].norm();
        if (!(nlen > 1e-12)) throw InvalidMesh("vertex " + std::to_string(i) + " has a zero-length normal");
        const Vec3 normal = normals[i] / nlen;

        GaussianPrimitive& p = layer.primitives[i];
        p.center = mesh.vertices[i];
        p.set_rotation(shortest_arc_quat(Vec3::UnitZ(), normal));
        const double tangential = 0.5 * edge_sum[i] / edge_count[i];
        p.log_scale = {std::log(tangential), std::log(tangential), std::log(0.1 * tangential)};
        p.opacity_logit = logit(0.1);
        const Vec3 color = mesh.has_colors() ? mesh.colors[i] : Vec3::Constant(0.5);
        p.sh_coeffs.row(0) = ((color.array() - 0.5) / sh::kC0).matrix().transpose();
    }
    if (tag != LayerTag::Scene) {
        layer.skin_binding.emplace(n);
        for (size_t i = 0; i < n; ++i) (*layer.skin_binding)[i] = int(i);
    }
    return layer;
}

// ---------------------------------------------------------------------------
// Splat layer file: little-endian, header {magic "LGS1", tag u8, count u32},
// then per primitive 3f32 center, 4f32 quaternion (w,x,y,z), 3f32 log_scale,
// 1f32 opacity_logit, 48f32 SH (row-major 16x3).

namespace detail {
inline void put_f32(std::string& out, double v) {
    const float f = float(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
}
inline float get_f32(const char*& p) {
    float f;
    std::memcpy(&f, p, 4);
    p += 4;
    return f;
}
}  // namespace detail

inline std::string encode_layer(const GaussianLayer& layer) {
    std::string out;
    out.reserve(9 + layer.size() * 59 * 4);
    out.append("LGS1", 4);
    out.push_back(char(std::uint8_t(layer.tag)));
    const std::uint32_t count = std::uint32_t(layer.size());
    char cb[4] = {char(count & 0xff), char((count >> 8) & 0xff), char((count >> 16) & 0xff),
                  char((count >> 24) & 0xff)};
    out.append(cb, 4);
    for (const auto& p : layer.primitives) {
        for (int k = 0; k < 3; ++k) detail::put_f32(out, p.center[k]);
        for (int k = 0; k < 4; ++k) detail::put_f32(out, p.rotation()[k]);
        for (int k = 0; k < 3; ++k) detail::put_f32(out, p.log_scale[k]);
        detail::put_f32(out, p.opacity_logit);
        for (int r = 0; r < sh::kCoeffs; ++r)
            for (int c = 0; c < 3; ++c) detail::put_f32(out, p.sh_coeffs(r, c));
    }
    return out;
}

inline GaussianLayer decode_layer(const std::string& bytes) {
    if (bytes.size() < 9 || bytes.compare(0, 4, "LGS1") != 0)
        throw IoError("not a splat layer file (bad magic)");
    const std::uint8_t tag_raw = std::uint8_t(bytes[4]);
    if (tag_raw > 2) throw IoError("splat layer file: unknown layer tag");
    std::uint32_t count = 0;
    for (int k = 3; k >= 0; --k) count = (count << 8) | std::uint8_t(bytes[size_t(5 + k)]);
    if (bytes.size() != 9 + size_t(count) * 59 * 4)
        throw IoError("splat layer file: truncated or oversized payload");
    GaussianLayer layer;
    layer.tag = LayerTag(tag_raw);
    layer.primitives.resize(count);
    const char* p = bytes.data() + 9;
    for (auto& prim : layer.primitives) {
        for (int k = 0; k < 3; ++k) prim.center[k] = detail::get_f32(p);
        Vec4 q;
        for (int k = 0; k < 4; ++k) q[k] = detail::get_f32(p);
        prim.set_rotation(q);
        for (int k = 0; k < 3; ++k) prim.log_scale[k] = detail::get_f32(p);
        prim.opacity_logit = detail::get_f32(p);
        for (int r = 0; r < sh::kCoeffs; ++r)
            for (int c = 0; c < 3; ++c) prim.sh_coeffs(r, c) = detail::get_f32(p);
    }
    if (layer.tag != LayerTag::Scene) {
        layer.skin_binding.emplace(count);
        for (std::uint32_t i = 0; i < count; ++i) (*layer.skin_binding)[i] = int(i);
    }
    return layer;
}

inline void save_layer(const GaussianLayer& layer, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write splat layer file: " + path);
    const std::string bytes = encode_layer(layer);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("failed writing splat layer file: " + path);
}

inline GaussianLayer load_layer(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open splat layer file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_layer(bytes);
}

}  // namespace lgs
