#pragma once

#include "lgs/core.hpp"
#include "lgs/gaussians.hpp"

namespace lgs {

// ---------------------------------------------------------------------------
// Plain MLP: affine layers, ReLU on hidden layers, linear final layer.
// Weights are stored (out x in); batches are row-per-sample matrices.

struct MlpParams {
    struct Layer {
        MatX weight;  // out x in
        VecX bias;    // out
    };
    std::vector<Layer> layers;

    int input_dim() const { return int(layers.front().weight.cols()); }
    int output_dim() const { return int(layers.back().weight.rows()); }

    void validate() const {
        if (layers.empty()) throw InvalidConfig("mlp has no layers");
        for (size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].weight.rows() != layers[l].bias.size())
                throw InvalidConfig("mlp bias size mismatch");
            if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
                throw InvalidConfig("mlp layer dims do not chain");
            if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite())
                throw NumericalFailure("mlp parameters not finite");
        }
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += size_t(l.weight.size()) + size_t(l.bias.size());
        return n;
    }
};

// Hidden layers He-uniform, final layer zero with a caller-supplied bias so
// that freshly built decoders emit a fixed output for every query.
inline MlpParams make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng,
                          const VecX& final_bias = VecX()) {
    MlpParams mlp;
    int in = input_dim;
    for (int width : hidden) {
        MlpParams::Layer layer;
        layer.weight.resize(width, in);
        const double bound = std::sqrt(6.0 / in);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = rng.uniform(-bound, bound);
        layer.bias = VecX::Zero(width);
        mlp.layers.push_back(std::move(layer));
        in = width;
    }
    MlpParams::Layer head;
    head.weight = MatX::Zero(output_dim, in);
    head.bias = final_bias.size() > 0 ? final_bias : VecX::Zero(output_dim);
    if (head.bias.size() != output_dim) throw InvalidConfig("final bias size mismatch");
    mlp.layers.push_back(std::move(head));
    return mlp;
}

// Post-activation values per layer, enough to run the exact backward.
struct MlpCache {
    MatX input;
    std::vector<MatX> hidden;  // post-ReLU activations, one per hidden layer
};

inline MatX mlp_forward_batch(const MlpParams& mlp, const MatX& x, MlpCache* cache = nullptr) {
    if (x.cols() != mlp.input_dim()) throw DimensionMismatch("mlp input dim mismatch");
    if (cache) {
        cache->input = x;
        cache->hidden.clear();
    }
    MatX h = x;
    for (size_t l = 0; l < mlp.layers.size(); ++l) {
        MatX z = h * mlp.layers[l].weight.transpose();
        z.rowwise() += mlp.layers[l].bias.transpose();
        if (l + 1 < mlp.layers.size()) {
            z = z.cwiseMax(0.0);
            if (cache) cache->hidden.push_back(z);
        }
        h = std::move(z);
    }
    return h;
}

struct MlpGrad {
    std::vector<MlpParams::Layer> layers;

    explicit MlpGrad(const MlpParams& mlp) {
        layers.reserve(mlp.layers.size());
        for (const auto& l : mlp.layers)
            layers.push_back({MatX::Zero(l.weight.rows(), l.weight.cols()),
                              VecX::Zero(l.bias.size())});
    }
};

// Exact reverse-mode gradients; accumulates parameter gradients into `grad`
// and returns the gradient w.r.t. the batch input.
inline MatX mlp_backward_batch(const MlpParams& mlp, const MlpCache& cache, const MatX& upstream,
                               MlpGrad& grad) {
    const size_t n_layers = mlp.layers.size();
    MatX delta = upstream;
    for (size_t l = n_layers; l-- > 0;) {
        const MatX& activation = (l == 0) ? cache.input : cache.hidden[l - 1];
        grad.layers[l].weight += delta.transpose() * activation;
        grad.layers[l].bias += delta.colwise().sum().transpose();
        MatX d_input = delta * mlp.layers[l].weight;
        if (l > 0) {
            // ReLU gate: the cached activation is zero exactly where the
            // pre-activation was clipped.
            d_input = (cache.hidden[l - 1].array() > 0.0).select(d_input, 0.0);
        }
        delta = std::move(d_input);
    }
    return delta;
}

// Single-vector wrappers.
inline VecX mlp_forward(const MlpParams& mlp, const VecX& x, MlpCache* cache = nullptr) {
    return mlp_forward_batch(mlp, x.transpose(), cache).row(0).transpose();
}

inline VecX mlp_backward(const MlpParams& mlp, const MlpCache& cache, const VecX& upstream,
                         MlpGrad& grad) {
    return mlp_backward_batch(mlp, cache, upstream.transpose(), grad).row(0).transpose();
}

// ---------------------------------------------------------------------------
// 6D rotation representation: two 3-vectors orthonormalized by Gram-Schmidt.

inline Mat3 rot6d_to_matrix(const Eigen::Matrix<double, 6, 1>& r6) {
    const Vec3 a = r6.head<3>();
    const Vec3 b = r6.tail<3>();
    const double an = a.norm();
    if (an < 1e-9) throw DegenerateRotation("rot6d: first vector is (near) zero");
    const Vec3 c1 = a / an;
    const Vec3 residual = b - b.dot(c1) * c1;
    const double rn = residual.norm();
    if (rn < 1e-9) throw DegenerateRotation("rot6d: second vector is (near) parallel to the first");
    const Vec3 c2 = residual / rn;
    Mat3 r;
    r.col(0) = c1;
    r.col(1) = c2;
    r.col(2) = c1.cross(c2);
    return r;
}

namespace detail {
// d(normalize(v))^T g = (I - n n^T) g / |v|
inline Vec3 normalize_backward(const Vec3& v, const Vec3& g) {
    const double n = v.norm();
    const Vec3 unit = v / n;
    return (g - unit * unit.dot(g)) / n;
}
}  // namespace detail

// Chain rule through the Gram-Schmidt construction; `g` is dL/dR.
inline Eigen::Matrix<double, 6, 1> rot6d_backward(const Eigen::Matrix<double, 6, 1>& r6,
                                                  const Mat3& g) {
    const Vec3 a = r6.head<3>();
    const Vec3 b = r6.tail<3>();
    const Vec3 c1 = a.normalized();
    const Vec3 residual = b - b.dot(c1) * c1;
    const Vec3 c2 = residual.normalized();

    const Vec3 g1 = g.col(0);
    const Vec3 g2 = g.col(1);
    const Vec3 g3 = g.col(2);

    // c3 = c1 x c2 feeds back into both columns: d/dc1 (c1 x c2).g3 = c2 x g3,
    // d/dc2 (c1 x c2).g3 = g3 x c1.
    const Vec3 grad_c1 = g1 + c2.cross(g3);
    const Vec3 grad_c2 = g2 + g3.cross(c1);

    // residual = b - (b . c1) c1
    const Vec3 d_residual = detail::normalize_backward(residual, grad_c2);
    const Vec3 d_b = d_residual - c1 * c1.dot(d_residual);
    const Vec3 d_c1_from_res = -d_residual * b.dot(c1) - b * d_residual.dot(c1);

    const Vec3 d_a = detail::normalize_backward(a, grad_c1 + d_c1_from_res);

    Eigen::Matrix<double, 6, 1> out;
    out.head<3>() = d_a;
    out.tail<3>() = d_b;
    return out;
}

// ---------------------------------------------------------------------------
// Softmax.

inline VecX softmax(const VecX& logits) {
    const double m = logits.maxCoeff();
    VecX e = (logits.array() - m).exp();
    return e / e.sum();
}

// dL/dlogits given dL/dsoftmax.
inline VecX softmax_backward(const VecX& probs, const VecX& upstream) {
    const double dot = probs.dot(upstream);
    return probs.array() * (upstream.array() - dot);
}

// ---------------------------------------------------------------------------
// Decoder heads. Layouts (fixed):
//   appearance : [48 SH row-major | 1 opacity logit]             -> dim 49
//   geometry   : [3 d_center | 6 rot6d | 3 d_log_scale]          -> dim 12
//   deformation: [J skinning logits | 9(J-1) x 3 offsets rowmaj] -> dim J + 27(J-1)

constexpr int kAppearanceHeadDim = 3 * sh::kCoeffs + 1;
constexpr int kGeometryHeadDim = 12;
constexpr int deformation_offset_rows(int joint_count) { return 9 * (joint_count - 1); }
constexpr int deformation_head_dim(int joint_count) {
    return joint_count + 3 * deformation_offset_rows(joint_count);
}

struct GeometryCorrection {
    Vec3 d_center = Vec3::Zero();
    Eigen::Matrix<double, 6, 1> d_rot6 = (Eigen::Matrix<double, 6, 1>() << 1, 0, 0, 0, 1, 0).finished();
    Vec3 d_log_scale = Vec3::Zero();
};

struct DeformationOutput {
    VecX skin_weights;  // J, on the probability simplex
    MatX pose_offsets;  // 9(J-1) x 3
};

struct DeformedGaussian {
    Vec3 center;
    Mat3 rotation;
    Vec3 scale;  // linear (not log) units
};

inline std::pair<ShCoeffs, double> decode_appearance(const MlpParams& head, const VecX& f) {
    const VecX raw = mlp_forward(head, f);
    if (raw.size() != kAppearanceHeadDim) throw DimensionMismatch("appearance head output dim");
    ShCoeffs sh;
    for (int r = 0; r < sh::kCoeffs; ++r)
        for (int c = 0; c < 3; ++c) sh(r, c) = raw[3 * r + c];
    return {sh, sigmoid(raw[3 * sh::kCoeffs])};
}

inline GeometryCorrection split_geometry_head(const VecX& raw) {
    if (raw.size() != kGeometryHeadDim) throw DimensionMismatch("geometry head output dim");
    GeometryCorrection corr;
    corr.d_center = raw.segment<3>(0);
    corr.d_rot6 = raw.segment<6>(3);
    corr.d_log_scale = raw.segment<3>(9);
    return corr;
}

inline GeometryCorrection decode_geometry(const MlpParams& head, const VecX& f) {
    return split_geometry_head(mlp_forward(head, f));
}

inline DeformationOutput split_deformation_head(const VecX& raw, int joint_count) {
    if (raw.size() != deformation_head_dim(joint_count))
        throw DimensionMismatch("deformation head output dim");
    DeformationOutput out;
    out.skin_weights = softmax(raw.head(joint_count));
    const int feat = deformation_offset_rows(joint_count);
    out.pose_offsets.resize(feat, 3);
    for (int r = 0; r < feat; ++r)
        for (int c = 0; c < 3; ++c) out.pose_offsets(r, c) = raw[joint_count + 3 * r + c];
    return out;
}

inline DeformationOutput decode_deformation(const MlpParams& head, const VecX& f, int joint_count) {
    return split_deformation_head(mlp_forward(head, f), joint_count);
}

// mu_def = mu + d_center; R_def = R * R(d_rot6); s_def = exp(log_scale + d_log_scale).
inline DeformedGaussian apply_geometry(const GaussianPrimitive& canon,
                                       const GeometryCorrection& corr) {
    DeformedGaussian out;
    out.center = canon.center + corr.d_center;
    out.rotation = canon.rotation_matrix() * rot6d_to_matrix(corr.d_rot6);
    out.scale = (canon.log_scale + corr.d_log_scale).array().exp();
    return out;
}

// Identity-at-zero bias for the geometry head: d_rot6 = (1,0,0,0,1,0).
inline VecX geometry_head_identity_bias() {
    VecX b = VecX::Zero(kGeometryHeadDim);
    b[3] = 1.0;
    b[7] = 1.0;
    return b;
}

}  // namespace lgs
