#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors

struct InvalidMesh : std::runtime_error {
    explicit InvalidMesh(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidWeights : std::runtime_error {
    explicit InvalidWeights(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidConfig : std::runtime_error {
    explicit InvalidConfig(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyPointSet : std::runtime_error {
    explicit EmptyPointSet(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyEdgeSet : std::runtime_error {
    explicit EmptyEdgeSet(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateRotation : std::runtime_error {
    explicit DegenerateRotation(const std::string& what) : std::runtime_error(what) {}
};
struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
struct NumericalFailure : std::runtime_error {
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Scalar helpers

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// ---------------------------------------------------------------------------
// Rigid transform (rotation + translation), composed left-to-right as
// world = R * local + t.

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform compose(const RigidTransform& inner) const {
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }

    RigidTransform inverse() const {
        Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }

    static RigidTransform identity() { return {}; }
};

// Unit quaternion (w, x, y, z) to rotation matrix. Input need not be
// normalized; the caller decides whether to pre-normalize.
inline Mat3 quat_to_matrix(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
        2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
        2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
    return r;
}

// d(R)/d(q) contracted with an upstream gradient G = dL/dR, for a raw
// (not yet normalized) quaternion. Normalization is chained explicitly.
inline Vec4 quat_to_matrix_backward(const Vec4& q, const Mat3& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 d = Vec4::Zero();
    // dR/dw
    d[0] = g(0, 1) * (-2 * z) + g(0, 2) * (2 * y) + g(1, 0) * (2 * z) + g(1, 2) * (-2 * x) +
           g(2, 0) * (-2 * y) + g(2, 1) * (2 * x);
    // dR/dx
    d[1] = g(0, 1) * (2 * y) + g(0, 2) * (2 * z) + g(1, 0) * (2 * y) + g(1, 1) * (-4 * x) +
           g(1, 2) * (-2 * w) + g(2, 0) * (2 * z) + g(2, 1) * (2 * w) + g(2, 2) * (-4 * x);
    // dR/dy
    d[2] = g(0, 0) * (-4 * y) + g(0, 1) * (2 * x) + g(0, 2) * (2 * w) + g(1, 0) * (2 * x) +
           g(1, 2) * (2 * z) + g(2, 0) * (-2 * w) + g(2, 1) * (2 * z) + g(2, 2) * (-4 * y);
    // dR/dz
    d[3] = g(0, 0) * (-4 * z) + g(0, 1) * (-2 * w) + g(0, 2) * (2 * x) + g(1, 0) * (2 * w) +
           g(1, 1) * (-4 * z) + g(1, 2) * (2 * y) + g(2, 0) * (2 * x) + g(2, 1) * (2 * y);
    return d;
}

// Axis-angle (magnitude = angle in radians) to rotation matrix, Rodrigues.
inline Mat3 axis_angle_to_matrix(const Vec3& aa) {
    const double angle = aa.norm();
    if (angle < 1e-12) return Mat3::Identity();
    const Vec3 axis = aa / angle;
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * (k * k);
}

// Shortest-arc rotation mapping unit vector `from` onto unit vector `to`,
// as a unit quaternion (w, x, y, z). Antiparallel inputs rotate pi about a
// deterministic perpendicular axis.
inline Vec4 shortest_arc_quat(const Vec3& from, const Vec3& to) {
    const double d = from.dot(to);
    if (d < -1.0 + 1e-12) {
        Vec3 axis = from.cross(Vec3::UnitX());
        if (axis.squaredNorm() < 1e-12) axis = from.cross(Vec3::UnitY());
        axis.normalize();
        return {0.0, axis.x(), axis.y(), axis.z()};
    }
    const Vec3 c = from.cross(to);
    Vec4 q(1.0 + d, c.x(), c.y(), c.z());
    return q / q.norm();
}

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64). std::mt19937 is portable but the standard
// distributions are not, so all sampling goes through this.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint32_t next_below(std::uint32_t n) { return std::uint32_t(next_u64() % n); }

    // Marsaglia polar would need rejection state; Box-Muller is stateless
    // enough for our purposes.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec3 uniform_vec3(double lo, double hi) {
        return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)};
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Parallelism. Static partition; chunk k of `workers` gets a contiguous
// range, so any per-worker accumulation can be merged in worker order for
// deterministic sums.

inline int& global_thread_count() {
    static int n = int(std::thread::hardware_concurrency());
    return n;
}

inline void set_thread_count(int n) { global_thread_count() = n > 0 ? n : 1; }

template <typename Fn>
void parallel_for(std::int64_t n, const Fn& fn, int workers = 0) {
    if (workers <= 0) workers = global_thread_count();
    if (workers < 1) workers = 1;
    if (n <= 0) return;
    if (workers == 1 || n == 1) {
        fn(std::int64_t(0), n, 0);
        return;
    }
    const std::int64_t chunks = std::min<std::int64_t>(workers, n);
    std::vector<std::thread> threads;
    threads.reserve(size_t(chunks));
    for (std::int64_t k = 0; k < chunks; ++k) {
        const std::int64_t begin = n * k / chunks;
        const std::int64_t end = n * (k + 1) / chunks;
        threads.emplace_back([&fn, begin, end, k] { fn(begin, end, int(k)); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace lgs
