#pragma once

#include "lgs/core.hpp"

#include <limits>
#include <unordered_map>

namespace lgs {

struct NearestHit {
    int index = -1;
    double sq_dist = std::numeric_limits<double>::infinity();
};

// Exact nearest neighbor by exhaustive scan. Ties resolve to the lowest
// index because the scan is in index order with a strict improvement test.
inline NearestHit nearest_point_brute(const Vec3& query, const std::vector<Vec3>& points) {
    NearestHit best;
    for (size_t i = 0; i < points.size(); ++i) {
        const double d2 = (points[i] - query).squaredNorm();
        if (d2 < best.sq_dist) {
            best.sq_dist = d2;
            best.index = int(i);
        }
    }
    return best;
}

// Uniform spatial hash over a cubic cell grid. Queries expand outward ring by
// ring and stop once no unvisited cell can hold a closer (or equal, lower
// index) point, so results match the brute-force scan exactly, tie rule
// included.
class SpatialHashGrid {
public:
    explicit SpatialHashGrid(const std::vector<Vec3>& points) : points_(points) {
        if (points.empty()) throw EmptyPointSet("spatial hash over an empty point set");
        Vec3 lo = points[0], hi = points[0];
        for (const Vec3& p : points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        origin_ = lo;
        const Vec3 extent = (hi - lo).cwiseMax(1e-12);
        // Aim for ~2 points per occupied cell, but keep the grid no finer
        // than 256 cells along the longest axis so flat or collinear clouds
        // cannot blow up the cell count.
        const double volume = extent.x() * extent.y() * extent.z();
        const double max_extent = extent.maxCoeff();
        cell_ = std::min(std::max(std::cbrt(2.0 * volume / double(points.size())),
                                  max_extent / 256.0),
                         max_extent);
        cells_.reserve(points.size());
        cell_min_ = cell_max_ = cell_of(points[0]);
        for (size_t i = 0; i < points.size(); ++i) {
            const Eigen::Vector3i c = cell_of(points[i]);
            cell_min_ = cell_min_.cwiseMin(c);
            cell_max_ = cell_max_.cwiseMax(c);
            cells_[key(c)].push_back(int(i));
        }
    }

    NearestHit nearest(const Vec3& query) const {
        const Eigen::Vector3i qc_raw = cell_of(query);
        // Search from inside the occupied range; queries far outside would
        // otherwise imply astronomically many empty rings.
        const Eigen::Vector3i qc = qc_raw.cwiseMax(cell_min_).cwiseMin(cell_max_);
        const bool interior = qc == qc_raw;
        // Past this ring every occupied cell has been visited.
        int ring_limit = 0;
        for (int a = 0; a < 3; ++a)
            ring_limit = std::max(
                ring_limit, std::max(std::abs(cell_min_[a] - qc[a]), std::abs(cell_max_[a] - qc[a])));
        NearestHit best;
        for (int ring = 0; ring <= ring_limit; ++ring) {
            if (interior && best.index >= 0 && ring >= 2) {
                // A point in ring r lies at least (r - 1) cells from the query.
                const double safe = double(ring - 1) * cell_;
                if (safe * safe > best.sq_dist) break;
            }
            visit_ring(qc, ring, query, best);
        }
        return best;
    }

private:
    Eigen::Vector3i cell_of(const Vec3& p) const {
        return {int(std::floor((p.x() - origin_.x()) / cell_)),
                int(std::floor((p.y() - origin_.y()) / cell_)),
                int(std::floor((p.z() - origin_.z()) / cell_))};
    }

    static std::uint64_t key(const Eigen::Vector3i& c) {
        const auto u = [](int v) { return std::uint64_t(std::uint32_t(v + (1 << 20))); };
        return (u(c.x()) << 42) ^ (u(c.y()) << 21) ^ u(c.z());
    }

    void visit_ring(const Eigen::Vector3i& center, int ring, const Vec3& query,
                    NearestHit& best) const {
        auto visit = [&](int cx, int cy, int cz) {
            if (cx < cell_min_.x() || cx > cell_max_.x() || cy < cell_min_.y() ||
                cy > cell_max_.y() || cz < cell_min_.z() || cz > cell_max_.z())
                return;
            const auto it = cells_.find(key({cx, cy, cz}));
            if (it == cells_.end()) return;
            for (int idx : it->second) {
                const double d2 = (points_[size_t(idx)] - query).squaredNorm();
                if (d2 < best.sq_dist || (d2 == best.sq_dist && idx < best.index)) {
                    best.sq_dist = d2;
                    best.index = idx;
                }
            }
        };
        if (ring == 0) {
            visit(center.x(), center.y(), center.z());
            return;
        }
        for (int dx = -ring; dx <= ring; ++dx)
            for (int dy = -ring; dy <= ring; ++dy) {
                const bool face = std::max(std::abs(dx), std::abs(dy)) == ring;
                // Interior (dx, dy) only contributes the two cap cells.
                if (face) {
                    for (int dz = -ring; dz <= ring; ++dz)
                        visit(center.x() + dx, center.y() + dy, center.z() + dz);
                } else {
                    visit(center.x() + dx, center.y() + dy, center.z() - ring);
                    visit(center.x() + dx, center.y() + dy, center.z() + ring);
                }
            }
    }

    std::vector<Vec3> points_;
    Vec3 origin_ = Vec3::Zero();
    double cell_ = 1.0;
    Eigen::Vector3i cell_min_ = Eigen::Vector3i::Zero();
    Eigen::Vector3i cell_max_ = Eigen::Vector3i::Zero();
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace lgs
