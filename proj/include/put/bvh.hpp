#pragma once

#include "put/math.hpp"
#include "put/scene.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace put {

struct Ray {
    Vec3 origin;
    Vec3 direction;
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    std::uint32_t face = std::numeric_limits<std::uint32_t>::max();
    double b1 = 0, b2 = 0; ///< barycentrics of corners 1 and 2

    /// Ordering used to pick the nearest hit: distance first, then lowest face id.
    bool closer_than(const Hit& o) const { return t < o.t || (t == o.t && face < o.face); }
};

/// Moller-Trumbore, two-sided, edges inclusive.
inline std::optional<Hit> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = cross(ray.direction, e2);
    const double det = dot(e1, pv);
    if (std::abs(det) < 1e-14) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 tv = ray.origin - a;
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(ray.direction, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = dot(e2, qv) * inv;
    if (t <= ray.tmin || t >= ray.tmax) return std::nullopt;
    Hit h;
    h.t = t;
    h.b1 = u;
    h.b2 = v;
    return h;
}

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void extend(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void extend(const Aabb& o) { lo = min(lo, o.lo); hi = max(hi, o.hi); }
    int largest_axis() const {
        const Vec3 d = hi - lo;
        return d.x >= d.y && d.x >= d.z ? 0 : (d.y >= d.z ? 1 : 2);
    }

    /// Slab test; returns the entry distance or nullopt when the box is missed within [tmin, tmax].
    std::optional<double> entry(const Ray& ray, const Vec3& inv_dir) const {
        double t0 = ray.tmin, t1 = ray.tmax;
        for (std::size_t k = 0; k < 3; ++k) {
            double ta = (lo[k] - ray.origin[k]) * inv_dir[k];
            double tb = (hi[k] - ray.origin[k]) * inv_dir[k];
            if (std::isnan(ta) || std::isnan(tb)) {
                // Ray parallel to and exactly on a slab boundary.
                if (ray.origin[k] < lo[k] || ray.origin[k] > hi[k]) return std::nullopt;
                continue;
            }
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return std::nullopt;
        }
        return t0;
    }
};

/// Median-split bounding volume hierarchy over a mesh's triangles. Construction is sequential and
/// deterministic; queries are const and thread-safe.
class Bvh {
public:
    Bvh() = default;

    explicit Bvh(const Mesh& mesh, std::size_t leaf_size = 4) : mesh_(&mesh) {
        const std::size_t n = mesh.faces.size();
        prims_.resize(n);
        std::iota(prims_.begin(), prims_.end(), 0u);
        if (n == 0) return;
        boxes_.resize(n);
        centers_.resize(n);
        for (std::size_t f = 0; f < n; ++f) {
            const auto [a, b, c] = mesh.corners(f);
            boxes_[f].extend(a);
            boxes_[f].extend(b);
            boxes_[f].extend(c);
            centers_[f] = (a + b + c) * (1.0 / 3.0);
        }
        nodes_.reserve(2 * n / std::max<std::size_t>(1, leaf_size) + 1);
        build(0, n, std::max<std::size_t>(1, leaf_size));
        boxes_.clear();
        centers_.clear();
    }

    std::size_t node_count() const { return nodes_.size(); }

    /// Nearest hit along the ray; equal distances resolve to the lowest face id.
    std::optional<Hit> intersect(const Ray& ray) const {
        if (nodes_.empty()) return std::nullopt;
        const Vec3 inv{1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z};
        Hit best;
        bool found = false;
        std::array<std::uint32_t, 64> stack;
        std::size_t top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            const auto enter = node.box.entry(ray, inv);
            if (!enter || *enter > best.t) continue;
            if (node.count > 0) {
                for (std::uint32_t k = 0; k < node.count; ++k) {
                    const std::uint32_t f = prims_[node.first + k];
                    const auto [a, b, c] = mesh_->corners(f);
                    if (auto h = intersect_triangle(ray, a, b, c)) {
                        h->face = f;
                        if (h->closer_than(best)) {
                            best = *h;
                            found = true;
                        }
                    }
                }
            } else {
                stack[top++] = node.first;
                stack[top++] = node.first + 1;
            }
        }
        if (!found) return std::nullopt;
        return best;
    }

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0; ///< first child index (inner) or first primitive (leaf)
        std::uint32_t count = 0; ///< primitive count; 0 for inner nodes
    };

    void build(std::size_t begin, std::size_t end, std::size_t leaf_size) {
        // Iterative build; children are allocated as adjacent pairs.
        struct Task { std::uint32_t node; std::size_t begin, end; };
        nodes_.push_back({});
        std::vector<Task> tasks{{0, begin, end}};
        while (!tasks.empty()) {
            const Task task = tasks.back();
            tasks.pop_back();
            Aabb box, cbox;
            for (std::size_t i = task.begin; i < task.end; ++i) {
                box.extend(boxes_[prims_[i]]);
                cbox.extend(centers_[prims_[i]]);
            }
            nodes_[task.node].box = box;
            const std::size_t count = task.end - task.begin;
            const int axis = cbox.largest_axis();
            if (count <= leaf_size || cbox.hi[axis] - cbox.lo[axis] <= 0.0) {
                nodes_[task.node].first = static_cast<std::uint32_t>(task.begin);
                nodes_[task.node].count = static_cast<std::uint32_t>(count);
                continue;
            }
            const std::size_t mid = task.begin + count / 2;
            std::nth_element(prims_.begin() + task.begin, prims_.begin() + mid, prims_.begin() + task.end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 const double ca = centers_[a][axis], cb = centers_[b][axis];
                                 return ca < cb || (ca == cb && a < b);
                             });
            const auto left = static_cast<std::uint32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            nodes_[task.node].first = left;
            tasks.push_back({left, task.begin, mid});
            tasks.push_back({left + 1, mid, task.end});
        }
    }

    const Mesh* mesh_ = nullptr;
    std::vector<std::uint32_t> prims_;
    std::vector<Node> nodes_;
    std::vector<Aabb> boxes_;
    std::vector<Vec3> centers_;
};

} // namespace put
