#pragma once

#include "put/math.hpp"
#include "put/scene.hpp"

#include <stdexcept>
#include <vector>

namespace put {

/// Panoramic camera pose. right = forward x up completes the camera frame.
struct Viewpoint {
    Vec3 position;
    Vec3 forward{1.0, 0.0, 0.0};
    Vec3 up = world_up;
    std::uint32_t iteration = 0;

    Vec3 right() const { return cross(forward, up); }

    Vec3 to_camera(const Vec3& world_dir) const {
        return {dot(world_dir, right()), dot(world_dir, up), dot(world_dir, forward)};
    }
    Vec3 to_world(const Vec3& cam_dir) const {
        return right() * cam_dir.x + up * cam_dir.y + forward * cam_dir.z;
    }
};

/// Samples cameras every `spacing` meters of horizontal arc length along each polyline, starting at
/// its first point. The final point gets an extra sample when it lies at least spacing/2 beyond
/// the last regular one. Forward is the horizontal tangent of the segment containing the sample
/// (a sample on a vertex belongs to the segment that starts there; the endpoint to the last one).
inline std::vector<Viewpoint> sample_viewpoints(const StreetGraph& streets, double spacing = 5.0,
                                                double height = 2.5) {
    if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
    if (!(height >= 0.0)) throw std::invalid_argument("camera height must be >= 0");

    std::vector<Viewpoint> out;
    auto emit = [&](const Vec3& ground, const Vec3& forward) {
        Viewpoint vp;
        vp.position = ground + world_up * height;
        vp.forward = forward;
        vp.up = world_up;
        vp.iteration = static_cast<std::uint32_t>(out.size());
        out.push_back(vp);
    };

    for (const auto& poly : streets.polylines) {
        if (poly.empty()) continue;
        const std::size_t segs = poly.size() - 1;
        std::vector<double> seg_len(segs), start(segs + 1, 0.0);
        std::vector<Vec3> tangent(segs, Vec3{1.0, 0.0, 0.0});
        for (std::size_t k = 0; k < segs; ++k) {
            const Vec3 h = horizontal(poly[k + 1] - poly[k]);
            seg_len[k] = length(h);
            start[k + 1] = start[k] + seg_len[k];
            if (seg_len[k] > 0.0) tangent[k] = h * (1.0 / seg_len[k]);
            else if (k > 0) tangent[k] = tangent[k - 1];
        }
        // Purely vertical leading segments borrow the first horizontal tangent.
        std::size_t lead = 0;
        while (lead < segs && seg_len[lead] == 0.0) ++lead;
        for (std::size_t k = 0; k < lead && lead < segs; ++k) tangent[k] = tangent[lead];

        const double total = start[segs];
        if (segs == 0 || total == 0.0) {
            emit(poly.front(), Vec3{1.0, 0.0, 0.0});
            continue;
        }

        auto at = [&](double s) {
            std::size_t k = 0;
            while (k + 1 < segs && start[k + 1] <= s) ++k;
            const double t = seg_len[k] > 0.0 ? std::clamp((s - start[k]) / seg_len[k], 0.0, 1.0) : 0.0;
            emit(poly[k] + (poly[k + 1] - poly[k]) * t, tangent[k]);
        };

        const double tol = 1e-9 * std::max(1.0, total);
        double last = 0.0;
        for (std::size_t n = 0;; ++n) {
            const double s = static_cast<double>(n) * spacing;
            if (s > total + tol) break;
            at(std::min(s, total));
            last = s;
        }
        if (total - last >= spacing / 2.0) at(total);
    }
    return out;
}

} // namespace put
