#pragma once

#include "put/atlas.hpp"
#include "put/image.hpp"
#include "put/parallel.hpp"
#include "put/projection.hpp"
#include "put/render.hpp"
#include "put/scene.hpp"

#include <optional>
#include <vector>

namespace put {

struct GatherSettings {
    double eps_vis = 0.05;       ///< depth agreement (meters) for a texel to count as visible
    /// Cap on tan(incidence) in the footprint allowance; 0 disables the allowance so only eps_vis applies.
    double max_slope = 4.0;
    /// The allowance only applies when the surface in the depth buffer is within this angle
    /// (as a cosine) of the texel's own orientation.
    double same_surface_cos = 0.9;
    double min_distance = 1e-6;  ///< floor on the camera distance so weights stay defined
    unsigned threads = 0;
};

/// Depth tolerance for a texel seen at `depth` meters whose surface normal makes angle theta with
/// the view ray. The depth buffer holds the pixel-center hit, up to half a pixel diagonal away from
/// the texel's own ray, which on a plane changes depth by about depth * half_pixel * tan(theta).
inline double visibility_tolerance(const GatherSettings& s, PanoGeometry geo, double depth, double cos_theta) {
    if (s.max_slope <= 0.0) return s.eps_vis;
    const double half_pixel = 0.5 * std::hypot(2.0 * pi / geo.width, pi / geo.height);
    const double c = std::clamp(std::abs(cos_theta), 0.0, 1.0);
    const double tan_theta = c > 0.0 ? std::sqrt(1.0 - c * c) / c : s.max_slope;
    return s.eps_vis + depth * half_pixel * std::min(tan_theta, s.max_slope);
}

/// Bilinear sample at continuous pixel coordinates (pixel centers at integers). Columns wrap
/// around the panorama seam; rows clamp.
inline Color sample_bilinear(const ImageF& img, double x, double y) {
    const int w = img.width(), h = img.height();
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const double ax = x - fx0, ay = y - fy0;
    auto col = [w](long c) { c %= w; return static_cast<int>(c < 0 ? c + w : c); };
    auto row = [h](long r) { return static_cast<int>(std::clamp<long>(r, 0, h - 1)); };
    const int x0 = col(static_cast<long>(fx0)), x1 = col(static_cast<long>(fx0) + 1);
    const int y0 = row(static_cast<long>(fy0)), y1 = row(static_cast<long>(fy0) + 1);
    Color out{};
    for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
        const double bot = (1.0 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
        out[c] = static_cast<float>((1.0 - ay) * top + ay * bot);
    }
    return out;
}

/// Distance from a surface point to the vertical line through the camera center.
inline double horizontal_distance(const Vec3& p, const Vec3& camera) { return length(horizontal(p - camera)); }

/// Back-projects every mapped texel into the generated panorama. A texel is visible when its
/// projected depth agrees with the frame's depth buffer at the nearest pixel within eps_vis, or
/// within visibility_tolerance() when the pixel shows a surface oriented like the texel's.
/// Output order follows the texel map, independent of thread count.
inline std::vector<TexelSample> gather_contributions(const ImageF& generated, const PanoFrame& frame,
                                                     const TexelMap& texel_map, const GatherSettings& settings = {}) {
    if (generated.width() != frame.width() || generated.height() != frame.height() || generated.channels() != 3)
        throw std::invalid_argument("gather_contributions: generated image does not match frame dimensions");
    const auto& entries = texel_map.entries();
    std::vector<std::optional<TexelSample>> found(entries.size());
    const PanoGeometry geo = frame.geometry;
    const Viewpoint& vp = frame.viewpoint;

    parallel_for(entries.size(), settings.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& entry = entries[i];
            const Vec3 d = entry.point - vp.position;
            if (dot(d, d) == 0.0) continue;
            const PixelProjection p = project_dir(vp.to_camera(d), geo);
            if (p.x < -0.5 || p.x >= geo.width - 0.5 || p.y < -0.5 || p.y > geo.height - 0.5) continue;
            const int ix = wrap_column(p.x, geo.width);
            const int iy = clamp_row(p.y, geo.height);
            const double buffer = frame.depth.at(ix, iy);
            const Vec3 seen{frame.normal.at(ix, iy, 0), frame.normal.at(ix, iy, 1), frame.normal.at(ix, iy, 2)};
            const bool same_surface = std::abs(dot(seen, entry.normal)) >= settings.same_surface_cos;
            const double tol = same_surface ? visibility_tolerance(settings, geo, p.depth, dot(entry.normal, d) / p.depth)
                                            : settings.eps_vis;
            if (!std::isfinite(buffer) || !(std::abs(p.depth - buffer) < tol)) continue;
            TexelSample s;
            s.texel = entry.texel;
            s.color = sample_bilinear(generated, p.x, p.y);
            s.distance = std::max(settings.min_distance, horizontal_distance(entry.point, vp.position));
            found[i] = s;
        }
    });

    std::vector<TexelSample> out;
    for (auto& f : found)
        if (f) out.push_back(*f);
    return out;
}

} // namespace put
