#pragma once

#include "put/math.hpp"
#include "put/viewpath.hpp"

#include <stdexcept>

namespace put {

/// Equirectangular pixel grid. Pixel (x, y) has longitude ((x + 0.5) / W) * 2pi - pi and latitude
/// pi/2 - ((y + 0.5) / H) * pi; in the camera frame +z is forward, +y up and +x right.
struct PanoGeometry {
    int width = 512;
    int height = 256;
};

struct PixelProjection {
    double x = 0; ///< in [-0.5, W - 0.5); the seam behind the camera maps to -0.5
    double y = 0; ///< in [-0.5, H - 0.5]
    double depth = 0;
};

/// Camera-frame unit direction through continuous pixel coordinates (x, y).
inline Vec3 unproject_dir(double x, double y, PanoGeometry geo = {}) {
    const double lon = ((x + 0.5) / geo.width) * 2.0 * pi - pi;
    const double lat = pi / 2.0 - ((y + 0.5) / geo.height) * pi;
    const double c = std::cos(lat);
    return {c * std::sin(lon), std::sin(lat), c * std::cos(lon)};
}

/// Inverse of unproject_dir for a camera-frame direction (need not be unit length).
inline PixelProjection project_dir(const Vec3& cam_dir, PanoGeometry geo = {}) {
    const Vec3 v = normalize(cam_dir);
    const double lat = std::asin(std::clamp(v.y, -1.0, 1.0));
    const double lon = std::atan2(v.x, v.z);
    PixelProjection p;
    p.x = (lon + pi) / (2.0 * pi) * geo.width - 0.5;
    p.y = (pi / 2.0 - lat) / pi * geo.height - 0.5;
    if (p.x >= geo.width - 0.5) p.x -= geo.width;
    p.depth = length(cam_dir);
    return p;
}

/// Projects a world point into the panorama of `vp`.
inline PixelProjection project(const Viewpoint& vp, const Vec3& p, PanoGeometry geo = {}) {
    const Vec3 d = p - vp.position;
    if (dot(d, d) == 0.0) throw std::invalid_argument("project: point coincides with camera center");
    return project_dir(vp.to_camera(d), geo);
}

/// Nearest pixel column/row for a projected position; columns wrap, rows clamp.
inline int wrap_column(double x, int width) {
    long ix = static_cast<long>(std::floor(x + 0.5)) % width;
    if (ix < 0) ix += width;
    return static_cast<int>(ix);
}

inline int clamp_row(double y, int height) {
    return std::clamp(static_cast<int>(std::floor(y + 0.5)), 0, height - 1);
}

} // namespace put
