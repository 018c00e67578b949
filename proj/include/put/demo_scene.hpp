#pragma once

#include "put/scene.hpp"

#include <stdexcept>
#include <vector>

namespace put {

/// Axis-aligned building block: footprint [x0,x1] x [y0,y1], walls from z=0 to `height`.
struct BoxSpec {
    double x0, y0, x1, y1, height;
};

struct DemoScene {
    Mesh mesh;
    StreetGraph streets;
    double texels_per_m = 0.0; ///< density actually used after fitting into the atlas
};

namespace detail {

struct ShelfPacker {
    int width, height, pad;
    int x = 0, y = 0, shelf = 0;

    /// Returns the lower-left texel of a w x h rectangle, or false when the atlas is full.
    bool place(int w, int h, int& ox, int& oy) {
        if (w + 2 * pad > width) return false;
        if (x + w + 2 * pad > width) {
            x = 0;
            y += shelf;
            shelf = 0;
        }
        if (y + h + 2 * pad > height) return false;
        ox = x + pad;
        oy = y + pad;
        x += w + 2 * pad;
        shelf = std::max(shelf, h + 2 * pad);
        return true;
    }
};

/// Appends boxes with one UV island for the wall strip and one for the roof, at `density`
/// texels per meter. Returns false if they do not fit the atlas.
inline bool build_boxes(const std::vector<BoxSpec>& boxes, int atlas_size, double density, Mesh& mesh) {
    mesh = Mesh{};
    ShelfPacker packer{atlas_size, atlas_size, 2};
    const double inv = 1.0 / atlas_size;
    for (const auto& b : boxes) {
        const Vec3 c[4] = {{b.x0, b.y0, 0}, {b.x1, b.y0, 0}, {b.x1, b.y1, 0}, {b.x0, b.y1, 0}};
        double perimeter = 0.0;
        for (int k = 0; k < 4; ++k) perimeter += length(c[(k + 1) % 4] - c[k]);
        const int strip_w = std::max(1, static_cast<int>(std::ceil(perimeter * density)));
        const int strip_h = std::max(1, static_cast<int>(std::ceil(b.height * density)));
        int sx, sy;
        if (!packer.place(strip_w, strip_h, sx, sy)) return false;

        const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
        for (int k = 0; k < 4; ++k) mesh.vertices.push_back(c[k]);
        for (int k = 0; k < 4; ++k) mesh.vertices.push_back(c[k] + Vec3{0, 0, b.height});
        const double sx_u = sx * inv, v0 = sy * inv, v1 = (sy + b.height * density) * inv;
        double run = 0.0;
        for (int k = 0; k < 4; ++k) {
            const std::uint32_t a = base + k, bb = base + (k + 1) % 4;
            const std::uint32_t at = a + 4, bt = bb + 4;
            const double len = length(c[(k + 1) % 4] - c[k]);
            const double u0 = sx_u + run * density * inv, u1 = sx_u + (run + len) * density * inv;
            run += len;
            mesh.faces.push_back({a, bb, bt});
            mesh.uv_corners.push_back({Vec2{u0, v0}, Vec2{u1, v0}, Vec2{u1, v1}});
            mesh.faces.push_back({a, bt, at});
            mesh.uv_corners.push_back({Vec2{u0, v0}, Vec2{u1, v1}, Vec2{u0, v1}});
        }

        const int roof_w = std::max(1, static_cast<int>(std::ceil((b.x1 - b.x0) * density)));
        const int roof_h = std::max(1, static_cast<int>(std::ceil((b.y1 - b.y0) * density)));
        int rx, ry;
        if (!packer.place(roof_w, roof_h, rx, ry)) return false;
        auto roof_uv = [&](int k) {
            const double du = (mesh.vertices[base + 4 + k].x - b.x0) * density;
            const double dv = (mesh.vertices[base + 4 + k].y - b.y0) * density;
            return Vec2{(rx + du) * inv, (ry + dv) * inv};
        };
        mesh.faces.push_back({base + 4, base + 5, base + 6});
        mesh.uv_corners.push_back({roof_uv(0), roof_uv(1), roof_uv(2)});
        mesh.faces.push_back({base + 4, base + 6, base + 7});
        mesh.uv_corners.push_back({roof_uv(0), roof_uv(2), roof_uv(3)});
    }
    return true;
}

} // namespace detail

/// Meshes the boxes into an atlas_size^2 atlas at the requested density, shrinking the density in
/// 10% steps until everything fits.
inline DemoScene make_box_scene(const std::vector<BoxSpec>& boxes, StreetGraph streets, int atlas_size,
                                double texels_per_m) {
    if (atlas_size < 8) throw std::invalid_argument("atlas too small for a box scene");
    if (!(texels_per_m > 0.0)) throw std::invalid_argument("texels_per_m must be > 0");
    DemoScene scene;
    scene.streets = std::move(streets);
    double density = texels_per_m;
    while (!detail::build_boxes(boxes, atlas_size, density, scene.mesh)) {
        density *= 0.9;
        if (density < 1e-3) throw std::invalid_argument("boxes cannot be packed into the atlas");
    }
    scene.texels_per_m = density;
    return scene;
}

/// Synthetic test district: blocks along a straight 25 m street and an L-shaped street (10 m east,
/// then 5 m north). With 5 m spacing the paths yield 6 + 4 = 10 viewpoints.
inline DemoScene make_demo_scene(int atlas_size = 1024, double texels_per_m = 32.0) {
    const std::vector<BoxSpec> boxes = {
        {-2, 6, 6, 14, 8},   {7, 6, 15, 13, 12},  {16, 6, 27, 15, 10},
        {-2, -14, 9, -6, 11}, {10, -13, 26, -6, 9},
        {38, -14, 47, -6, 10}, {36, 6, 45, 16, 13}, {56, -2, 64, 10, 9},
    };
    StreetGraph streets;
    streets.polylines.push_back({{0, 0, 0}, {25, 0, 0}});
    streets.polylines.push_back({{40, 0, 0}, {50, 0, 0}, {50, 5, 0}});
    return make_box_scene(boxes, std::move(streets), atlas_size, texels_per_m);
}

} // namespace put
