#pragma once

#include "put/atlas.hpp"
#include "put/bvh.hpp"
#include "put/image.hpp"
#include "put/parallel.hpp"
#include "put/png_io.hpp"
#include "put/projection.hpp"
#include "put/scene.hpp"
#include "put/viewpath.hpp"

#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>

namespace put {

struct ShadeSettings {
    Vec3 sun_dir = normalize(Vec3{1.0, 2.0, 1.0});
    double ambient = 0.3;
};

/// Lambert + ambient factor for a unit normal.
inline double shade(const Vec3& normal, const ShadeSettings& s) {
    return s.ambient + (1.0 - s.ambient) * std::max(0.0, dot(normal, s.sun_dir));
}

/// One iteration's partially textured panorama.
struct PanoFrame {
    PanoGeometry geometry;
    ImageF rgb;              ///< 3 channels in [0,1]; previously textured surfaces in color, others gray
    Image8 mask;             ///< 1 where the visible surface already had texture
    Image<double> depth;     ///< hit distance in meters, +inf for background
    ImageF gray;             ///< untextured (white-albedo) shading of every hit, for 4-channel requests
    Image<float> normal;     ///< 3 channels: unit geometric normal of the hit face, facing the camera; 0 for background
    Viewpoint viewpoint;

    int width() const { return geometry.width; }
    int height() const { return geometry.height; }
};

/// Ray caster for a fixed mesh. Holds the acceleration structure so repeated frames reuse it.
class PanoRenderer {
public:
    PanoRenderer(const Mesh& mesh, PanoGeometry geometry = {}, ShadeSettings shading = {}, unsigned threads = 0)
        : mesh_(&mesh), bvh_(mesh), geo_(geometry), shading_(shading), threads_(threads) {
        if (geometry.width < 1 || geometry.height < 1) throw std::invalid_argument("panorama dimensions must be >= 1");
        shading_.sun_dir = normalize(shading_.sun_dir);
    }

    PanoGeometry geometry() const { return geo_; }
    const Bvh& bvh() const { return bvh_; }

    /// Nearest surface along the pixel-center ray of (x, y).
    std::optional<Hit> cast(const Viewpoint& vp, int x, int y) const {
        Ray ray;
        ray.origin = vp.position;
        ray.direction = vp.to_world(unproject_dir(x, y, geo_));
        return bvh_.intersect(ray);
    }

    /// Atlas texel under a hit, from the face's interpolated UV.
    std::uint32_t texel_of(const Hit& hit, int atlas_width, int atlas_height) const {
        const auto& uv = mesh_->uv_corners[hit.face];
        const double b0 = 1.0 - hit.b1 - hit.b2;
        const double u = b0 * uv[0].u + hit.b1 * uv[1].u + hit.b2 * uv[2].u;
        const double v = b0 * uv[0].v + hit.b1 * uv[1].v + hit.b2 * uv[2].v;
        const int tx = std::clamp(static_cast<int>(std::floor(u * atlas_width)), 0, atlas_width - 1);
        const int ty = std::clamp(static_cast<int>(std::floor(v * atlas_height)), 0, atlas_height - 1);
        return static_cast<std::uint32_t>(ty) * atlas_width + tx;
    }

    /// Renders the partially textured panorama. Textured texels show their blended atlas color as
    /// stored (atlas colors already carry the lighting of the images they came from); untextured
    /// surfaces show a shaded white material; misses are black.
    PanoFrame render(const TextureAtlas& atlas, const Viewpoint& vp) const {
        PanoFrame frame;
        frame.geometry = geo_;
        frame.viewpoint = vp;
        frame.rgb = ImageF(geo_.width, geo_.height, 3, 0.0f);
        frame.mask = Image8(geo_.width, geo_.height, 1, 0);
        frame.depth = Image<double>(geo_.width, geo_.height, 1, std::numeric_limits<double>::infinity());
        frame.gray = ImageF(geo_.width, geo_.height, 1, 0.0f);
        frame.normal = Image<float>(geo_.width, geo_.height, 3, 0.0f);

        parallel_for(static_cast<std::size_t>(geo_.height), threads_, [&](std::size_t yb, std::size_t ye) {
            for (int y = static_cast<int>(yb); y < static_cast<int>(ye); ++y) {
                for (int x = 0; x < geo_.width; ++x) {
                    Ray ray;
                    ray.origin = vp.position;
                    ray.direction = vp.to_world(unproject_dir(x, y, geo_));
                    const auto hit = bvh_.intersect(ray);
                    if (!hit) continue;
                    Vec3 n = mesh_->face_normal(hit->face);
                    if (dot(n, ray.direction) > 0.0) n = -n;
                    const float s = static_cast<float>(std::clamp(shade(n, shading_), 0.0, 1.0));
                    frame.depth.at(x, y) = hit->t;
                    frame.gray.at(x, y) = s;
                    for (int k = 0; k < 3; ++k) frame.normal.at(x, y, k) = static_cast<float>(n[k]);
                    const std::uint32_t texel = texel_of(*hit, atlas.width(), atlas.height());
                    if (atlas.textured(texel)) {
                        const Color c = atlas.color(texel);
                        for (int k = 0; k < 3; ++k) frame.rgb.at(x, y, k) = std::clamp(c[k], 0.0f, 1.0f);
                        frame.mask.at(x, y) = 1;
                    } else {
                        for (int k = 0; k < 3; ++k) frame.rgb.at(x, y, k) = s;
                    }
                }
            }
        });
        return frame;
    }

private:
    const Mesh* mesh_;
    Bvh bvh_;
    PanoGeometry geo_;
    ShadeSettings shading_;
    unsigned threads_;
};

/// Convenience form that builds the acceleration structure for a single frame. The atlas must
/// match the texel map's dimensions.
inline PanoFrame render_partial(const Mesh& mesh, const TexelMap& texel_map, const TextureAtlas& atlas,
                                const Viewpoint& vp, PanoGeometry geometry = {}, ShadeSettings shading = {},
                                unsigned threads = 0) {
    if (texel_map.width() != atlas.width() || texel_map.height() != atlas.height())
        throw std::invalid_argument("render_partial: atlas and texel map dimensions differ");
    return PanoRenderer(mesh, geometry, shading, threads).render(atlas, vp);
}

/// Depth PNG encoding: centimeters in 16 bits, 65535 for background or anything beyond range.
inline std::uint16_t encode_depth_cm(double meters) {
    if (!std::isfinite(meters)) return 65535;
    const double cm = std::round(meters * 100.0);
    return cm >= 65535.0 ? 65535 : static_cast<std::uint16_t>(std::max(0.0, cm));
}

inline std::string frame_name(const char* prefix, std::uint32_t iteration) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05u.png", prefix, iteration);
    return buf;
}

/// Writes frame_{i:05}.png (RGB8), mask_{i:05}.png (gray8, 0/255) and depth_{i:05}.png (gray16 cm).
inline void export_frame(const PanoFrame& frame, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto i = frame.viewpoint.iteration;
    const Image8 rgb = quantize(frame.rgb);
    write_file((dir / frame_name("frame", i)).string(),
               encode_png(frame.width(), frame.height(), 3, 8, rgb.data().data()));
    std::vector<std::uint8_t> mask(frame.mask.pixel_count());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = frame.mask.data()[k] ? 255 : 0;
    write_file((dir / frame_name("mask", i)).string(), encode_png(frame.width(), frame.height(), 1, 8, mask.data()));
    std::vector<std::uint16_t> depth(frame.depth.pixel_count());
    for (std::size_t k = 0; k < depth.size(); ++k) depth[k] = encode_depth_cm(frame.depth.data()[k]);
    write_file((dir / frame_name("depth", i)).string(), encode_png(frame.width(), frame.height(), 1, 16, depth.data()));
}

} // namespace put
