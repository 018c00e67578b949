#pragma once

#include "put/atlas.hpp"
#include "put/image.hpp"
#include "put/png_io.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace put {

/// RGBA8 atlas image. Texel row ty is written to image row height-1-ty so that v points up;
/// texels without contributions are fully transparent black.
inline std::vector<std::uint8_t> encode_atlas_png(const TextureAtlas& atlas) {
    const int w = atlas.width(), h = atlas.height();
    std::vector<std::uint8_t> rgba(static_cast<std::size_t>(w) * h * 4, 0);
    for (int ty = 0; ty < h; ++ty) {
        std::uint8_t* row = rgba.data() + static_cast<std::size_t>(h - 1 - ty) * w * 4;
        for (int tx = 0; tx < w; ++tx) {
            const auto t = static_cast<std::uint32_t>(ty) * w + tx;
            if (!atlas.textured(t)) continue;
            const Color c = atlas.color(t);
            for (int k = 0; k < 3; ++k) row[4 * tx + k] = to_byte(c[k]);
            row[4 * tx + 3] = 255;
        }
    }
    return encode_png(w, h, 4, 8, rgba.data());
}

inline nlohmann::json atlas_sidecar(const TextureAtlas& atlas) {
    return {{"mode", std::string(to_string(atlas.mode()))},
            {"clamp", {atlas.clamp().lo, atlas.clamp().hi}},
            {"iterations", atlas.iterations_applied()},
            {"width", atlas.width()},
            {"height", atlas.height()}};
}

/// Writes atlas.png and atlas.json into `dir`.
inline void export_atlas(const TextureAtlas& atlas, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file((dir / "atlas.png").string(), encode_atlas_png(atlas));
    write_file((dir / "atlas.json").string(), atlas_sidecar(atlas).dump(2) + "\n");
}

namespace detail {

inline constexpr char atlas_state_magic[8] = {'P', 'U', 'T', 'A', 'T', 'L', 'S', '1'};

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get_raw(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("atlas state: truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace detail

/// Full ledger snapshot (host byte order) used to resume an interrupted bake.
inline std::vector<std::uint8_t> serialize_atlas_state(const TextureAtlas& atlas) {
    std::vector<std::uint8_t> out(std::begin(detail::atlas_state_magic), std::end(detail::atlas_state_magic));
    detail::put_raw(out, static_cast<std::int32_t>(atlas.width()));
    detail::put_raw(out, static_cast<std::int32_t>(atlas.height()));
    detail::put_raw(out, static_cast<std::int32_t>(atlas.mode()));
    detail::put_raw(out, atlas.clamp().lo);
    detail::put_raw(out, atlas.clamp().hi);
    detail::put_raw(out, atlas.iterations_applied());
    detail::put_raw(out, static_cast<std::uint64_t>(atlas.textured_count()));
    for (std::uint32_t t = 0; t < atlas.texel_count(); ++t) {
        if (!atlas.textured(t)) continue;
        const auto list = atlas.contributions(t);
        detail::put_raw(out, t);
        detail::put_raw(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& c : list) {
            detail::put_raw(out, c.iteration);
            for (float v : c.color) detail::put_raw(out, v);
            detail::put_raw(out, c.distance);
        }
    }
    return out;
}

inline TextureAtlas deserialize_atlas_state(const std::vector<std::uint8_t>& in) {
    if (in.size() < 8 || std::memcmp(in.data(), detail::atlas_state_magic, 8) != 0)
        throw std::runtime_error("atlas state: bad magic");
    std::size_t pos = 8;
    const auto w = detail::get_raw<std::int32_t>(in, pos);
    const auto h = detail::get_raw<std::int32_t>(in, pos);
    const auto mode = detail::get_raw<std::int32_t>(in, pos);
    if (mode < 0 || mode > 2) throw std::runtime_error("atlas state: bad blend mode");
    WeightClamp clamp;
    clamp.lo = detail::get_raw<double>(in, pos);
    clamp.hi = detail::get_raw<double>(in, pos);
    const auto applied = detail::get_raw<std::uint32_t>(in, pos);
    const auto count = detail::get_raw<std::uint64_t>(in, pos);
    TextureAtlas atlas(w, h, static_cast<BlendMode>(mode), clamp);
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto texel = detail::get_raw<std::uint32_t>(in, pos);
        const auto n = detail::get_raw<std::uint32_t>(in, pos);
        std::vector<Contribution> list(n);
        for (auto& c : list) {
            c.iteration = detail::get_raw<std::uint32_t>(in, pos);
            for (float& v : c.color) v = detail::get_raw<float>(in, pos);
            c.distance = detail::get_raw<double>(in, pos);
        }
        atlas.restore(texel, std::move(list));
    }
    if (pos != in.size()) throw std::runtime_error("atlas state: trailing bytes");
    atlas.set_iterations_applied(applied);
    return atlas;
}

} // namespace put
