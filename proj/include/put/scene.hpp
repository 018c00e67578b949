#pragma once

#include "put/math.hpp"
#include "put/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace put {

/// Input could not be parsed. `line()` is 1-based, or 0 when no line applies.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

using Triangle = std::array<std::uint32_t, 3>;

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Triangle> faces;
    /// One UV triple per face, in the face's corner order.
    std::vector<std::array<Vec2, 3>> uv_corners;
    /// Optional per-vertex unit normals; empty means geometric face normals are used.
    std::vector<Vec3> normals;

    std::size_t face_count() const { return faces.size(); }

    std::array<Vec3, 3> corners(std::size_t face) const {
        const auto& f = faces[face];
        return {vertices[f[0]], vertices[f[1]], vertices[f[2]]};
    }

    /// Unit geometric normal following the corner winding; +z for degenerate faces.
    Vec3 face_normal(std::size_t face) const {
        const auto [a, b, c] = corners(face);
        const Vec3 n = cross(b - a, c - a);
        const double len = length(n);
        return len > 0.0 ? n * (1.0 / len) : world_up;
    }

    /// Throws std::invalid_argument when an invariant does not hold. An empty mesh is valid here;
    /// load_mesh() additionally rejects inputs with no faces.
    void validate() const {
        if (uv_corners.size() != faces.size())
            throw std::invalid_argument("mesh: uv_corners size differs from face count");
        if (!normals.empty() && normals.size() != vertices.size())
            throw std::invalid_argument("mesh: normals size differs from vertex count");
        for (const auto& v : vertices)
            if (!is_finite(v)) throw std::invalid_argument("mesh: non-finite vertex");
        for (const auto& f : faces)
            for (auto i : f)
                if (i >= vertices.size()) throw std::invalid_argument("mesh: vertex index out of range");
        for (const auto& uvs : uv_corners)
            for (const auto& uv : uvs)
                if (!(uv.u >= 0.0 && uv.u <= 1.0 && uv.v >= 0.0 && uv.v <= 1.0))
                    throw std::invalid_argument("mesh: uv outside [0,1]");
    }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
    double value = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value))
        throw ParseError("invalid number '" + std::string(tok) + "'", line);
    return value;
}

inline long parse_index(std::string_view tok, std::size_t count, std::size_t line, const char* what) {
    long value = 0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (ec != std::errc() || ptr != end || value == 0)
        throw ParseError(std::string("invalid ") + what + " index '" + std::string(tok) + "'", line);
    // OBJ indices are 1-based; negative values count back from the latest record.
    const long resolved = value > 0 ? value - 1 : static_cast<long>(count) + value;
    if (resolved < 0 || static_cast<std::size_t>(resolved) >= count)
        throw ParseError(std::string(what) + " index " + std::string(tok) + " out of range", line);
    return resolved;
}

inline double wrap_uv(double t) {
    if (t >= 0.0 && t <= 1.0) return t;
    return t - std::floor(t);
}

} // namespace detail

/// Parses Wavefront OBJ text (`v`, `vt`, `vn`, `f`). Polygons are fan-triangulated; UVs outside
/// [0,1] are wrapped to their fractional part. Other record types are ignored.
inline Mesh load_mesh(std::string_view text) {
    Mesh mesh;
    std::vector<Vec2> uvs;
    std::vector<Vec3> vns;
    std::vector<std::optional<Vec3>> vertex_normals;
    bool any_normal = false;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        const auto key = toks[0];

        if (key == "v") {
            if (toks.size() < 4 || toks.size() > 5) throw ParseError("malformed vertex record", line_no);
            mesh.vertices.push_back({detail::parse_double(toks[1], line_no),
                                     detail::parse_double(toks[2], line_no),
                                     detail::parse_double(toks[3], line_no)});
            vertex_normals.emplace_back();
        } else if (key == "vt") {
            if (toks.size() < 3 || toks.size() > 4) throw ParseError("malformed texture coordinate record", line_no);
            uvs.push_back({detail::wrap_uv(detail::parse_double(toks[1], line_no)),
                           detail::wrap_uv(detail::parse_double(toks[2], line_no))});
        } else if (key == "vn") {
            if (toks.size() != 4) throw ParseError("malformed normal record", line_no);
            vns.push_back({detail::parse_double(toks[1], line_no), detail::parse_double(toks[2], line_no),
                           detail::parse_double(toks[3], line_no)});
        } else if (key == "f") {
            if (toks.size() < 4) throw ParseError("face with fewer than 3 corners", line_no);
            std::vector<std::uint32_t> vi;
            std::vector<Vec2> ti;
            for (std::size_t k = 1; k < toks.size(); ++k) {
                const auto tok = toks[k];
                const auto s1 = tok.find('/');
                const auto vpart = tok.substr(0, s1);
                vi.push_back(static_cast<std::uint32_t>(
                    detail::parse_index(vpart, mesh.vertices.size(), line_no, "vertex")));
                if (s1 == std::string_view::npos) throw ParseError("mesh not unwrapped", line_no);
                const auto rest = tok.substr(s1 + 1);
                const auto s2 = rest.find('/');
                const auto tpart = rest.substr(0, s2);
                if (tpart.empty()) throw ParseError("mesh not unwrapped", line_no);
                ti.push_back(uvs[detail::parse_index(tpart, uvs.size(), line_no, "texture coordinate")]);
                if (s2 != std::string_view::npos && s2 + 1 < rest.size()) {
                    const auto n = vns[detail::parse_index(rest.substr(s2 + 1), vns.size(), line_no, "normal")];
                    vertex_normals[vi.back()] = n;
                    any_normal = true;
                }
            }
            for (std::size_t k = 1; k + 1 < vi.size(); ++k) {
                mesh.faces.push_back({vi[0], vi[k], vi[k + 1]});
                mesh.uv_corners.push_back({ti[0], ti[k], ti[k + 1]});
            }
        }
    }
    if (mesh.faces.empty()) throw ParseError("mesh has no faces");

    if (any_normal) {
        mesh.normals.resize(mesh.vertices.size());
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const Vec3 n = vertex_normals[i].value_or(Vec3{});
            const double len = length(n);
            mesh.normals[i] = len > 0.0 ? n * (1.0 / len) : Vec3{};
        }
        // Vertices without a usable normal fall back to the area-weighted face normal.
        std::vector<Vec3> accum(mesh.vertices.size());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto [a, b, c] = mesh.corners(f);
            const Vec3 n = cross(b - a, c - a);
            for (auto v : mesh.faces[f]) accum[v] += n;
        }
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            if (length(mesh.normals[i]) > 0.0) continue;
            const double len = length(accum[i]);
            mesh.normals[i] = len > 0.0 ? accum[i] * (1.0 / len) : world_up;
        }
    }
    mesh.validate();
    return mesh;
}

/// Writes one `vt` per face corner so per-face UVs survive a round trip through load_mesh().
inline std::string write_obj(const Mesh& mesh) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& uvs : mesh.uv_corners)
        for (const auto& uv : uvs) out << "vt " << uv.u << ' ' << uv.v << '\n';
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        out << 'f';
        for (int k = 0; k < 3; ++k) out << ' ' << mesh.faces[f][k] + 1 << '/' << 3 * f + k + 1;
        out << '\n';
    }
    return out.str();
}

struct TexelEntry {
    std::uint32_t texel = 0; ///< linear atlas index ty * width + tx
    Vec3 point;              ///< surface point p_t, meters
    Vec3 normal;             ///< unit surface normal at p_t
    std::uint32_t face = 0;
};

/// Partial map from atlas texel centers to surface points. Texel (tx, ty) has its center at
/// uv = ((tx + 0.5) / width, (ty + 0.5) / height); row ty grows with v.
class TexelMap {
public:
    static constexpr std::int32_t absent = -1;

    TexelMap() = default;
    TexelMap(int width, int height) : width_(width), height_(height),
        slot_(static_cast<std::size_t>(width) * height, absent) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t texel_count() const { return slot_.size(); }
    const std::vector<TexelEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    const TexelEntry* find(std::uint32_t texel) const {
        if (texel >= slot_.size() || slot_[texel] == absent) return nullptr;
        return &entries_[static_cast<std::size_t>(slot_[texel])];
    }
    const TexelEntry* find(int tx, int ty) const {
        if (tx < 0 || ty < 0 || tx >= width_ || ty >= height_) return nullptr;
        return find(static_cast<std::uint32_t>(ty) * width_ + tx);
    }

    /// UV island of a face: faces sharing an edge with identical UVs on both endpoints
    /// belong to the same island.
    std::uint32_t island_of_face(std::uint32_t face) const { return face_island_[face]; }
    std::optional<std::uint32_t> island_of_texel(std::uint32_t texel) const {
        const auto* e = find(texel);
        if (!e) return std::nullopt;
        return face_island_[e->face];
    }

    Vec2 texel_center_uv(std::uint32_t texel) const {
        const auto tx = texel % static_cast<std::uint32_t>(width_);
        const auto ty = texel / static_cast<std::uint32_t>(width_);
        return {(tx + 0.5) / width_, (ty + 0.5) / height_};
    }

private:
    friend TexelMap build_texel_map(const Mesh&, int, int, unsigned);

    int width_ = 0;
    int height_ = 0;
    std::vector<std::int32_t> slot_;
    std::vector<TexelEntry> entries_;
    std::vector<std::uint32_t> face_island_;
};

namespace detail {

/// Island labels from union-find over UV-consistent shared edges; labels are assigned in order
/// of each island's lowest face id.
inline std::vector<std::uint32_t> uv_islands(const Mesh& mesh) {
    const std::size_t n = mesh.faces.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    using Corner = std::tuple<std::uint32_t, double, double>;
    std::map<std::pair<Corner, Corner>, std::uint32_t> first_face;
    for (std::uint32_t f = 0; f < n; ++f) {
        for (int k = 0; k < 3; ++k) {
            Corner a{mesh.faces[f][k], mesh.uv_corners[f][k].u, mesh.uv_corners[f][k].v};
            Corner b{mesh.faces[f][(k + 1) % 3], mesh.uv_corners[f][(k + 1) % 3].u,
                     mesh.uv_corners[f][(k + 1) % 3].v};
            if (b < a) std::swap(a, b);
            auto [it, inserted] = first_face.try_emplace({a, b}, f);
            if (!inserted) {
                const auto ra = find(it->second), rb = find(f);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::vector<std::uint32_t> label(n), root_label(n, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next = 0;
    for (std::uint32_t f = 0; f < n; ++f) {
        const auto r = find(f);
        if (root_label[r] == std::numeric_limits<std::uint32_t>::max()) root_label[r] = next++;
        label[f] = root_label[r];
    }
    return label;
}

} // namespace detail

/// Rasterizes every UV triangle at texel centers. Where UV triangles overlap, the lowest face id
/// wins. Degenerate UV triangles cover nothing. The result does not depend on `threads`.
inline TexelMap build_texel_map(const Mesh& mesh, int atlas_width, int atlas_height, unsigned threads = 0) {
    if (atlas_width < 1 || atlas_height < 1) throw std::invalid_argument("atlas dimensions must be >= 1");
    mesh.validate();

    TexelMap map(atlas_width, atlas_height);
    map.face_island_ = detail::uv_islands(mesh);

    constexpr auto none = std::numeric_limits<std::uint32_t>::max();
    const std::size_t texels = map.texel_count();
    std::vector<std::uint32_t> owner(texels, none);

    // Faces are rasterized in chunks; each chunk records (texel, face) candidates locally and the
    // sequential merge keeps the minimum face id, so the result is independent of chunking.
    const std::size_t face_count = mesh.faces.size();
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(1, face_count)));
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> candidates(workers);
    const std::size_t chunk = (face_count + workers - 1) / std::max(1u, workers);
    parallel_for(workers, workers, [&](std::size_t wb, std::size_t we) {
        for (std::size_t w = wb; w < we; ++w) {
            auto& out = candidates[w];
            const std::size_t fb = w * chunk, fe = std::min(face_count, fb + chunk);
            for (std::size_t f = fb; f < fe; ++f) {
                const auto& uv = mesh.uv_corners[f];
                const Vec2 a{uv[0].u * atlas_width, uv[0].v * atlas_height};
                const Vec2 b{uv[1].u * atlas_width, uv[1].v * atlas_height};
                const Vec2 c{uv[2].u * atlas_width, uv[2].v * atlas_height};
                const double area = cross(b - a, c - a);
                if (std::abs(area) < 1e-12) continue;
                const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.u, b.u, c.u}) - 0.5)));
                const int x1 = std::min(atlas_width - 1, static_cast<int>(std::ceil(std::max({a.u, b.u, c.u}) - 0.5)));
                const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.v, b.v, c.v}) - 0.5)));
                const int y1 = std::min(atlas_height - 1, static_cast<int>(std::ceil(std::max({a.v, b.v, c.v}) - 0.5)));
                for (int ty = y0; ty <= y1; ++ty) {
                    for (int tx = x0; tx <= x1; ++tx) {
                        const Vec2 p{tx + 0.5, ty + 0.5};
                        const double w0 = cross(b - p, c - p) / area;
                        const double w1 = cross(c - p, a - p) / area;
                        const double w2 = 1.0 - w0 - w1;
                        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                        out.emplace_back(static_cast<std::uint32_t>(ty) * atlas_width + tx,
                                         static_cast<std::uint32_t>(f));
                    }
                }
            }
        }
    });
    for (const auto& list : candidates)
        for (auto [texel, face] : list) owner[texel] = std::min(owner[texel], face);

    for (std::uint32_t t = 0; t < texels; ++t) {
        if (owner[t] == none) continue;
        map.slot_[t] = static_cast<std::int32_t>(map.entries_.size());
        map.entries_.push_back({t, {}, {}, owner[t]});
    }

    parallel_for(map.entries_.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto& e = map.entries_[i];
            const Vec2 p = map.texel_center_uv(e.texel);
            const auto& uv = mesh.uv_corners[e.face];
            const double area = cross(uv[1] - uv[0], uv[2] - uv[0]);
            const double w0 = cross(uv[1] - p, uv[2] - p) / area;
            const double w1 = cross(uv[2] - p, uv[0] - p) / area;
            const double w2 = 1.0 - w0 - w1;
            const auto [pa, pb, pc] = mesh.corners(e.face);
            e.point = pa * w0 + pb * w1 + pc * w2;
            if (mesh.normals.empty()) {
                e.normal = mesh.face_normal(e.face);
            } else {
                const auto& f = mesh.faces[e.face];
                const Vec3 n = mesh.normals[f[0]] * w0 + mesh.normals[f[1]] * w1 + mesh.normals[f[2]] * w2;
                const double len = length(n);
                e.normal = len > 0.0 ? n * (1.0 / len) : mesh.face_normal(e.face);
            }
        }
    });
    return map;
}

struct StreetGraph {
    std::vector<std::vector<Vec3>> polylines;
};

/// Parses a JSON array of polylines, each an array of [x, y, z] points in meters. Consecutive
/// duplicate points are collapsed.
inline StreetGraph load_streets(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("streets: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("streets: expected an array of polylines");
    StreetGraph graph;
    for (std::size_t p = 0; p < doc.size(); ++p) {
        const auto& poly = doc[p];
        if (!poly.is_array() || poly.empty())
            throw ParseError("streets: polyline " + std::to_string(p) + " must be a non-empty array");
        std::vector<Vec3> points;
        for (const auto& pt : poly) {
            if (!pt.is_array() || pt.size() != 3)
                throw ParseError("streets: polyline " + std::to_string(p) + " has a point that is not [x,y,z]");
            Vec3 v;
            for (std::size_t k = 0; k < 3; ++k) {
                if (!pt[k].is_number())
                    throw ParseError("streets: non-numeric coordinate in polyline " + std::to_string(p));
                v[k] = pt[k].get<double>();
            }
            if (!is_finite(v)) throw ParseError("streets: non-finite coordinate");
            if (points.empty() || !(points.back() == v)) points.push_back(v);
        }
        graph.polylines.push_back(std::move(points));
    }
    return graph;
}

inline std::string write_streets(const StreetGraph& graph) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& poly : graph.polylines) {
        nlohmann::json p = nlohmann::json::array();
        for (const auto& v : poly) p.push_back({v.x, v.y, v.z});
        doc.push_back(std::move(p));
    }
    return doc.dump();
}

} // namespace put
