#include "test_scenes.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace put;
using put::fixtures::add_quad;

namespace {

constexpr const char* quad_obj = R"(# unit quad
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3 4/4
)";

Mesh unit_square(double size = 1.0) {
    Mesh m;
    add_quad(m, {0, 0, 0}, {size, 0, 0}, {size, size, 0}, {0, size, 0}, 0, 0, 1, 1);
    return m;
}

} // namespace

TEST(LoadMesh, QuadIsFanTriangulated) {
    const Mesh m = load_mesh(quad_obj);
    ASSERT_EQ(m.face_count(), 2u);
    EXPECT_EQ(m.vertices.size(), 4u);
    EXPECT_EQ(m.faces[0], (Triangle{0, 1, 2}));
    EXPECT_EQ(m.faces[1], (Triangle{0, 2, 3}));
    EXPECT_DOUBLE_EQ(m.uv_corners[1][2].u, 0.0);
    EXPECT_DOUBLE_EQ(m.uv_corners[1][2].v, 1.0);
    EXPECT_TRUE(m.normals.empty());
}

TEST(LoadMesh, NegativeIndicesAndNormals) {
    const Mesh m = load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 2\nf -3/-3/1 -2/-2/1 -1/-1/1\n");
    ASSERT_EQ(m.face_count(), 1u);
    EXPECT_EQ(m.faces[0], (Triangle{0, 1, 2}));
    ASSERT_EQ(m.normals.size(), 3u);
    EXPECT_DOUBLE_EQ(m.normals[0].z, 1.0);
}

TEST(LoadMesh, WrapsUvIntoUnitRange) {
    const Mesh m = load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 1.25 -0.25\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
    EXPECT_NEAR(m.uv_corners[0][0].u, 0.25, 1e-12);
    EXPECT_NEAR(m.uv_corners[0][0].v, 0.75, 1e-12);
    EXPECT_DOUBLE_EQ(m.uv_corners[0][1].u, 1.0);
}

TEST(LoadMesh, FaceWithoutUvIsRejected) {
    try {
        load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("mesh not unwrapped"), std::string::npos);
    }
    EXPECT_THROW(load_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n"), ParseError);
}

TEST(LoadMesh, MalformedInputs) {
    EXPECT_THROW(load_mesh(""), ParseError);
    EXPECT_THROW(load_mesh("v 0 0\n"), ParseError);
    EXPECT_THROW(load_mesh("v 0 0 zero\nvt 0 0\nf 1/1 1/1 1/1\n"), ParseError);
    EXPECT_THROW(load_mesh("v 0 0 0\nvt 0 0\nf 1/1 2/1 1/1\n"), ParseError);
    EXPECT_THROW(load_mesh("v 0 0 0\nv 1 0 0\nvt 0 0\nf 1/1 2/1\n"), ParseError);
}

TEST(LoadMesh, WriteObjRoundTrip) {
    const Mesh a = load_mesh(quad_obj);
    const Mesh b = load_mesh(write_obj(a));
    ASSERT_EQ(a.face_count(), b.face_count());
    for (std::size_t f = 0; f < a.face_count(); ++f) {
        EXPECT_EQ(a.faces[f], b.faces[f]);
        for (int k = 0; k < 3; ++k) {
            EXPECT_DOUBLE_EQ(a.uv_corners[f][k].u, b.uv_corners[f][k].u);
            EXPECT_DOUBLE_EQ(a.uv_corners[f][k].v, b.uv_corners[f][k].v);
        }
    }
}

TEST(TexelMap, FourByFourQuadMapsEveryTexelBilinearly) {
    const Mesh m = load_mesh(quad_obj);
    const TexelMap map = build_texel_map(m, 4, 4, 1);
    ASSERT_EQ(map.size(), 16u);
    for (int ty = 0; ty < 4; ++ty)
        for (int tx = 0; tx < 4; ++tx) {
            const TexelEntry* e = map.find(tx, ty);
            ASSERT_NE(e, nullptr);
            EXPECT_NEAR(e->point.x, (tx + 0.5) / 4, 1e-12);
            EXPECT_NEAR(e->point.y, (ty + 0.5) / 4, 1e-12);
            EXPECT_NEAR(e->point.z, 0.0, 1e-12);
            EXPECT_NEAR(e->normal.z, 1.0, 1e-12);
        }
    // Entries are ordered by texel index.
    for (std::size_t i = 1; i < map.size(); ++i) EXPECT_LT(map.entries()[i - 1].texel, map.entries()[i].texel);
}

TEST(TexelMap, ZeroAreaUvFaceContributesNothing) {
    Mesh m = unit_square();
    m.uv_corners[1] = {Vec2{0.5, 0.5}, Vec2{0.5, 0.5}, Vec2{0.5, 0.5}};
    const TexelMap map = build_texel_map(m, 8, 8, 1);
    for (const auto& e : map.entries()) EXPECT_EQ(e.face, 0u);
    // Face 0 covers the lower-right half including its diagonal: 8*9/2 texel centers.
    EXPECT_EQ(map.size(), 36u);
}

TEST(TexelMap, BarycentricPointsReprojectToTexelCenters) {
    Mesh m;
    m.vertices = {{0, 0, 0}, {3, 1, 0.5}, {0.5, 2, 4}};
    m.faces = {{0, 1, 2}};
    m.uv_corners = {{Vec2{0.1, 0.1}, Vec2{0.9, 0.2}, Vec2{0.3, 0.95}}};
    const TexelMap map = build_texel_map(m, 64, 64, 1);
    ASSERT_GT(map.size(), 100u);
    // Invert the affine UV -> position map independently with a 2x2 solve in UV space.
    const Vec3 e1 = m.vertices[1] - m.vertices[0], e2 = m.vertices[2] - m.vertices[0];
    const Vec2 f1 = m.uv_corners[0][1] - m.uv_corners[0][0], f2 = m.uv_corners[0][2] - m.uv_corners[0][0];
    const double det = f1.u * f2.v - f2.u * f1.v;
    for (const auto& e : map.entries()) {
        const Vec2 uv = map.texel_center_uv(e.texel);
        const double du = uv.u - m.uv_corners[0][0].u, dv = uv.v - m.uv_corners[0][0].v;
        const double a = (du * f2.v - f2.u * dv) / det;
        const double b = (f1.u * dv - du * f1.v) / det;
        EXPECT_GE(a, -1e-12);
        EXPECT_GE(b, -1e-12);
        EXPECT_LE(a + b, 1.0 + 1e-12);
        const Vec3 expected = m.vertices[0] + e1 * a + e2 * b;
        EXPECT_NEAR(length(e.point - expected), 0.0, 1e-9);
    }
}

TEST(TexelMap, OverlappingFacesResolveToLowestFaceId) {
    Mesh m = unit_square();
    add_quad(m, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}, 0, 0, 1, 1);
    const TexelMap map = build_texel_map(m, 16, 16, 3);
    for (const auto& e : map.entries()) {
        EXPECT_LT(e.face, 2u);
        EXPECT_NEAR(e.point.z, 0.0, 1e-12);
    }
}

TEST(TexelMap, IdenticalAcrossThreadCounts) {
    const auto scene = make_demo_scene(256, 32.0);
    const TexelMap a = build_texel_map(scene.mesh, 256, 256, 1);
    for (unsigned threads : {2u, 3u, 8u}) {
        const TexelMap b = build_texel_map(scene.mesh, 256, 256, threads);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a.entries()[i].texel, b.entries()[i].texel);
            EXPECT_EQ(a.entries()[i].face, b.entries()[i].face);
            EXPECT_EQ(a.entries()[i].point, b.entries()[i].point);
        }
    }
}

TEST(TexelMap, CoverageGrowsWithResolution) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    for (int trial = 0; trial < 20; ++trial) {
        Mesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        m.faces = {{0, 1, 2}};
        m.uv_corners = {{Vec2{uni(rng), uni(rng)}, Vec2{uni(rng), uni(rng)}, Vec2{uni(rng), uni(rng)}}};
        std::size_t prev = 0;
        for (int res : {16, 32, 64, 128}) {
            const std::size_t n = build_texel_map(m, res, res, 1).size();
            if (res > 16) {
                EXPECT_GE(n + 2, prev) << "resolution " << res;
            }
            prev = n;
        }
        // Coverage approximates the UV area times the texel count.
        const auto& uv = m.uv_corners[0];
        const double area = std::abs(cross(uv[1] - uv[0], uv[2] - uv[0])) / 2.0;
        EXPECT_NEAR(static_cast<double>(prev) / (128.0 * 128.0), area, 0.02);
    }
}

TEST(TexelMap, IslandsFollowSharedUvEdges) {
    Mesh m = unit_square();
    // A second quad sharing vertex positions but not UVs is a separate island.
    add_quad(m, {1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {1, 1, 0}, 0.5, 0.5, 0.9, 0.9);
    const TexelMap map = build_texel_map(m, 8, 8, 1);
    EXPECT_EQ(map.island_of_face(0), map.island_of_face(1));
    EXPECT_NE(map.island_of_face(0), map.island_of_face(2));
    EXPECT_EQ(map.island_of_face(2), map.island_of_face(3));
}

TEST(Streets, ParsesAndCollapsesDuplicates) {
    const auto g = load_streets("[[[0,0,0],[0,0,0],[10,0,0]],[[1,2,3]]]");
    ASSERT_EQ(g.polylines.size(), 2u);
    EXPECT_EQ(g.polylines[0].size(), 2u);
    EXPECT_EQ(g.polylines[1][0], (Vec3{1, 2, 3}));
    const auto again = load_streets(write_streets(g));
    EXPECT_EQ(again.polylines, g.polylines);
}

TEST(Streets, RejectsMalformedDocuments) {
    EXPECT_THROW(load_streets("{"), ParseError);
    EXPECT_THROW(load_streets("{}"), ParseError);
    EXPECT_THROW(load_streets("[[]]"), ParseError);
    EXPECT_THROW(load_streets("[[[0,0]]]"), ParseError);
    EXPECT_THROW(load_streets("[[[0,\"a\",0]]]"), ParseError);
    EXPECT_EQ(load_streets("[]").polylines.size(), 0u);
}
