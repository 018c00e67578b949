#include "test_scenes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace put;
using put::fixtures::add_quad;

namespace {

Moments gaussian(std::vector<double> mean, std::vector<std::vector<double>> cov) {
    Moments m;
    const auto n = static_cast<Eigen::Index>(mean.size());
    m.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), n);
    m.cov.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m.cov(i, j) = cov[i][j];
    return m;
}

} // namespace

TEST(Consistency, MaskedMeanAbsoluteDifference) {
    ImageF gen(2, 2, 3, 0.5f), partial(2, 2, 3, 0.5f);
    Image8 mask(2, 2, 1, 0);
    EXPECT_EQ(interframe_consistency(gen, partial, mask), 0.0);
    gen.at(0, 0, 0) = 0.8f;
    gen.at(1, 1, 2) = 0.0f;
    EXPECT_EQ(interframe_consistency(gen, partial, mask), 0.0);
    mask.at(0, 0) = 1;
    EXPECT_NEAR(interframe_consistency(gen, partial, mask), 0.3 / 3.0, 1e-7);
    mask.at(1, 1) = 1;
    EXPECT_NEAR(interframe_consistency(gen, partial, mask), (0.3 + 0.5) / 6.0, 1e-7);
    EXPECT_THROW(interframe_consistency(ImageF(3, 2, 3), partial, mask), std::invalid_argument);
}

TEST(Frechet, IdenticalSetsScoreZero) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    FeatureSet f;
    f.vectors.resize(200, 8);
    for (Eigen::Index i = 0; i < f.vectors.size(); ++i) f.vectors.data()[i] = n(rng);
    EXPECT_NEAR(frechet_distance(f, f), 0.0, 1e-6);
}

TEST(Frechet, DiagonalGaussiansMatchClosedForm) {
    const auto a = gaussian({0, 0}, {{1, 0}, {0, 4}});
    const auto b = gaussian({1, 2}, {{4, 0}, {0, 1}});
    // |mu gap|^2 = 5; per axis (sigma_a - sigma_b)^2 = 1 + 1.
    EXPECT_NEAR(frechet_distance(a, b), 7.0, 1e-9);
    EXPECT_NEAR(frechet_distance(b, a), 7.0, 1e-9);
}

TEST(Frechet, NonCommutingCovariancesMatchTwoByTwoTrace) {
    const auto a = gaussian({0, 0}, {{2, 1}, {1, 2}});
    const auto b = gaussian({0, 0}, {{1, 0}, {0, 3}});
    // For a 2x2 matrix with positive eigenvalues, tr sqrt(M) = sqrt(tr M + 2 sqrt(det M)).
    const double tr_m = 2 * 1 + 2 * 3, det_m = (4 - 1) * 3;
    const double expected = (2 + 2) + (1 + 3) - 2 * std::sqrt(tr_m + 2 * std::sqrt(det_m));
    EXPECT_NEAR(frechet_distance(a, b), expected, 1e-9);
}

TEST(Frechet, RejectsDegenerateInput) {
    FeatureSet one;
    one.vectors = Eigen::MatrixXd::Zero(1, 4);
    EXPECT_THROW(frechet_distance(one, one), std::invalid_argument);
    FeatureSet a, b;
    a.vectors = Eigen::MatrixXd::Random(5, 3);
    b.vectors = Eigen::MatrixXd::Random(5, 4);
    EXPECT_THROW(frechet_distance(a, b), std::invalid_argument);
    // Singular covariances are allowed: constant features give zero covariance.
    FeatureSet c;
    c.vectors = Eigen::MatrixXd::Constant(4, 2, 3.0);
    EXPECT_NEAR(frechet_distance(c, c), 0.0, 1e-12);
}

TEST(Features, ConstantImageGivesConstantVector) {
    const ImageF img(512, 256, 3, 0.25f);
    for (double v : builtin_features(img)) EXPECT_NEAR(v, 0.25, 1e-7);
    EXPECT_THROW(builtin_features(ImageF(7, 4, 3)), std::invalid_argument);
}

TEST(Features, BlocksAverageGrayscale) {
    ImageF img(16, 8, 3, 0.0f);
    // Block (1, 0) spans x in [2,4), y in [0,2): make one of its four pixels white.
    for (int c = 0; c < 3; ++c) img.at(3, 1, c) = 1.0f;
    img.at(0, 7, 0) = 0.9f; // block (0, 3), red only
    const auto f = builtin_features(img);
    EXPECT_NEAR(f[1], 0.25, 1e-7);
    EXPECT_NEAR(f[3 * 8 + 0], 0.9 / 3.0 / 4.0, 1e-7);
    double rest = 0;
    for (int k = 0; k < 32; ++k)
        if (k != 1 && k != 24) rest += f[k];
    EXPECT_EQ(rest, 0.0);
}

TEST(Features, TextRoundTripAndValidation) {
    std::vector<ImageF> imgs;
    for (int i = 0; i < 3; ++i) imgs.emplace_back(32, 16, 3, 0.1f * i);
    const auto f = extract_features(imgs);
    EXPECT_EQ(f.n(), 3u);
    EXPECT_EQ(f.dim(), 32u);
    const auto back = load_features(write_features(f), 3);
    EXPECT_EQ(back.vectors, f.vectors);
    EXPECT_THROW(load_features("1 2\n3\n"), ParseError);
    EXPECT_THROW(load_features("1 2\n3 4\n", 3), ParseError);
    EXPECT_THROW(load_features("1 x\n"), ParseError);
    EXPECT_EQ(load_features("\n1 2\n\n3 4\n").n(), 2u);
}

TEST(Crop, KeepsFacadeBand) {
    ImageF pano(8, 256, 1);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 8; ++x) pano.at(x, y) = static_cast<float>(y);
    const auto c = crop_facades(pano);
    EXPECT_EQ(c.height(), 160 - 64);
    EXPECT_EQ(c.at(0, 0), 64.0f);
    EXPECT_EQ(c.at(7, c.height() - 1), 159.0f);
    const auto d = crop_facades(ImageF(4, 10, 3), {0.25, 0.625});
    EXPECT_EQ(d.height(), 6 - 2);
    EXPECT_THROW(crop_facades(pano, {0.6, 0.5}), std::invalid_argument);
    EXPECT_THROW(crop_facades(ImageF(4, 2, 3), {0.1, 0.2}), std::invalid_argument);
}

TEST(Seam, MaxJumpWithinIslandsOnly) {
    Mesh m;
    add_quad(m, {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, 0.0, 0.0, 0.5, 1.0);
    add_quad(m, {1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {1, 1, 0}, 0.5, 0.0, 1.0, 1.0);
    const TexelMap map = build_texel_map(m, 4, 2, 1);
    ASSERT_EQ(map.size(), 8u);
    TextureAtlas atlas(4, 2, BlendMode::average);
    EXPECT_EQ(seam_metric(atlas, map), 0.0);
    // Island 0 is columns 0-1, island 1 columns 2-3. A jump across the island border is ignored.
    std::vector<TexelSample> s;
    for (std::uint32_t t : {0u, 1u, 4u, 5u}) s.push_back({t, {0.2f, 0.2f, 0.2f}, 1});
    for (std::uint32_t t : {2u, 3u, 6u, 7u}) s.push_back({t, {0.9f, 0.9f, 0.9f}, 1});
    atlas.update(s, 0);
    EXPECT_EQ(seam_metric(atlas, map), 0.0);
    atlas.update(std::vector<TexelSample>{{5, {0.2f, 0.6f, 0.2f}, 1}}, 1);
    // Texel 5 now averages to green 0.4; its in-island neighbours stay at 0.2.
    EXPECT_NEAR(seam_metric(atlas, map), 0.2, 1e-6);
    EXPECT_THROW(seam_metric(TextureAtlas(2, 2), map), std::invalid_argument);
}

TEST(Seam, UntexturedNeighboursDoNotCount) {
    Mesh m;
    add_quad(m, {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, 0.0, 0.0, 1.0, 1.0);
    const TexelMap map = build_texel_map(m, 3, 1, 1);
    TextureAtlas atlas(3, 1);
    atlas.update(std::vector<TexelSample>{{0, {1, 1, 1}, 1}, {2, {0, 0, 0}, 1}}, 0);
    EXPECT_EQ(seam_metric(atlas, map), 0.0);
}
