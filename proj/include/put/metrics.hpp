#pragma once

#include "put/atlas.hpp"
#include "put/image.hpp"
#include "put/scene.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace put {

/// Masked mean absolute difference between a generated panorama and the prior texture it was
/// conditioned on, over masked pixels and all channels. 0 when the mask is empty.
inline double interframe_consistency(const ImageF& generated, const ImageF& partial, const Image8& mask) {
    require_same_size(generated, partial, "interframe_consistency");
    require_same_size(generated, mask, "interframe_consistency");
    if (generated.channels() != partial.channels())
        throw std::invalid_argument("interframe_consistency: channel counts differ");
    const int ch = generated.channels();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (!mask.data()[i]) continue;
        for (int c = 0; c < ch; ++c)
            sum += std::abs(static_cast<double>(generated.data()[i * ch + c]) - partial.data()[i * ch + c]);
        count += ch;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

/// n samples of dim-dimensional features, one row per image.
struct FeatureSet {
    Eigen::MatrixXd vectors;

    std::size_t n() const { return static_cast<std::size_t>(vectors.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov; ///< unbiased (n - 1)
};

inline Moments moments(const FeatureSet& f) {
    if (f.n() < 2) throw std::invalid_argument("frechet_distance: need at least 2 samples per set");
    if (!f.vectors.allFinite()) throw std::invalid_argument("frechet_distance: non-finite feature");
    Moments m;
    m.mean = f.vectors.colwise().mean().transpose();
    const Eigen::MatrixXd centered = f.vectors.rowwise() - m.mean.transpose();
    m.cov = (centered.transpose() * centered) / static_cast<double>(f.n() - 1);
    return m;
}

/// Square root of a symmetric positive semi-definite matrix; eigenvalues in [-tol, 0] are clamped.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double tol = 1e-6) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol) throw std::domain_error("frechet_distance: matrix is indefinite beyond tolerance");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the trace of the square root taken
/// from the eigenvalues of the symmetric form S_a^(1/2) S_b S_a^(1/2).
inline double frechet_distance(const Moments& a, const Moments& b, double tol = 1e-6) {
    if (a.mean.size() != b.mean.size()) throw std::invalid_argument("frechet_distance: dimension mismatch");
    const Eigen::MatrixXd sa = psd_sqrt(a.cov, tol);
    Eigen::MatrixXd inner = sa * b.cov * sa;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
    double tr_sqrt = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev < -tol) throw std::domain_error("frechet_distance: covariance product is indefinite beyond tolerance");
        tr_sqrt += std::sqrt(std::max(0.0, ev));
    }
    const double value = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, value);
}

inline double frechet_distance(const FeatureSet& a, const FeatureSet& b, double tol = 1e-6) {
    if (a.dim() != b.dim()) throw std::invalid_argument("frechet_distance: dimension mismatch");
    return frechet_distance(moments(a), moments(b), tol);
}

inline constexpr int builtin_grid_w = 8;
inline constexpr int builtin_grid_h = 4;
inline constexpr int builtin_feature_dim = builtin_grid_w * builtin_grid_h;

/// Built-in test extractor: channel-mean grayscale average-pooled onto an 8x4 grid, row-major.
/// Block (bx, by) covers columns [floor(bx*W/8), floor((bx+1)*W/8)) and the analogous rows.
inline std::vector<double> builtin_features(const ImageF& img) {
    if (img.width() < builtin_grid_w || img.height() < builtin_grid_h)
        throw std::invalid_argument("builtin features need at least an 8x4 image");
    std::vector<double> out(builtin_feature_dim);
    const int ch = img.channels();
    for (int by = 0; by < builtin_grid_h; ++by) {
        const int y0 = by * img.height() / builtin_grid_h, y1 = (by + 1) * img.height() / builtin_grid_h;
        for (int bx = 0; bx < builtin_grid_w; ++bx) {
            const int x0 = bx * img.width() / builtin_grid_w, x1 = (bx + 1) * img.width() / builtin_grid_w;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    double g = 0.0;
                    for (int c = 0; c < ch; ++c) g += img.at(x, y, c);
                    sum += g / ch;
                }
            out[by * builtin_grid_w + bx] = sum / (static_cast<double>(x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

inline FeatureSet extract_features(std::span<const ImageF> images) {
    FeatureSet f;
    f.vectors.resize(static_cast<Eigen::Index>(images.size()), builtin_feature_dim);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto v = builtin_features(images[i]);
        for (int k = 0; k < builtin_feature_dim; ++k) f.vectors(static_cast<Eigen::Index>(i), k) = v[k];
    }
    return f;
}

/// Parses a feature file: one line per image, whitespace-separated decimal floats. Blank lines are
/// skipped. When `expected_rows` is given the row count must match.
inline FeatureSet load_features(std::string_view text, std::optional<std::size_t> expected_rows = std::nullopt) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        const auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        std::vector<double> row;
        for (auto t : toks) row.push_back(detail::parse_double(t, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("feature row has " + std::to_string(row.size()) + " values, expected " +
                                 std::to_string(rows.front().size()),
                             line_no);
        rows.push_back(std::move(row));
    }
    if (expected_rows && rows.size() != *expected_rows)
        throw ParseError("feature file has " + std::to_string(rows.size()) + " rows, expected " +
                         std::to_string(*expected_rows));
    FeatureSet f;
    f.vectors.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            f.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    return f;
}

inline std::string write_features(const FeatureSet& f) {
    std::ostringstream out;
    out.precision(17);
    for (Eigen::Index i = 0; i < f.vectors.rows(); ++i) {
        for (Eigen::Index k = 0; k < f.vectors.cols(); ++k) out << (k ? " " : "") << f.vectors(i, k);
        out << '\n';
    }
    return out.str();
}

/// Latitude band kept by the crop variant: rows [floor(H*top), floor(H*bottom)).
struct CropSpec {
    double row_top_frac = 0.25;
    double row_bottom_frac = 0.625;
};

inline ImageF crop_facades(const ImageF& pano, CropSpec spec = {}) {
    if (!(spec.row_top_frac >= 0.0 && spec.row_top_frac < 1.0 && spec.row_bottom_frac > 0.0 &&
          spec.row_bottom_frac <= 1.0 && spec.row_top_frac < spec.row_bottom_frac))
        throw std::invalid_argument("crop_facades: invalid crop band");
    const int r0 = static_cast<int>(std::floor(pano.height() * spec.row_top_frac));
    const int r1 = static_cast<int>(std::floor(pano.height() * spec.row_bottom_frac));
    if (r1 <= r0) throw std::invalid_argument("crop_facades: empty crop");
    ImageF out(pano.width(), r1 - r0, pano.channels());
    for (int y = r0; y < r1; ++y)
        std::copy(pano.row(y), pano.row(y) + static_cast<std::size_t>(pano.width()) * pano.channels(), out.row(y - r0));
    return out;
}

/// Largest L-infinity color jump between 4-adjacent textured texels of the same UV island.
/// 0 when fewer than two such texels exist.
inline double seam_metric(const TextureAtlas& atlas, const TexelMap& texel_map) {
    if (atlas.width() != texel_map.width() || atlas.height() != texel_map.height())
        throw std::invalid_argument("seam_metric: atlas and texel map dimensions differ");
    const int w = atlas.width(), h = atlas.height();
    double worst = 0.0;
    auto pair = [&](std::uint32_t a, std::uint32_t b) {
        if (!atlas.textured(a) || !atlas.textured(b)) return;
        const auto ia = texel_map.island_of_texel(a), ib = texel_map.island_of_texel(b);
        if (!ia || !ib || *ia != *ib) return;
        const Color ca = atlas.color(a), cb = atlas.color(b);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, static_cast<double>(std::abs(ca[c] - cb[c])));
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto t = static_cast<std::uint32_t>(y) * w + x;
            if (x + 1 < w) pair(t, t + 1);
            if (y + 1 < h) pair(t, t + w);
        }
    return worst;
}

} // namespace put
