#pragma once

#include "put/math.hpp"
#include "put/parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace put {

enum class BlendMode { no_blend, average, weighted };

inline std::string_view to_string(BlendMode m) {
    switch (m) {
    case BlendMode::no_blend: return "no_blend";
    case BlendMode::average: return "average";
    case BlendMode::weighted: return "weighted";
    }
    return "?";
}

inline BlendMode parse_blend_mode(std::string_view s) {
    if (s == "no_blend" || s == "no-blend") return BlendMode::no_blend;
    if (s == "average") return BlendMode::average;
    if (s == "weighted") return BlendMode::weighted;
    throw std::invalid_argument("unknown blend mode '" + std::string(s) + "'");
}

inline constexpr BlendMode all_blend_modes[] = {BlendMode::no_blend, BlendMode::average, BlendMode::weighted};

struct WeightClamp {
    double lo = 0.3;
    double hi = 0.7;
};

/// Unclamped view weights 1 - d_i / sum(d). They sum to n - 1.
inline std::vector<double> raw_weights(std::span<const double> distances) {
    if (distances.empty()) throw std::invalid_argument("compute_weights: empty distance list");
    double total = 0.0;
    for (double d : distances) {
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::invalid_argument("compute_weights: distances must be finite and > 0");
        total += d;
    }
    std::vector<double> w(distances.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 - distances[i] / total;
    return w;
}

/// Distance-based blend weights: a single view gets weight 1. Otherwise the raw weights are clamped
/// to [clamp.lo, clamp.hi] and divided by their clamped sum so the result is a convex combination.
inline std::vector<double> compute_weights(std::span<const double> distances, WeightClamp clamp = {}) {
    auto w = raw_weights(distances);
    if (w.size() == 1) return {1.0};
    double sum = 0.0;
    for (double& x : w) {
        x = std::clamp(x, clamp.lo, clamp.hi);
        sum += x;
    }
    for (double& x : w) x /= sum;
    return w;
}

struct Contribution {
    std::uint32_t iteration = 0;
    Color color{};
    double distance = 0.0;
};

/// One texel's color sample from a generated panorama.
struct TexelSample {
    std::uint32_t texel = 0;
    Color color{};
    double distance = 0.0;
};

/// Blended color of a contribution list (ordered by iteration).
inline Color blend(std::span<const Contribution> contribs, BlendMode mode, WeightClamp clamp = {}) {
    if (contribs.empty()) return {0.0f, 0.0f, 0.0f};
    if (mode == BlendMode::no_blend) return contribs.back().color;

    std::vector<double> w;
    if (mode == BlendMode::average) {
        w.assign(contribs.size(), 1.0 / static_cast<double>(contribs.size()));
    } else {
        std::vector<double> d(contribs.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = contribs[i].distance;
        w = compute_weights(d, clamp);
    }
    Color out{};
    for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < contribs.size(); ++i) acc += w[i] * contribs[i].color[c];
        out[c] = static_cast<float>(acc);
    }
    return out;
}

/// Texture atlas with its per-texel contribution ledger. Texel t = ty * width + tx.
class TextureAtlas {
public:
    static constexpr std::uint32_t no_slot = std::numeric_limits<std::uint32_t>::max();

    TextureAtlas() = default;
    TextureAtlas(int width, int height, BlendMode mode = BlendMode::weighted, WeightClamp clamp = {})
        : width_(width), height_(height), mode_(mode), clamp_(clamp),
          blended_(static_cast<std::size_t>(width) * height * 3, 0.0f),
          slot_(static_cast<std::size_t>(width) * height, no_slot) {
        if (width < 1 || height < 1) throw std::invalid_argument("atlas dimensions must be >= 1");
        if (!(clamp.lo < clamp.hi) || clamp.lo < 0.0 || clamp.hi > 1.0)
            throw std::invalid_argument("weight clamp must satisfy 0 <= lo < hi <= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t texel_count() const { return slot_.size(); }
    BlendMode mode() const { return mode_; }
    WeightClamp clamp() const { return clamp_; }
    /// Number of update() calls that have been applied.
    std::uint32_t iterations_applied() const { return iterations_applied_; }
    std::size_t textured_count() const { return ledger_.size(); }

    bool textured(std::uint32_t texel) const { return texel < slot_.size() && slot_[texel] != no_slot; }

    std::span<const Contribution> contributions(std::uint32_t texel) const {
        if (!textured(texel)) return {};
        return ledger_[slot_[texel]];
    }

    Color color(std::uint32_t texel) const {
        const float* p = blended_.data() + static_cast<std::size_t>(texel) * 3;
        return {p[0], p[1], p[2]};
    }

    /// Changes the blend mode and re-blends every textured texel.
    void set_mode(BlendMode mode, unsigned threads = 1) {
        if (mode == mode_) return;
        mode_ = mode;
        reblend_all(threads);
    }

    /// Appends one iteration's samples and re-blends the touched texels. Every sample's iteration
    /// must exceed the texel's existing contributions; each texel may appear once. Nothing is
    /// modified when validation fails.
    void update(std::span<const TexelSample> samples, std::uint32_t iteration, unsigned threads = 1) {
        for (const auto& s : samples) {
            if (s.texel >= slot_.size())
                throw std::out_of_range("update_atlas: texel index out of range");
            if (!(s.distance > 0.0) || !std::isfinite(s.distance))
                throw std::invalid_argument("update_atlas: distance must be finite and > 0");
            const auto existing = contributions(s.texel);
            if (!existing.empty() && existing.back().iteration >= iteration)
                throw std::invalid_argument("update_atlas: iteration " + std::to_string(iteration) +
                                            " is not after existing contribution " +
                                            std::to_string(existing.back().iteration) + " at texel " +
                                            std::to_string(s.texel));
        }
        std::vector<std::uint32_t> touched;
        touched.reserve(samples.size());
        for (const auto& s : samples) touched.push_back(s.texel);
        std::sort(touched.begin(), touched.end());
        if (auto dup = std::adjacent_find(touched.begin(), touched.end()); dup != touched.end())
            throw std::invalid_argument("update_atlas: texel " + std::to_string(*dup) +
                                        " appears twice in one update");
        touched.clear();
        for (const auto& s : samples) {
            if (slot_[s.texel] == no_slot) {
                slot_[s.texel] = static_cast<std::uint32_t>(ledger_.size());
                ledger_.emplace_back();
            }
            ledger_[slot_[s.texel]].push_back({iteration, s.color, s.distance});
            touched.push_back(s.texel);
        }
        parallel_for(touched.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) reblend(touched[i]);
        });
        ++iterations_applied_;
    }

    /// Restores a texel's ledger wholesale (state loading). The list must be ordered by iteration.
    void restore(std::uint32_t texel, std::vector<Contribution> list) {
        if (texel >= slot_.size()) throw std::out_of_range("restore: texel index out of range");
        for (std::size_t i = 1; i < list.size(); ++i)
            if (list[i].iteration <= list[i - 1].iteration)
                throw std::invalid_argument("restore: contributions not ordered by iteration");
        if (list.empty()) return;
        if (slot_[texel] == no_slot) {
            slot_[texel] = static_cast<std::uint32_t>(ledger_.size());
            ledger_.emplace_back();
        }
        ledger_[slot_[texel]] = std::move(list);
        reblend(texel);
    }

    void set_iterations_applied(std::uint32_t n) { iterations_applied_ = n; }

    friend bool operator==(const TextureAtlas& a, const TextureAtlas& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.blended_ == b.blended_;
    }

private:
    void reblend(std::uint32_t texel) {
        const Color c = blend(ledger_[slot_[texel]], mode_, clamp_);
        float* p = blended_.data() + static_cast<std::size_t>(texel) * 3;
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }

    void reblend_all(unsigned threads) {
        parallel_for(slot_.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t t = b; t < e; ++t)
                if (slot_[t] != no_slot) reblend(static_cast<std::uint32_t>(t));
        });
    }

    int width_ = 0;
    int height_ = 0;
    BlendMode mode_ = BlendMode::weighted;
    WeightClamp clamp_{};
    std::uint32_t iterations_applied_ = 0;
    std::vector<float> blended_;
    std::vector<std::uint32_t> slot_;
    std::vector<std::vector<Contribution>> ledger_;
};

/// Appends samples for `iteration` under `mode`, re-blending the whole atlas first if the mode changed.
inline void update_atlas(TextureAtlas& atlas, std::span<const TexelSample> samples, std::uint32_t iteration,
                         BlendMode mode, unsigned threads = 1) {
    atlas.set_mode(mode, threads);
    atlas.update(samples, iteration, threads);
}

} // namespace put
