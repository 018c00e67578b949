#pragma once

#include "put/atlas.hpp"
#include "put/atlas_io.hpp"
#include "put/metrics.hpp"
#include "put/propagation.hpp"
#include "put/render.hpp"
#include "put/scene.hpp"
#include "put/translator.hpp"
#include "put/viewpath.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace put {

struct PipelineConfig {
    int pano_width = 512;
    int pano_height = 256;
    double spacing_m = 5.0;
    double height_m = 2.5;
    int atlas_size = 2048;
    double texels_per_m = 32.0;
    BlendMode blend_mode = BlendMode::weighted;
    double clamp_lo = 0.3;
    double clamp_hi = 0.7;
    double eps_vis_m = 0.05;
    double vis_max_slope = 4.0;
    std::string translator = "identity";
    Vec3 sun_dir{1.0, 2.0, 1.0};
    double ambient = 0.3;
    std::string output_dir = "put_out";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    InputLayout input_layout = InputLayout::merged_rgb;
    bool export_frames = true;
    std::string real_feats;      ///< optional feature file of real panoramas (built-in extractor)
    std::string real_crop_feats; ///< optional feature file of cropped real panoramas
    CropSpec crop{};

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw std::invalid_argument(std::string("config: ") + name + " must be > 0");
        };
        positive(pano_width, "pano_width");
        positive(pano_height, "pano_height");
        positive(spacing_m, "spacing_m");
        positive(atlas_size, "atlas_size");
        positive(texels_per_m, "texels_per_m");
        positive(eps_vis_m, "eps_vis_m");
        if (!(vis_max_slope >= 0.0)) throw std::invalid_argument("config: vis_max_slope must be >= 0");
        if (!(height_m >= 0.0)) throw std::invalid_argument("config: height_m must be >= 0");
        if (!(clamp_lo >= 0.0 && clamp_lo < clamp_hi && clamp_hi <= 1.0))
            throw std::invalid_argument("config: need 0 <= clamp_lo < clamp_hi <= 1");
        if (!(ambient >= 0.0 && ambient <= 1.0)) throw std::invalid_argument("config: ambient must be in [0,1]");
        if (!(length(sun_dir) > 0.0)) throw std::invalid_argument("config: sun_dir must be non-zero");
    }

    WeightClamp weight_clamp() const { return {clamp_lo, clamp_hi}; }
    PanoGeometry geometry() const { return {pano_width, pano_height}; }
    ShadeSettings shading() const { return {normalize(sun_dir), ambient}; }
};

inline std::string_view to_string(InputLayout l) { return l == InputLayout::merged_rgb ? "merged" : "stacked"; }

inline nlohmann::json to_json(const PipelineConfig& c) {
    return {{"pano_width", c.pano_width},
            {"pano_height", c.pano_height},
            {"spacing_m", c.spacing_m},
            {"height_m", c.height_m},
            {"atlas_size", c.atlas_size},
            {"texels_per_m", c.texels_per_m},
            {"blend_mode", std::string(to_string(c.blend_mode))},
            {"clamp_lo", c.clamp_lo},
            {"clamp_hi", c.clamp_hi},
            {"eps_vis_m", c.eps_vis_m},
            {"vis_max_slope", c.vis_max_slope},
            {"translator", c.translator},
            {"sun_dir", {c.sun_dir.x, c.sun_dir.y, c.sun_dir.z}},
            {"ambient", c.ambient},
            {"output_dir", c.output_dir},
            {"seed", c.seed},
            {"threads", c.threads},
            {"input_layout", std::string(to_string(c.input_layout))},
            {"export_frames", c.export_frames},
            {"real_feats", c.real_feats},
            {"real_crop_feats", c.real_crop_feats},
            {"crop", {c.crop.row_top_frac, c.crop.row_bottom_frac}}};
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    const nlohmann::json known = to_json(base);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw std::invalid_argument("config: unknown key '" + it.key() + "'");
    try {
        PipelineConfig c = base;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        get("pano_width", c.pano_width);
        get("pano_height", c.pano_height);
        get("spacing_m", c.spacing_m);
        get("height_m", c.height_m);
        get("atlas_size", c.atlas_size);
        get("texels_per_m", c.texels_per_m);
        if (j.contains("blend_mode")) c.blend_mode = parse_blend_mode(j.at("blend_mode").get<std::string>());
        get("clamp_lo", c.clamp_lo);
        get("clamp_hi", c.clamp_hi);
        get("eps_vis_m", c.eps_vis_m);
        get("vis_max_slope", c.vis_max_slope);
        get("translator", c.translator);
        if (j.contains("sun_dir")) {
            const auto v = j.at("sun_dir").get<std::vector<double>>();
            if (v.size() != 3) throw std::invalid_argument("config: sun_dir needs 3 components");
            c.sun_dir = {v[0], v[1], v[2]};
        }
        get("ambient", c.ambient);
        get("output_dir", c.output_dir);
        get("seed", c.seed);
        get("threads", c.threads);
        if (j.contains("input_layout")) {
            const auto s = j.at("input_layout").get<std::string>();
            if (s == "merged") c.input_layout = InputLayout::merged_rgb;
            else if (s == "stacked") c.input_layout = InputLayout::stacked_gray_rgb;
            else throw std::invalid_argument("config: input_layout must be merged or stacked");
        }
        get("export_frames", c.export_frames);
        get("real_feats", c.real_feats);
        get("real_crop_feats", c.real_crop_feats);
        if (j.contains("crop")) {
            const auto v = j.at("crop").get<std::vector<double>>();
            if (v.size() != 2) throw std::invalid_argument("config: crop needs [top, bottom]");
            c.crop = {v[0], v[1]};
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

struct RunOptions {
    std::uint32_t start_iteration = 0;
    std::optional<TextureAtlas> resume_atlas; ///< atlas state to continue from
    bool write_outputs = true;
    bool log_progress = false;
};

struct PipelineResult {
    TexelMap texel_map;
    TextureAtlas atlas;
    std::vector<Viewpoint> viewpoints;
    std::vector<double> consistency; ///< per executed iteration
    std::vector<double> iteration_seconds;
    std::vector<ImageF> generated;   ///< translator outputs, in iteration order
    std::optional<double> fid, crop_fid;
    double seam = 0.0;
    std::optional<std::uint32_t> failed_iteration;
    std::string error;
    nlohmann::json report;
};

/// Fully textured renderings of the final atlas at every viewpoint; the images compared against
/// real panoramas for FID.
inline std::vector<ImageF> render_final(const PanoRenderer& renderer, const TextureAtlas& atlas,
                                        const std::vector<Viewpoint>& vps) {
    std::vector<ImageF> out;
    out.reserve(vps.size());
    for (const auto& vp : vps) out.push_back(renderer.render(atlas, vp).rgb);
    return out;
}

inline void score_fid(const PipelineConfig& cfg, const std::vector<ImageF>& images, PipelineResult& r) {
    if (images.size() < 2) return;
    if (!cfg.real_feats.empty()) {
        const auto real = load_features(read_file(cfg.real_feats));
        r.fid = frechet_distance(real, extract_features(images));
    }
    if (!cfg.real_crop_feats.empty()) {
        std::vector<ImageF> crops;
        for (const auto& img : images) crops.push_back(crop_facades(img, cfg.crop));
        const auto real = load_features(read_file(cfg.real_crop_feats));
        r.crop_fid = frechet_distance(real, extract_features(crops));
    }
}

inline nlohmann::json make_report(const PipelineConfig& cfg, const PipelineResult& r, std::uint32_t start) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"consistency_per_iteration", r.consistency},
            {"fid", opt(r.fid)},
            {"crop_fid", opt(r.crop_fid)},
            {"seam", r.seam},
            {"blend_mode", std::string(to_string(cfg.blend_mode))},
            {"viewpoints", r.viewpoints.size()},
            {"start_iteration", start},
            {"iteration_seconds", r.iteration_seconds},
            {"textured_texels", r.atlas.textured_count()},
            {"mapped_texels", r.texel_map.size()},
            {"failed_iteration", r.failed_iteration ? nlohmann::json(*r.failed_iteration) : nlohmann::json(nullptr)},
            {"error", r.error}};
}

/// Render -> translate -> propagate over every viewpoint in path order. Frame i is rendered from
/// the atlas after update i-1. On translator failure the partial atlas, its state and the report
/// (with the failing iteration) are written before the TranslatorError is rethrown.
inline PipelineResult run_pipeline(const Mesh& mesh, const StreetGraph& streets, const PipelineConfig& cfg,
                                   Translator& translator, RunOptions opts = {}) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path out_dir = cfg.output_dir;

    PipelineResult r;
    r.texel_map = build_texel_map(mesh, cfg.atlas_size, cfg.atlas_size, cfg.threads);
    r.atlas = opts.resume_atlas ? std::move(*opts.resume_atlas)
                                : TextureAtlas(cfg.atlas_size, cfg.atlas_size, cfg.blend_mode, cfg.weight_clamp());
    if (r.atlas.width() != cfg.atlas_size || r.atlas.height() != cfg.atlas_size)
        throw std::invalid_argument("resume atlas size differs from config atlas_size");
    r.atlas.set_mode(cfg.blend_mode, cfg.threads);
    r.viewpoints = sample_viewpoints(streets, cfg.spacing_m, cfg.height_m);

    const PanoRenderer renderer(mesh, cfg.geometry(), cfg.shading(), cfg.threads);
    GatherSettings gather;
    gather.eps_vis = cfg.eps_vis_m;
    gather.max_slope = cfg.vis_max_slope;
    gather.threads = cfg.threads;

    auto persist = [&] {
        if (!opts.write_outputs) return;
        export_atlas(r.atlas, out_dir);
        write_file((out_dir / "atlas_state.bin").string(), serialize_atlas_state(r.atlas));
        r.report = make_report(cfg, r, opts.start_iteration);
        write_file((out_dir / "report.json").string(), r.report.dump(2) + "\n");
    };

    for (const auto& vp : r.viewpoints) {
        if (vp.iteration < opts.start_iteration) continue;
        const auto t0 = std::chrono::steady_clock::now();
        const PanoFrame frame = renderer.render(r.atlas, vp);
        ImageF generated;
        try {
            generated = translate(translator, frame, cfg.input_layout);
        } catch (const TranslatorError& e) {
            r.failed_iteration = vp.iteration;
            r.error = e.what();
            r.seam = seam_metric(r.atlas, r.texel_map);
            persist();
            throw;
        }
        // Consistency is measured against the 8-bit frame the translator actually received.
        r.consistency.push_back(interframe_consistency(generated, dequantize(quantize(frame.rgb)), frame.mask));
        const auto samples = gather_contributions(generated, frame, r.texel_map, gather);
        r.atlas.update(samples, vp.iteration, cfg.threads);
        if (opts.write_outputs && cfg.export_frames) export_frame(frame, out_dir / "frames");
        r.generated.push_back(std::move(generated));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.iteration_seconds.push_back(secs);
        if (opts.log_progress)
            std::clog << "iteration " << vp.iteration << "/" << r.viewpoints.size() << ": " << samples.size()
                      << " texels, consistency " << r.consistency.back() << ", " << secs << " s\n";
    }

    r.seam = seam_metric(r.atlas, r.texel_map);
    if (!cfg.real_feats.empty() || !cfg.real_crop_feats.empty())
        score_fid(cfg, render_final(renderer, r.atlas, r.viewpoints), r);
    r.report = make_report(cfg, r, opts.start_iteration);
    persist();
    return r;
}

using TranslatorFactory = std::function<std::unique_ptr<Translator>()>;

/// Bakes once per blend mode into <output_dir>/<mode>/ and collects the per-mode metrics.
inline nlohmann::json run_ablation(const Mesh& mesh, const StreetGraph& streets, const PipelineConfig& base,
                                   const TranslatorFactory& make, bool write_outputs = true,
                                   std::vector<TextureAtlas>* atlases = nullptr) {
    nlohmann::json modes = nlohmann::json::object();
    std::vector<double> seams;
    for (BlendMode mode : all_blend_modes) {
        PipelineConfig cfg = base;
        cfg.blend_mode = mode;
        cfg.output_dir = (std::filesystem::path(base.output_dir) / std::string(to_string(mode))).string();
        auto translator = make();
        RunOptions opts;
        opts.write_outputs = write_outputs;
        auto r = run_pipeline(mesh, streets, cfg, *translator, std::move(opts));
        seams.push_back(r.seam);
        modes[std::string(to_string(mode))] = {
            {"seam", r.seam},
            {"fid", r.fid ? nlohmann::json(*r.fid) : nlohmann::json(nullptr)},
            {"crop_fid", r.crop_fid ? nlohmann::json(*r.crop_fid) : nlohmann::json(nullptr)},
            {"consistency_per_iteration", r.consistency},
        };
        if (atlases) atlases->push_back(std::move(r.atlas));
    }
    nlohmann::json report = {{"modes", modes},
                             {"seam_order_holds", seams[2] <= seams[1] && seams[1] <= seams[0]},
                             {"config", to_json(base)}};
    if (write_outputs) {
        std::filesystem::create_directories(base.output_dir);
        write_file((std::filesystem::path(base.output_dir) / "ablation.json").string(), report.dump(2) + "\n");
    }
    return report;
}

} // namespace put
