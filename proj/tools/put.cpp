#include "put/put.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string mesh, streets, config, translator, out, blend, real_feats, real_crop_feats, layout;
    int atlas_size = 0;
    int threads = -1;
    bool no_frames = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--mesh", a.mesh, "Wavefront OBJ with UVs")->required()->check(CLI::ExistingFile);
    cmd->add_option("--streets", a.streets, "street centerlines JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", a.config, "pipeline config JSON")->check(CLI::ExistingFile);
    cmd->add_option("--translator", a.translator, "identity | stub | exec:<command>");
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_option("--blend", a.blend, "no_blend | average | weighted");
    cmd->add_option("--atlas-size", a.atlas_size, "atlas width and height in texels");
    cmd->add_option("--threads", a.threads, "worker threads (0 = all cores)");
    cmd->add_option("--real-feats", a.real_feats, "feature file of real panoramas (built-in extractor)");
    cmd->add_option("--real-crop-feats", a.real_crop_feats, "feature file of cropped real panoramas");
    cmd->add_option("--layout", a.layout, "translator input layout: merged | stacked");
    cmd->add_flag("--no-frames", a.no_frames, "skip writing per-iteration frame PNGs");
}

put::PipelineConfig resolve_config(const CommonArgs& a) {
    put::PipelineConfig cfg;
    if (!a.config.empty()) cfg = put::config_from_json(nlohmann::json::parse(put::read_file(a.config)));
    nlohmann::json overrides = nlohmann::json::object();
    if (!a.translator.empty()) overrides["translator"] = a.translator;
    if (!a.out.empty()) overrides["output_dir"] = a.out;
    if (!a.blend.empty()) overrides["blend_mode"] = a.blend;
    if (a.atlas_size > 0) overrides["atlas_size"] = a.atlas_size;
    if (a.threads >= 0) overrides["threads"] = a.threads;
    if (!a.real_feats.empty()) overrides["real_feats"] = a.real_feats;
    if (!a.real_crop_feats.empty()) overrides["real_crop_feats"] = a.real_crop_feats;
    if (!a.layout.empty()) overrides["input_layout"] = a.layout;
    if (a.no_frames) overrides["export_frames"] = false;
    return put::config_from_json(overrides, cfg);
}

put::ImageF load_png_rgb(const std::string& path) {
    const auto s = put::read_file(path);
    const auto png = put::decode_png8(std::vector<std::uint8_t>(s.begin(), s.end()));
    put::ImageF img(png.width, png.height, 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c)
            img.data()[3 * i + c] = put::from_byte(png.bytes[i * png.channels + (png.channels >= 3 ? c : 0)]);
    return img;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"put: iterative panoramic texturing of untextured urban meshes"};
    app.require_subcommand(1);

    CommonArgs bake_args;
    std::uint32_t start_iteration = 0;
    auto* bake = app.add_subcommand("bake", "texture a mesh by rendering, translating and propagating along streets");
    add_common(bake, bake_args);
    bake->add_option("--start-iteration", start_iteration, "resume from this iteration using <out>/atlas_state.bin");

    CommonArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "bake under no_blend, average and weighted blending and compare");
    add_common(ablate, ablate_args);

    std::string real_feats, gen_feats;
    auto* eval = app.add_subcommand("eval", "Frechet distance between two feature files");
    eval->add_option("--real-feats", real_feats)->required()->check(CLI::ExistingFile);
    eval->add_option("--gen-feats", gen_feats)->required()->check(CLI::ExistingFile);

    std::string demo_out = "demo";
    int demo_atlas = 1024;
    double demo_density = 32.0;
    auto* demo = app.add_subcommand("bake-demo", "write the synthetic two-street box scene (demo.obj, streets.json)");
    demo->add_option("--out", demo_out, "output directory");
    demo->add_option("--atlas-size", demo_atlas, "atlas size the UV layout is packed for");
    demo->add_option("--texels-per-m", demo_density, "requested texel density");

    std::string serve_kind = "identity";
    auto* serve = app.add_subcommand("serve", "serve a built-in translator over the stdio protocol");
    serve->add_option("--translator", serve_kind, "identity | stub")->check(CLI::IsMember({"identity", "stub"}));

    std::vector<std::string> feat_images;
    std::string feat_out;
    bool feat_crop = false;
    auto* features = app.add_subcommand("features", "built-in 8x4 grayscale features of PNG images");
    features->add_option("--images", feat_images, "PNG files")->required()->check(CLI::ExistingFile);
    features->add_option("--out", feat_out, "feature file (default stdout)");
    features->add_flag("--crop", feat_crop, "crop to the facade band first");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bake || *ablate) {
            const auto& a = *bake ? bake_args : ablate_args;
            const auto cfg = resolve_config(a);
            const auto mesh = put::load_mesh(put::read_file(a.mesh));
            const auto streets = put::load_streets(put::read_file(a.streets));
            fs::create_directories(cfg.output_dir);
            put::write_file((fs::path(cfg.output_dir) / "config.json").string(), put::to_json(cfg).dump(2) + "\n");
            if (*bake) {
                put::RunOptions opts;
                opts.log_progress = true;
                opts.start_iteration = start_iteration;
                if (start_iteration > 0) {
                    const auto state = put::read_file((fs::path(cfg.output_dir) / "atlas_state.bin").string());
                    opts.resume_atlas = put::deserialize_atlas_state(std::vector<std::uint8_t>(state.begin(), state.end()));
                }
                auto translator = put::make_translator(cfg.translator);
                const auto r = put::run_pipeline(mesh, streets, cfg, *translator, std::move(opts));
                std::cout << r.report.dump(2) << "\n";
            } else {
                const auto report = put::run_ablation(mesh, streets, cfg, [&] { return put::make_translator(cfg.translator); });
                std::cout << report.dump(2) << "\n";
            }
        } else if (*eval) {
            const auto real = put::load_features(put::read_file(real_feats));
            const auto gen = put::load_features(put::read_file(gen_feats));
            std::cout << nlohmann::json{{"fid", put::frechet_distance(real, gen)}, {"n_real", real.n()}, {"n_gen", gen.n()}}.dump()
                      << "\n";
        } else if (*demo) {
            const auto scene = put::make_demo_scene(demo_atlas, demo_density);
            fs::create_directories(demo_out);
            put::write_file((fs::path(demo_out) / "demo.obj").string(), put::write_obj(scene.mesh));
            put::write_file((fs::path(demo_out) / "streets.json").string(), put::write_streets(scene.streets) + "\n");
            std::cout << nlohmann::json{{"faces", scene.mesh.face_count()},
                                        {"texels_per_m", scene.texels_per_m},
                                        {"viewpoints", put::sample_viewpoints(scene.streets).size()}}
                             .dump()
                      << "\n";
        } else if (*serve) {
            auto translator = put::make_translator(serve_kind);
            put::FdReader in(0);
            put::FdWriter out(1);
            return put::serve_protocol(in, out, [&](const put::TranslatorRequest& req) { return translator->handle(req); });
        } else if (*features) {
            std::vector<put::ImageF> images;
            for (const auto& p : feat_images) {
                auto img = load_png_rgb(p);
                images.push_back(feat_crop ? put::crop_facades(img) : std::move(img));
            }
            const auto text = put::write_features(put::extract_features(images));
            if (feat_out.empty()) std::cout << text;
            else put::write_file(feat_out, text);
        }
    } catch (const put::TranslatorError& e) {
        std::cerr << "put: translator failed at " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "put: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
