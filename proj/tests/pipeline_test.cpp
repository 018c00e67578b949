#include "test_scenes.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace put;
using namespace put::fixtures;

namespace {

PipelineConfig small_config(const std::string& out) {
    PipelineConfig cfg;
    cfg.pano_width = 128;
    cfg.pano_height = 64;
    cfg.atlas_size = 256;
    cfg.output_dir = out;
    cfg.threads = 2;
    return cfg;
}

const DemoScene& demo() {
    static const DemoScene scene = make_demo_scene(256, 8.0);
    return scene;
}

/// Delegates to the stub translator but fails on the given call.
class FailingTranslator : public Translator {
public:
    explicit FailingTranslator(std::size_t fail_at) : fail_at_(fail_at) {}
    TranslatorResponse handle(const TranslatorRequest& req) override {
        if (calls_++ == fail_at_) throw ProtocolError("simulated translator crash");
        return inner_.handle(req);
    }
    std::string name() const override { return "failing"; }

private:
    TintTranslator inner_;
    std::size_t fail_at_, calls_ = 0;
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PUT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Pipeline, IdentityTranslatorKeepsMaskedPixelsConsistent) {
    TempDir dir("identity");
    IdentityTranslator id;
    const auto r = run_pipeline(demo().mesh, demo().streets, small_config(dir.str()), id);
    ASSERT_EQ(r.consistency.size(), 10u);
    for (double c : r.consistency) EXPECT_LE(c, 1e-6);
    EXPECT_GT(r.atlas.textured_count(), 0u);
    // Identity output of an untextured white-material frame is pure gray.
    for (std::uint32_t t = 0; t < r.atlas.texel_count(); ++t) {
        if (!r.atlas.textured(t)) continue;
        const Color c = r.atlas.color(t);
        EXPECT_NEAR(c[0], c[1], 1e-6);
        EXPECT_NEAR(c[1], c[2], 1e-6);
    }
}

TEST(Pipeline, StubBakeAccumulatesOverlappingViews) {
    TempDir dir("stub");
    TintTranslator stub;
    const auto r = run_pipeline(demo().mesh, demo().streets, small_config(dir.str()), stub);
    std::size_t multi = 0;
    for (std::uint32_t t = 0; t < r.atlas.texel_count(); ++t) {
        const auto list = r.atlas.contributions(t);
        if (list.size() > 1) ++multi;
        for (std::size_t i = 1; i < list.size(); ++i) EXPECT_LT(list[i - 1].iteration, list[i].iteration);
        if (!list.empty()) {
            EXPECT_NE(r.texel_map.find(t), nullptr);
        }
    }
    EXPECT_GT(multi, 100u);
    EXPECT_EQ(r.atlas.iterations_applied(), 10u);
    EXPECT_GT(r.seam, 0.0);

    for (const char* f : {"atlas.png", "atlas.json", "atlas_state.bin", "report.json"})
        EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
    std::size_t frames = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path() / "frames")) ++frames;
    EXPECT_EQ(frames, 30u);

    const auto report = nlohmann::json::parse(read_file((dir.path() / "report.json").string()));
    for (const char* key : {"consistency_per_iteration", "fid", "crop_fid", "seam"}) EXPECT_TRUE(report.contains(key)) << key;
    EXPECT_EQ(report["consistency_per_iteration"].size(), 10u);
    EXPECT_TRUE(report["fid"].is_null());
    EXPECT_DOUBLE_EQ(report["seam"].get<double>(), r.seam);
}

TEST(Pipeline, NoViewpointsLeavesAtlasEmpty) {
    TempDir dir("empty");
    IdentityTranslator id;
    const auto r = run_pipeline(demo().mesh, StreetGraph{}, small_config(dir.str()), id);
    EXPECT_TRUE(r.consistency.empty());
    EXPECT_EQ(r.atlas.textured_count(), 0u);
    EXPECT_EQ(r.seam, 0.0);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "atlas.png"));
}

TEST(Pipeline, SingleViewpointAblationModesAgree) {
    TempDir dir("ablate1");
    StreetGraph one{{{{10, 0, 0}}}};
    std::vector<TextureAtlas> atlases;
    auto cfg = small_config(dir.str());
    const auto report = run_ablation(demo().mesh, one, cfg, [] { return std::make_unique<TintTranslator>(); }, true, &atlases);
    ASSERT_EQ(atlases.size(), 3u);
    EXPECT_TRUE(atlases[0] == atlases[1]);
    EXPECT_TRUE(atlases[1] == atlases[2]);
    EXPECT_TRUE(report["seam_order_holds"].get<bool>());
    for (const char* m : {"no_blend", "average", "weighted"}) {
        EXPECT_TRUE(report["modes"].contains(m));
        EXPECT_TRUE(std::filesystem::exists(dir.path() / m / "atlas.png"));
    }
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "ablation.json"));
}

TEST(Pipeline, FailurePersistsAtlasAndResumeMatchesFullRun) {
    TempDir full_dir("full"), part_dir("part");
    TintTranslator stub;
    const auto full = run_pipeline(demo().mesh, demo().streets, small_config(full_dir.str()), stub);

    FailingTranslator failing(4);
    const auto cfg = small_config(part_dir.str());
    try {
        run_pipeline(demo().mesh, demo().streets, cfg, failing);
        FAIL() << "expected TranslatorError";
    } catch (const TranslatorError& e) {
        EXPECT_EQ(e.iteration(), 4u);
    }
    const auto report = nlohmann::json::parse(read_file((part_dir.path() / "report.json").string()));
    EXPECT_EQ(report["failed_iteration"], 4);
    EXPECT_EQ(report["consistency_per_iteration"].size(), 4u);

    const auto state = read_file((part_dir.path() / "atlas_state.bin").string());
    RunOptions opts;
    opts.start_iteration = 4;
    opts.resume_atlas = deserialize_atlas_state(std::vector<std::uint8_t>(state.begin(), state.end()));
    EXPECT_EQ(opts.resume_atlas->iterations_applied(), 4u);
    TintTranslator stub2;
    const auto resumed = run_pipeline(demo().mesh, demo().streets, cfg, stub2, std::move(opts));
    EXPECT_EQ(resumed.consistency.size(), 6u);
    EXPECT_TRUE(resumed.atlas == full.atlas);
    EXPECT_EQ(encode_atlas_png(resumed.atlas), encode_atlas_png(full.atlas));
}

TEST(Pipeline, FidAgainstRealFeatureFile) {
    TempDir dir("fid");
    auto cfg = small_config(dir.str());
    cfg.export_frames = false;
    TintTranslator stub;
    const auto first = run_pipeline(demo().mesh, demo().streets, cfg, stub);
    // Using the final renders themselves as the "real" set must give zero distance.
    const PanoRenderer renderer(demo().mesh, cfg.geometry(), cfg.shading(), 1);
    const auto finals = render_final(renderer, first.atlas, first.viewpoints);
    write_file((dir.path() / "real.txt").string(), write_features(extract_features(finals)));
    std::vector<ImageF> crops;
    for (const auto& f : finals) crops.push_back(crop_facades(f));
    write_file((dir.path() / "real_crop.txt").string(), write_features(extract_features(crops)));
    cfg.real_feats = (dir.path() / "real.txt").string();
    cfg.real_crop_feats = (dir.path() / "real_crop.txt").string();
    TintTranslator stub2;
    const auto r = run_pipeline(demo().mesh, demo().streets, cfg, stub2);
    ASSERT_TRUE(r.fid && r.crop_fid);
    EXPECT_NEAR(*r.fid, 0.0, 1e-6);
    EXPECT_NEAR(*r.crop_fid, 0.0, 1e-6);
    EXPECT_FALSE(r.report["fid"].is_null());
}

TEST(Config, ParsesOverlaysAndRejects) {
    const auto cfg = config_from_json(nlohmann::json::parse(
        R"({"pano_width": 256, "blend_mode": "average", "sun_dir": [0, 0, 1], "crop": [0.1, 0.9], "input_layout": "stacked"})"));
    EXPECT_EQ(cfg.pano_width, 256);
    EXPECT_EQ(cfg.pano_height, 256);
    EXPECT_EQ(cfg.blend_mode, BlendMode::average);
    EXPECT_EQ(cfg.input_layout, InputLayout::stacked_gray_rgb);
    EXPECT_DOUBLE_EQ(cfg.crop.row_bottom_frac, 0.9);
    const auto round = config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(round), to_json(cfg));

    for (const char* bad : {R"({"pano_widht": 1})", R"({"spacing_m": 0})", R"({"clamp_lo": 0.8})",
                            R"({"blend_mode": "max"})", R"({"sun_dir": [0, 0]})", R"({"pano_width": "wide"})",
                            R"({"input_layout": "planar"})", R"([1, 2])", R"({"vis_max_slope": -1})"})
        EXPECT_THROW(config_from_json(nlohmann::json::parse(bad)), std::invalid_argument) << bad;
}

TEST(Cli, BakeDemoBakeEvalAndExitCodes) {
    TempDir dir("cli");
    const std::string d = dir.str();
    ASSERT_EQ(run_cli("bake-demo --out " + d + " --atlas-size 256 --texels-per-m 8"), 0);
    const std::string mesh = d + "/demo.obj", streets = d + "/streets.json";
    ASSERT_TRUE(std::filesystem::exists(mesh));
    EXPECT_EQ(sample_viewpoints(load_streets(read_file(streets))).size(), 10u);

    {
        std::ofstream(d + "/cfg.json") << R"({"pano_width": 64, "pano_height": 32, "atlas_size": 256})";
    }
    EXPECT_EQ(run_cli("bake --mesh " + mesh + " --streets " + streets + " --config " + d +
                      "/cfg.json --translator stub --no-frames --threads 1 --out " + d + "/bake"),
              0);
    EXPECT_TRUE(std::filesystem::exists(d + "/bake/atlas.png"));
    EXPECT_TRUE(std::filesystem::exists(d + "/bake/config.json"));
    EXPECT_FALSE(std::filesystem::exists(d + "/bake/frames"));

    EXPECT_EQ(run_cli("bake --mesh " + mesh + " --streets " + streets + " --config " + d +
                      "/cfg.json --translator 'exec:exit 1' --out " + d + "/fail"),
              3);
    EXPECT_TRUE(std::filesystem::exists(d + "/fail/atlas_state.bin"));
    EXPECT_EQ(run_cli("bake --mesh " + mesh + " --streets " + streets + " --config " + d +
                      "/cfg.json --translator stub --start-iteration 0 --blend average --out " + d + "/fail"),
              0);
    EXPECT_EQ(run_cli("bake --mesh " + mesh + " --streets " + streets + " --translator nonsense --out " + d + "/x"), 1);
    EXPECT_NE(run_cli("bake --streets " + streets), 0);

    std::ofstream(d + "/a.txt") << "0\n1\n2\n3\n";
    std::ofstream(d + "/b.txt") << "3\n4\n5\n6\n";
    const std::string cmd = std::string(PUT_CLI_PATH) + " eval --real-feats " + d + "/a.txt --gen-feats " + d +
                            "/b.txt > " + d + "/eval.json";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_NEAR(nlohmann::json::parse(read_file(d + "/eval.json"))["fid"].get<double>(), 9.0, 1e-9);

    EXPECT_EQ(run_cli("features --images " + d + "/bake/atlas.png --out " + d + "/f.txt"), 0);
    EXPECT_EQ(load_features(read_file(d + "/f.txt")).dim(), 32u);
}
