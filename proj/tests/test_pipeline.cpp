#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "yowo/pipeline.hpp"

using namespace yowo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig tiny_run_config() {
    json user = {
        {"seed", 42},
        {"data",
         {{"classes", 2},
          {"train_videos_per_class", 3},
          {"test_videos_per_class", 2},
          {"frames_per_video", 12},
          {"image_size", 16},
          {"min_object_size", 5.0 / 16.0},
          {"max_object_size", 7.0 / 16.0},
          {"velocity", 0.5 / 16.0},
          {"growth", 0.25 / 16.0}}},
        {"backbone2d", {{"widths", {4, 6}}, {"spatial_stride", 4}}},
        {"backbone3d", {{"widths", {4, 6}}, {"spatial_stride", 4}}},
        {"cfam", {{"channels", 8}, {"out_channels", 8}}},
        {"head", {{"anchors", 2}}},
        {"trainer", {{"batch_size", 2}, {"max_iterations", 3}, {"learning_rate", 1e-3}}},
    };
    return resolve_config(user);
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config defaults and strict key validation") {
    auto cfg = default_run_config();
    CHECK(cfg.seed == 1234);
    CHECK(cfg.synth.num_classes == 4);
    CHECK(cfg.model.head.num_anchors == 5);
    CHECK(cfg.model.head.out_channels() == 45);  // 5*(4+5)
    CHECK(cfg.trainer.learning_rate == doctest::Approx(1e-4));
    CHECK(cfg.trainer.loss.lambda == doctest::Approx(0.5));
    CHECK(cfg.nms.conf_threshold == doctest::Approx(0.25));
    CHECK(cfg.nms.nms_iou == doctest::Approx(0.4));  // single-label default

    CHECK_THROWS_WITH_AS(resolve_config(json{{"daata", 1}}),
                         doctest::Contains("unknown key \"daata\""), std::invalid_argument);
    CHECK_THROWS_WITH_AS(resolve_config(json{{"data", {{"classs", 4}}}}),
                         doctest::Contains("data.classs"), std::invalid_argument);
    CHECK_THROWS_AS(resolve_config(json{{"seed", "abc"}}), std::invalid_argument);

    // multi-label mode flips the default NMS threshold to 0.5
    auto multi = resolve_config(json{{"head", {{"class_mode", "multi"}, {"pose_classes", 2}}}});
    CHECK(multi.nms.nms_iou == doctest::Approx(0.5));

    // overrides win over the document
    ConfigOverrides ov;
    ov.seed = 7;
    ov.ablation = "concat";
    ov.clip_len = 16;
    auto cfg2 = resolve_config(json::object(), ov);
    CHECK(cfg2.seed == 7);
    CHECK(cfg2.model.ablation == AblationMode::concat_no_cfam);
    CHECK(cfg2.model.backbone3d.clip_len == 16);
    CHECK(cfg2.trainer.clip.clip_len == 16);
}

TEST_CASE("run outputs: config echo, stamp, force semantics") {
    auto cfg = default_run_config();
    auto dir = fs::temp_directory_path() / "yowo_stamp_test";
    fs::remove_all(dir);
    write_run_outputs(dir.string(), cfg, "yowo synth --out x", false);
    CHECK(fs::exists(dir / "config.json"));
    CHECK(fs::exists(dir / "stamp.txt"));

    // echoed config parses back to the identical document
    std::ifstream f(dir / "config.json");
    json echoed;
    f >> echoed;
    CHECK(echoed == cfg.merged);

    // non-empty without force is refused
    CHECK_THROWS_AS(write_run_outputs(dir.string(), cfg, "again", false), std::runtime_error);
    write_run_outputs(dir.string(), cfg, "again", true);  // --force

    // the stamp flags non-causality when the bank is enabled
    auto cfg2 = resolve_config(json{{"lfb", {{"enabled", true}}}});
    fs::remove_all(dir);
    write_run_outputs(dir.string(), cfg2, "detect", false);
    std::ifstream sf(dir / "stamp.txt");
    std::stringstream ss;
    ss << sf.rdbuf();
    CHECK(ss.str().find("non_causal: true") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("detection record file round trip") {
    std::vector<DetRecord> records{
        {"vid_a", 3, 1, 0.75, {0.1, 0.2, 0.3, 0.4}},
        {"vid_b", 0, 0, 0.5, {0.0, 0.0, 1.0, 1.0}},
    };
    auto path = fs::temp_directory_path() / "yowo_dets_test.txt";
    save_det_records(path.string(), records);

    // exact format: "video_id frame class score x y w h"
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    std::istringstream is(line);
    std::string vid;
    std::size_t frame;
    int cls;
    double score, x, y, w, h;
    REQUIRE((is >> vid >> frame >> cls >> score >> x >> y >> w >> h));
    CHECK(vid == "vid_a");
    CHECK(frame == 3);
    CHECK(cls == 1);

    auto loaded = load_det_records(path.string());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].video == "vid_a");
    CHECK(loaded[0].score == 0.75);
    CHECK(loaded[1].box.w == 1.0);

    {
        std::ofstream bad(path);
        bad << "vid 0 1 0.5 0.1 0.1 bogus 0.2\n";
    }
    CHECK_THROWS_AS(load_det_records(path.string()), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("gt extraction") {
    SynthConfig scfg;
    scfg.num_classes = 2;
    scfg.train_videos_per_class = 1;
    scfg.test_videos_per_class = 0;
    scfg.frames_per_video = 6;
    scfg.image_size = 16;
    scfg.min_object_size = 5.0 / 16;
    scfg.max_object_size = 7.0 / 16;
    scfg.velocity = 0.5 / 16;
    scfg.growth = 0.25 / 16;
    scfg.seed = 3;
    auto data = synth_generate(scfg);

    auto recs = gt_records(data.train);
    CHECK(recs.size() == 2 * 6);  // one box per frame per video

    auto tubes = gt_tubes(data.train);
    REQUIRE(tubes.size() == 2);  // one full-length tube per video
    for (const auto& t : tubes) {
        CHECK(t.tube.boxes.size() == 6);
        for (std::size_t i = 0; i + 1 < t.tube.boxes.size(); ++i)
            CHECK(t.tube.boxes[i + 1].frame == t.tube.boxes[i].frame + 1);
    }
}

TEST_CASE("tiny end-to-end pipeline through the library surface") {
    auto cfg = tiny_run_config();
    auto dir = fs::temp_directory_path() / "yowo_pipe_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto data = synth_generate(cfg.synth);

    // anchors from the train split, in grid units
    std::size_t gw = cfg.synth.image_size / cfg.model.backbone2d.spatial_stride;
    std::vector<std::pair<double, double>> boxes;
    for (const auto& v : data.train)
        for (const auto& frame : v.annotations)
            for (const auto& ann : frame)
                boxes.emplace_back(ann.box.w * double(gw), ann.box.h * double(gw));
    Rng arng(1);
    auto anchors = kmeans_anchors(boxes, cfg.model.head.num_anchors, arng);

    // a few training iterations only; this exercises plumbing, not accuracy
    Rng mrng(cfg.seed);
    auto model = make_model<float>(mrng, cfg.model);
    TrainState<float> state;
    state.data_rng = Rng(5);
    state.aug_rng = Rng(6);
    FitOptions opt;
    std::ostringstream log;
    opt.log = &log;
    fit(model, state, cfg.trainer, anchors, data.train, opt);
    CHECK(log.str().find("iteration,lr") == 0);

    // detect -> file -> link -> file -> eval, every stage from files
    auto records = detect_videos(model, data.test, cfg, anchors);
    auto det_path = (dir / "detections.txt").string();
    save_det_records(det_path, records);
    auto loaded = load_det_records(det_path);
    REQUIRE(loaded.size() == records.size());

    auto tubes = link_detections(loaded, cfg.model.head.num_classes, cfg.link);
    auto tube_path = (dir / "tubes.txt").string();
    save_tubes(tube_path, tubes);
    auto tubes_back = load_tubes(tube_path);
    CHECK(tubes_back.size() == tubes.size());

    auto frep = frame_map(loaded, gt_records(data.test), 0.5);
    CHECK(frep.map >= 0.0);
    CHECK(frep.map <= 1.0);
    auto vreps = video_map_sweep(tubes_back, gt_tubes(data.test), {0.1, 0.2, 0.5, 0.75});
    CHECK(vreps.size() == 4);

    // determinism: rerunning detection from the same checkpointed state
    // reproduces the records byte-identically
    auto records2 = detect_videos(model, data.test, cfg, anchors);
    auto det_path2 = (dir / "detections2.txt").string();
    save_det_records(det_path2, records2);
    std::ifstream a(det_path), b(det_path2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());

    fs::remove_all(dir);
}

TEST_CASE("multithreaded detection matches single-threaded") {
    auto cfg = tiny_run_config();
    auto data = synth_generate(cfg.synth);
    Rng mrng(cfg.seed);
    auto model = make_model<float>(mrng, cfg.model);

    std::size_t gw = cfg.synth.image_size / cfg.model.backbone2d.spatial_stride;
    std::vector<std::pair<double, double>> boxes;
    for (const auto& v : data.train)
        for (const auto& frame : v.annotations)
            for (const auto& ann : frame) boxes.emplace_back(ann.box.w * gw, ann.box.h * gw);
    Rng arng(1);
    auto anchors = kmeans_anchors(boxes, cfg.model.head.num_anchors, arng);

    auto single = detect_videos(model, data.test, cfg, anchors);
    RunConfig cfg4 = cfg;
    cfg4.threads = 4;
    auto multi = detect_videos(model, data.test, cfg4, anchors);
    REQUIRE(single.size() == multi.size());
    for (std::size_t i = 0; i < single.size(); ++i) {
        CHECK(single[i].video == multi[i].video);
        CHECK(single[i].frame == multi[i].frame);
        CHECK(single[i].cls == multi[i].cls);
        CHECK(single[i].score == multi[i].score);
    }
}

TEST_CASE("bench harness reports sane numbers") {
    auto cfg = tiny_run_config();
    Rng rng(3);
    auto model = make_model<float>(rng, cfg.model);
    auto r = bench_model(model, cfg.synth.image_size, 4, 9);
    CHECK(r.clip_len == 8);
    CHECK(r.clips == 4);
    CHECK(r.fps > 0.0);
    CHECK(r.latency_per_clip > 0.0);
    CHECK(r.fps == doctest::Approx(8.0 * 4 / r.seconds));
}

TEST_CASE("activation overlay geometry") {
    Rng rng(4);
    std::vector<double> fv(1 * 3 * 2 * 2);
    for (auto& v : fv) v = rng.uniform(-1.0, 1.0);
    Tensor<double> feat({1, 3, 2, 2}, fv);
    std::vector<float> key(3 * 8 * 8, 0.5f);
    auto img = activation_overlay(feat, key, 8, 8);
    CHECK(img.size() == 3 * 8 * 8);
    for (float v : img) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_SUITE_END();
