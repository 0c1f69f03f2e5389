// Command-line front end: synth, anchors, train, detect, link, eval, bench
// and inspect subcommands over file-based stage boundaries, so every stage
// can be rerun in isolation from its saved inputs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "yowo/pipeline.hpp"

namespace fs = std::filesystem;
using namespace yowo;

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
    std::string anchors_path;
    std::string detections_path;
    std::string tubes_path;
    std::string split = "test";
    std::string video_id;
    std::size_t frame = 0;
    double eval_iou = 0.5;
    std::size_t bench_clips = 20;
    std::size_t kmeans_k = 0;  // 0 = head.anchors
    std::size_t eval_every = 0;
    bool force = false;

    ConfigOverrides overrides;
    std::string command_line;
};

RunConfig make_config(const CliArgs& args) {
    if (args.config_path.empty()) return resolve_config(nlohmann::json::object(), args.overrides);
    return load_config_file(args.config_path, args.overrides);
}

AnchorSet anchors_for_dataset(const Dataset& data, const RunConfig& cfg, std::size_t k) {
    std::size_t gw = cfg.synth.image_size / cfg.model.backbone2d.spatial_stride;
    std::vector<std::pair<double, double>> boxes;
    for (const auto& v : data.train)
        for (const auto& frame : v.annotations)
            for (const auto& ann : frame)
                boxes.emplace_back(ann.box.w * double(gw), ann.box.h * double(gw));
    Rng rng(cfg.seed ^ 0xa17c0u);
    return kmeans_anchors(boxes, k, rng);
}

AnchorSet find_anchors(const CliArgs& args) {
    if (!args.anchors_path.empty()) return load_anchors(args.anchors_path);
    // conventional locations relative to the checkpoint
    fs::path ck(args.checkpoint);
    for (fs::path cand :
         {ck.parent_path() / "anchors.txt", ck.parent_path().parent_path() / "anchors.txt"})
        if (fs::exists(cand)) return load_anchors(cand.string());
    throw std::runtime_error("no anchors file found near " + args.checkpoint +
                             "; pass --anchors PATH");
}

const std::vector<AnnotatedVideo>& pick_split(const Dataset& data, const std::string& split) {
    if (split == "train") return data.train;
    if (split == "test") return data.test;
    throw std::runtime_error("unknown split \"" + split + "\" (train|test)");
}

int cmd_synth(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = synth_generate(cfg.synth);
    save_dataset(args.out_dir, data);
    std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
              << " test videos to " << args.out_dir << "\n";
    return 0;
}

int cmd_anchors(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = load_dataset(args.data_dir);
    std::size_t k = args.kmeans_k ? args.kmeans_k : cfg.model.head.num_anchors;
    AnchorSet anchors = anchors_for_dataset(data, cfg, k);
    fs::path out = fs::path(args.out_dir) / "anchors.txt";
    save_anchors(out.string(), anchors);
    std::cout << "wrote " << anchors.count() << " anchors to " << out.string() << "\n";
    return 0;
}

template <typename T>
int cmd_train(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = load_dataset(args.data_dir);

    AnchorSet anchors;
    if (!args.anchors_path.empty())
        anchors = load_anchors(args.anchors_path);
    else
        anchors = anchors_for_dataset(data, cfg, cfg.model.head.num_anchors);
    save_anchors((fs::path(args.out_dir) / "anchors.txt").string(), anchors);

    Rng init_rng(cfg.seed);
    auto model = make_model<T>(init_rng, cfg.model);
    TrainState<T> state;
    state.data_rng = Rng(cfg.seed ^ 0xda7au);
    state.aug_rng = Rng(cfg.seed ^ 0xa06au);

    if (!args.checkpoint.empty()) load_checkpoint(args.checkpoint, model, state);

    fs::path ckpt_dir = fs::path(args.out_dir) / "checkpoints";
    fs::create_directories(ckpt_dir);
    std::ofstream log(fs::path(args.out_dir) / "train_log.csv");
    std::ofstream eval_log(fs::path(args.out_dir) / "eval_log.txt");

    FitOptions opt;
    opt.checkpoint_dir = ckpt_dir.string();
    opt.log = &log;
    if (args.eval_every) {
        opt.eval_every = args.eval_every;
        opt.eval_hook = [&](std::size_t iter) {
            std::vector<AnnotatedVideo> subset(data.test.begin(),
                                               data.test.begin() +
                                                   std::min<std::size_t>(8, data.test.size()));
            auto rep = evaluate_frame_map(model, subset, cfg, anchors);
            eval_log << "iteration " << iter << " frame_map@0.5 " << rep.map << "\n";
            eval_log.flush();
        };
    }
    fit(model, state, cfg.trainer, anchors, data.train, opt);
    std::cout << "trained to iteration " << state.iteration << ", final checkpoint in "
              << ckpt_dir.string() << "\n";
    return 0;
}

template <typename T>
int cmd_detect(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = load_dataset(args.data_dir);
    const auto& videos = pick_split(data, args.split);

    Rng init_rng(cfg.seed);
    auto model = make_model<T>(init_rng, cfg.model);
    TrainState<T> state;
    load_checkpoint(args.checkpoint, model, state);
    AnchorSet anchors = find_anchors(args);

    std::string bank_dir;
    if (cfg.lfb_enabled) {
        bank_dir = (fs::path(args.out_dir) / "lfb").string();
        fs::create_directories(bank_dir);
    }
    auto records = detect_videos(model, videos, cfg, anchors, bank_dir);
    fs::path out = fs::path(args.out_dir) / "detections.txt";
    save_det_records(out.string(), records);
    std::cout << "wrote " << records.size() << " detection records to " << out.string() << "\n";
    return 0;
}

int cmd_link(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    auto records = load_det_records(args.detections_path);
    auto tubes = link_detections(records, cfg.model.head.num_classes, cfg.link);
    fs::path out = fs::path(args.out_dir) / "tubes.txt";
    save_tubes(out.string(), tubes);
    std::cout << "wrote " << tubes.size() << " tubes to " << out.string() << "\n";
    return 0;
}

int cmd_eval(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = load_dataset(args.data_dir);
    const auto& videos = pick_split(data, args.split);

    if (!args.tubes_path.empty()) {
        auto tubes = load_tubes(args.tubes_path);
        auto gts = gt_tubes(videos);
        std::ofstream table(fs::path(args.out_dir) / "eval_video.txt");
        std::ofstream lines(fs::path(args.out_dir) / "eval_video.tsv");
        for (const auto& rep : video_map_sweep(tubes, gts, {0.1, 0.2, 0.5, 0.75})) {
            table << report_table(rep, "video mAP");
            lines << report_lines(rep, "video");
            std::cout << "video-mAP@" << rep.iou_threshold << " = " << rep.map << "\n";
        }
        return 0;
    }
    if (args.detections_path.empty())
        throw std::runtime_error("eval needs --detections or --tubes");
    auto records = load_det_records(args.detections_path);
    auto rep = frame_map(records, gt_records(videos), args.eval_iou);
    std::ofstream table(fs::path(args.out_dir) / "eval_frame.txt");
    std::ofstream lines(fs::path(args.out_dir) / "eval_frame.tsv");
    table << report_table(rep, "frame mAP");
    lines << report_lines(rep, "frame");
    std::cout << "frame-mAP@" << rep.iou_threshold << " = " << rep.map
              << " (recall " << rep.recall << ", cls acc " << rep.classification_accuracy << ")\n";
    return 0;
}

template <typename T>
int cmd_bench(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);

    std::ofstream report(fs::path(args.out_dir) / "bench.txt");
    report << "# clip_len clips seconds fps latency_per_clip_s\n";
    for (std::size_t clip_len : {std::size_t(8), std::size_t(16)}) {
        ModelConfig mc = cfg.model;
        mc.backbone3d.clip_len = clip_len;
        Rng rng(cfg.seed);
        auto model = make_model<T>(rng, mc);
        if (!args.checkpoint.empty() && clip_len == cfg.model.backbone3d.clip_len) {
            TrainState<T> state;
            load_checkpoint(args.checkpoint, model, state);
        }
        // best of three timed passes
        BenchResult best;
        for (int rep = 0; rep < 3; ++rep) {
            auto r = bench_model(model, cfg.synth.image_size, args.bench_clips, cfg.seed + rep);
            if (best.clips == 0 || r.latency_per_clip < best.latency_per_clip) best = r;
        }
        report << best.clip_len << " " << best.clips << " " << best.seconds << " " << best.fps
               << " " << best.latency_per_clip << "\n";
        std::cout << clip_len << "-frame clips: " << best.fps << " fps, "
                  << best.latency_per_clip * 1e3 << " ms/clip\n";
    }
    return 0;
}

template <typename T>
int cmd_inspect(const CliArgs& args) {
    RunConfig cfg = make_config(args);
    write_run_outputs(args.out_dir, cfg, args.command_line, args.force);
    Dataset data = load_dataset(args.data_dir);

    const AnnotatedVideo* video = nullptr;
    for (const auto& split : {&data.test, &data.train})
        for (const auto& v : *split)
            if (v.id == args.video_id) video = &v;
    if (!video) throw std::runtime_error("video \"" + args.video_id + "\" not in " + args.data_dir);
    if (args.frame >= video->num_frames())
        throw std::runtime_error("frame " + std::to_string(args.frame) + " out of range for " +
                                 args.video_id);

    Rng init_rng(cfg.seed);
    auto model = make_model<T>(init_rng, cfg.model);
    TrainState<T> state;
    load_checkpoint(args.checkpoint, model, state);

    NoGradScope ng;
    auto [clip, key] = sample_clip<T>(*video, args.frame, cfg.trainer.clip);
    Tensor<T> clip_b = reshape(clip, {1, 3, cfg.trainer.clip.clip_len, video->height, video->width});
    Tensor<T> key_b = reshape(key, {1, 3, video->height, video->width});

    if (model.has_2d) {
        auto f2 = forward_2d(key_b, model.b2d, NormMode::eval);
        auto img = activation_overlay(f2, video->frames[args.frame], video->width, video->height);
        write_ppm((fs::path(args.out_dir) / "activation_2d.ppm").string(), img, video->width,
                  video->height);
    }
    if (model.has_3d) {
        auto f3 = forward_3d(clip_b, model.b3d, NormMode::eval);
        auto img = activation_overlay(f3, video->frames[args.frame], video->width, video->height);
        write_ppm((fs::path(args.out_dir) / "activation_3d.ppm").string(), img, video->width,
                  video->height);
    }
    std::cout << "wrote activation maps to " << args.out_dir << "\n";
    return 0;
}

template <typename T>
int dispatch(const std::string& cmd, const CliArgs& args) {
    if (cmd == "synth") return cmd_synth(args);
    if (cmd == "anchors") return cmd_anchors(args);
    if (cmd == "train") return cmd_train<T>(args);
    if (cmd == "detect") return cmd_detect<T>(args);
    if (cmd == "link") return cmd_link(args);
    if (cmd == "eval") return cmd_eval(args);
    if (cmd == "bench") return cmd_bench<T>(args);
    if (cmd == "inspect") return cmd_inspect<T>(args);
    throw std::runtime_error("unknown command " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatiotemporal action localization on synthetic motion videos"};
    app.require_subcommand(1);

    CliArgs args;
    std::ostringstream cmdline;
    for (int i = 0; i < argc; ++i) cmdline << (i ? " " : "") << argv[i];
    args.command_line = cmdline.str();

    std::string precision, ablation, lfb;
    std::uint64_t seed = 0;
    std::size_t clip_len = 0, downsample = 0, threads = 0;
    bool have_seed = false;

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", args.config_path, "JSON configuration file");
        if (needs_out) sub->add_option("--out", args.out_dir, "output directory")->required();
        sub->add_flag("--force", args.force, "allow writing into a non-empty output directory");
        sub->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
            have_seed = true;
        });
        sub->add_option("--threads", threads, "worker threads for detection");
        sub->add_option("--precision", precision, "single|double")
            ->check(CLI::IsMember({"single", "double"}));
        sub->add_option("--lfb", lfb, "on|off")->check(CLI::IsMember({"on", "off"}));
        sub->add_option("--ablation", ablation, "2d|3d|concat|full")
            ->check(CLI::IsMember({"2d", "3d", "concat", "full"}));
        sub->add_option("--clip-len", clip_len, "clip length (8|16|32)")
            ->check(CLI::IsMember({8, 16, 32}));
        sub->add_option("--downsample", downsample, "clip downsampling rate (1|2|3)")
            ->check(CLI::IsMember({1, 2, 3}));
    };

    auto* synth = app.add_subcommand("synth", "generate the synthetic motion dataset");
    add_common(synth, true);

    auto* anchors = app.add_subcommand("anchors", "fit anchor priors by k-means");
    add_common(anchors, true);
    anchors->add_option("--data", args.data_dir, "dataset directory")->required();
    anchors->add_option("--k", args.kmeans_k, "number of anchors");

    auto* train = app.add_subcommand("train", "train the detector");
    add_common(train, true);
    train->add_option("--data", args.data_dir, "dataset directory")->required();
    train->add_option("--anchors", args.anchors_path, "anchor file (default: fit from data)");
    train->add_option("--resume", args.checkpoint, "checkpoint to resume from");
    train->add_option("--eval-every", args.eval_every, "frame-mAP on a held-out subset every N iterations");

    auto* detect = app.add_subcommand("detect", "run detection over a dataset split");
    add_common(detect, true);
    detect->add_option("--data", args.data_dir, "dataset directory")->required();
    detect->add_option("--checkpoint", args.checkpoint, "trained checkpoint")->required();
    detect->add_option("--anchors", args.anchors_path, "anchor file");
    detect->add_option("--split", args.split, "train|test");

    auto* link = app.add_subcommand("link", "link detections into action tubes");
    add_common(link, true);
    link->add_option("--detections", args.detections_path, "detection record file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate detections or tubes");
    add_common(eval, true);
    eval->add_option("--data", args.data_dir, "dataset directory")->required();
    eval->add_option("--detections", args.detections_path, "detection record file");
    eval->add_option("--tubes", args.tubes_path, "tube record file");
    eval->add_option("--split", args.split, "train|test");
    eval->add_option("--iou", args.eval_iou, "frame-mAP IoU threshold");

    auto* bench = app.add_subcommand("bench", "throughput for 8- and 16-frame clips");
    add_common(bench, true);
    bench->add_option("--checkpoint", args.checkpoint, "checkpoint for the configured clip length");
    bench->add_option("--clips", args.bench_clips, "clips per timed pass");

    auto* inspect = app.add_subcommand("inspect", "export branch activation heatmaps");
    add_common(inspect, true);
    inspect->add_option("--data", args.data_dir, "dataset directory")->required();
    inspect->add_option("--checkpoint", args.checkpoint, "trained checkpoint")->required();
    inspect->add_option("--video", args.video_id, "video id")->required();
    inspect->add_option("--frame", args.frame, "key frame index");

    CLI11_PARSE(app, argc, argv);

    if (have_seed) args.overrides.seed = seed;
    if (!precision.empty()) args.overrides.precision = precision;
    if (!lfb.empty()) args.overrides.lfb = (lfb == "on");
    if (!ablation.empty()) args.overrides.ablation = ablation;
    if (clip_len) args.overrides.clip_len = clip_len;
    if (downsample) args.overrides.downsample = downsample;
    if (threads) args.overrides.threads = threads;

    try {
        std::string cmd = app.get_subcommands().front()->get_name();
        RunConfig probe = make_config(args);  // validates early, decides precision
        if (probe.precision == "double") return dispatch<double>(cmd, args);
        return dispatch<float>(cmd, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
