#include "yowo/config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace yowo {

json default_config_json() {
    return json{
        {"seed", 1234},
        {"precision", "single"},
        {"threads", 1},
        {"ablation", "full"},
        {"data",
         {{"classes", 4},
          {"train_videos_per_class", 100},
          {"test_videos_per_class", 30},
          {"frames_per_video", 40},
          {"image_size", 64},
          {"min_object_size", 10.0 / 64.0},
          {"max_object_size", 20.0 / 64.0},
          {"velocity", 1.0 / 64.0},
          {"growth", 0.5 / 64.0},
          {"noise_level", 0.2},
          {"object_intensity", 0.9}}},
        {"clip", {{"len", 8}, {"downsample", 1}, {"pad_history", true}}},
        {"backbone2d", {{"widths", {8, 16, 32}}, {"spatial_stride", 8}}},
        {"backbone3d", {{"widths", {8, 16, 32}}, {"spatial_stride", 8}}},
        {"cfam", {{"channels", 0}, {"out_channels", 0}}},  // 0 = derived defaults
        {"head",
         {{"anchors", 5},
          {"class_mode", "single"},
          {"pose_classes", 0},
          {"conf_target", "iou"}}},
        {"losses",
         {{"lambda", 0.5},
          {"gamma", 2.0},
          {"lambda_coord", 5.0},
          {"obj_scale", 1.0},
          {"noobj_scale", 0.5},
          {"class_scale", 1.0},
          {"class_balance", false}}},
        {"postprocess", {{"conf_threshold", 0.25}, {"nms_iou", -1.0}}},  // -1 = by class mode
        {"linker", {{"score_product_weight", 1.0}, {"overlap_weight", 0.5}}},
        {"lfb", {{"enabled", false}, {"clip_len", 8}, {"window", 8}}},
        {"trainer",
         {{"learning_rate", 1e-4},
          {"momentum", 0.9},
          {"weight_decay", 5e-4},
          {"milestones", {0.5, 0.66, 0.83, 0.92}},
          {"lr_factor", 0.5},
          {"batch_size", 8},
          {"max_iterations", 1200},
          {"freeze_3d", false},
          {"augment", true},
          {"class_balance", false},
          {"log_every", 10},
          {"checkpoint_every", 0}}},
    };
}

namespace {

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return true;
    if (a.is_boolean() && b.is_boolean()) return true;
    if (a.is_string() && b.is_string()) return true;
    if (a.is_array() && b.is_array()) return true;
    if (a.is_object() && b.is_object()) return true;
    return false;
}

void merge_strict(json& base, const json& user, const std::string& path) {
    if (!user.is_object())
        throw std::invalid_argument("config: expected an object at " + (path.empty() ? "top level" : path));
    for (auto it = user.begin(); it != user.end(); ++it) {
        std::string here = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key()))
            throw std::invalid_argument("config: unknown key \"" + here + "\"");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_strict(slot, it.value(), here);
        } else {
            if (!same_kind(slot, it.value()))
                throw std::invalid_argument("config: wrong type for \"" + here + "\"");
            slot = it.value();
        }
    }
}

std::vector<std::size_t> widths_of(const json& arr) {
    std::vector<std::size_t> out;
    for (const auto& v : arr) out.push_back(v.get<std::size_t>());
    return out;
}

}  // namespace

RunConfig resolve_config(const json& user, const ConfigOverrides& overrides) {
    json merged = default_config_json();
    merge_strict(merged, user, "");

    if (overrides.seed) merged["seed"] = *overrides.seed;
    if (overrides.precision) merged["precision"] = *overrides.precision;
    if (overrides.lfb) merged["lfb"]["enabled"] = *overrides.lfb;
    if (overrides.ablation) merged["ablation"] = *overrides.ablation;
    if (overrides.clip_len) merged["clip"]["len"] = *overrides.clip_len;
    if (overrides.downsample) merged["clip"]["downsample"] = *overrides.downsample;
    if (overrides.threads) merged["threads"] = *overrides.threads;

    RunConfig cfg;
    cfg.merged = merged;
    cfg.seed = merged["seed"].get<std::uint64_t>();
    cfg.precision = merged["precision"].get<std::string>();
    if (cfg.precision != "single" && cfg.precision != "double")
        throw std::invalid_argument("config: precision must be single or double");
    cfg.threads = merged["threads"].get<std::size_t>();
    if (cfg.threads == 0) cfg.threads = 1;

    const json& d = merged["data"];
    cfg.synth.num_classes = d["classes"].get<std::size_t>();
    cfg.synth.train_videos_per_class = d["train_videos_per_class"].get<std::size_t>();
    cfg.synth.test_videos_per_class = d["test_videos_per_class"].get<std::size_t>();
    cfg.synth.frames_per_video = d["frames_per_video"].get<std::size_t>();
    cfg.synth.image_size = d["image_size"].get<std::size_t>();
    cfg.synth.min_object_size = d["min_object_size"].get<double>();
    cfg.synth.max_object_size = d["max_object_size"].get<double>();
    cfg.synth.velocity = d["velocity"].get<double>();
    cfg.synth.growth = d["growth"].get<double>();
    cfg.synth.noise_level = d["noise_level"].get<double>();
    cfg.synth.object_intensity = d["object_intensity"].get<double>();
    cfg.synth.seed = cfg.seed;

    std::size_t clip_len = merged["clip"]["len"].get<std::size_t>();
    cfg.model.backbone2d.widths = widths_of(merged["backbone2d"]["widths"]);
    cfg.model.backbone2d.spatial_stride = merged["backbone2d"]["spatial_stride"].get<std::size_t>();
    cfg.model.backbone3d.widths = widths_of(merged["backbone3d"]["widths"]);
    cfg.model.backbone3d.spatial_stride = merged["backbone3d"]["spatial_stride"].get<std::size_t>();
    cfg.model.backbone3d.clip_len = clip_len;
    cfg.model.cfam_channels = merged["cfam"]["channels"].get<std::size_t>();
    cfg.model.cfam_out = merged["cfam"]["out_channels"].get<std::size_t>();
    cfg.model.ablation = ablation_from_name(merged["ablation"].get<std::string>());

    cfg.model.head.num_classes = cfg.synth.num_classes;
    cfg.model.head.num_anchors = merged["head"]["anchors"].get<std::size_t>();
    std::string cm = merged["head"]["class_mode"].get<std::string>();
    if (cm == "single")
        cfg.model.head.mode = ClassMode::single_label;
    else if (cm == "multi")
        cfg.model.head.mode = ClassMode::multi_label;
    else
        throw std::invalid_argument("config: head.class_mode must be single or multi");
    cfg.model.head.pose_classes = merged["head"]["pose_classes"].get<std::size_t>();
    if (cfg.model.head.mode == ClassMode::multi_label &&
        (cfg.model.head.pose_classes == 0 ||
         cfg.model.head.pose_classes > cfg.model.head.num_classes))
        throw std::invalid_argument("config: multi-label mode needs 1 <= pose_classes <= classes");

    const json& lo = merged["losses"];
    cfg.trainer.loss.lambda = lo["lambda"].get<double>();
    cfg.trainer.loss.gamma = lo["gamma"].get<double>();
    cfg.trainer.loss.lambda_coord = lo["lambda_coord"].get<double>();
    cfg.trainer.loss.obj_scale = lo["obj_scale"].get<double>();
    cfg.trainer.loss.noobj_scale = lo["noobj_scale"].get<double>();
    cfg.trainer.loss.class_scale = lo["class_scale"].get<double>();
    std::string ct = merged["head"]["conf_target"].get<std::string>();
    if (ct == "iou")
        cfg.trainer.loss.conf_target = ConfTarget::iou;
    else if (ct == "one")
        cfg.trainer.loss.conf_target = ConfTarget::one;
    else
        throw std::invalid_argument("config: head.conf_target must be iou or one");

    const json& t = merged["trainer"];
    cfg.trainer.learning_rate = t["learning_rate"].get<double>();
    cfg.trainer.momentum = t["momentum"].get<double>();
    cfg.trainer.weight_decay = t["weight_decay"].get<double>();
    cfg.trainer.milestone_fractions.clear();
    for (const auto& m : t["milestones"]) cfg.trainer.milestone_fractions.push_back(m.get<double>());
    cfg.trainer.lr_factor = t["lr_factor"].get<double>();
    cfg.trainer.batch_size = t["batch_size"].get<std::size_t>();
    cfg.trainer.max_iterations = t["max_iterations"].get<std::size_t>();
    cfg.trainer.freeze_3d = t["freeze_3d"].get<bool>();
    cfg.trainer.augment = t["augment"].get<bool>();
    cfg.trainer.class_balance = t["class_balance"].get<bool>();
    cfg.trainer.log_every = t["log_every"].get<std::size_t>();
    cfg.trainer.checkpoint_every = t["checkpoint_every"].get<std::size_t>();
    cfg.trainer.seed = cfg.seed;
    cfg.trainer.clip.clip_len = clip_len;
    cfg.trainer.clip.downsample = merged["clip"]["downsample"].get<std::size_t>();
    cfg.trainer.clip.pad_history = merged["clip"]["pad_history"].get<bool>();

    cfg.nms.conf_threshold = merged["postprocess"]["conf_threshold"].get<double>();
    double nms_iou = merged["postprocess"]["nms_iou"].get<double>();
    if (nms_iou < 0) nms_iou = cfg.model.head.mode == ClassMode::multi_label ? 0.5 : 0.4;
    cfg.nms.nms_iou = nms_iou;

    cfg.link.score_product_weight = merged["linker"]["score_product_weight"].get<double>();
    cfg.link.overlap_weight = merged["linker"]["overlap_weight"].get<double>();

    cfg.lfb_enabled = merged["lfb"]["enabled"].get<bool>();
    cfg.lfb_clip_len = merged["lfb"]["clip_len"].get<std::size_t>();
    cfg.lfb_window = merged["lfb"]["window"].get<std::size_t>();

    if (cfg.trainer.batch_size < 2)
        throw std::invalid_argument("config: trainer.batch_size must be >= 2 (batch statistics)");
    if (cfg.synth.image_size % cfg.model.backbone2d.spatial_stride != 0)
        throw std::invalid_argument("config: image_size must be divisible by spatial_stride");
    return cfg;
}

RunConfig load_config_file(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    json user;
    try {
        f >> user;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
    }
    return resolve_config(user, overrides);
}

RunConfig default_run_config() { return resolve_config(json::object()); }

void write_run_outputs(const std::string& out_dir, const RunConfig& cfg,
                       const std::string& command_line, bool force) {
    fs::path dir(out_dir);
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
        throw std::runtime_error("output directory " + out_dir +
                                 " is not empty (use --force to proceed)");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "config.json");
        f << cfg.merged.dump(2) << "\n";
    }
    {
        std::ofstream f(dir / "stamp.txt");
        f << "command: " << command_line << "\n";
        f << "seed: " << cfg.seed << "\n";
        f << "precision: " << cfg.precision << "\n";
        f << "code_version: " << kCodeVersion << "\n";
        if (cfg.lfb_enabled) f << "non_causal: true\n";
    }
}

}  // namespace yowo
