#pragma once

// Joint optimization of both branches, the fusion block and the head:
// mini-batch SGD with momentum and weight decay, a stepped learning-rate
// schedule, clip-consistent augmentation, and resumable checkpoints.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/dataio.hpp"
#include "yowo/losses.hpp"
#include "yowo/model.hpp"
#include "yowo/rng.hpp"

namespace yowo {

struct TrainConfig {
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<double> milestone_fractions = {0.5, 0.66, 0.83, 0.92};
    double lr_factor = 0.5;
    std::size_t batch_size = 8;
    std::size_t max_iterations = 1000;
    ClipSpec clip;
    LossConfig loss;
    bool freeze_3d = false;
    bool augment = true;
    bool class_balance = false;
    std::size_t log_every = 10;
    std::size_t checkpoint_every = 0;  // 0 = final only
    std::uint64_t seed = 1;
};

// base learning rate times lr_factor per milestone already passed
inline double lr_at(std::size_t iteration, const TrainConfig& cfg) {
    double lr = cfg.learning_rate;
    for (double frac : cfg.milestone_fractions) {
        auto milestone = std::size_t(frac * double(cfg.max_iterations));
        if (iteration >= milestone && milestone > 0) lr *= cfg.lr_factor;
    }
    return lr;
}

template <typename T>
struct TrainState {
    std::map<std::string, std::vector<T>> velocity;
    std::size_t iteration = 0;
    Rng data_rng{1};
    Rng aug_rng{2};
};

template <typename T>
struct Batch {
    Tensor<T> clips;  // [N,3,D,H,W]
    Tensor<T> keys;   // [N,3,H,W]
    std::vector<TargetMaps> targets;
};

// Draws (video, key frame) pairs, samples clips, applies one augmentation
// per sample across its whole clip, and builds the training targets from
// the transformed key-frame boxes.
template <typename T>
Batch<T> sample_batch(const std::vector<AnnotatedVideo>& videos, const AnchorSet& anchors,
                      const HeadConfig& head, const TrainConfig& cfg, std::size_t grid_h,
                      std::size_t grid_w, TrainState<T>& state) {
    if (videos.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    std::size_t n = cfg.batch_size;
    const auto& probe = videos.front();
    std::size_t hh = probe.height, ww = probe.width, plane = hh * ww;
    std::size_t d = cfg.clip.clip_len;

    std::vector<T> clips(n * 3 * d * plane);
    std::vector<T> keys(n * 3 * plane);
    std::vector<TargetMaps> targets;
    targets.reserve(n);

    std::size_t min_key = min_key_index(cfg.clip);
    for (std::size_t b = 0; b < n; ++b) {
        const AnnotatedVideo& v = videos[state.data_rng.index(videos.size())];
        if (v.num_frames() <= min_key)
            throw std::invalid_argument("sample_batch: video " + v.id +
                                        " too short for the clip history policy");
        std::size_t key = min_key + state.data_rng.index(v.num_frames() - min_key);
        AugmentDraw draw = cfg.augment ? draw_augment(state.aug_rng) : identity_augment();

        auto idx = clip_indices(key, cfg.clip);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            auto frame = apply_augment_frame(v.frames[idx[t]], ww, hh, draw);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < plane; ++p)
                    clips[((b * 3 + c) * d + t) * plane + p] = T(frame[c * plane + p]);
        }
        auto key_frame = apply_augment_frame(v.frames[key], ww, hh, draw);
        for (std::size_t i = 0; i < key_frame.size(); ++i)
            keys[b * 3 * plane + i] = T(key_frame[i]);

        auto boxes = apply_augment_boxes(v.annotations[key], draw, 1e-4);
        std::vector<std::pair<Box, std::vector<int>>> gts;
        auto flip_map = flip_class_map(head.num_classes);
        for (const auto& ann : boxes) {
            std::vector<int> ids = ann.class_ids;
            if (draw.flip)  // mirrored motion flips direction-pair labels
                for (int& c : ids)
                    if (c >= 0 && std::size_t(c) < flip_map.size()) c = flip_map[std::size_t(c)];
            gts.emplace_back(ann.box, std::move(ids));
        }
        targets.push_back(build_targets(gts, anchors, head, grid_h, grid_w));
    }

    Batch<T> out;
    out.clips = Tensor<T>({n, 3, d, hh, ww}, std::move(clips));
    out.keys = Tensor<T>({n, 3, hh, ww}, std::move(keys));
    out.targets = std::move(targets);
    return out;
}

// One SGD step: forward, loss, backward, v = mu*v - lr*(g + wd*theta),
// theta += v. Frozen parameters are skipped by the update. A non-finite
// loss aborts with a diagnostic dump of the report and gradient norms.
template <typename T>
LossReport train_step(YowoModel<T>& model, TrainState<T>& state, const TrainConfig& cfg,
                      const AnchorSet& anchors, const Batch<T>& batch,
                      const std::vector<double>& class_weights) {
    auto params = model_parameters(model);
    for (auto& p : params) p.tensor.zero_grad();
    clear_record<T>();

    Tensor<T> raw = model_forward(model, batch.clips, batch.keys, NormMode::train);
    LossReport report;
    Tensor<T> loss =
        detection_loss(raw, batch.targets, anchors, model.cfg.head, cfg.loss, class_weights, report);

    if (!std::isfinite(report.l_final)) {
        clear_record<T>();
        std::ostringstream os;
        os << "train_step: non-finite loss at iteration " << state.iteration << "\n";
        os << "  components: " << report.csv_row() << "\n";
        for (auto& p : params) {
            double norm = 0;
            for (T v : p.tensor.values()) norm += double(v) * double(v);
            os << "  " << p.name << " l2=" << std::sqrt(norm) << "\n";
        }
        throw std::runtime_error(os.str());
    }

    backward(loss);

    double lr = lr_at(state.iteration, cfg);
    for (auto& p : params) {
        if (!p.trainable) continue;
        auto& theta = p.tensor.values_mut();
        auto& vel = state.velocity[p.name];
        if (vel.size() != theta.size()) vel.assign(theta.size(), T(0));
        const bool has_g = p.tensor.has_grad();
        const std::vector<T>* g = has_g ? &p.tensor.grad() : nullptr;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            T gi = has_g ? (*g)[i] : T(0);
            vel[i] = T(cfg.momentum) * vel[i] - T(lr) * (gi + T(cfg.weight_decay) * theta[i]);
            theta[i] += vel[i];
        }
    }
    ++state.iteration;
    return report;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

// Self-describing binary blob behind a text header: parameter shapes, norm
// buffers and momentum state by name, rng streams, iteration counter and
// the model fingerprint. Values are stored as doubles so a reload resumes
// bit-identically in either precision.
template <typename T>
void save_checkpoint(const std::string& path, YowoModel<T>& model, const TrainState<T>& state) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    auto params = model_parameters(model);
    auto buffers = model_buffers(model);

    f << "YOWO-CKPT 1\n";
    f << "precision " << (sizeof(T) == 4 ? "single" : "double") << "\n";
    f << "model " << model.cfg.fingerprint() << "\n";
    f << "iteration " << state.iteration << "\n";
    f << "data_rng " << state.data_rng.state() << "\n";
    f << "aug_rng " << state.aug_rng.state() << "\n";
    f << "params " << params.size() << "\n";
    for (auto& p : params) {
        f << p.name << " " << p.tensor.ndim();
        for (std::size_t d : p.tensor.shape()) f << " " << d;
        f << "\n";
    }
    f << "buffers " << buffers.size() << "\n";
    for (auto& b : buffers) f << b.name << " " << b.data->size() << "\n";
    f << "velocity " << state.velocity.size() << "\n";
    for (auto& [name, v] : state.velocity) f << name << " " << v.size() << "\n";
    f << "END\n";

    auto write_vec = [&f](const std::vector<T>& v) {
        for (T x : v) {
            double d = double(x);
            f.write(reinterpret_cast<const char*>(&d), sizeof(d));
        }
    };
    for (auto& p : params) write_vec(p.tensor.values());
    for (auto& b : buffers) write_vec(*b.data);
    for (auto& [name, v] : state.velocity) write_vec(v);
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

template <typename T>
void load_checkpoint(const std::string& path, YowoModel<T>& model, TrainState<T>& state) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    auto expect_line = [&](const char* what) {
        if (!std::getline(f, line))
            throw std::runtime_error(std::string("load_checkpoint: truncated header, wanted ") +
                                     what);
        return line;
    };
    if (expect_line("magic") != "YOWO-CKPT 1")
        throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
    expect_line("precision");  // informational; values are stored as doubles
    std::string model_line = expect_line("model");
    std::string fp = model.cfg.fingerprint();
    if (model_line != "model " + fp)
        throw std::runtime_error("load_checkpoint: checkpoint/config mismatch\n  checkpoint: " +
                                 model_line.substr(6) + "\n  config:     " + fp);
    {
        std::istringstream is(expect_line("iteration"));
        std::string tag;
        is >> tag >> state.iteration;
    }
    {
        std::string l = expect_line("data_rng");
        state.data_rng.restore(l.substr(std::string("data_rng ").size()));
    }
    {
        std::string l = expect_line("aug_rng");
        state.aug_rng.restore(l.substr(std::string("aug_rng ").size()));
    }

    auto params = model_parameters(model);
    std::map<std::string, Tensor<T>> by_name;
    for (auto& p : params) by_name.emplace(p.name, p.tensor);
    auto buffers = model_buffers(model);
    std::map<std::string, std::vector<T>*> buf_by_name;
    for (auto& b : buffers) buf_by_name.emplace(b.name, b.data);

    std::size_t nparams;
    {
        std::istringstream is(expect_line("params"));
        std::string tag;
        is >> tag >> nparams;
    }
    struct Entry {
        std::string name;
        std::size_t numel;
    };
    std::vector<Entry> param_entries, buffer_entries, velocity_entries;
    for (std::size_t i = 0; i < nparams; ++i) {
        std::istringstream is(expect_line("param entry"));
        std::string name;
        std::size_t nd;
        is >> name >> nd;
        std::size_t numel = 1;
        Shape shape;
        for (std::size_t d = 0; d < nd; ++d) {
            std::size_t x;
            is >> x;
            shape.push_back(x);
            numel *= x;
        }
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("load_checkpoint: parameter \"" + name +
                                     "\" not present in this model");
        if (it->second.shape() != shape)
            throw std::runtime_error("load_checkpoint: shape mismatch for \"" + name + "\"");
        param_entries.push_back({name, numel});
    }
    std::size_t nbuf;
    {
        std::istringstream is(expect_line("buffers"));
        std::string tag;
        is >> tag >> nbuf;
    }
    for (std::size_t i = 0; i < nbuf; ++i) {
        std::istringstream is(expect_line("buffer entry"));
        std::string name;
        std::size_t sz;
        is >> name >> sz;
        if (!buf_by_name.count(name))
            throw std::runtime_error("load_checkpoint: buffer \"" + name + "\" unknown");
        buffer_entries.push_back({name, sz});
    }
    std::size_t nvel;
    {
        std::istringstream is(expect_line("velocity"));
        std::string tag;
        is >> tag >> nvel;
    }
    for (std::size_t i = 0; i < nvel; ++i) {
        std::istringstream is(expect_line("velocity entry"));
        std::string name;
        std::size_t sz;
        is >> name >> sz;
        velocity_entries.push_back({name, sz});
    }
    if (expect_line("END") != "END")
        throw std::runtime_error("load_checkpoint: malformed header end");

    auto read_vec = [&f, &path](std::vector<T>& v, std::size_t n) {
        v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double d;
            f.read(reinterpret_cast<char*>(&d), sizeof(d));
            v[i] = T(d);
        }
        if (!f) throw std::runtime_error("load_checkpoint: truncated blob in " + path);
    };
    for (auto& e : param_entries) read_vec(by_name.at(e.name).values_mut(), e.numel);
    for (auto& e : buffer_entries) read_vec(*buf_by_name.at(e.name), e.numel);
    state.velocity.clear();
    for (auto& e : velocity_entries) read_vec(state.velocity[e.name], e.numel);
}

// ---------------------------------------------------------------------------
// fit loop
// ---------------------------------------------------------------------------

struct FitOptions {
    std::string checkpoint_dir;                        // empty = no checkpoints
    std::function<void(std::size_t)> eval_hook;        // invoked on eval_every
    std::size_t eval_every = 0;
    std::ostream* log = nullptr;                       // csv rows
};

template <typename T>
void fit(YowoModel<T>& model, TrainState<T>& state, const TrainConfig& cfg,
         const AnchorSet& anchors, const std::vector<AnnotatedVideo>& train_videos,
         const FitOptions& options) {
    if (train_videos.empty()) throw std::invalid_argument("fit: empty training set");
    if (cfg.freeze_3d && model.has_3d) freeze(model.b3d);

    std::vector<double> class_weights(model.cfg.head.num_classes, 1.0);
    if (cfg.class_balance) {
        std::vector<double> counts(model.cfg.head.num_classes, 0.0);
        for (const auto& v : train_videos)
            for (const auto& frame : v.annotations)
                for (const auto& ann : frame)
                    for (int c : ann.class_ids)
                        if (c >= 0 && std::size_t(c) < counts.size()) counts[std::size_t(c)] += 1;
        class_weights = balance_weights(counts);
    }

    std::size_t s = model.cfg.backbone2d.spatial_stride;
    if (!model.has_2d) s = model.cfg.backbone3d.spatial_stride;
    std::size_t gh = train_videos.front().height / s;
    std::size_t gw = train_videos.front().width / s;

    if (options.log) {
        *options.log << "iteration,lr,l_x,l_y,l_w,l_h,l_conf,l_d,l_cls,l_final\n";
    }
    while (state.iteration < cfg.max_iterations) {
        auto batch =
            sample_batch(train_videos, anchors, model.cfg.head, cfg, gh, gw, state);
        std::size_t it = state.iteration;
        LossReport rep = train_step(model, state, cfg, anchors, batch, class_weights);
        if (options.log && (it % cfg.log_every == 0 || it + 1 == cfg.max_iterations))
            *options.log << it << "," << lr_at(it, cfg) << "," << rep.csv_row() << "\n";
        if (!options.checkpoint_dir.empty() && cfg.checkpoint_every &&
            state.iteration % cfg.checkpoint_every == 0 &&
            state.iteration < cfg.max_iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%06zu.bin", state.iteration);
            save_checkpoint((std::filesystem::path(options.checkpoint_dir) / name).string(), model,
                            state);
        }
        if (options.eval_hook && options.eval_every && state.iteration % options.eval_every == 0)
            options.eval_hook(state.iteration);
    }
    if (!options.checkpoint_dir.empty())
        save_checkpoint((std::filesystem::path(options.checkpoint_dir) / "final.bin").string(),
                        model, state);
}

}  // namespace yowo
