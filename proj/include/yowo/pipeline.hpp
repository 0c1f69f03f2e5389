#pragma once

// File-based stage plumbing shared by the command-line tool and the test
// suites: batched detection over dataset splits (optionally through the
// feature bank), ground-truth extraction, linking, detection-record files,
// the throughput benchmark and activation-map export.

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "yowo/config.hpp"
#include "yowo/lfb.hpp"
#include "yowo/metrics.hpp"
#include "yowo/model.hpp"
#include "yowo/postprocess.hpp"
#include "yowo/trainer.hpp"
#include "yowo/tube.hpp"

namespace yowo {

// ---------------------------------------------------------------------------
// ground truth views
// ---------------------------------------------------------------------------

inline std::vector<GtRecord> gt_records(const std::vector<AnnotatedVideo>& videos) {
    std::vector<GtRecord> out;
    for (const auto& v : videos)
        for (std::size_t t = 0; t < v.num_frames(); ++t)
            for (const auto& ann : v.annotations[t])
                for (int cls : ann.class_ids) out.push_back({v.id, t, cls, ann.box});
    return out;
}

// Per class, consecutive annotated frames become one gap-free tube (the
// synthetic data has a single instance per video).
inline std::vector<VideoTube> gt_tubes(const std::vector<AnnotatedVideo>& videos) {
    std::vector<VideoTube> out;
    for (const auto& v : videos) {
        std::map<int, std::vector<TubeBox>> per_class;
        for (std::size_t t = 0; t < v.num_frames(); ++t)
            for (const auto& ann : v.annotations[t])
                for (int cls : ann.class_ids) per_class[cls].push_back({t, ann.box, 1.0});
        for (auto& [cls, boxes] : per_class) {
            ActionTube tube;
            tube.class_id = cls;
            tube.score = 1.0;
            for (const auto& b : boxes) {
                if (!tube.boxes.empty() && b.frame != tube.boxes.back().frame + 1) {
                    out.push_back({v.id, tube});
                    tube.boxes.clear();
                }
                tube.boxes.push_back(b);
            }
            if (!tube.boxes.empty()) out.push_back({v.id, tube});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// detection
// ---------------------------------------------------------------------------

// Runs every frame of one video as a key frame and emits per-class records
// surviving confidence filtering and per-class NMS. With `bank` given, the
// averaged bank feature replaces the live 3D feature (non-causal path).
template <typename T>
std::vector<DetRecord> detect_video(YowoModel<T>& model, const AnnotatedVideo& video,
                                    const RunConfig& cfg, const AnchorSet& anchors,
                                    const FeatureBank<T>* bank) {
    NoGradScope ng;
    std::vector<DetRecord> out;
    std::size_t plane = video.width * video.height;
    std::size_t d = cfg.trainer.clip.clip_len;
    std::size_t first_key = min_key_index(cfg.trainer.clip);
    if (video.num_frames() <= first_key) return out;

    const std::size_t batch = 8;
    std::vector<std::size_t> keys;
    for (std::size_t k = first_key; k < video.num_frames(); ++k) keys.push_back(k);

    for (std::size_t at = 0; at < keys.size(); at += batch) {
        std::size_t n = std::min(batch, keys.size() - at);
        std::vector<T> clips(n * 3 * d * plane), kbuf(n * 3 * plane);
        for (std::size_t b = 0; b < n; ++b) {
            auto [clip, key] = sample_clip<T>(video, keys[at + b], cfg.trainer.clip);
            std::copy(clip.values().begin(), clip.values().end(),
                      clips.begin() + b * 3 * d * plane);
            std::copy(key.values().begin(), key.values().end(), kbuf.begin() + b * 3 * plane);
        }
        Tensor<T> clip_t({n, 3, d, video.height, video.width}, std::move(clips));
        Tensor<T> key_t({n, 3, video.height, video.width}, std::move(kbuf));

        Tensor<T> raw;
        if (bank) {
            std::vector<Tensor<T>> feats;
            for (std::size_t b = 0; b < n; ++b) {
                Tensor<T> q = query(*bank, keys[at + b], cfg.lfb_window);
                feats.push_back(reshape(q, {1, q.dim(0), q.dim(1), q.dim(2)}));
            }
            Tensor<T> override_3d = concat(feats, 0);
            raw = model_forward(model, clip_t, key_t, NormMode::eval, &override_3d);
        } else {
            raw = model_forward(model, clip_t, key_t, NormMode::eval);
        }

        for (std::size_t b = 0; b < n; ++b) {
            Tensor<T> item = reshape(slice(raw, 0, b, b + 1),
                                     {raw.dim(1), raw.dim(2), raw.dim(3)});
            auto dets = decode(item, anchors, model.cfg.head, keys[at + b]);
            auto kept = filter_confidence(dets, cfg.nms.conf_threshold);
            for (std::size_t cls = 0; cls < model.cfg.head.num_classes; ++cls)
                for (const Detection& det : nms(kept, cls, cfg.nms.nms_iou))
                    out.push_back({video.id, det.frame, int(cls), det.score_for(cls), det.box});
        }
    }
    return out;
}

// Detection across a split; videos may be processed concurrently (the model
// is read-only in eval mode) and results keep the input video order.
template <typename T>
std::vector<DetRecord> detect_videos(YowoModel<T>& model, const std::vector<AnnotatedVideo>& videos,
                                     const RunConfig& cfg, const AnchorSet& anchors,
                                     const std::string& bank_dir = "") {
    std::vector<std::vector<DetRecord>> per_video(videos.size());
    auto worker = [&](std::size_t from, std::size_t step) {
        for (std::size_t i = from; i < videos.size(); i += step) {
            if (cfg.lfb_enabled) {
                if (!model.has_3d)
                    throw std::invalid_argument("detect: the feature bank needs a 3D branch");
                auto bank = build_bank(videos[i], model.b3d, cfg.lfb_clip_len);
                if (!bank_dir.empty())
                    save_bank((std::filesystem::path(bank_dir) / videos[i].id).string(), bank);
                per_video[i] = detect_video(model, videos[i], cfg, anchors, &bank);
            } else {
                per_video[i] =
                    detect_video(model, videos[i], cfg, anchors, (const FeatureBank<T>*)nullptr);
            }
        }
    };
    std::size_t threads = std::min<std::size_t>(cfg.threads, videos.size() ? videos.size() : 1);
    if (threads <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
        for (auto& th : pool) th.join();
    }
    std::vector<DetRecord> out;
    for (auto& v : per_video) out.insert(out.end(), v.begin(), v.end());
    return out;
}

// ---------------------------------------------------------------------------
// detection record files: "video_id frame class score x y w h"
// ---------------------------------------------------------------------------

inline void save_det_records(const std::string& path, const std::vector<DetRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_det_records: cannot open " + path);
    f.precision(17);
    for (const auto& r : records)
        f << r.video << " " << r.frame << " " << r.cls << " " << r.score << " " << r.box.x << " "
          << r.box.y << " " << r.box.w << " " << r.box.h << "\n";
}

inline std::vector<DetRecord> load_det_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_det_records: cannot open " + path);
    std::vector<DetRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        DetRecord r;
        if (!(is >> r.video >> r.frame >> r.cls >> r.score >> r.box.x >> r.box.y >> r.box.w >>
              r.box.h))
            throw std::runtime_error("load_det_records: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// linking
// ---------------------------------------------------------------------------

inline std::vector<VideoTube> link_detections(const std::vector<DetRecord>& records,
                                              std::size_t num_classes, const LinkConfig& link) {
    // group per video, preserving first-seen order for deterministic output
    std::vector<std::string> order;
    std::map<std::string, std::vector<const DetRecord*>> by_video;
    for (const auto& r : records) {
        auto [it, fresh] = by_video.try_emplace(r.video);
        if (fresh) order.push_back(r.video);
        it->second.push_back(&r);
    }

    std::vector<VideoTube> out;
    for (const auto& vid : order) {
        const auto& recs = by_video[vid];
        std::size_t max_frame = 0;
        for (const auto* r : recs) max_frame = std::max(max_frame, r->frame);
        for (std::size_t cls = 0; cls < num_classes; ++cls) {
            std::vector<std::vector<Detection>> per_frame(max_frame + 1);
            for (const auto* r : recs) {
                if (r->cls != int(cls)) continue;
                Detection d;
                d.frame = r->frame;
                d.box = r->box;
                d.confidence = r->score;  // per-class record score
                d.class_scores.assign(num_classes, 0.0);
                d.class_scores[cls] = 1.0;
                per_frame[r->frame].push_back(std::move(d));
            }
            for (auto& tube : viterbi_link(per_frame, cls, link)) out.push_back({vid, tube});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchResult {
    std::size_t clip_len = 0;
    std::size_t clips = 0;
    double seconds = 0;
    double fps = 0;              // (frames per clip * clips) / wall seconds
    double latency_per_clip = 0;
};

template <typename T>
BenchResult bench_model(YowoModel<T>& model, std::size_t image_size, std::size_t clips,
                        std::uint64_t seed) {
    NoGradScope ng;
    Rng rng(seed);
    std::size_t d = model.clip_len();
    std::vector<T> cv(3 * d * image_size * image_size), kv(3 * image_size * image_size);
    for (auto& x : cv) x = T(rng.uniform());
    for (auto& x : kv) x = T(rng.uniform());
    Tensor<T> clip({1, 3, d, image_size, image_size}, cv);
    Tensor<T> key({1, 3, image_size, image_size}, kv);

    for (int warm = 0; warm < 2; ++warm) (void)model_forward(model, clip, key, NormMode::eval);

    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < clips; ++i) (void)model_forward(model, clip, key, NormMode::eval);
    auto t1 = std::chrono::steady_clock::now();

    BenchResult r;
    r.clip_len = d;
    r.clips = clips;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.fps = double(d * clips) / r.seconds;
    r.latency_per_clip = r.seconds / double(clips);
    return r;
}

// ---------------------------------------------------------------------------
// activation heatmaps
// ---------------------------------------------------------------------------

// channel-mean absolute activation, bilinearly upsampled and overlaid on the
// key frame (heat in the red channel)
template <typename T>
std::vector<float> activation_overlay(const Tensor<T>& feature, const std::vector<float>& key_frame,
                                      std::size_t width, std::size_t height) {
    if (feature.ndim() != 4 || feature.dim(0) != 1)
        throw std::invalid_argument("activation_overlay: expects [1,C,h,w]");
    std::size_t c = feature.dim(1), fh = feature.dim(2), fw = feature.dim(3);
    std::vector<double> heat(fh * fw, 0.0);
    const auto& fv = feature.values();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < fh * fw; ++i) heat[i] += std::fabs(double(fv[ch * fh * fw + i]));
    double mx = 0;
    for (double& v : heat) {
        v /= double(c);
        mx = std::max(mx, v);
    }
    if (mx > 0)
        for (double& v : heat) v /= mx;

    std::size_t plane = width * height;
    std::vector<float> out(3 * plane);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double sy = (double(y) + 0.5) * double(fh) / double(height) - 0.5;
            double sx = (double(x) + 0.5) * double(fw) / double(width) - 0.5;
            sy = std::clamp(sy, 0.0, double(fh - 1));
            sx = std::clamp(sx, 0.0, double(fw - 1));
            std::size_t y0 = std::size_t(sy), x0 = std::size_t(sx);
            std::size_t y1 = std::min(y0 + 1, fh - 1), x1 = std::min(x0 + 1, fw - 1);
            double fy = sy - double(y0), fx = sx - double(x0);
            double h = heat[y0 * fw + x0] * (1 - fx) * (1 - fy) + heat[y0 * fw + x1] * fx * (1 - fy) +
                       heat[y1 * fw + x0] * (1 - fx) * fy + heat[y1 * fw + x1] * fx * fy;
            double lum = (double(key_frame[y * width + x]) +
                          double(key_frame[plane + y * width + x]) +
                          double(key_frame[2 * plane + y * width + x])) /
                         3.0;
            out[0 * plane + y * width + x] = float(std::clamp(0.35 * lum + 0.65 * h, 0.0, 1.0));
            out[1 * plane + y * width + x] = float(0.35 * lum);
            out[2 * plane + y * width + x] = float(0.35 * lum);
        }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation wrapper used by training-time hooks and cmd_eval
// ---------------------------------------------------------------------------

template <typename T>
EvalReport evaluate_frame_map(YowoModel<T>& model, const std::vector<AnnotatedVideo>& videos,
                              const RunConfig& cfg, const AnchorSet& anchors,
                              double iou_threshold = 0.5) {
    auto records = detect_videos(model, videos, cfg, anchors);
    return frame_map(records, gt_records(videos), iou_threshold);
}

}  // namespace yowo
