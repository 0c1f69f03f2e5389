#pragma once

// Synthetic motion-video generation and the dataset file formats. Videos
// show one moving rectangle whose class is its motion program; appearance
// and reachable positions are shared across classes, so a single frame
// never identifies the class of a direction pair. Also holds clip sampling
// with downsampling and clip-consistent augmentation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "yowo/box.hpp"
#include "yowo/rng.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

struct FrameAnnotation {
    Box box;
    std::vector<int> class_ids;
};

// Frames are planar RGB float rows (3*H*W, values in [0,1]).
struct AnnotatedVideo {
    std::string id;
    int label = -1;  // video-level class of the synthetic motion program
    std::size_t width = 0, height = 0;
    std::vector<std::vector<float>> frames;
    std::vector<std::vector<FrameAnnotation>> annotations;  // one list per frame

    std::size_t num_frames() const { return frames.size(); }
};

// motion programs, in class-id order
enum class MotionProgram { move_left, move_right, grow, shrink, move_up, move_down };

const char* motion_program_name(std::size_t cls);

struct SynthConfig {
    std::size_t num_classes = 4;  // prefix of the motion-program list, 2..6
    std::size_t train_videos_per_class = 100;
    std::size_t test_videos_per_class = 30;
    std::size_t frames_per_video = 40;
    std::size_t image_size = 64;
    double min_object_size = 10.0 / 64.0;  // normalized side length
    double max_object_size = 20.0 / 64.0;
    double velocity = 1.0 / 64.0;          // normalized center shift per frame
    double growth = 0.5 / 64.0;            // normalized size delta per frame
    double noise_level = 0.2;
    double object_intensity = 0.9;
    std::uint64_t seed = 1234;
};

struct Dataset {
    std::vector<AnnotatedVideo> train;
    std::vector<AnnotatedVideo> test;
};

// Deterministic for a fixed config; throws when the object cannot complete
// its trajectory inside the frame.
Dataset synth_generate(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// files
// ---------------------------------------------------------------------------

void write_ppm(const std::string& path, const std::vector<float>& frame, std::size_t w,
               std::size_t h);
std::vector<float> read_ppm(const std::string& path, std::size_t& w, std::size_t& h);

// one line per box: "frame_index class_id x y w h" (normalized floats);
// multi-label boxes repeat the line per class id and merge on load
void save_annotations(const std::string& path, const AnnotatedVideo& video);
std::vector<std::vector<FrameAnnotation>> load_annotations(const std::string& path,
                                                           std::size_t num_frames);

// dataset directory: manifest.txt + videos/<id>/frame_NNNNN.ppm +
// annotations/<id>.txt
void save_dataset(const std::string& dir, const Dataset& data);
Dataset load_dataset(const std::string& dir);
std::string manifest_text(const Dataset& data);

// ---------------------------------------------------------------------------
// clip sampling
// ---------------------------------------------------------------------------

struct ClipSpec {
    std::size_t clip_len = 8;    // D
    std::size_t downsample = 1;  // d
    bool pad_history = true;     // repeat frame 0 before the video start
};

// frame indices key-(D-1)d ... key-d, key, clamped at 0
std::vector<std::size_t> clip_indices(std::size_t key_frame, const ClipSpec& spec);

// smallest legal key frame index under the spec's history policy
std::size_t min_key_index(const ClipSpec& spec);

// (clip [3,D,H,W], key frame [3,H,W]); the key frame is the clip's last frame
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_clip(const AnnotatedVideo& video, std::size_t key_frame,
                                            const ClipSpec& spec) {
    if (key_frame >= video.num_frames())
        throw std::invalid_argument("sample_clip: key frame " + std::to_string(key_frame) +
                                    " out of range");
    auto idx = clip_indices(key_frame, spec);
    std::size_t plane = video.width * video.height;
    std::vector<T> clip(3 * idx.size() * plane);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const auto& f = video.frames[idx[t]];
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < plane; ++p)
                clip[(c * idx.size() + t) * plane + p] = T(f[c * plane + p]);
    }
    std::vector<T> key(3 * plane);
    const auto& kf = video.frames[key_frame];
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = T(kf[i]);
    return {Tensor<T>({3, idx.size(), video.height, video.width}, std::move(clip)),
            Tensor<T>({3, video.height, video.width}, std::move(key))};
}

// ---------------------------------------------------------------------------
// augmentation
// ---------------------------------------------------------------------------

// One transform draw applied identically to every frame of a clip: optional
// horizontal flip, scale in [0.8, 1.2], crop back to the original size.
// Offsets are the crop origin in scale-relative normalized units, so a
// point at normalized x maps to x*scale - offset_x.
struct AugmentDraw {
    bool flip = false;
    double scale = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
};

AugmentDraw draw_augment(Rng& rng);
AugmentDraw identity_augment();

// Horizontal flip counterpart of each motion-program class: a mirrored
// left-mover is a right-mover, so its label flips with the pixels; the
// other programs are mirror-invariant.
std::vector<int> flip_class_map(std::size_t num_classes);

std::vector<float> apply_augment_frame(const std::vector<float>& frame, std::size_t w,
                                       std::size_t h, const AugmentDraw& draw);

// transforms and clips boxes; boxes falling below min_area are dropped
std::vector<FrameAnnotation> apply_augment_boxes(const std::vector<FrameAnnotation>& boxes,
                                                 const AugmentDraw& draw, double min_area);

}  // namespace yowo
