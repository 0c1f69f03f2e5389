#pragma once

// Detection head: anchor priors fitted by k-means under 1-IoU distance,
// the final 1x1 projection, box decoding in the YOLOv2 convention, and the
// inverse mapping that builds training targets.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "yowo/box.hpp"
#include "yowo/nn.hpp"
#include "yowo/rng.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

// k prior (width, height) pairs in grid-cell units, fixed order.
struct AnchorSet {
    std::vector<std::pair<double, double>> sizes;

    std::size_t count() const { return sizes.size(); }
};

// mean 1-IoU of every box to its nearest anchor (the k-means objective)
double anchor_objective(const std::vector<std::pair<double, double>>& boxes, const AnchorSet& a);

// Lloyd iterations under d(box, centroid) = 1 - IoU with boxes co-centered;
// cluster centers are re-fit by coordinate search so the objective never
// increases. Deterministic for a given rng seed. Throws if fewer distinct
// boxes than k.
AnchorSet kmeans_anchors(const std::vector<std::pair<double, double>>& boxes, std::size_t k,
                         Rng& rng, std::size_t max_iters = 100);

// plain text, k lines of "w h" in grid units
void save_anchors(const std::string& path, const AnchorSet& anchors);
AnchorSet load_anchors(const std::string& path);

enum class ClassMode { single_label, multi_label };

struct HeadConfig {
    std::size_t num_classes = 4;
    std::size_t num_anchors = 5;
    ClassMode mode = ClassMode::single_label;
    std::size_t pose_classes = 0;  // multi-label: first P classes form the softmax group

    std::size_t slot_size() const { return num_classes + 5; }
    std::size_t out_channels() const { return num_anchors * slot_size(); }
};

// Per-gt training targets for one frame, indexed by slot (anchor, cy, cx).
struct TargetMaps {
    std::size_t grid_h = 0, grid_w = 0, num_anchors = 0;
    std::vector<std::uint8_t> obj_mask;            // 1 at responsible slots
    std::vector<double> t_coord;                   // 4 per slot: tx, ty, tw, th targets
    std::vector<int> class_target;                 // single-label class id, -1 off slots
    std::vector<std::vector<std::uint8_t>> multi_target;  // per slot multi-hot (multi-label mode)
    std::vector<Box> assigned_gt;                  // gt box per slot (valid where obj)

    std::size_t slots() const { return num_anchors * grid_h * grid_w; }
    std::size_t slot_index(std::size_t a, std::size_t cy, std::size_t cx) const {
        return (a * grid_h + cy) * grid_w + cx;
    }
};

// Assigns each gt box to the cell containing its center and the co-centered
// best-IoU anchor (ties to the lowest anchor index); target t-values are the
// exact inverse of decode. Throws on non-positive gt extents.
TargetMaps build_targets(const std::vector<std::pair<Box, std::vector<int>>>& gts,
                         const AnchorSet& anchors, const HeadConfig& head, std::size_t grid_h,
                         std::size_t grid_w);

// Inverse of build_targets for one slot (used by decode and tests).
inline Box decode_slot(double tx, double ty, double tw, double th, double anchor_w, double anchor_h,
                       std::size_t cx, std::size_t cy, std::size_t gw, std::size_t gh) {
    auto sigm = [](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    };
    double center_x = (sigm(tx) + double(cx)) / double(gw);
    double center_y = (sigm(ty) + double(cy)) / double(gh);
    double w = anchor_w * std::exp(tw) / double(gw);
    double h = anchor_h * std::exp(th) / double(gh);
    return Box::from_center(center_x, center_y, w, h).clipped();
}

// Final 1x1 projection from CFAM output width to k*(NumCls+5) channels.
template <typename T>
struct DetectHead {
    Conv2D<T> proj;  // 1x1, no activation
};

template <typename T>
DetectHead<T> make_head(Rng& rng, std::size_t cin, const HeadConfig& cfg) {
    DetectHead<T> h;
    h.proj = make_conv2d<T>(rng, cin, cfg.out_channels(), 1, 1, 0, true);
    return h;
}

template <typename T>
Tensor<T> head_project(const Tensor<T>& cfam_out, const DetectHead<T>& head) {
    return conv2d_forward(cfam_out, head.proj);
}

template <typename T>
void collect_params(DetectHead<T>& h, const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".proj.weight", h.proj.weight, true});
    out.push_back({prefix + ".proj.bias", h.proj.bias, true});
}

namespace detail {

template <typename T>
std::vector<double> slot_class_scores(const T* raw, std::size_t slot_base, std::size_t plane,
                                       const HeadConfig& head) {
    std::size_t c = head.num_classes;
    std::vector<double> logits(c);
    for (std::size_t j = 0; j < c; ++j) logits[j] = double(raw[(slot_base + 5 + j) * plane]);
    std::vector<double> scores(c);
    auto softmax_into = [&](std::size_t from, std::size_t to) {
        if (from == to) return;
        double mx = logits[from];
        for (std::size_t j = from; j < to; ++j) mx = std::max(mx, logits[j]);
        double denom = 0;
        for (std::size_t j = from; j < to; ++j) denom += std::exp(logits[j] - mx);
        for (std::size_t j = from; j < to; ++j) scores[j] = std::exp(logits[j] - mx) / denom;
    };
    if (head.mode == ClassMode::single_label) {
        softmax_into(0, c);
    } else {
        softmax_into(0, head.pose_classes);
        for (std::size_t j = head.pose_classes; j < c; ++j) {
            double v = logits[j];
            scores[j] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        }
    }
    return scores;
}

}  // namespace detail

// Decodes one item's raw grid [k*(NumCls+5), H', W'] into detections, one
// per (anchor, cell) slot. Confidence filtering happens downstream.
template <typename T>
std::vector<Detection> decode(const Tensor<T>& raw, const AnchorSet& anchors,
                              const HeadConfig& head, std::size_t frame_index) {
    if (raw.ndim() != 3 || raw.dim(0) != head.out_channels())
        throw std::invalid_argument("decode: raw grid must be [" +
                                    std::to_string(head.out_channels()) + ",H,W], got " +
                                    shape_str(raw.shape()));
    if (anchors.count() != head.num_anchors)
        throw std::invalid_argument("decode: anchor count mismatch");
    std::size_t gh = raw.dim(1), gw = raw.dim(2);
    std::size_t plane = gh * gw;
    std::size_t ss = head.slot_size();
    const T* rv = raw.values().data();

    std::vector<Detection> dets;
    dets.reserve(head.num_anchors * plane);
    auto sigm = [](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    };
    for (std::size_t a = 0; a < head.num_anchors; ++a) {
        for (std::size_t cy = 0; cy < gh; ++cy)
            for (std::size_t cx = 0; cx < gw; ++cx) {
                const T* cell = rv + cy * gw + cx;
                std::size_t base = a * ss;
                double tx = double(cell[(base + 0) * plane]);
                double ty = double(cell[(base + 1) * plane]);
                double tw = double(cell[(base + 2) * plane]);
                double th = double(cell[(base + 3) * plane]);
                double tc = double(cell[(base + 4) * plane]);
                Detection d;
                d.frame = frame_index;
                d.box = decode_slot(tx, ty, tw, th, anchors.sizes[a].first, anchors.sizes[a].second,
                                    cx, cy, gw, gh);
                d.confidence = sigm(tc);
                d.class_scores = detail::slot_class_scores(cell, base, plane, head);
                dets.push_back(std::move(d));
            }
    }
    return dets;
}

}  // namespace yowo
