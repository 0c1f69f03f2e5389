#pragma once

// Training objectives: smooth-L1 coordinate regression, MSE confidence,
// focal classification with optional class-balance weights, and their
// combination into the final detection loss. Every term is composed from
// recorded tensor primitives, so gradients come from the tape.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/detect.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

// Per-batch scalar components. l_d = l_x+l_y+l_w+l_h+l_conf and
// l_final = lambda*l_d + l_cls by construction.
struct LossReport {
    double l_x = 0, l_y = 0, l_w = 0, l_h = 0;
    double l_conf = 0;
    double l_d = 0;
    double l_cls = 0;
    double l_final = 0;

    std::string csv_row() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", l_x, l_y, l_w,
                      l_h, l_conf, l_d, l_cls, l_final);
        return buf;
    }
};

enum class ConfTarget { iou, one };  // per-step IoU recompute vs fixed 1.0

struct LossConfig {
    double lambda_coord = 5.0;  // coordinate terms, object slots
    double obj_scale = 1.0;     // confidence term, object slots
    double noobj_scale = 0.5;   // confidence term, no-object slots
    double class_scale = 1.0;   // classification term, object slots
    double lambda = 0.5;        // weight on the detection loss in the final sum
    double gamma = 2.0;         // focal modulation
    ConfTarget conf_target = ConfTarget::iou;
};

inline constexpr double kProbClamp = 1e-7;

// sum over elements of w * smooth_l1(pred - target), beta = 1:
// 0.5 r^2 when |r| < 1, |r| - 0.5 otherwise.
template <typename T>
Tensor<T> smooth_l1_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight) {
    Tensor<T> r = sub(pred, target);
    Tensor<T> absr = add(relu(r), relu(scalar_mul(r, T(-1))));
    Tensor<T> excess = relu(add_scalar(absr, T(-1)));
    Tensor<T> huber = sub(scalar_mul(mul(r, r), T(0.5)), scalar_mul(mul(excess, excess), T(0.5)));
    return reduce_sum(mul(huber, weight));
}

// sum over elements of w * (pred - target)^2
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight) {
    Tensor<T> d = sub(pred, target);
    return reduce_sum(mul(mul(d, d), weight));
}

// positive-class focal term: sum of w * -(1-x)^gamma * log(x), inputs
// clamped away from {0,1} so the log stays finite
template <typename T>
Tensor<T> focal_positive_term(const Tensor<T>& probs, const Tensor<T>& weight, T gamma) {
    Tensor<T> x = clamp(probs, T(kProbClamp), T(1) - T(kProbClamp));
    Tensor<T> mod = pow_const(sub(Tensor<T>::scalar(T(1)), x), gamma);
    return scalar_mul(reduce_sum(mul(mul(mod, log(x)), weight)), T(-1));
}

// negative-class focal term: sum of w * -x^gamma * log(1-x)
template <typename T>
Tensor<T> focal_negative_term(const Tensor<T>& probs, const Tensor<T>& weight, T gamma) {
    Tensor<T> x = clamp(probs, T(kProbClamp), T(1) - T(kProbClamp));
    Tensor<T> mod = pow_const(x, gamma);
    Tensor<T> lognx = log(sub(Tensor<T>::scalar(T(1)), x));
    return scalar_mul(reduce_sum(mul(mul(mod, lognx), weight)), T(-1));
}

// Full binary focal loss with elementwise {0,1} targets and per-element
// weights (class-balance factors fold into the weights).
template <typename T>
Tensor<T> focal_loss(const Tensor<T>& probs, const Tensor<T>& targets, const Tensor<T>& weight,
                     T gamma) {
    if (probs.shape() != targets.shape() || probs.shape() != weight.shape())
        throw std::invalid_argument("focal_loss: shape mismatch");
    Tensor<T> pos_w = mul(weight, targets);
    Tensor<T> neg_w = mul(weight, sub(Tensor<T>::scalar(T(1)), targets));
    return add(focal_positive_term(probs, pos_w, gamma), focal_negative_term(probs, neg_w, gamma));
}

// scalar convenience used by the unit vectors
template <typename T>
T focal_loss_value(T x, int y, T gamma, T alpha_c) {
    NoGradScope ng;
    return focal_loss(Tensor<T>::scalar(x), Tensor<T>::scalar(T(y)), Tensor<T>::scalar(alpha_c),
                      gamma)
        .value();
}

// alpha_c = exp(-n_c / sum(n)); rarer classes get larger weights and the
// weights are invariant to scaling all counts.
inline std::vector<double> balance_weights(const std::vector<double>& class_counts) {
    double total = 0;
    for (double c : class_counts) {
        if (c < 0) throw std::invalid_argument("balance_weights: negative count");
        total += c;
    }
    if (total <= 0) throw std::invalid_argument("balance_weights: zero total count");
    std::vector<double> w(class_counts.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(-class_counts[i] / total);
    return w;
}

// Classification loss over the responsible slots' logits [S, C].
// single-label: focal over softmaxed scores, true-class term only.
// multi-label: focal over the softmaxed pose group plus full binary focal
// over per-class sigmoids of the interaction classes.
template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, const std::vector<std::vector<int>>& targets,
                              ClassMode mode, std::size_t pose_classes, T gamma,
                              const std::vector<double>& class_weights) {
    if (logits.ndim() != 2) throw std::invalid_argument("classification_loss: logits must be [S,C]");
    std::size_t s = logits.dim(0), c = logits.dim(1);
    if (targets.size() != s) throw std::invalid_argument("classification_loss: target count");
    if (class_weights.size() != c)
        throw std::invalid_argument("classification_loss: class weight count");
    if (s == 0) return Tensor<T>::scalar(T(0));

    if (mode == ClassMode::single_label) {
        std::vector<T> w(s * c, T(0));
        for (std::size_t i = 0; i < s; ++i) {
            if (targets[i].size() != 1)
                throw std::invalid_argument("classification_loss: single-label wants one class");
            int cls = targets[i][0];
            if (cls < 0 || std::size_t(cls) >= c)
                throw std::invalid_argument("classification_loss: class id out of range");
            w[i * c + std::size_t(cls)] = T(class_weights[std::size_t(cls)]);
        }
        Tensor<T> probs = softmax_axis(logits, 1);
        return focal_positive_term(probs, Tensor<T>({s, c}, std::move(w)), gamma);
    }

    std::size_t p = pose_classes;
    if (p == 0 || p > c)
        throw std::invalid_argument("classification_loss: bad pose group size");
    std::vector<T> pose_w(s * p, T(0));
    std::vector<T> inter_t(s * (c - p), T(0)), inter_w(s * (c - p), T(0));
    for (std::size_t i = 0; i < s; ++i) {
        std::size_t pose_hits = 0;
        for (int cls : targets[i]) {
            if (cls < 0 || std::size_t(cls) >= c)
                throw std::invalid_argument("classification_loss: class id out of range");
            if (std::size_t(cls) < p) {
                ++pose_hits;
                pose_w[i * p + std::size_t(cls)] = T(class_weights[std::size_t(cls)]);
            } else {
                inter_t[i * (c - p) + (std::size_t(cls) - p)] = T(1);
            }
        }
        if (pose_hits != 1)
            throw std::invalid_argument("classification_loss: pose target must be one-hot, got " +
                                        std::to_string(pose_hits) + " pose labels");
        for (std::size_t j = p; j < c; ++j) inter_w[i * (c - p) + (j - p)] = T(class_weights[j]);
    }

    Tensor<T> pose_probs = softmax_axis(slice(logits, 1, 0, p), 1);
    Tensor<T> total = focal_positive_term(pose_probs, Tensor<T>({s, p}, std::move(pose_w)), gamma);
    if (p < c) {
        Tensor<T> inter_probs = sigmoid(slice(logits, 1, p, c));
        total = add(total, focal_loss(inter_probs, Tensor<T>({s, c - p}, std::move(inter_t)),
                                      Tensor<T>({s, c - p}, std::move(inter_w)), gamma));
    }
    return total;
}

// L_final = lambda * L_D + L_Cls
template <typename T>
Tensor<T> total_loss(const Tensor<T>& l_d, const Tensor<T>& l_cls, T lambda) {
    return add(scalar_mul(l_d, lambda), l_cls);
}

// ---------------------------------------------------------------------------
// batched detection loss over a raw head output
// ---------------------------------------------------------------------------

namespace detail {

// pulls one slot's channel block [from,to) at cell (cy,cx) as a [1, to-from] row
template <typename T>
Tensor<T> gather_slot(const Tensor<T>& raw, std::size_t item, std::size_t from, std::size_t to,
                      std::size_t cy, std::size_t cx) {
    Tensor<T> t = slice(raw, 0, item, item + 1);
    t = slice(t, 1, from, to);
    t = slice(t, 2, cy, cy + 1);
    t = slice(t, 3, cx, cx + 1);
    return reshape(t, {1, to - from});
}

}  // namespace detail

// Computes every loss term for a batch. `targets` holds one TargetMaps per
// batch item. Confidence targets follow cfg.conf_target: either the IoU of
// the currently decoded box with its assigned gt (recomputed each call) or
// a fixed 1. Returns the differentiable total loss and fills `report`.
template <typename T>
Tensor<T> detection_loss(const Tensor<T>& raw, const std::vector<TargetMaps>& targets,
                         const AnchorSet& anchors, const HeadConfig& head, const LossConfig& cfg,
                         const std::vector<double>& class_weights, LossReport& report) {
    if (raw.ndim() != 4 || raw.dim(1) != head.out_channels())
        throw std::invalid_argument("detection_loss: raw grid shape " + shape_str(raw.shape()));
    std::size_t n = raw.dim(0);
    if (targets.size() != n) throw std::invalid_argument("detection_loss: target count mismatch");
    std::size_t gh = raw.dim(2), gw = raw.dim(3);
    std::size_t k = head.num_anchors, ss = head.slot_size();
    std::size_t plane = gh * gw;
    T inv_n = T(1) / T(n);

    // confidence grid: k channels of sigmoided tconf per item
    std::vector<Tensor<T>> conf_parts;
    conf_parts.reserve(k);
    for (std::size_t a = 0; a < k; ++a)
        conf_parts.push_back(slice(raw, 1, a * ss + 4, a * ss + 5));
    Tensor<T> conf_pred = sigmoid(concat(conf_parts, 1));  // [N,k,H,W]

    std::vector<T> conf_tgt(n * k * plane, T(0));
    std::vector<T> conf_w(n * k * plane, T(cfg.noobj_scale) * inv_n);
    const T* rv = raw.values().data();

    // gathered responsible slots
    std::vector<Tensor<T>> coord_rows, class_rows;
    std::vector<double> tgt_coord;
    std::vector<std::vector<int>> cls_targets;

    for (std::size_t i = 0; i < n; ++i) {
        const TargetMaps& tm = targets[i];
        if (tm.grid_h != gh || tm.grid_w != gw || tm.num_anchors != k)
            throw std::invalid_argument("detection_loss: target grid mismatch");
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t cy = 0; cy < gh; ++cy)
                for (std::size_t cx = 0; cx < gw; ++cx) {
                    std::size_t si = tm.slot_index(a, cy, cx);
                    if (!tm.obj_mask[si]) continue;
                    std::size_t flat = ((i * k + a) * gh + cy) * gw + cx;
                    conf_w[flat] = T(cfg.obj_scale) * inv_n;
                    if (cfg.conf_target == ConfTarget::one) {
                        conf_tgt[flat] = T(1);
                    } else {
                        const T* cell = rv + (i * head.out_channels() * plane) + cy * gw + cx;
                        std::size_t base = a * ss;
                        Box pred = decode_slot(double(cell[(base + 0) * plane]),
                                               double(cell[(base + 1) * plane]),
                                               double(cell[(base + 2) * plane]),
                                               double(cell[(base + 3) * plane]),
                                               anchors.sizes[a].first, anchors.sizes[a].second, cx,
                                               cy, gw, gh);
                        conf_tgt[flat] = T(iou(pred, tm.assigned_gt[si]));
                    }
                    coord_rows.push_back(
                        detail::gather_slot(raw, i, a * ss, a * ss + 4, cy, cx));
                    class_rows.push_back(
                        detail::gather_slot(raw, i, a * ss + 5, a * ss + 5 + head.num_classes, cy, cx));
                    for (int j = 0; j < 4; ++j) tgt_coord.push_back(tm.t_coord[si * 4 + j]);
                    if (head.mode == ClassMode::single_label) {
                        cls_targets.push_back({tm.class_target[si]});
                    } else {
                        std::vector<int> ids;
                        for (std::size_t cc = 0; cc < head.num_classes; ++cc)
                            if (tm.multi_target[si][cc]) ids.push_back(int(cc));
                        cls_targets.push_back(std::move(ids));
                    }
                }
    }

    Tensor<T> l_conf = mse_loss(conf_pred, Tensor<T>({n, k, gh, gw}, std::move(conf_tgt)),
                                Tensor<T>({n, k, gh, gw}, std::move(conf_w)));

    Tensor<T> l_x = Tensor<T>::scalar(T(0)), l_y = Tensor<T>::scalar(T(0));
    Tensor<T> l_w = Tensor<T>::scalar(T(0)), l_h = Tensor<T>::scalar(T(0));
    Tensor<T> l_cls = Tensor<T>::scalar(T(0));
    if (!coord_rows.empty()) {
        std::size_t s = coord_rows.size();
        Tensor<T> pred_t = concat(coord_rows, 0);  // [S,4]
        std::vector<T> tc(tgt_coord.size());
        for (std::size_t i = 0; i < tc.size(); ++i) tc[i] = T(tgt_coord[i]);
        Tensor<T> tgt({s, 4}, std::move(tc));
        Tensor<T> w_col = Tensor<T>::full({s, 1}, T(cfg.lambda_coord) * inv_n);
        l_x = smooth_l1_loss(slice(pred_t, 1, 0, 1), slice(tgt, 1, 0, 1), w_col);
        l_y = smooth_l1_loss(slice(pred_t, 1, 1, 2), slice(tgt, 1, 1, 2), w_col);
        l_w = smooth_l1_loss(slice(pred_t, 1, 2, 3), slice(tgt, 1, 2, 3), w_col);
        l_h = smooth_l1_loss(slice(pred_t, 1, 3, 4), slice(tgt, 1, 3, 4), w_col);

        std::vector<double> cw(class_weights);
        for (double& v : cw) v *= double(inv_n) * cfg.class_scale;
        l_cls = classification_loss(concat(class_rows, 0), cls_targets, head.mode,
                                    head.pose_classes, T(cfg.gamma), cw);
    }

    Tensor<T> l_d = add(add(add(l_x, l_y), add(l_w, l_h)), l_conf);
    Tensor<T> l_final = total_loss(l_d, l_cls, T(cfg.lambda));

    report.l_x = double(l_x.value());
    report.l_y = double(l_y.value());
    report.l_w = double(l_w.value());
    report.l_h = double(l_h.value());
    report.l_conf = double(l_conf.value());
    report.l_d = double(l_d.value());
    report.l_cls = double(l_cls.value());
    report.l_final = double(l_final.value());
    return l_final;
}

}  // namespace yowo
