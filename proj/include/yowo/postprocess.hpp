#pragma once

// Confidence filtering and per-class greedy non-maximum suppression.

#include <cstddef>
#include <vector>

#include "yowo/box.hpp"

namespace yowo {

struct NmsConfig {
    double conf_threshold = 0.25;
    double nms_iou = 0.4;  // 0.5 in multi-label mode
};

// keeps detections with confidence strictly greater than tau, order preserved
std::vector<Detection> filter_confidence(const std::vector<Detection>& dets, double tau);

// Greedy per-class suppression on score = confidence * class score: keep the
// highest-scored detection (ties to the earlier index), drop others whose
// IoU with it exceeds tau, repeat. Returns indices into `dets`, kept order.
std::vector<std::size_t> nms_indices(const std::vector<Detection>& dets, std::size_t cls,
                                     double tau);

std::vector<Detection> nms(const std::vector<Detection>& dets, std::size_t cls, double tau);

}  // namespace yowo
