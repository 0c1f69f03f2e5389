#pragma once

// Frame- and video-level evaluation: IoU matching, all-point interpolated
// average precision (the VOC 2012 rule), and the localization-recall /
// classification-accuracy split.

#include <cstddef>
#include <string>
#include <vector>

#include "yowo/box.hpp"
#include "yowo/tube.hpp"

namespace yowo {

// one scored per-class detection record, the on-disk evaluation unit
struct DetRecord {
    std::string video;
    std::size_t frame = 0;
    int cls = -1;
    double score = 0;
    Box box;
};

// one ground-truth box instance for one class
struct GtRecord {
    std::string video;
    std::size_t frame = 0;
    int cls = -1;
    Box box;
};

struct EvalReport {
    double iou_threshold = 0.5;
    std::vector<int> class_ids;  // classes with at least one ground truth
    std::vector<double> ap;      // aligned with class_ids
    double map = 0;
    double recall = -1;                    // frame evaluation only
    double classification_accuracy = -1;   // frame evaluation only
};

// mean per-frame IoU across the union of both tubes' frame spans; frames
// covered by only one tube count as 0. Symmetric; equals iou on length-1
// tubes sharing their frame.
double tube_iou(const ActionTube& a, const ActionTube& b);

// Rank detections by score per class, greedily match each to the
// highest-IoU unmatched gt in its frame (TP iff IoU >= threshold), and
// integrate the all-point interpolated precision-recall curve.
EvalReport frame_map(const std::vector<DetRecord>& dets, const std::vector<GtRecord>& gts,
                     double iou_threshold);

// Same AP machinery with tube IoU as the match criterion.
EvalReport video_map(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gt_tubes,
                     double iou_threshold);
std::vector<EvalReport> video_map_sweep(const std::vector<VideoTube>& tubes,
                                        const std::vector<VideoTube>& gt_tubes,
                                        const std::vector<double>& thresholds);

// recall = gts localized by any detection regardless of class;
// classification accuracy = localized gts whose best-overlap detection
// predicts the right class (detections sharing one box vote by score)
void diagnostics(const std::vector<DetRecord>& dets, const std::vector<GtRecord>& gts,
                 double iou_threshold, double& recall, double& classification_accuracy);

// human-readable table and machine-readable lines
std::string report_table(const EvalReport& report, const std::string& title);
std::string report_lines(const EvalReport& report, const std::string& tag);

}  // namespace yowo
