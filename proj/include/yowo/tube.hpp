#pragma once

// Frame-level detections to video-level action tubes. Consecutive-frame
// detections are linked with the overlap-gated pairwise score
//   psi(ov) * [s_c(a) + s_c(b) + alpha*s_c(a)*s_c(b) + beta*ov]
// and the best chains are extracted by dynamic programming, best path
// first, until nothing scoreworthy remains. Zero-overlap transitions are
// hard breaks: tubes never bridge boxes that do not overlap, and a frame
// with no detections ends every tube.

#include <cstddef>
#include <string>
#include <vector>

#include "yowo/box.hpp"

namespace yowo {

struct LinkConfig {
    double score_product_weight = 1.0;  // alpha, on s_c(a)*s_c(b)
    double overlap_weight = 0.5;        // beta, on the IoU term
};

struct TubeBox {
    std::size_t frame = 0;
    Box box;
    double score = 0;  // per-frame class score of the linked detection
};

// Class-labeled, gap-free sequence of per-frame boxes.
struct ActionTube {
    int class_id = -1;
    std::vector<TubeBox> boxes;  // frame indices strictly increasing, no gaps
    double score = 0;            // mean per-frame score
};

double link_score(const Detection& a, const Detection& b, std::size_t cls, const LinkConfig& cfg);

// per_frame[i] holds frame i's surviving detections (may be empty).
std::vector<ActionTube> viterbi_link(const std::vector<std::vector<Detection>>& per_frame,
                                     std::size_t cls, const LinkConfig& cfg);

// line-oriented tube records: "video class frame x y w h score", grouped
// under "#tube video class tube_score" headers
struct VideoTube {
    std::string video;
    ActionTube tube;
};

void save_tubes(const std::string& path, const std::vector<VideoTube>& tubes);
std::vector<VideoTube> load_tubes(const std::string& path);

}  // namespace yowo
