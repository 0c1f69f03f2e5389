#include "yowo/postprocess.hpp"

#include <algorithm>
#include <numeric>

namespace yowo {

std::vector<Detection> filter_confidence(const std::vector<Detection>& dets, double tau) {
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (const auto& d : dets)
        if (d.confidence > tau) out.push_back(d);
    return out;
}

std::vector<std::size_t> nms_indices(const std::vector<Detection>& dets, std::size_t cls,
                                     double tau) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score_for(cls) > dets[b].score_for(cls);
    });

    std::vector<bool> suppressed(dets.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(i);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            std::size_t j = order[oj];
            if (!suppressed[j] && iou(dets[i].box, dets[j].box) > tau) suppressed[j] = true;
        }
    }
    return kept;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, std::size_t cls, double tau) {
    std::vector<Detection> out;
    for (std::size_t i : nms_indices(dets, cls, tau)) out.push_back(dets[i]);
    return out;
}

}  // namespace yowo
