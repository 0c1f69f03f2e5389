#pragma once

// Axis-aligned boxes in normalized image coordinates, top-left + size.
// Every box format conversion in the pipeline goes through here.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace yowo {

struct Box {
    double x = 0, y = 0, w = 0, h = 0;

    double area() const { return w * h; }
    double cx() const { return x + w / 2; }
    double cy() const { return y + h / 2; }

    static Box from_center(double cx, double cy, double w, double h) {
        return Box{cx - w / 2, cy - h / 2, w, h};
    }

    // clip to the unit square, preserving the visible extent
    Box clipped() const {
        double x1 = std::clamp(x, 0.0, 1.0);
        double y1 = std::clamp(y, 0.0, 1.0);
        double x2 = std::clamp(x + w, 0.0, 1.0);
        double y2 = std::clamp(y + h, 0.0, 1.0);
        return Box{x1, y1, std::max(0.0, x2 - x1), std::max(0.0, y2 - y1)};
    }
};

// intersection area / union area; 0 when the union is empty
inline double iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// IoU of two co-centered boxes given by size only
inline double wh_iou(double w1, double h1, double w2, double h2) {
    double inter = std::min(w1, w2) * std::min(h1, h2);
    double uni = w1 * h1 + w2 * h2 - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// One frame-level prediction: box, objectness, per-class scores.
struct Detection {
    std::size_t frame = 0;
    Box box;
    double confidence = 0;
    std::vector<double> class_scores;

    double score_for(std::size_t cls) const { return confidence * class_scores.at(cls); }
};

}  // namespace yowo
