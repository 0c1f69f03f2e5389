#include "yowo/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace yowo {

namespace {

double cluster_cost(const std::vector<std::pair<double, double>>& boxes,
                    const std::vector<std::size_t>& members, double w, double h) {
    double s = 0;
    for (std::size_t i : members) s += 1.0 - wh_iou(w, h, boxes[i].first, boxes[i].second);
    return s;
}

double golden_section(double lo, double hi, const std::function<double(double)>& f) {
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return (a + b) / 2;
}

// Re-fit one centroid by alternating 1-d searches over the members' extent,
// keeping the old centroid whenever the search does not improve the cost.
std::pair<double, double> refit_centroid(const std::vector<std::pair<double, double>>& boxes,
                                         const std::vector<std::size_t>& members, double w,
                                         double h) {
    if (members.empty()) return {w, h};
    double wlo = boxes[members[0]].first, whi = wlo;
    double hlo = boxes[members[0]].second, hhi = hlo;
    for (std::size_t i : members) {
        wlo = std::min(wlo, boxes[i].first);
        whi = std::max(whi, boxes[i].first);
        hlo = std::min(hlo, boxes[i].second);
        hhi = std::max(hhi, boxes[i].second);
    }
    double bw = w, bh = h;
    double best = cluster_cost(boxes, members, bw, bh);
    for (int pass = 0; pass < 4; ++pass) {
        if (whi > wlo) {
            double cand = golden_section(wlo, whi, [&](double ww) {
                return cluster_cost(boxes, members, ww, bh);
            });
            double c = cluster_cost(boxes, members, cand, bh);
            if (c < best) {
                best = c;
                bw = cand;
            }
        }
        if (hhi > hlo) {
            double cand = golden_section(hlo, hhi, [&](double hh) {
                return cluster_cost(boxes, members, bw, hh);
            });
            double c = cluster_cost(boxes, members, bw, cand);
            if (c < best) {
                best = c;
                bh = cand;
            }
        }
    }
    return {bw, bh};
}

}  // namespace

double anchor_objective(const std::vector<std::pair<double, double>>& boxes, const AnchorSet& a) {
    if (boxes.empty() || a.sizes.empty()) return 0.0;
    double s = 0;
    for (const auto& b : boxes) {
        double best = 0;
        for (const auto& c : a.sizes) best = std::max(best, wh_iou(b.first, b.second, c.first, c.second));
        s += 1.0 - best;
    }
    return s / double(boxes.size());
}

AnchorSet kmeans_anchors(const std::vector<std::pair<double, double>>& boxes, std::size_t k,
                         Rng& rng, std::size_t max_iters) {
    for (const auto& b : boxes)
        if (!(b.first > 0) || !(b.second > 0))
            throw std::invalid_argument("kmeans_anchors: non-positive box extent");
    std::set<std::pair<double, double>> distinct(boxes.begin(), boxes.end());
    if (distinct.size() < k)
        throw std::invalid_argument("kmeans_anchors: " + std::to_string(distinct.size()) +
                                    " distinct boxes for k=" + std::to_string(k));

    // k-means++-style seeding on the 1-IoU distance
    std::vector<std::pair<double, double>> centroids;
    centroids.push_back(boxes[rng.index(boxes.size())]);
    while (centroids.size() < k) {
        std::vector<double> d2(boxes.size());
        double total = 0;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            double best = 1.0;
            for (const auto& c : centroids)
                best = std::min(best, 1.0 - wh_iou(boxes[i].first, boxes[i].second, c.first, c.second));
            d2[i] = best * best;
            total += d2[i];
        }
        double r = rng.uniform() * total;
        std::size_t pick = 0;
        double acc = 0;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            acc += d2[i];
            if (acc >= r) {
                pick = i;
                break;
            }
        }
        // skip duplicates of an existing centroid
        bool dup = false;
        for (const auto& c : centroids) dup = dup || (c == boxes[pick]);
        if (dup) {
            for (std::size_t i = 0; i < boxes.size() && dup; ++i) {
                dup = false;
                for (const auto& c : centroids) dup = dup || (c == boxes[i]);
                if (!dup) pick = i;
            }
        }
        centroids.push_back(boxes[pick]);
    }

    std::vector<std::size_t> assign(boxes.size(), 0);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            std::size_t best = 0;
            double bestd = 2.0;
            for (std::size_t c = 0; c < k; ++c) {
                double d = 1.0 - wh_iou(boxes[i].first, boxes[i].second, centroids[c].first,
                                        centroids[c].second);
                if (d < bestd - 1e-15) {
                    bestd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }

        std::vector<std::vector<std::size_t>> members(k);
        for (std::size_t i = 0; i < boxes.size(); ++i) members[assign[i]].push_back(i);

        // an emptied cluster restarts at the worst-served box
        for (std::size_t c = 0; c < k; ++c) {
            if (!members[c].empty()) continue;
            std::size_t worst = 0;
            double worstd = -1.0;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                if (members[assign[i]].size() <= 1) continue;
                double d = 1.0 - wh_iou(boxes[i].first, boxes[i].second, centroids[assign[i]].first,
                                        centroids[assign[i]].second);
                if (d > worstd) {
                    worstd = d;
                    worst = i;
                }
            }
            auto& from = members[assign[worst]];
            from.erase(std::find(from.begin(), from.end(), worst));
            assign[worst] = c;
            members[c].push_back(worst);
            centroids[c] = boxes[worst];
            changed = true;
        }

        bool moved = false;
        for (std::size_t c = 0; c < k; ++c) {
            auto next = refit_centroid(boxes, members[c], centroids[c].first, centroids[c].second);
            if (std::fabs(next.first - centroids[c].first) > 1e-12 ||
                std::fabs(next.second - centroids[c].second) > 1e-12)
                moved = true;
            centroids[c] = next;
        }
        if (!changed && !moved) break;  // fixed point
    }

    AnchorSet out;
    out.sizes = std::move(centroids);
    return out;
}

void save_anchors(const std::string& path, const AnchorSet& anchors) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_anchors: cannot open " + path);
    f.precision(17);
    for (const auto& a : anchors.sizes) f << a.first << " " << a.second << "\n";
}

AnchorSet load_anchors(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_anchors: cannot open " + path);
    AnchorSet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        double w, h;
        if (!(is >> w >> h) || !(w > 0) || !(h > 0))
            throw std::runtime_error("load_anchors: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        out.sizes.emplace_back(w, h);
    }
    if (out.sizes.empty()) throw std::runtime_error("load_anchors: no anchors in " + path);
    return out;
}

TargetMaps build_targets(const std::vector<std::pair<Box, std::vector<int>>>& gts,
                         const AnchorSet& anchors, const HeadConfig& head, std::size_t grid_h,
                         std::size_t grid_w) {
    if (anchors.count() != head.num_anchors)
        throw std::invalid_argument("build_targets: anchor count mismatch");
    TargetMaps t;
    t.grid_h = grid_h;
    t.grid_w = grid_w;
    t.num_anchors = head.num_anchors;
    std::size_t n = t.slots();
    t.obj_mask.assign(n, 0);
    t.t_coord.assign(n * 4, 0.0);
    t.class_target.assign(n, -1);
    t.assigned_gt.assign(n, Box{});
    if (head.mode == ClassMode::multi_label) t.multi_target.assign(n, {});

    const double frac_eps = 1e-6;  // keeps logit finite; round-trip error stays under 1e-6
    for (const auto& [box, classes] : gts) {
        if (!(box.w > 0) || !(box.h > 0))
            throw std::invalid_argument("build_targets: gt box with non-positive extent");
        double cxg = box.cx() * double(grid_w);
        double cyg = box.cy() * double(grid_h);
        std::size_t cx = std::min(std::size_t(std::max(0.0, std::floor(cxg))), grid_w - 1);
        std::size_t cy = std::min(std::size_t(std::max(0.0, std::floor(cyg))), grid_h - 1);

        double bw = box.w * double(grid_w);
        double bh = box.h * double(grid_h);
        std::size_t best_a = 0;
        double best_iou = -1.0;
        for (std::size_t a = 0; a < anchors.count(); ++a) {
            double v = wh_iou(bw, bh, anchors.sizes[a].first, anchors.sizes[a].second);
            if (v > best_iou + 1e-15) {  // ties break to the lowest anchor index
                best_iou = v;
                best_a = a;
            }
        }

        std::size_t si = t.slot_index(best_a, cy, cx);
        if (t.obj_mask[si]) continue;  // first gt keeps a contested slot
        t.obj_mask[si] = 1;
        double fx = std::clamp(cxg - double(cx), frac_eps, 1.0 - frac_eps);
        double fy = std::clamp(cyg - double(cy), frac_eps, 1.0 - frac_eps);
        t.t_coord[si * 4 + 0] = std::log(fx / (1.0 - fx));
        t.t_coord[si * 4 + 1] = std::log(fy / (1.0 - fy));
        t.t_coord[si * 4 + 2] = std::log(bw / anchors.sizes[best_a].first);
        t.t_coord[si * 4 + 3] = std::log(bh / anchors.sizes[best_a].second);
        t.assigned_gt[si] = box;
        if (head.mode == ClassMode::single_label) {
            t.class_target[si] = classes.empty() ? -1 : classes.front();
        } else {
            std::vector<std::uint8_t> hot(head.num_classes, 0);
            for (int c : classes)
                if (c >= 0 && std::size_t(c) < head.num_classes) hot[std::size_t(c)] = 1;
            t.multi_target[si] = std::move(hot);
        }
    }
    return t;
}

}  // namespace yowo
