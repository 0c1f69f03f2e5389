#include "yowo/tube.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace yowo {

double link_score(const Detection& a, const Detection& b, std::size_t cls, const LinkConfig& cfg) {
    double ov = iou(a.box, b.box);
    if (!(ov > 0.0)) return 0.0;  // psi gate
    double sa = a.score_for(cls), sb = b.score_for(cls);
    return sa + sb + cfg.score_product_weight * sa * sb + cfg.overlap_weight * ov;
}

namespace {

struct Chain {
    double edge_sum = 0;                        // total link score over the chain's edges
    std::vector<std::pair<std::size_t, std::size_t>> nodes;  // (frame, det index)
};

ActionTube make_tube(const std::vector<std::vector<Detection>>& per_frame,
                     const std::vector<std::pair<std::size_t, std::size_t>>& nodes,
                     std::size_t cls) {
    ActionTube t;
    t.class_id = int(cls);
    double sum = 0;
    for (auto [f, i] : nodes) {
        const Detection& d = per_frame[f][i];
        double s = d.score_for(cls);
        t.boxes.push_back({f, d.box, s});
        sum += s;
    }
    t.score = t.boxes.empty() ? 0.0 : sum / double(t.boxes.size());
    return t;
}

// best chain (>= 2 nodes, positive edge sum) within frames [lo, hi] of the
// alive detections; chains may start at any frame and only cross positive
// overlaps
bool best_chain(const std::vector<std::vector<Detection>>& per_frame,
                const std::vector<std::vector<bool>>& alive, std::size_t lo, std::size_t hi,
                std::size_t cls, const LinkConfig& cfg, Chain& out) {
    struct Cell {
        double sum = 0;
        std::ptrdiff_t prev = -1;  // det index in the previous frame, -1 = chain start
        std::size_t len = 1;
    };
    std::vector<std::vector<Cell>> dp(hi - lo + 1);
    double best = 0;
    std::ptrdiff_t bf = -1, bi = -1;

    for (std::size_t f = lo; f <= hi; ++f) {
        std::size_t fi = f - lo;
        dp[fi].assign(per_frame[f].size(), Cell{});
        for (std::size_t i = 0; i < per_frame[f].size(); ++i) {
            if (!alive[f][i]) continue;
            Cell cell;  // fresh start: sum 0, no predecessor
            if (f > lo) {
                for (std::size_t j = 0; j < per_frame[f - 1].size(); ++j) {
                    if (!alive[f - 1][j]) continue;
                    double ov = iou(per_frame[f - 1][j].box, per_frame[f][i].box);
                    if (!(ov > 0.0)) continue;  // hard break on zero overlap
                    double cand = dp[fi - 1][j].sum +
                                  link_score(per_frame[f - 1][j], per_frame[f][i], cls, cfg);
                    if (cand > cell.sum + 1e-15) {  // ties keep the lowest det index
                        cell.sum = cand;
                        cell.prev = std::ptrdiff_t(j);
                        cell.len = dp[fi - 1][j].len + 1;
                    }
                }
            }
            dp[fi][i] = cell;
            if (cell.len >= 2 && cell.sum > best + 1e-15) {
                best = cell.sum;
                bf = std::ptrdiff_t(fi);
                bi = std::ptrdiff_t(i);
            }
        }
    }
    if (bf < 0) return false;

    out.edge_sum = best;
    out.nodes.clear();
    std::ptrdiff_t f = bf, i = bi;
    while (i >= 0) {
        out.nodes.emplace_back(lo + std::size_t(f), std::size_t(i));
        std::ptrdiff_t p = dp[std::size_t(f)][std::size_t(i)].prev;
        i = p;
        --f;
    }
    std::reverse(out.nodes.begin(), out.nodes.end());
    return true;
}

}  // namespace

std::vector<ActionTube> viterbi_link(const std::vector<std::vector<Detection>>& per_frame,
                                     std::size_t cls, const LinkConfig& cfg) {
    std::vector<ActionTube> tubes;
    std::vector<std::vector<bool>> alive(per_frame.size());
    for (std::size_t f = 0; f < per_frame.size(); ++f)
        alive[f].assign(per_frame[f].size(), true);

    // maximal segments of consecutive non-empty frames
    std::size_t f = 0;
    while (f < per_frame.size()) {
        if (per_frame[f].empty()) {
            ++f;
            continue;
        }
        std::size_t lo = f;
        while (f < per_frame.size() && !per_frame[f].empty()) ++f;
        std::size_t hi = f - 1;

        // repeatedly extract the best multi-frame chain until only
        // unlinkable detections remain (their path score is <= 0)
        Chain chain;
        bool any_chain = false;
        while (best_chain(per_frame, alive, lo, hi, cls, cfg, chain)) {
            any_chain = true;
            tubes.push_back(make_tube(per_frame, chain.nodes, cls));
            for (auto [cf, ci] : chain.nodes) alive[cf][ci] = false;
        }
        // a segment that never linked anything still yields length-1 tubes
        // (single-frame segments and fully non-overlapping ones); leftovers
        // of linked segments are duplicates and are dropped
        if (!any_chain) {
            for (std::size_t sf = lo; sf <= hi; ++sf)
                for (std::size_t i = 0; i < per_frame[sf].size(); ++i) {
                    if (!alive[sf][i]) continue;
                    alive[sf][i] = false;
                    if (per_frame[sf][i].score_for(cls) > 0.0)
                        tubes.push_back(make_tube(per_frame, {{sf, i}}, cls));
                }
        }
    }
    return tubes;
}

void save_tubes(const std::string& path, const std::vector<VideoTube>& tubes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_tubes: cannot open " + path);
    out.precision(17);
    for (const auto& vt : tubes) {
        out << "#tube " << vt.video << " " << vt.tube.class_id << " " << vt.tube.score << "\n";
        for (const auto& b : vt.tube.boxes)
            out << vt.video << " " << vt.tube.class_id << " " << b.frame << " " << b.box.x << " "
                << b.box.y << " " << b.box.w << " " << b.box.h << " " << b.score << "\n";
    }
}

std::vector<VideoTube> load_tubes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tubes: cannot open " + path);
    std::vector<VideoTube> tubes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        if (line[0] == '#') {
            std::string tag, video;
            int cls;
            double score;
            if (!(is >> tag >> video >> cls >> score) || tag != "#tube")
                throw std::runtime_error("load_tubes: malformed header at line " +
                                         std::to_string(lineno));
            VideoTube vt;
            vt.video = video;
            vt.tube.class_id = cls;
            vt.tube.score = score;
            tubes.push_back(std::move(vt));
            continue;
        }
        if (tubes.empty())
            throw std::runtime_error("load_tubes: record before any #tube header at line " +
                                     std::to_string(lineno));
        std::string video;
        int cls;
        TubeBox b;
        if (!(is >> video >> cls >> b.frame >> b.box.x >> b.box.y >> b.box.w >> b.box.h >> b.score))
            throw std::runtime_error("load_tubes: malformed record at line " +
                                     std::to_string(lineno));
        if (video != tubes.back().video || cls != tubes.back().tube.class_id)
            throw std::runtime_error("load_tubes: record does not match its header at line " +
                                     std::to_string(lineno));
        tubes.back().tube.boxes.push_back(b);
    }
    return tubes;
}

}  // namespace yowo
