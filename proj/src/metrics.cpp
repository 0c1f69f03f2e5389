#include "yowo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace yowo {

double tube_iou(const ActionTube& a, const ActionTube& b) {
    std::map<std::size_t, const Box*> fa, fb;
    for (const auto& t : a.boxes) fa[t.frame] = &t.box;
    for (const auto& t : b.boxes) fb[t.frame] = &t.box;
    std::set<std::size_t> frames;
    for (auto& [f, _] : fa) frames.insert(f);
    for (auto& [f, _] : fb) frames.insert(f);
    if (frames.empty()) return 0.0;
    double sum = 0;
    for (std::size_t f : frames) {
        auto ia = fa.find(f);
        auto ib = fb.find(f);
        if (ia != fa.end() && ib != fb.end()) sum += iou(*ia->second, *ib->second);
    }
    return sum / double(frames.size());
}

namespace {

// all-point interpolated area under the precision-recall curve
double average_precision(const std::vector<bool>& tp_ranked, std::size_t npos) {
    if (npos == 0) return 0.0;
    std::size_t n = tp_ranked.size();
    std::vector<double> prec(n), rec(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tp_ranked[i]) ++tp;
        prec[i] = double(tp) / double(i + 1);
        rec[i] = double(tp) / double(npos);
    }
    double ap = 0, pmax = 0, prev_rec = 0;
    // walk backwards so pmax is the max precision at recall >= r
    std::vector<double> interp(n);
    for (std::size_t i = n; i-- > 0;) {
        pmax = std::max(pmax, prec[i]);
        interp[i] = pmax;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!tp_ranked[i]) continue;
        ap += (rec[i] - prev_rec) * interp[i];
        prev_rec = rec[i];
    }
    return ap;
}

}  // namespace

EvalReport frame_map(const std::vector<DetRecord>& dets, const std::vector<GtRecord>& gts,
                     double iou_threshold) {
    EvalReport rep;
    rep.iou_threshold = iou_threshold;

    std::set<int> classes;
    for (const auto& g : gts) classes.insert(g.cls);

    double ap_sum = 0;
    for (int cls : classes) {
        // gt boxes per (video, frame)
        std::map<std::pair<std::string, std::size_t>, std::vector<const GtRecord*>> gt_by_frame;
        std::size_t npos = 0;
        for (const auto& g : gts)
            if (g.cls == cls) {
                gt_by_frame[{g.video, g.frame}].push_back(&g);
                ++npos;
            }

        std::vector<const DetRecord*> ranked;
        for (const auto& d : dets)
            if (d.cls == cls) ranked.push_back(&d);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const DetRecord* a, const DetRecord* b) { return a->score > b->score; });

        std::map<std::pair<std::string, std::size_t>, std::vector<bool>> used;
        std::vector<bool> tp_ranked;
        tp_ranked.reserve(ranked.size());
        for (const DetRecord* d : ranked) {
            auto key = std::make_pair(d->video, d->frame);
            auto it = gt_by_frame.find(key);
            bool is_tp = false;
            if (it != gt_by_frame.end()) {
                auto& flags = used[key];
                flags.resize(it->second.size(), false);
                double best = -1;
                std::size_t best_i = 0;
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    if (flags[i]) continue;
                    double v = iou(d->box, it->second[i]->box);
                    if (v > best) {
                        best = v;
                        best_i = i;
                    }
                }
                if (best >= iou_threshold) {
                    is_tp = true;
                    flags[best_i] = true;
                }
            }
            tp_ranked.push_back(is_tp);
        }

        double ap = average_precision(tp_ranked, npos);
        rep.class_ids.push_back(cls);
        rep.ap.push_back(ap);
        ap_sum += ap;
    }
    rep.map = classes.empty() ? 0.0 : ap_sum / double(classes.size());
    diagnostics(dets, gts, iou_threshold, rep.recall, rep.classification_accuracy);
    return rep;
}

EvalReport video_map(const std::vector<VideoTube>& tubes, const std::vector<VideoTube>& gt_tubes,
                     double iou_threshold) {
    EvalReport rep;
    rep.iou_threshold = iou_threshold;

    std::set<int> classes;
    for (const auto& g : gt_tubes) classes.insert(g.tube.class_id);

    double ap_sum = 0;
    for (int cls : classes) {
        std::vector<const VideoTube*> gt_cls;
        for (const auto& g : gt_tubes)
            if (g.tube.class_id == cls) gt_cls.push_back(&g);

        std::vector<const VideoTube*> ranked;
        for (const auto& t : tubes)
            if (t.tube.class_id == cls) ranked.push_back(&t);
        std::stable_sort(ranked.begin(), ranked.end(), [](const VideoTube* a, const VideoTube* b) {
            return a->tube.score > b->tube.score;
        });

        std::vector<bool> used(gt_cls.size(), false);
        std::vector<bool> tp_ranked;
        for (const VideoTube* t : ranked) {
            double best = -1;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < gt_cls.size(); ++i) {
                if (used[i] || gt_cls[i]->video != t->video) continue;
                double v = tube_iou(t->tube, gt_cls[i]->tube);
                if (v > best) {
                    best = v;
                    best_i = i;
                }
            }
            bool is_tp = best >= iou_threshold && best >= 0;
            if (is_tp) used[best_i] = true;
            tp_ranked.push_back(is_tp);
        }

        double ap = average_precision(tp_ranked, gt_cls.size());
        rep.class_ids.push_back(cls);
        rep.ap.push_back(ap);
        ap_sum += ap;
    }
    rep.map = classes.empty() ? 0.0 : ap_sum / double(classes.size());
    return rep;
}

std::vector<EvalReport> video_map_sweep(const std::vector<VideoTube>& tubes,
                                        const std::vector<VideoTube>& gt_tubes,
                                        const std::vector<double>& thresholds) {
    std::vector<EvalReport> out;
    for (double t : thresholds) out.push_back(video_map(tubes, gt_tubes, t));
    return out;
}

void diagnostics(const std::vector<DetRecord>& dets, const std::vector<GtRecord>& gts,
                 double iou_threshold, double& recall, double& classification_accuracy) {
    if (gts.empty()) {
        recall = 0;
        classification_accuracy = 0;
        return;
    }

    // records sharing (video, frame, box) describe one detection; its
    // predicted class is the highest-scored record of the group
    struct Group {
        Box box;
        int best_cls = -1;
        double best_score = -1;
    };
    std::map<std::pair<std::string, std::size_t>, std::vector<Group>> groups;
    for (const auto& d : dets) {
        auto& vec = groups[{d.video, d.frame}];
        Group* g = nullptr;
        for (auto& cand : vec)
            if (cand.box.x == d.box.x && cand.box.y == d.box.y && cand.box.w == d.box.w &&
                cand.box.h == d.box.h) {
                g = &cand;
                break;
            }
        if (!g) {
            vec.push_back({d.box, d.cls, d.score});
            continue;
        }
        if (d.score > g->best_score) {
            g->best_score = d.score;
            g->best_cls = d.cls;
        }
    }

    std::size_t localized = 0, correct = 0;
    for (const auto& gt : gts) {
        auto it = groups.find({gt.video, gt.frame});
        if (it == groups.end()) continue;
        double best = -1;
        const Group* best_g = nullptr;
        for (const auto& g : it->second) {
            double v = iou(g.box, gt.box);
            if (v > best) {
                best = v;
                best_g = &g;
            }
        }
        if (best >= iou_threshold) {
            ++localized;
            if (best_g->best_cls == gt.cls) ++correct;
        }
    }
    recall = double(localized) / double(gts.size());
    classification_accuracy = localized ? double(correct) / double(localized) : 0.0;
}

std::string report_table(const EvalReport& report, const std::string& title) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed;
    os << title << " (IoU threshold " << report.iou_threshold << ")\n";
    os << "  class        AP\n";
    for (std::size_t i = 0; i < report.class_ids.size(); ++i)
        os << "  " << report.class_ids[i] << "        " << report.ap[i] << "\n";
    os << "  mAP = " << report.map << "\n";
    if (report.recall >= 0)
        os << "  localization recall = " << report.recall
           << ", classification accuracy = " << report.classification_accuracy << "\n";
    return os.str();
}

std::string report_lines(const EvalReport& report, const std::string& tag) {
    std::ostringstream os;
    os.precision(9);
    for (std::size_t i = 0; i < report.class_ids.size(); ++i)
        os << tag << " ap " << report.iou_threshold << " " << report.class_ids[i] << " "
           << report.ap[i] << "\n";
    os << tag << " map " << report.iou_threshold << " - " << report.map << "\n";
    if (report.recall >= 0) {
        os << tag << " recall " << report.iou_threshold << " - " << report.recall << "\n";
        os << tag << " cls_accuracy " << report.iou_threshold << " - "
           << report.classification_accuracy << "\n";
    }
    return os.str();
}

}  // namespace yowo
