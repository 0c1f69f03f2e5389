#pragma once

// The full detector: 3D clip branch and 2D key-frame branch fused by the
// channel-attention block, then projected to the anchor grid. Ablation
// modes route a single branch through the same projection stack (without
// attention) so every variant trains end-to-end with matched plumbing.

#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/backbone.hpp"
#include "yowo/cfam.hpp"
#include "yowo/detect.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

enum class AblationMode { two_d_only, three_d_only, concat_no_cfam, full };

inline const char* ablation_name(AblationMode m) {
    switch (m) {
        case AblationMode::two_d_only: return "2d";
        case AblationMode::three_d_only: return "3d";
        case AblationMode::concat_no_cfam: return "concat";
        case AblationMode::full: return "full";
    }
    return "?";
}

inline AblationMode ablation_from_name(const std::string& s) {
    if (s == "2d") return AblationMode::two_d_only;
    if (s == "3d") return AblationMode::three_d_only;
    if (s == "concat") return AblationMode::concat_no_cfam;
    if (s == "full") return AblationMode::full;
    throw std::invalid_argument("unknown ablation mode \"" + s + "\" (2d|3d|concat|full)");
}

struct ModelConfig {
    BackboneConfig backbone2d;
    BackboneConfig backbone3d;
    HeadConfig head;
    std::size_t cfam_channels = 0;  // 0 -> 2 * cfam_out
    std::size_t cfam_out = 0;       // 0 -> head.out_channels()
    AblationMode ablation = AblationMode::full;

    std::size_t resolved_cfam_out() const {
        return cfam_out ? cfam_out : head.out_channels();
    }
    std::size_t resolved_cfam_channels() const {
        return cfam_channels ? cfam_channels : 2 * resolved_cfam_out();
    }

    // canonical one-line form, embedded in checkpoints for compatibility checks
    std::string fingerprint() const;
};

template <typename T>
struct YowoModel {
    ModelConfig cfg;
    Backbone2D<T> b2d;  // absent in 3d-only mode
    Backbone3D<T> b3d;  // absent in 2d-only mode
    Cfam<T> cfam;
    DetectHead<T> head;
    bool has_2d = false, has_3d = false;

    std::size_t clip_len() const { return cfg.backbone3d.clip_len; }
};

template <typename T>
YowoModel<T> make_model(Rng& rng, const ModelConfig& cfg) {
    YowoModel<T> m;
    m.cfg = cfg;
    m.has_2d = cfg.ablation != AblationMode::three_d_only;
    m.has_3d = cfg.ablation != AblationMode::two_d_only;
    if (m.has_2d) m.b2d = make_backbone2d<T>(rng, cfg.backbone2d);
    if (m.has_3d) m.b3d = make_backbone3d<T>(rng, cfg.backbone3d);
    if (m.has_2d && m.has_3d && cfg.backbone2d.spatial_stride != cfg.backbone3d.spatial_stride)
        throw std::invalid_argument("model: branch strides differ, grids cannot be fused");

    std::size_t cin = 0;
    if (m.has_2d) cin += m.b2d.out_channels();
    if (m.has_3d) cin += m.b3d.out_channels();
    bool attention = cfg.ablation == AblationMode::full;
    m.cfam = make_cfam<T>(rng, cin, cfg.resolved_cfam_channels(), cfg.resolved_cfam_out(),
                          attention);
    m.head = make_head<T>(rng, cfg.resolved_cfam_out(), cfg.head);
    return m;
}

// clip: [N,3,D,H,W]; key: [N,3,H,W]. When `override_3d` is given (the
// long-term feature bank path) it replaces the live 3D feature and must
// match its shape. Returns the raw anchor grid [N, k*(NumCls+5), H', W'].
template <typename T>
Tensor<T> model_forward(YowoModel<T>& m, const Tensor<T>& clip, const Tensor<T>& key,
                        NormMode mode, const Tensor<T>* override_3d = nullptr) {
    Tensor<T> fused;
    switch (m.cfg.ablation) {
        case AblationMode::two_d_only: {
            if (override_3d)
                throw std::invalid_argument("model_forward: 3D feature injection without a 3D branch");
            fused = forward_2d(key, m.b2d, mode);
            break;
        }
        case AblationMode::three_d_only: {
            fused = override_3d ? *override_3d : forward_3d(clip, m.b3d, mode);
            break;
        }
        default: {
            Tensor<T> f3 = override_3d ? *override_3d : forward_3d(clip, m.b3d, mode);
            Tensor<T> f2 = forward_2d(key, m.b2d, mode);
            fused = fuse_concat(f3, f2);
        }
    }
    Tensor<T> d = cfam_forward(fused, m.cfam, mode);
    return head_project(d, m.head);
}

template <typename T>
std::vector<ParamRef<T>> model_parameters(YowoModel<T>& m) {
    std::vector<ParamRef<T>> out;
    if (m.has_2d) collect_params(m.b2d, "b2d", out);
    if (m.has_3d) collect_params(m.b3d, "b3d", out);
    collect_params(m.cfam, "cfam", out);
    collect_params(m.head, "head", out);
    return out;
}

// named non-parameter state (norm running statistics)
template <typename T>
struct BufferRef {
    std::string name;
    std::vector<T>* data;
};

template <typename T>
std::vector<BufferRef<T>> model_buffers(YowoModel<T>& m) {
    std::vector<BufferRef<T>> out;
    auto add_bn = [&](BatchNorm<T>& bn, const std::string& prefix) {
        out.push_back({prefix + ".running_mean", &bn.running_mean});
        out.push_back({prefix + ".running_var", &bn.running_var});
    };
    if (m.has_2d)
        for (std::size_t i = 0; i < m.b2d.stages.size(); ++i)
            add_bn(m.b2d.stages[i].bn, "b2d.stage" + std::to_string(i) + ".bn");
    if (m.has_3d)
        for (std::size_t i = 0; i < m.b3d.stages.size(); ++i)
            add_bn(m.b3d.stages[i].bn, "b3d.stage" + std::to_string(i) + ".bn");
    add_bn(m.cfam.bn_in, "cfam.bn_in");
    add_bn(m.cfam.bn_out, "cfam.bn_out");
    return out;
}

inline std::string ModelConfig::fingerprint() const {
    auto widths = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "-" : "") + std::to_string(v[i]);
        return s;
    };
    std::string s = "v1";
    s += " b2d:" + widths(backbone2d.widths) + "/" + std::to_string(backbone2d.spatial_stride);
    s += " b3d:" + widths(backbone3d.widths) + "/" + std::to_string(backbone3d.spatial_stride) +
         "x" + std::to_string(backbone3d.clip_len);
    s += " cfam:" + std::to_string(resolved_cfam_channels()) + ">" +
         std::to_string(resolved_cfam_out());
    s += " head:" + std::to_string(head.num_anchors) + "x" + std::to_string(head.num_classes) +
         (head.mode == ClassMode::multi_label ? "ml" + std::to_string(head.pose_classes) : "sl");
    s += " abl:" + std::string(ablation_name(ablation));
    return s;
}

}  // namespace yowo
