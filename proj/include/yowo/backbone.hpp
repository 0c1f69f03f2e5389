#pragma once

// Tiny configurable feature extractors. The 2D branch maps a key frame
// [N,3,H,W] to [N,C'',H/S,W/S]; the 3D branch maps a clip [N,3,D,H,W] to
// [N,C',H/S,W/S], collapsing the depth axis to 1 through its temporal
// stride schedule. Both branches share the spatial stride S so their
// output grids coincide.

#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/nn.hpp"
#include "yowo/rng.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

struct BackboneConfig {
    std::vector<std::size_t> widths{8, 16, 32, 32};  // per-stage output channels
    std::size_t spatial_stride = 8;                  // S, power of two
    std::size_t clip_len = 8;                        // D, 3D branch only
};

namespace detail {

// Splits `total` (a power of two) into per-stage factors in {1,2,4} by
// doubling stages round-robin from the front.
inline std::vector<std::size_t> stride_schedule(std::size_t total, std::size_t nstages,
                                                const char* what) {
    std::vector<std::size_t> s(nstages, 1);
    std::size_t remaining = total;
    std::size_t i = 0;
    while (remaining > 1) {
        if (remaining % 2 != 0)
            throw std::invalid_argument(std::string(what) + ": stride " + std::to_string(total) +
                                        " is not a power of two");
        bool placed = false;
        for (std::size_t tries = 0; tries < nstages; ++tries) {
            std::size_t idx = (i + tries) % nstages;
            if (s[idx] < 4) {
                s[idx] *= 2;
                i = idx + 1;
                placed = true;
                break;
            }
        }
        if (!placed)
            throw std::invalid_argument(std::string(what) + ": stride " + std::to_string(total) +
                                        " too large for " + std::to_string(nstages) + " stages");
        remaining /= 2;
    }
    return s;
}

}  // namespace detail

template <typename T>
struct Backbone2D {
    BackboneConfig cfg;
    struct Stage {
        Conv2D<T> conv;
        BatchNorm<T> bn;
    };
    std::vector<Stage> stages;
    bool frozen = false;

    std::size_t out_channels() const { return cfg.widths.back(); }
};

template <typename T>
struct Backbone3D {
    BackboneConfig cfg;
    struct Stage {
        Conv3D<T> conv;
        BatchNorm<T> bn;
    };
    std::vector<Stage> stages;
    bool frozen = false;

    std::size_t out_channels() const { return cfg.widths.back(); }
};

template <typename T>
Backbone2D<T> make_backbone2d(Rng& rng, const BackboneConfig& cfg) {
    if (cfg.widths.empty()) throw std::invalid_argument("backbone2d: no stages");
    Backbone2D<T> b;
    b.cfg = cfg;
    auto strides = detail::stride_schedule(cfg.spatial_stride, cfg.widths.size(), "backbone2d");
    std::size_t cin = 3;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
        typename Backbone2D<T>::Stage st;
        st.conv = make_conv2d<T>(rng, cin, cfg.widths[i], 3, strides[i], 1, false);
        st.bn = make_batchnorm<T>(cfg.widths[i]);
        b.stages.push_back(std::move(st));
        cin = cfg.widths[i];
    }
    return b;
}

template <typename T>
Backbone3D<T> make_backbone3d(Rng& rng, const BackboneConfig& cfg) {
    if (cfg.widths.empty()) throw std::invalid_argument("backbone3d: no stages");
    Backbone3D<T> b;
    b.cfg = cfg;
    auto sp = detail::stride_schedule(cfg.spatial_stride, cfg.widths.size(), "backbone3d");
    auto td = detail::stride_schedule(cfg.clip_len, cfg.widths.size(), "backbone3d clip");
    std::size_t cin = 3;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
        typename Backbone3D<T>::Stage st;
        st.conv = make_conv3d<T>(rng, cin, cfg.widths[i], 3, td[i], sp[i], 1, false);
        st.bn = make_batchnorm<T>(cfg.widths[i]);
        b.stages.push_back(std::move(st));
        cin = cfg.widths[i];
    }
    return b;
}

// key frame batch [N,3,H,W] -> [N,C'',H/S,W/S]
template <typename T>
Tensor<T> forward_2d(const Tensor<T>& key, Backbone2D<T>& backbone, NormMode mode) {
    if (key.ndim() != 4 || key.dim(1) != 3)
        throw std::invalid_argument("forward_2d: input must be [N,3,H,W]");
    std::size_t s = backbone.cfg.spatial_stride;
    if (key.dim(2) % s != 0 || key.dim(3) % s != 0)
        throw std::invalid_argument("forward_2d: input " + std::to_string(key.dim(2)) + "x" +
                                    std::to_string(key.dim(3)) + " not divisible by stride " +
                                    std::to_string(s));
    Tensor<T> x = key;
    for (auto& st : backbone.stages) {
        x = conv2d_forward(x, st.conv);
        x = batchnorm_forward(x, st.bn, mode);
        x = leaky_relu(x, T(0.1));
    }
    return x;
}

// clip batch [N,3,D,H,W] -> [N,C',H/S,W/S], depth collapsed to 1 and squeezed
template <typename T>
Tensor<T> forward_3d(const Tensor<T>& clip, Backbone3D<T>& backbone, NormMode mode) {
    if (clip.ndim() != 5 || clip.dim(1) != 3)
        throw std::invalid_argument("forward_3d: input must be [N,3,D,H,W]");
    if (clip.dim(2) != backbone.cfg.clip_len)
        throw std::invalid_argument("forward_3d: clip length " + std::to_string(clip.dim(2)) +
                                    ", backbone configured for " +
                                    std::to_string(backbone.cfg.clip_len));
    std::size_t s = backbone.cfg.spatial_stride;
    if (clip.dim(3) % s != 0 || clip.dim(4) % s != 0)
        throw std::invalid_argument("forward_3d: spatial size not divisible by stride " +
                                    std::to_string(s));
    Tensor<T> x = clip;
    for (auto& st : backbone.stages) {
        x = conv3d_forward(x, st.conv);
        x = batchnorm_forward(x, st.bn, mode);
        x = relu(x);
    }
    if (x.dim(2) != 1)
        throw std::logic_error("forward_3d: depth not collapsed, got " + std::to_string(x.dim(2)));
    return reshape(x, {x.dim(0), x.dim(1), x.dim(3), x.dim(4)});
}

// Excludes the backbone's parameters from optimizer updates. Gradients may
// still flow through it; only the update step skips frozen tensors.
template <typename T>
void freeze(Backbone2D<T>& b) {
    b.frozen = true;
}
template <typename T>
void freeze(Backbone3D<T>& b) {
    b.frozen = true;
}

template <typename T>
void collect_params(Backbone2D<T>& b, const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (std::size_t i = 0; i < b.stages.size(); ++i) {
        std::string p = prefix + ".stage" + std::to_string(i);
        out.push_back({p + ".conv.weight", b.stages[i].conv.weight, !b.frozen});
        if (b.stages[i].conv.bias.defined())
            out.push_back({p + ".conv.bias", b.stages[i].conv.bias, !b.frozen});
        out.push_back({p + ".bn.scale", b.stages[i].bn.scale, !b.frozen});
        out.push_back({p + ".bn.shift", b.stages[i].bn.shift, !b.frozen});
    }
}

template <typename T>
void collect_params(Backbone3D<T>& b, const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (std::size_t i = 0; i < b.stages.size(); ++i) {
        std::string p = prefix + ".stage" + std::to_string(i);
        out.push_back({p + ".conv.weight", b.stages[i].conv.weight, !b.frozen});
        if (b.stages[i].conv.bias.defined())
            out.push_back({p + ".conv.bias", b.stages[i].conv.bias, !b.frozen});
        out.push_back({p + ".bn.scale", b.stages[i].bn.scale, !b.frozen});
        out.push_back({p + ".bn.shift", b.stages[i].bn.shift, !b.frozen});
    }
}

}  // namespace yowo
