#pragma once

// Long-term feature bank: 3D-branch features of non-overlapping fixed-length
// clips, precomputed in evaluation mode. At inference the features nearest
// the key frame's clip are averaged and substituted for the live 3D feature,
// which makes the pipeline non-causal.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "yowo/backbone.hpp"
#include "yowo/dataio.hpp"
#include "yowo/tensor.hpp"

namespace yowo {

template <typename T>
struct FeatureBank {
    std::string video_id;
    std::size_t clip_len = 8;
    std::vector<Tensor<T>> features;  // entry i covers frames [i*clip_len, (i+1)*clip_len)

    std::size_t count() const { return features.size(); }
};

// One feature per full non-overlapping window; trailing remainder frames are
// dropped. The backbone runs in evaluation mode. Throws when the video is
// shorter than one clip.
template <typename T>
FeatureBank<T> build_bank(const AnnotatedVideo& video, Backbone3D<T>& backbone,
                          std::size_t clip_len = 8) {
    if (video.num_frames() < clip_len)
        throw std::invalid_argument("build_bank: video " + video.id + " has " +
                                    std::to_string(video.num_frames()) + " frames, need " +
                                    std::to_string(clip_len));
    if (backbone.cfg.clip_len != clip_len)
        throw std::invalid_argument("build_bank: backbone consumes clips of " +
                                    std::to_string(backbone.cfg.clip_len) + " frames, bank wants " +
                                    std::to_string(clip_len));
    NoGradScope ng;
    FeatureBank<T> bank;
    bank.video_id = video.id;
    bank.clip_len = clip_len;
    std::size_t plane = video.width * video.height;
    std::size_t n = video.num_frames() / clip_len;
    for (std::size_t w = 0; w < n; ++w) {
        std::vector<T> clip(3 * clip_len * plane);
        for (std::size_t t = 0; t < clip_len; ++t) {
            const auto& f = video.frames[w * clip_len + t];
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < plane; ++p)
                    clip[(c * clip_len + t) * plane + p] = T(f[c * plane + p]);
        }
        Tensor<T> x({1, 3, clip_len, video.height, video.width}, std::move(clip));
        Tensor<T> feat = forward_3d(x, backbone, NormMode::eval);
        bank.features.push_back(reshape(feat, {feat.dim(1), feat.dim(2), feat.dim(3)}));
    }
    return bank;
}

// Elementwise mean of up to `window` bank entries centered on the clip that
// contains the key frame: floor((window-1)/2) clips before it, the rest
// after, truncated at the video bounds.
template <typename T>
Tensor<T> query(const FeatureBank<T>& bank, std::size_t key_frame_index, std::size_t window = 8) {
    if (bank.count() == 0) throw std::invalid_argument("query: empty feature bank");
    if (window == 0) throw std::invalid_argument("query: zero window");
    std::size_t n = bank.count();
    std::size_t key_clip = std::min(key_frame_index / bank.clip_len, n - 1);
    std::size_t before = (window - 1) / 2;
    std::size_t lo = key_clip > before ? key_clip - before : 0;
    std::size_t hi = std::min(n - 1, key_clip + (window - 1 - before));

    const Shape& shape = bank.features[0].shape();
    std::vector<T> acc(shape_numel(shape), T(0));
    for (std::size_t i = lo; i <= hi; ++i) {
        const auto& v = bank.features[i].values();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
    }
    T count = T(hi - lo + 1);
    for (auto& v : acc) v /= count;  // plain division matches a hand-computed mean exactly
    return Tensor<T>(shape, std::move(acc));
}

// directory of per-clip blobs plus a text index; values stored as doubles
template <typename T>
void save_bank(const std::string& dir, const FeatureBank<T>& bank) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const Shape& s = bank.features.empty() ? Shape{} : bank.features[0].shape();
    {
        std::ofstream idx(fs::path(dir) / "index.txt");
        if (!idx) throw std::runtime_error("save_bank: cannot write index in " + dir);
        idx << bank.video_id << " " << bank.clip_len << " " << bank.count();
        for (std::size_t d : s) idx << " " << d;
        idx << "\n";
    }
    for (std::size_t i = 0; i < bank.count(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%05zu.bin", i);
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        const auto& v = bank.features[i].values();
        for (T x : v) {
            double d = double(x);
            f.write(reinterpret_cast<const char*>(&d), sizeof(d));
        }
    }
}

template <typename T>
FeatureBank<T> load_bank(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream idx(fs::path(dir) / "index.txt");
    if (!idx) throw std::runtime_error("load_bank: no index.txt in " + dir);
    FeatureBank<T> bank;
    std::size_t count;
    idx >> bank.video_id >> bank.clip_len >> count;
    Shape shape;
    std::size_t d;
    while (idx >> d) shape.push_back(d);
    if (shape.empty()) throw std::runtime_error("load_bank: malformed index in " + dir);
    std::size_t numel = shape_numel(shape);
    for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%05zu.bin", i);
        std::ifstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw std::runtime_error("load_bank: missing blob " + std::string(name));
        std::vector<T> v(numel);
        for (std::size_t j = 0; j < numel; ++j) {
            double x;
            f.read(reinterpret_cast<char*>(&x), sizeof(x));
            v[j] = T(x);
        }
        if (!f) throw std::runtime_error("load_bank: truncated blob " + std::string(name));
        bank.features.push_back(Tensor<T>(shape, std::move(v)));
    }
    return bank;
}

}  // namespace yowo
