#include "yowo/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace yowo {

const char* motion_program_name(std::size_t cls) {
    static const char* names[] = {"move_left", "move_right", "grow",
                                  "shrink",    "move_up",    "move_down"};
    if (cls >= 6) throw std::invalid_argument("motion_program_name: class out of range");
    return names[cls];
}

namespace {

// pixel value = background noise outside the rectangle, object intensity
// inside, with exact area coverage on boundary pixels
void render_frame(std::vector<float>& frame, std::size_t size, const Box& b, double intensity,
                  double noise_level, Rng& rng) {
    std::size_t plane = size * size;
    frame.assign(3 * plane, 0.f);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < plane; ++p)
            frame[c * plane + p] = float(rng.uniform(0.0, noise_level));

    double x1 = b.x * double(size), x2 = (b.x + b.w) * double(size);
    double y1 = b.y * double(size), y2 = (b.y + b.h) * double(size);
    std::size_t r0 = std::size_t(std::max(0.0, std::floor(y1)));
    std::size_t r1 = std::size_t(std::min(double(size), std::ceil(y2)));
    std::size_t c0 = std::size_t(std::max(0.0, std::floor(x1)));
    std::size_t c1 = std::size_t(std::min(double(size), std::ceil(x2)));
    for (std::size_t r = r0; r < r1; ++r) {
        double cy = std::min(double(r + 1), y2) - std::max(double(r), y1);
        if (cy <= 0) continue;
        for (std::size_t col = c0; col < c1; ++col) {
            double cx = std::min(double(col + 1), x2) - std::max(double(col), x1);
            if (cx <= 0) continue;
            double cov = cx * cy;
            for (std::size_t ch = 0; ch < 3; ++ch) {
                float& v = frame[ch * plane + r * size + col];
                v = float(double(v) * (1.0 - cov) + intensity * cov);
            }
        }
    }
}

AnnotatedVideo make_video(const SynthConfig& cfg, std::size_t cls, const std::string& id,
                          Rng& rng) {
    const std::size_t T = cfg.frames_per_video;
    const double travel = cfg.velocity * double(T - 1);
    const double swell = cfg.growth * double(T - 1);
    auto program = MotionProgram(cls);

    // per-frame (center, size) trajectory, guaranteed inside the frame
    double s0, cx0, cy0, vx = 0, vy = 0, ds = 0;
    switch (program) {
        case MotionProgram::move_left:
        case MotionProgram::move_right: {
            s0 = rng.uniform(cfg.min_object_size, cfg.max_object_size);
            double lo = s0 / 2 + travel, hi = 1.0 - s0 / 2;
            if (lo >= hi)
                throw std::invalid_argument("synth_generate: trajectory does not fit, reduce "
                                            "velocity or object size");
            double start = rng.uniform(lo, hi);
            cy0 = rng.uniform(s0 / 2, 1.0 - s0 / 2);
            if (program == MotionProgram::move_left) {
                cx0 = start;
                vx = -cfg.velocity;
            } else {  // mirrored start keeps the per-frame marginals identical
                cx0 = 1.0 - start;
                vx = cfg.velocity;
            }
            break;
        }
        case MotionProgram::move_up:
        case MotionProgram::move_down: {
            s0 = rng.uniform(cfg.min_object_size, cfg.max_object_size);
            double lo = s0 / 2 + travel, hi = 1.0 - s0 / 2;
            if (lo >= hi)
                throw std::invalid_argument("synth_generate: trajectory does not fit, reduce "
                                            "velocity or object size");
            double start = rng.uniform(lo, hi);
            cx0 = rng.uniform(s0 / 2, 1.0 - s0 / 2);
            if (program == MotionProgram::move_up) {
                cy0 = start;
                vy = -cfg.velocity;
            } else {
                cy0 = 1.0 - start;
                vy = cfg.velocity;
            }
            break;
        }
        case MotionProgram::grow:
        case MotionProgram::shrink: {
            double base = rng.uniform(cfg.min_object_size, cfg.max_object_size);
            double smax = base + swell;
            if (smax >= 1.0)
                throw std::invalid_argument("synth_generate: grown object exceeds the frame, "
                                            "reduce growth or object size");
            cx0 = rng.uniform(smax / 2, 1.0 - smax / 2);
            cy0 = rng.uniform(smax / 2, 1.0 - smax / 2);
            if (program == MotionProgram::grow) {
                s0 = base;
                ds = cfg.growth;
            } else {  // start large, traverse the same size range downward
                s0 = smax;
                ds = -cfg.growth;
            }
            break;
        }
        default:
            throw std::invalid_argument("synth_generate: unknown motion program");
    }

    AnnotatedVideo v;
    v.id = id;
    v.label = int(cls);
    v.width = v.height = cfg.image_size;
    v.frames.resize(T);
    v.annotations.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        double s = s0 + ds * double(t);
        double cx = cx0 + vx * double(t);
        double cy = cy0 + vy * double(t);
        Box b = Box::from_center(cx, cy, s, s);
        render_frame(v.frames[t], cfg.image_size, b, cfg.object_intensity, cfg.noise_level, rng);
        v.annotations[t].push_back({b, {int(cls)}});
    }
    return v;
}

}  // namespace

Dataset synth_generate(const SynthConfig& cfg) {
    if (cfg.num_classes < 2 || cfg.num_classes > 6)
        throw std::invalid_argument("synth_generate: num_classes must be in [2,6]");
    if (cfg.min_object_size <= 0 || cfg.max_object_size >= 1.0 ||
        cfg.min_object_size > cfg.max_object_size)
        throw std::invalid_argument("synth_generate: bad object size range");
    if (cfg.frames_per_video < 1) throw std::invalid_argument("synth_generate: no frames");

    Rng master(cfg.seed);
    Dataset out;
    for (std::size_t cls = 0; cls < cfg.num_classes; ++cls) {
        for (std::size_t i = 0; i < cfg.train_videos_per_class + cfg.test_videos_per_class; ++i) {
            Rng vid_rng(master.raw());
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04zu", motion_program_name(cls), i);
            auto video = make_video(cfg, cls, name, vid_rng);
            if (i < cfg.train_videos_per_class)
                out.train.push_back(std::move(video));
            else
                out.test.push_back(std::move(video));
        }
    }
    return out;
}

void write_ppm(const std::string& path, const std::vector<float>& frame, std::size_t w,
               std::size_t h) {
    if (frame.size() != 3 * w * h) throw std::invalid_argument("write_ppm: frame size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::size_t plane = w * h;
    std::vector<unsigned char> row(3 * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                float v = std::clamp(frame[c * plane + y * w + x], 0.f, 1.f);
                row[x * 3 + c] = (unsigned char)(std::lround(v * 255.f));
            }
        f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
}

std::vector<float> read_ppm(const std::string& path, std::size_t& w, std::size_t& h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    std::size_t maxval;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255)
        throw std::runtime_error("read_ppm: unsupported format in " + path);
    f.get();  // single whitespace after the header
    std::size_t plane = w * h;
    std::vector<unsigned char> raw(3 * plane);
    f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(f.gcount()) != raw.size())
        throw std::runtime_error("read_ppm: truncated file " + path);
    std::vector<float> frame(3 * plane);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                frame[c * plane + y * w + x] = float(raw[(y * w + x) * 3 + c]) / 255.f;
    return frame;
}

void save_annotations(const std::string& path, const AnnotatedVideo& video) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_annotations: cannot open " + path);
    f.precision(17);
    for (std::size_t t = 0; t < video.annotations.size(); ++t)
        for (const auto& ann : video.annotations[t])
            for (int cls : ann.class_ids)
                f << t << " " << cls << " " << ann.box.x << " " << ann.box.y << " " << ann.box.w
                  << " " << ann.box.h << "\n";
}

std::vector<std::vector<FrameAnnotation>> load_annotations(const std::string& path,
                                                           std::size_t num_frames) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_annotations: cannot open " + path);
    std::vector<std::vector<FrameAnnotation>> out(num_frames);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::size_t frame;
        int cls;
        Box b;
        if (!(is >> frame >> cls >> b.x >> b.y >> b.w >> b.h))
            throw std::runtime_error("load_annotations: malformed line " + std::to_string(lineno) +
                                     " in " + path + ": \"" + line + "\"");
        if (frame >= num_frames)
            throw std::runtime_error("load_annotations: frame index out of range at line " +
                                     std::to_string(lineno) + " in " + path);
        // identical boxes on the same frame merge into one multi-label entry
        bool merged = false;
        for (auto& ann : out[frame])
            if (ann.box.x == b.x && ann.box.y == b.y && ann.box.w == b.w && ann.box.h == b.h) {
                ann.class_ids.push_back(cls);
                merged = true;
                break;
            }
        if (!merged) out[frame].push_back({b, {cls}});
    }
    return out;
}

std::string manifest_text(const Dataset& data) {
    std::ostringstream os;
    os << "# video_id class split num_frames width height\n";
    for (const auto& v : data.train)
        os << v.id << " " << v.label << " train " << v.num_frames() << " " << v.width << " "
           << v.height << "\n";
    for (const auto& v : data.test)
        os << v.id << " " << v.label << " test " << v.num_frames() << " " << v.width << " "
           << v.height << "\n";
    return os.str();
}

void save_dataset(const std::string& dir, const Dataset& data) {
    fs::create_directories(fs::path(dir) / "videos");
    fs::create_directories(fs::path(dir) / "annotations");
    {
        std::ofstream mf(fs::path(dir) / "manifest.txt");
        if (!mf) throw std::runtime_error("save_dataset: cannot write manifest in " + dir);
        mf << manifest_text(data);
    }
    auto dump = [&](const AnnotatedVideo& v) {
        fs::path vdir = fs::path(dir) / "videos" / v.id;
        fs::create_directories(vdir);
        for (std::size_t t = 0; t < v.num_frames(); ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%05zu.ppm", t);
            write_ppm((vdir / name).string(), v.frames[t], v.width, v.height);
        }
        save_annotations((fs::path(dir) / "annotations" / (v.id + ".txt")).string(), v);
    };
    for (const auto& v : data.train) dump(v);
    for (const auto& v : data.test) dump(v);
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("load_dataset: no manifest.txt in " + dir);
    Dataset out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(mf, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        AnnotatedVideo v;
        std::string split;
        std::size_t num_frames;
        if (!(is >> v.id >> v.label >> split >> num_frames >> v.width >> v.height))
            throw std::runtime_error("load_dataset: malformed manifest line " +
                                     std::to_string(lineno));
        v.frames.resize(num_frames);
        for (std::size_t t = 0; t < num_frames; ++t) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%05zu.ppm", t);
            std::size_t w, h;
            v.frames[t] = read_ppm((fs::path(dir) / "videos" / v.id / name).string(), w, h);
            if (w != v.width || h != v.height)
                throw std::runtime_error("load_dataset: frame size mismatch in video " + v.id);
        }
        v.annotations =
            load_annotations((fs::path(dir) / "annotations" / (v.id + ".txt")).string(), num_frames);
        if (split == "train")
            out.train.push_back(std::move(v));
        else if (split == "test")
            out.test.push_back(std::move(v));
        else
            throw std::runtime_error("load_dataset: unknown split \"" + split + "\" at line " +
                                     std::to_string(lineno));
    }
    return out;
}

std::vector<std::size_t> clip_indices(std::size_t key_frame, const ClipSpec& spec) {
    std::vector<std::size_t> idx(spec.clip_len);
    for (std::size_t i = 0; i < spec.clip_len; ++i) {
        std::ptrdiff_t t = std::ptrdiff_t(key_frame) -
                           std::ptrdiff_t((spec.clip_len - 1 - i) * spec.downsample);
        idx[i] = t < 0 ? 0 : std::size_t(t);
    }
    return idx;
}

std::size_t min_key_index(const ClipSpec& spec) {
    return spec.pad_history ? 0 : (spec.clip_len - 1) * spec.downsample;
}

AugmentDraw draw_augment(Rng& rng) {
    AugmentDraw d;
    d.flip = rng.bernoulli(0.5);
    d.scale = rng.uniform(0.8, 1.2);
    double span = d.scale - 1.0;
    d.offset_x = span >= 0 ? rng.uniform(0.0, span) : rng.uniform(span, 0.0);
    d.offset_y = span >= 0 ? rng.uniform(0.0, span) : rng.uniform(span, 0.0);
    return d;
}

AugmentDraw identity_augment() { return AugmentDraw{}; }

std::vector<int> flip_class_map(std::size_t num_classes) {
    std::vector<int> map(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) map[c] = int(c);
    if (num_classes >= 2) {
        map[std::size_t(MotionProgram::move_left)] = int(MotionProgram::move_right);
        map[std::size_t(MotionProgram::move_right)] = int(MotionProgram::move_left);
    }
    return map;
}

std::vector<float> apply_augment_frame(const std::vector<float>& frame, std::size_t w,
                                       std::size_t h, const AugmentDraw& draw) {
    std::size_t plane = w * h;
    if (frame.size() != 3 * plane)
        throw std::invalid_argument("apply_augment_frame: frame size mismatch");

    std::vector<float> flipped;
    const std::vector<float>* src = &frame;
    if (draw.flip) {
        flipped.resize(frame.size());
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    flipped[c * plane + y * w + x] = frame[c * plane + y * w + (w - 1 - x)];
        src = &flipped;
    }

    std::vector<float> out(frame.size());
    auto sample = [&](std::size_t c, double sx, double sy) {
        // bilinear with clamp-to-edge
        sx = std::clamp(sx, 0.0, double(w - 1));
        sy = std::clamp(sy, 0.0, double(h - 1));
        std::size_t x0 = std::size_t(sx), y0 = std::size_t(sy);
        std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        double fx = sx - double(x0), fy = sy - double(y0);
        const float* p = src->data() + c * plane;
        double v = double(p[y0 * w + x0]) * (1 - fx) * (1 - fy) +
                   double(p[y0 * w + x1]) * fx * (1 - fy) +
                   double(p[y1 * w + x0]) * (1 - fx) * fy + double(p[y1 * w + x1]) * fx * fy;
        return float(v);
    };
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double sx = (double(x) + 0.5 + draw.offset_x * double(w)) / draw.scale - 0.5;
                double sy = (double(y) + 0.5 + draw.offset_y * double(h)) / draw.scale - 0.5;
                out[c * plane + y * w + x] = sample(c, sx, sy);
            }
    return out;
}

std::vector<FrameAnnotation> apply_augment_boxes(const std::vector<FrameAnnotation>& boxes,
                                                 const AugmentDraw& draw, double min_area) {
    std::vector<FrameAnnotation> out;
    for (const auto& ann : boxes) {
        Box b = ann.box;
        if (draw.flip) b.x = 1.0 - b.x - b.w;
        b.x = b.x * draw.scale - draw.offset_x;
        b.y = b.y * draw.scale - draw.offset_y;
        b.w = b.w * draw.scale;
        b.h = b.h * draw.scale;
        b = b.clipped();
        if (b.area() < min_area) continue;
        out.push_back({b, ann.class_ids});
    }
    return out;
}

}  // namespace yowo
