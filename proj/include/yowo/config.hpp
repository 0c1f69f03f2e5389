#pragma once

// Structured run configuration: one JSON document with a section per
// subsystem, strict key validation against the defaults, and CLI overrides.
// The merged document is echoed into every output directory.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "yowo/dataio.hpp"
#include "yowo/model.hpp"
#include "yowo/postprocess.hpp"
#include "yowo/trainer.hpp"
#include "yowo/tube.hpp"

namespace yowo {

struct RunConfig {
    SynthConfig synth;
    ModelConfig model;
    TrainConfig trainer;
    NmsConfig nms;
    LinkConfig link;
    bool lfb_enabled = false;
    std::size_t lfb_clip_len = 8;
    std::size_t lfb_window = 8;
    std::uint64_t seed = 1234;
    std::string precision = "single";  // double selectable for verification
    std::size_t threads = 1;
    nlohmann::json merged;  // full document for echoing
};

// every known key with its default value, documented in README
nlohmann::json default_config_json();

// flag values that override the document after merging
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> precision;
    std::optional<bool> lfb;
    std::optional<std::string> ablation;
    std::optional<std::size_t> clip_len;
    std::optional<std::size_t> downsample;
    std::optional<std::size_t> threads;
};

// Merges user JSON over the defaults (unknown keys are rejected with their
// full path), applies overrides, and resolves the typed configuration.
RunConfig resolve_config(const nlohmann::json& user, const ConfigOverrides& overrides = {});
RunConfig load_config_file(const std::string& path, const ConfigOverrides& overrides = {});
RunConfig default_run_config();

// reproducibility stamp: merged config + seed + code version + command line
void write_run_outputs(const std::string& out_dir, const RunConfig& cfg,
                       const std::string& command_line, bool force);

inline constexpr const char* kCodeVersion = "0.1.0";

}  // namespace yowo
