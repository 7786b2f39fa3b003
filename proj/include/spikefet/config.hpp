#pragma once

#include <cstdint>
#include <string>

#include "spikefet/energy.hpp"
#include "spikefet/tracker.hpp"

namespace spikefet {

struct DataConfig {
    int sequences = 8;
    int length = 40;
    int canvas = 192;  // square world frames
    double min_size = 26;
    double max_size = 42;
    double max_speed = 4.0;
    int distractors = 1;
    std::string corruption = "none";  // none | low_light | overexposure | blur
    double event_theta = 0.12;
    int64_t frame_interval_us = 40000;
};

struct TrainConfig {
    int steps = 200;
    int batch = 1;
    double lr = 2e-3;
    double momentum = 0.9;
    double template_factor = 2.0;  // crop side = factor * max(w, h)
    double search_factor = 3.0;
    int jitter_px = 8;
};

struct EvalConfig {
    double template_factor = 2.0;
    double search_factor = 3.0;
    double precision_px = 20.0;
};

struct AppConfig {
    ModelConfig model;
    DataConfig data;
    TrainConfig train;
    EvalConfig eval;
    EnergyCosts energy;
};

// ASCII config: `[section]` headers, `key = value` lines, `#` comments.
// Unknown sections or keys are errors.
AppConfig parse_config(const std::string& path);
void apply_config_line(AppConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value);

}  // namespace spikefet
