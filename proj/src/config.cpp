#include "spikefet/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikefet {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& v) {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
    return r;
}

double to_double(const std::string& v) {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
    return r;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v) {
    std::vector<int> out;
    std::istringstream is(v);
    std::string part;
    while (std::getline(is, part, ',')) out.push_back(to_int(trim(part)));
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

}  // namespace

void apply_config_line(AppConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value) {
    auto unknown = [&]() -> void {
        throw std::invalid_argument("unknown config key '" + key + "' in section [" + section +
                                    "]");
    };
    if (section == "model") {
        if (key == "search_size") cfg.model.search_size = to_int(value);
        else if (key == "template_size") cfg.model.template_size = to_int(value);
        else if (key == "event_bins") cfg.model.event_bins = to_int(value);
        else if (key == "lambda") cfg.model.lambda = to_double(value);
        else if (key == "use_rpm") cfg.model.use_rpm = to_bool(value);
        else if (key == "use_str") cfg.model.use_str = to_bool(value);
        else if (key == "hanning") cfg.model.hanning = to_bool(value);
        else if (key == "d_max") cfg.model.sn.d_max = to_int(value);
        else if (key == "depths") cfg.model.plan.depths = to_int_list(value);
        else if (key == "channels") cfg.model.plan.channels = to_int_list(value);
        else if (key == "strides") cfg.model.plan.strides = to_int_list(value);
        else if (key == "fusion_depth") cfg.model.fusion.depth = to_int(value);
        else if (key == "mlp_expansion") cfg.model.fusion.mlp_expansion = to_int(value);
        else if (key == "heads") cfg.model.fusion.attn.heads = to_int(value);
        else if (key == "stripe_width") cfg.model.fusion.attn.stripe_width = to_int(value);
        else if (key == "gamma") cfg.model.fusion.attn.gamma = to_int(value);
        else if (key == "attn_scale") cfg.model.fusion.attn.scale = to_double(value);
        else unknown();
    } else if (section == "loss") {
        if (key == "lambda_iou") cfg.model.loss.lambda_iou = to_double(value);
        else if (key == "lambda_l1") cfg.model.loss.lambda_l1 = to_double(value);
        else if (key == "alpha") cfg.model.loss.alpha = to_double(value);
        else if (key == "beta") cfg.model.loss.beta = to_double(value);
        else if (key == "tau") cfg.model.loss.tau = to_double(value);
        else if (key == "focal_a") cfg.model.loss.focal_a = to_double(value);
        else if (key == "focal_b") cfg.model.loss.focal_b = to_double(value);
        else unknown();
    } else if (section == "data") {
        if (key == "sequences") cfg.data.sequences = to_int(value);
        else if (key == "length") cfg.data.length = to_int(value);
        else if (key == "canvas") cfg.data.canvas = to_int(value);
        else if (key == "min_size") cfg.data.min_size = to_double(value);
        else if (key == "max_size") cfg.data.max_size = to_double(value);
        else if (key == "max_speed") cfg.data.max_speed = to_double(value);
        else if (key == "distractors") cfg.data.distractors = to_int(value);
        else if (key == "corruption") cfg.data.corruption = value;
        else if (key == "event_theta") cfg.data.event_theta = to_double(value);
        else if (key == "frame_interval_us") cfg.data.frame_interval_us = to_int(value);
        else unknown();
    } else if (section == "train") {
        if (key == "steps") cfg.train.steps = to_int(value);
        else if (key == "batch") cfg.train.batch = to_int(value);
        else if (key == "lr") cfg.train.lr = to_double(value);
        else if (key == "momentum") cfg.train.momentum = to_double(value);
        else if (key == "template_factor") cfg.train.template_factor = to_double(value);
        else if (key == "search_factor") cfg.train.search_factor = to_double(value);
        else if (key == "jitter_px") cfg.train.jitter_px = to_int(value);
        else unknown();
    } else if (section == "eval") {
        if (key == "template_factor") cfg.eval.template_factor = to_double(value);
        else if (key == "search_factor") cfg.eval.search_factor = to_double(value);
        else if (key == "precision_px") cfg.eval.precision_px = to_double(value);
        else unknown();
    } else if (section == "energy") {
        if (key == "e_mac_pj") cfg.energy.e_mac_pj = to_double(value);
        else if (key == "e_ac_pj") cfg.energy.e_ac_pj = to_double(value);
        else unknown();
    } else {
        throw std::invalid_argument("unknown config section [" + section + "]");
    }
}

AppConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    AppConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            if (t.front() == '[') {
                if (t.back() != ']') throw std::invalid_argument("unterminated section header");
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            size_t eq = t.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("expected 'key = value'");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (key.empty()) throw std::invalid_argument("empty key");
            if (section.empty()) throw std::invalid_argument("key before any [section]");
            apply_config_line(cfg, section, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

}  // namespace spikefet
