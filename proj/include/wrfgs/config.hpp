// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <sstream>
#include <string>

#include "wrfgs/io.hpp"
#include "wrfgs/train.hpp"

namespace wrfgs {

// Plain-text key=value configuration. '#' starts a comment; keys are
// validated against the schema below, and errors carry the line number.
struct ConfigFile {
    std::map<std::string, std::string> kv;
    std::map<std::string, int> lines;
    std::string source_name = "<config>";

    bool has(const std::string& k) const { return kv.count(k) != 0; }

    [[noreturn]] void fail(const std::string& k, const std::string& why) const {
        int line = lines.count(k) ? lines.at(k) : 0;
        throw std::runtime_error(source_name + ":" + std::to_string(line) + ": key '" + k + "' " +
                                 why);
    }

    double get_double(const std::string& k, double def) const {
        if (!has(k)) return def;
        try {
            std::size_t used = 0;
            double v = std::stod(kv.at(k), &used);
            if (used != kv.at(k).size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            fail(k, "is not a number: '" + kv.at(k) + "'");
        }
    }

    int64_t get_int(const std::string& k, int64_t def) const {
        if (!has(k)) return def;
        try {
            std::size_t used = 0;
            int64_t v = std::stoll(kv.at(k), &used);
            if (used != kv.at(k).size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            fail(k, "is not an integer: '" + kv.at(k) + "'");
        }
    }

    bool get_bool(const std::string& k, bool def) const {
        if (!has(k)) return def;
        const std::string& v = kv.at(k);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail(k, "is not a boolean: '" + v + "'");
    }

    std::string get_str(const std::string& k, const std::string& def) const {
        return has(k) ? kv.at(k) : def;
    }
};

inline ConfigFile parse_config_text(const std::string& text, const std::string& name) {
    ConfigFile c;
    c.source_name = name;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected key=value");
        std::string k = trim(line.substr(0, eq));
        std::string v = trim(line.substr(eq + 1));
        if (k.empty())
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": empty key");
        c.kv[k] = v;
        c.lines[k] = lineno;
    }
    return c;
}

inline ConfigFile load_config(const std::filesystem::path& p) {
    return parse_config_text(read_file(p), p.string());
}

inline Pipeline pipeline_from_name(const std::string& s) {
    if (s == "wrfgs") return Pipeline::WrfGs;
    if (s == "wrfgsplus") return Pipeline::WrfGsPlus;
    throw std::runtime_error("unknown pipeline: " + s + " (expected wrfgs|wrfgsplus)");
}

inline std::string pipeline_name(Pipeline p) {
    return p == Pipeline::WrfGs ? "wrfgs" : "wrfgsplus";
}

// Canonical text form; its hash goes into checkpoints so resumed runs can be
// matched to their configuration.
inline std::string train_config_canonical(const TrainConfig& c) {
    std::ostringstream o;
    o << "pipeline=" << pipeline_name(c.pipeline) << "\ntask=" << task_name(c.task)
      << "\neta=" << fmt_double(c.eta) << "\niterations=" << c.iterations << "\nbatch=" << c.batch
      << "\nseed=" << c.seed << "\nn_init=" << c.n_init << "\ncanvas_h=" << c.canvas_h
      << "\ncanvas_w=" << c.canvas_w << "\nlr_position=" << fmt_double(c.lr_position)
      << "\nlr_signal=" << fmt_double(c.lr_signal) << "\nlr_opacity=" << fmt_double(c.lr_opacity)
      << "\nlr_rotation=" << fmt_double(c.lr_rotation) << "\nlr_scale=" << fmt_double(c.lr_scale)
      << "\nlr_mlp=" << fmt_double(c.lr_mlp) << "\nlr_bias=" << fmt_double(c.lr_bias)
      << "\ndensify_interval=" << c.densify_interval << "\ndensify_warmup=" << c.densify_warmup
      << "\ndensify_until=" << c.densify_until
      << "\ndensify_grad_threshold=" << fmt_double(c.densify_grad_threshold)
      << "\ndensify_scale_frac=" << fmt_double(c.densify_scale_frac)
      << "\nopacity_prune=" << fmt_double(c.opacity_prune) << "\nmax_gaussians=" << c.max_gaussians
      << "\nmin_gaussians=" << c.min_gaussians << "\nlog_interval=" << c.log_interval
      << "\nloss_on_magnitude=" << (c.loss_on_magnitude ? 1 : 0)
      << "\nearly_termination=" << (c.early_termination ? 1 : 0) << "\n";
    return o.str();
}

inline uint64_t train_config_hash(const TrainConfig& c) {
    std::string s = train_config_canonical(c);
    return fnv1a64(s.data(), s.size());
}

// Reads a TrainConfig from a parsed key=value file; unknown keys are errors
// so typos surface immediately.
inline TrainConfig train_config_from(const ConfigFile& f) {
    static const char* known[] = {"pipeline",      "task",          "eta",
                                  "iterations",    "batch",         "seed",
                                  "n_init",        "canvas_h",      "canvas_w",
                                  "lr_position",   "lr_signal",     "lr_opacity",
                                  "lr_rotation",   "lr_scale",      "lr_mlp",
                                  "lr_bias",       "densify_interval", "densify_warmup",
                                  "densify_until", "densify_grad_threshold", "densify_scale_frac",
                                  "opacity_prune", "max_gaussians", "min_gaussians",
                                  "log_interval",  "loss_on_magnitude", "early_termination",
                                  "csi_enc_order", "csi_cond_gain"};
    for (const auto& [k, v] : f.kv) {
        bool ok = false;
        for (const char* n : known)
            if (k == n) ok = true;
        if (!ok) f.fail(k, "is not a recognized option");
    }
    TrainConfig c;
    c.pipeline = pipeline_from_name(f.get_str("pipeline", "wrfgsplus"));
    c.task = task_from_name(f.get_str("task", "spectrum"));
    c.eta = f.get_double("eta", c.eta);
    c.iterations = int(f.get_int("iterations", c.iterations));
    c.batch = int(f.get_int("batch", c.batch));
    c.seed = uint64_t(f.get_int("seed", int64_t(c.seed)));
    c.n_init = int(f.get_int("n_init", c.n_init));
    c.canvas_h = int(f.get_int("canvas_h", c.canvas_h));
    c.canvas_w = int(f.get_int("canvas_w", c.canvas_w));
    c.lr_position = f.get_double("lr_position", c.lr_position);
    c.lr_signal = f.get_double("lr_signal", c.lr_signal);
    c.lr_opacity = f.get_double("lr_opacity", c.lr_opacity);
    c.lr_rotation = f.get_double("lr_rotation", c.lr_rotation);
    c.lr_scale = f.get_double("lr_scale", c.lr_scale);
    c.lr_mlp = f.get_double("lr_mlp", c.lr_mlp);
    c.lr_bias = f.get_double("lr_bias", c.lr_bias);
    c.densify_interval = int(f.get_int("densify_interval", c.densify_interval));
    c.densify_warmup = int(f.get_int("densify_warmup", c.densify_warmup));
    c.densify_until = int(f.get_int("densify_until", c.densify_until));
    c.densify_grad_threshold = f.get_double("densify_grad_threshold", c.densify_grad_threshold);
    c.densify_scale_frac = f.get_double("densify_scale_frac", c.densify_scale_frac);
    c.opacity_prune = f.get_double("opacity_prune", c.opacity_prune);
    c.max_gaussians = int(f.get_int("max_gaussians", c.max_gaussians));
    c.min_gaussians = int(f.get_int("min_gaussians", c.min_gaussians));
    c.log_interval = int(f.get_int("log_interval", c.log_interval));
    c.csi_enc_order = int(f.get_int("csi_enc_order", c.csi_enc_order));
    c.csi_cond_gain = f.get_double("csi_cond_gain", c.csi_cond_gain);
    c.loss_on_magnitude = f.get_bool("loss_on_magnitude", c.loss_on_magnitude);
    c.early_termination = f.get_bool("early_termination", c.early_termination);
    c.validate();
    return c;
}

}  // namespace wrfgs
