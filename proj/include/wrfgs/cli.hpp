// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wrfgs/checkpoint.hpp"
#include "wrfgs/config.hpp"
#include "wrfgs/dataset.hpp"
#include "wrfgs/tasks.hpp"
#include "wrfgs/train.hpp"

namespace wrfgs {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

// Scene/generation settings for `gen`, read from the same key=value format.
inline GenParams gen_params_from(const ConfigFile& f) {
    GenParams p;
    p.task = task_from_name(f.get_str("task", "spectrum"));
    p.scene.room_extent = Vec3(f.get_double("room_x", 6.0), f.get_double("room_y", 4.0),
                               f.get_double("room_z", 3.0));
    p.scene.set_uniform_reflection(
        {f.get_double("reflection_re", -0.5), f.get_double("reflection_im", 0.0)});
    p.scene.max_reflection_order = int(f.get_int("reflection_order", 2));
    p.scene.rx_position = Vec3(f.get_double("rx_x", 0.5), f.get_double("rx_y", 0.5),
                               f.get_double("rx_z", 1.0));
    p.array.k_side = int(f.get_int("array_k", 4));
    p.array.wavelength = f.get_double("wavelength", 0.327);
    p.array.spacing = f.get_double("spacing", 0.5 * p.array.wavelength);
    p.tx_region_min = Vec3(f.get_double("tx_min_x", 0.0), f.get_double("tx_min_y", 0.0),
                           f.get_double("tx_min_z", 0.0));
    p.tx_region_extent = Vec3(f.get_double("tx_ext_x", 0.0), f.get_double("tx_ext_y", 0.0),
                              f.get_double("tx_ext_z", 0.0));
    p.n_train = int(f.get_int("n_train", 100));
    p.n_eval = int(f.get_int("n_eval", 25));
    p.spectrum_h = int(f.get_int("spectrum_h", 90));
    p.spectrum_w = int(f.get_int("spectrum_w", 360));
    if (p.task == TaskKind::Csi) {
        double center = f.get_double("csi_center_hz", 2.412e9);
        double step = f.get_double("csi_spacing_hz", 312500.0);
        for (int k = 0; k < 52; ++k)
            p.subcarriers_hz.push_back(center + (k - 25.5) * step);
    }
    return p;
}

inline int cmd_gen(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                   const std::string& task_override, ThreadPool* pool) {
    try {
        ConfigFile f = load_config(config_path);
        GenParams p = gen_params_from(f);
        if (!task_override.empty()) p.task = task_from_name(task_override);
        p.seed = seed;
        generate_dataset(p, out_dir, pool);
        std::cout << "wrote " << (p.n_train + p.n_eval) << " records (" << task_name(p.task)
                  << ") to " << out_dir << "\n";
        return exit_ok;
    } catch (const std::exception& e) {
        std::cerr << "gen: " << e.what() << "\n";
        return exit_validation;
    }
}

inline void write_metric_csv(const std::filesystem::path& path, const MetricReport& rep) {
    std::string metric_name = rep.task == TaskKind::Spectrum
                                  ? "ssim"
                                  : (rep.task == TaskKind::Rssi ? "abs_error_db" : "cea_db");
    std::string out = "id," + metric_name + "\n";
    for (std::size_t i = 0; i < rep.ids.size(); ++i)
        out += std::to_string(rep.ids[i]) + ',' + fmt_double(rep.values[i]) + '\n';
    out += "# summary median=" + fmt_double(rep.median()) + " p10=" + fmt_double(rep.p10()) +
           " p90=" + fmt_double(rep.p90()) + " (nearest-rank percentiles)\n";
    write_file(path, out);
}

inline int cmd_train(const std::string& dataset_dir, const std::string& config_path,
                     const std::string& out_dir, const std::string& pipeline_override,
                     const std::string& task_override, int64_t seed_override,
                     const std::string& resume_path, ThreadPool* pool) {
    TrainConfig cfg;
    Dataset ds;
    try {
        ds = load_dataset(dataset_dir);
        ConfigFile f = load_config(config_path);
        cfg = train_config_from(f);
        if (!pipeline_override.empty()) cfg.pipeline = pipeline_from_name(pipeline_override);
        if (!task_override.empty()) cfg.task = task_from_name(task_override);
        if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
        if (!f.has("task")) cfg.task = ds.manifest.task;
        cfg.validate();
        std::filesystem::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return exit_validation;
    }
    try {
        std::ofstream log(std::filesystem::path(out_dir) / "loss_log.txt");
        std::optional<Checkpoint> resume;
        if (!resume_path.empty()) resume = load_checkpoint(resume_path);
        TrainResult res = train(ds, cfg, pool, &log, resume ? &*resume : nullptr,
                                train_config_hash(cfg));
        save_checkpoint(std::filesystem::path(out_dir) / "checkpoint.bin", res.checkpoint);
        MetricReport rep = eval_checkpoint(res.checkpoint, ds, ds.manifest.train_ids, pool);
        write_metric_csv(std::filesystem::path(out_dir) / "metrics_train.csv", rep);
        std::cout << "trained " << cfg.iterations << " iterations, " << res.checkpoint.store.count()
                  << " gaussians; train median metric " << rep.median() << "\n";
        return exit_ok;
    } catch (const NumericalAbort& e) {
        std::cerr << "train: numerical abort: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return exit_validation;
    }
}

inline std::vector<Vec3> read_query_positions(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<Vec3> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_csv_line(line);
        if (cols.size() < 3) throw std::runtime_error("query row needs x,y,z");
        out.emplace_back(std::stod(cols[0]), std::stod(cols[1]), std::stod(cols[2]));
    }
    if (out.empty()) throw std::runtime_error("empty query file");
    return out;
}

// 8-bit grayscale PGM, min-max normalized.
inline void write_heatmap_pgm(const std::filesystem::path& path, const SpatialSpectrum& s,
                              double& out_min, double& out_max) {
    out_min = s.values[0];
    out_max = s.values[0];
    for (double v : s.values) {
        out_min = std::min(out_min, v);
        out_max = std::max(out_max, v);
    }
    double range = out_max - out_min;
    std::string pgm = "P5\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
    for (double v : s.values) {
        int g = range > 0.0 ? int(std::lround((v - out_min) / range * 255.0)) : 0;
        pgm.push_back(char(std::clamp(g, 0, 255)));
    }
    write_file(path, pgm);
}

inline int cmd_render(const std::string& checkpoint_path, const std::string& tx_arg,
                      const std::string& query_path, const std::string& out_dir, bool heatmap,
                      ThreadPool* pool) {
    try {
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        std::vector<Vec3> queries;
        if (!tx_arg.empty()) {
            auto cols = split_csv_line(tx_arg);
            if (cols.size() != 3) throw std::runtime_error("--tx expects x,y,z");
            queries.emplace_back(std::stod(cols[0]), std::stod(cols[1]), std::stod(cols[2]));
        } else {
            queries = read_query_positions(query_path);
        }
        std::filesystem::create_directories(out_dir);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            SpatialSpectrum s = synthesize_spectrum(ckpt, queries[i], pool);
            char name[32];
            std::snprintf(name, sizeof name, "spectrum_%05zu.f32", i);
            write_spectrum_file(std::filesystem::path(out_dir) / name, s);
            if (heatmap) {
                char pname[32];
                std::snprintf(pname, sizeof pname, "spectrum_%05zu.pgm", i);
                double lo, hi;
                write_heatmap_pgm(std::filesystem::path(out_dir) / pname, s, lo, hi);
                std::cout << name << " heatmap scale: min=" << fmt_double(lo)
                          << " max=" << fmt_double(hi) << "\n";
            }
        }
        std::cout << "rendered " << queries.size() << " spectra to " << out_dir << "\n";
        return exit_ok;
    } catch (const std::exception& e) {
        std::cerr << "render: " << e.what() << "\n";
        return exit_validation;
    }
}

inline int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
                    const std::string& split, const std::string& out_path, ThreadPool* pool) {
    try {
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        Dataset ds = load_dataset(dataset_dir);
        const auto& ids = split == "train" ? ds.manifest.train_ids : ds.manifest.eval_ids;
        MetricReport rep = eval_checkpoint(ckpt, ds, ids, pool);
        write_metric_csv(out_path, rep);
        std::cout << "split=" << split << " n=" << rep.values.size()
                  << " median=" << fmt_double(rep.median()) << " p10=" << fmt_double(rep.p10())
                  << " p90=" << fmt_double(rep.p90()) << "\n";
        return exit_ok;
    } catch (const std::exception& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return exit_validation;
    }
}

inline int cmd_predict_rssi(const std::string& checkpoint_path, const std::string& tx_arg,
                            const std::string& query_path, const std::string& out_path,
                            ThreadPool* pool) {
    try {
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        std::vector<Vec3> queries;
        if (!tx_arg.empty()) {
            auto cols = split_csv_line(tx_arg);
            if (cols.size() != 3) throw std::runtime_error("--tx expects x,y,z");
            queries.emplace_back(std::stod(cols[0]), std::stod(cols[1]), std::stod(cols[2]));
        } else {
            queries = read_query_positions(query_path);
        }
        std::string out = "tx_x,tx_y,tx_z,rssi_db\n";
        for (const Vec3& q : queries) {
            double v = predict_rssi(ckpt, q, pool);
            out += fmt_double(q.x()) + ',' + fmt_double(q.y()) + ',' + fmt_double(q.z()) + ',' +
                   fmt_double(v) + '\n';
            std::cout << "rssi(" << q.transpose() << ") = " << v << " dB\n";
        }
        if (!out_path.empty()) write_file(out_path, out);
        return exit_ok;
    } catch (const std::exception& e) {
        std::cerr << "predict-rssi: " << e.what() << "\n";
        return exit_validation;
    }
}

// Uplink rows: 52 comma-separated reals (26 x re,im).
inline int cmd_predict_csi(const std::string& checkpoint_path, const std::string& uplink_path,
                           const std::string& out_path, ThreadPool* pool) {
    try {
        Checkpoint ckpt = load_checkpoint(checkpoint_path);
        std::istringstream in(read_file(uplink_path));
        std::string line, out;
        out = "subcarrier_values\n";
        int rows = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto cols = split_csv_line(line);
            if (cols.size() != 2 * csi_subcarriers_half)
                throw std::runtime_error("uplink row needs 52 values (26 x re,im)");
            std::vector<ComplexSample> up(csi_subcarriers_half);
            for (int s = 0; s < csi_subcarriers_half; ++s)
                up[s] = {std::stod(cols[2 * s]), std::stod(cols[2 * s + 1])};
            auto down = predict_csi(ckpt, up, pool);
            std::string row;
            for (const auto& z : down) {
                row += ',' + fmt_double(z.re);
                row += ',' + fmt_double(z.im);
            }
            out += row.substr(1) + '\n';
            ++rows;
        }
        if (rows == 0) throw std::runtime_error("empty uplink file");
        if (!out_path.empty()) write_file(out_path, out);
        std::cout << "predicted downlink CSI for " << rows << " uplink rows\n";
        return exit_ok;
    } catch (const std::exception& e) {
        std::cerr << "predict-csi: " << e.what() << "\n";
        return exit_validation;
    }
}

}  // namespace wrfgs
