// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "wrfgs/io.hpp"
#include "wrfgs/oracle.hpp"
#include "wrfgs/rng.hpp"
#include "wrfgs/scene.hpp"

namespace wrfgs {

namespace fs = std::filesystem;

struct DatasetRecord {
    int id = 0;
    Vec3 tx = Vec3::Zero();
    SpatialSpectrum spectrum;               // Spectrum task
    double rssi = 0.0;                      // Rssi task
    std::vector<ComplexSample> uplink;      // Csi task, 26 entries
    std::vector<ComplexSample> downlink;    // Csi task, 26 entries
};

struct DatasetManifest {
    int version = 1;
    TaskKind task = TaskKind::Spectrum;
    MultipathScene scene;
    ArrayGeometry array;
    Vec3 tx_region_min = Vec3::Zero();
    Vec3 tx_region_extent = Vec3::Zero();
    int spectrum_h = 90, spectrum_w = 360;
    std::vector<double> subcarriers_hz;
    double csi_scale = 1.0;
    int record_count = 0;
    uint64_t split_seed = 0;
    std::vector<int> train_ids, eval_ids;
    std::vector<std::pair<std::string, std::string>> files;  // name, fnv1a hex
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<DatasetRecord> records;  // indexed by record id

    const DatasetRecord& record(int id) const { return records.at(std::size_t(id)); }
};

inline std::string task_name(TaskKind k) {
    switch (k) {
        case TaskKind::Spectrum: return "spectrum";
        case TaskKind::Rssi: return "rssi";
        default: return "csi";
    }
}

inline TaskKind task_from_name(const std::string& s) {
    if (s == "spectrum") return TaskKind::Spectrum;
    if (s == "rssi") return TaskKind::Rssi;
    if (s == "csi") return TaskKind::Csi;
    throw std::runtime_error("unknown task: " + s);
}

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 vec3_from(const nlohmann::json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }
inline nlohmann::json vec4_json(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
inline Vec4 vec4_from(const nlohmann::json& j) { return Vec4(j.at(0), j.at(1), j.at(2), j.at(3)); }

}  // namespace detail

inline std::string manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["version"] = m.version;
    j["task"] = task_name(m.task);
    j["scene"]["room_extent"] = detail::vec3_json(m.scene.room_extent);
    nlohmann::json walls = nlohmann::json::array();
    for (const auto& g : m.scene.reflection_coeff) walls.push_back({g.re, g.im});
    j["scene"]["reflection_coeff"] = walls;
    j["scene"]["max_reflection_order"] = m.scene.max_reflection_order;
    j["scene"]["rx_position"] = detail::vec3_json(m.scene.rx_position);
    j["scene"]["rx_orientation"] = detail::vec4_json(m.scene.rx_orientation);
    j["array"] = {{"k_side", m.array.k_side},
                  {"spacing", m.array.spacing},
                  {"wavelength", m.array.wavelength}};
    j["tx_region_min"] = detail::vec3_json(m.tx_region_min);
    j["tx_region_extent"] = detail::vec3_json(m.tx_region_extent);
    j["spectrum_h"] = m.spectrum_h;
    j["spectrum_w"] = m.spectrum_w;
    j["subcarriers_hz"] = m.subcarriers_hz;
    j["csi_scale"] = m.csi_scale;
    j["record_count"] = m.record_count;
    j["split_seed"] = m.split_seed;
    j["train_ids"] = m.train_ids;
    j["eval_ids"] = m.eval_ids;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, hash] : m.files) files.push_back({{"name", name}, {"hash", hash}});
    j["files"] = files;
    return j.dump(2) + "\n";
}

inline DatasetManifest manifest_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DatasetManifest m;
    m.version = j.at("version");
    if (m.version != 1) throw std::runtime_error("unsupported dataset version");
    m.task = task_from_name(j.at("task"));
    m.scene.room_extent = detail::vec3_from(j.at("scene").at("room_extent"));
    auto walls = j.at("scene").at("reflection_coeff");
    for (int i = 0; i < 6; ++i)
        m.scene.reflection_coeff[i] = {walls.at(i).at(0), walls.at(i).at(1)};
    m.scene.max_reflection_order = j.at("scene").at("max_reflection_order");
    m.scene.rx_position = detail::vec3_from(j.at("scene").at("rx_position"));
    m.scene.rx_orientation = detail::vec4_from(j.at("scene").at("rx_orientation"));
    m.array.k_side = j.at("array").at("k_side");
    m.array.spacing = j.at("array").at("spacing");
    m.array.wavelength = j.at("array").at("wavelength");
    m.tx_region_min = detail::vec3_from(j.at("tx_region_min"));
    m.tx_region_extent = detail::vec3_from(j.at("tx_region_extent"));
    m.spectrum_h = j.at("spectrum_h");
    m.spectrum_w = j.at("spectrum_w");
    m.subcarriers_hz = j.at("subcarriers_hz").get<std::vector<double>>();
    m.csi_scale = j.at("csi_scale");
    m.record_count = j.at("record_count");
    m.split_seed = j.at("split_seed");
    m.train_ids = j.at("train_ids").get<std::vector<int>>();
    m.eval_ids = j.at("eval_ids").get<std::vector<int>>();
    for (const auto& f : j.at("files"))
        m.files.emplace_back(f.at("name").get<std::string>(), f.at("hash").get<std::string>());
    return m;
}

struct GenParams {
    TaskKind task = TaskKind::Spectrum;
    MultipathScene scene;
    ArrayGeometry array;
    Vec3 tx_region_min = Vec3::Zero();      // zero extent => room interior with margin
    Vec3 tx_region_extent = Vec3::Zero();
    int n_train = 0, n_eval = 0;
    uint64_t seed = 1;
    int spectrum_h = 90, spectrum_w = 360;
    std::vector<double> subcarriers_hz;     // Csi task
    double jitter = 0.45;                   // fraction of a grid cell
    double min_rx_distance = 0.25;          // meters
};

// TX positions on a jittered grid inside the requested region, in a seeded
// shuffled order. Deterministic in (params, seed).
inline std::vector<Vec3> jittered_grid_positions(const GenParams& p) {
    Vec3 lo = p.tx_region_min, ext = p.tx_region_extent;
    if (ext.minCoeff() <= 0.0) {
        lo = Vec3::Constant(0.2);
        ext = p.scene.room_extent - Vec3::Constant(0.4);
    }
    const int total = p.n_train + p.n_eval;
    double cell = std::cbrt(ext.prod() / std::max(1, total));
    int nx[3];
    for (int a = 0; a < 3; ++a) nx[a] = std::max(1, int(std::ceil(ext[a] / cell)));
    while (int64_t(nx[0]) * nx[1] * nx[2] < total) {
        int big = 0;
        for (int a = 1; a < 3; ++a)
            if (ext[a] / nx[a] > ext[big] / nx[big]) big = a;
        ++nx[big];
    }
    std::vector<Vec3> cells;
    cells.reserve(std::size_t(nx[0]) * nx[1] * nx[2]);
    for (int i = 0; i < nx[0]; ++i)
        for (int j = 0; j < nx[1]; ++j)
            for (int k = 0; k < nx[2]; ++k)
                cells.emplace_back(lo.x() + (i + 0.5) * ext.x() / nx[0],
                                   lo.y() + (j + 0.5) * ext.y() / nx[1],
                                   lo.z() + (k + 0.5) * ext.z() / nx[2]);
    Rng shuffle_rng = derive_rng(p.seed, "gen-shuffle");
    for (std::size_t i = cells.size(); i > 1; --i)
        std::swap(cells[i - 1], cells[shuffle_rng.uniform_index(i)]);

    Rng jitter_rng = derive_rng(p.seed, "gen-jitter");
    Vec3 half(0.5 * p.jitter * ext.x() / nx[0], 0.5 * p.jitter * ext.y() / nx[1],
              0.5 * p.jitter * ext.z() / nx[2]);
    std::vector<Vec3> out;
    for (const Vec3& c : cells) {
        if (int(out.size()) >= total) break;
        Vec3 t = c + Vec3(jitter_rng.uniform(-half.x(), half.x()),
                          jitter_rng.uniform(-half.y(), half.y()),
                          jitter_rng.uniform(-half.z(), half.z()));
        if (!p.scene.inside_room(t)) continue;
        if ((t - p.scene.rx_position).norm() < p.min_rx_distance) continue;
        out.push_back(t);
    }
    if (int(out.size()) < total)
        throw std::runtime_error("jittered_grid_positions: region too small for requested count");
    return out;
}

// Writes records + manifest into `dir`. Record targets come from the oracle.
inline void generate_dataset(const GenParams& p, const fs::path& dir, ThreadPool* pool = nullptr) {
    p.scene.validate();
    if (p.task != TaskKind::Rssi) p.array.validate();
    if (p.n_train <= 0 || p.n_eval < 0) throw std::runtime_error("generate_dataset: bad counts");
    if (p.task == TaskKind::Csi && p.subcarriers_hz.size() != 52)
        throw std::runtime_error("generate_dataset: csi needs 52 subcarriers");
    fs::create_directories(dir);

    auto positions = jittered_grid_positions(p);
    const int total = p.n_train + p.n_eval;

    DatasetManifest m;
    m.task = p.task;
    m.scene = p.scene;
    m.array = p.array;
    m.tx_region_min = p.tx_region_min;
    m.tx_region_extent = p.tx_region_extent;
    m.spectrum_h = p.spectrum_h;
    m.spectrum_w = p.spectrum_w;
    m.subcarriers_hz = p.subcarriers_hz;
    m.record_count = total;
    m.split_seed = p.seed;
    for (int i = 0; i < total; ++i)
        (i < p.n_train ? m.train_ids : m.eval_ids).push_back(i);

    std::string index;
    index += "id,tx_x,tx_y,tx_z,target\n";
    double csi_sq_sum = 0.0;
    std::size_t csi_sq_n = 0;

    for (int i = 0; i < total; ++i) {
        const Vec3& tx = positions[i];
        std::string target;
        if (p.task == TaskKind::Spectrum) {
            SpatialSpectrum s =
                ground_truth_spectrum(p.scene, p.array, tx, p.spectrum_h, p.spectrum_w, pool);
            char name[32];
            std::snprintf(name, sizeof name, "spec_%05d.f32", i);
            std::string blob = encode_spectrum(s);
            write_file(dir / name, blob);
            m.files.emplace_back(name, fnv1a64_hex(blob));
            target = name;
        } else if (p.task == TaskKind::Rssi) {
            target = fmt_double(ground_truth_rssi(p.scene, tx, p.array.wavelength));
        } else {
            auto h = ground_truth_csi(p.scene, tx, p.subcarriers_hz);
            std::string row;
            for (const auto& z : h) {
                row += ',' + fmt_double(z.re);
                row += ',' + fmt_double(z.im);
            }
            target = row.substr(1);
            if (i < p.n_train) {
                for (int s = 0; s < csi_subcarriers_half; ++s) {
                    csi_sq_sum += h[s].abs2();
                    csi_sq_n += 2;
                }
            }
        }
        index += std::to_string(i) + ',' + fmt_double(tx.x()) + ',' + fmt_double(tx.y()) + ',' +
                 fmt_double(tx.z()) + ',' + target + '\n';
    }
    if (p.task == TaskKind::Csi && csi_sq_sum > 0.0)
        m.csi_scale = 1.0 / std::sqrt(csi_sq_sum / double(csi_sq_n));

    write_file(dir / "index.csv", index);
    m.files.emplace_back("index.csv", fnv1a64_hex(index));
    write_file(dir / "manifest.json", manifest_to_json(m));
}

inline Dataset load_dataset(const fs::path& dir) {
    Dataset d;
    d.manifest = manifest_from_json(read_file(dir / "manifest.json"));
    for (const auto& [name, hash] : d.manifest.files) {
        std::string blob = read_file(dir / name);
        if (fnv1a64_hex(blob) != hash)
            throw std::runtime_error("dataset hash mismatch for " + name);
    }
    std::string index = read_file(dir / "index.csv");
    std::istringstream in(index);
    std::string line;
    std::getline(in, line);  // header
    d.records.resize(d.manifest.record_count);
    int seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        DatasetRecord r;
        r.id = std::stoi(cols.at(0));
        r.tx = Vec3(std::stod(cols.at(1)), std::stod(cols.at(2)), std::stod(cols.at(3)));
        if (d.manifest.task == TaskKind::Spectrum) {
            r.spectrum = read_spectrum_file(dir / cols.at(4));
        } else if (d.manifest.task == TaskKind::Rssi) {
            r.rssi = std::stod(cols.at(4));
        } else {
            if (cols.size() != 4 + 104) throw std::runtime_error("bad csi row");
            for (int s = 0; s < 52; ++s) {
                ComplexSample z{std::stod(cols[4 + 2 * s]), std::stod(cols[4 + 2 * s + 1])};
                (s < csi_subcarriers_half ? r.uplink : r.downlink).push_back(z);
            }
        }
        d.records.at(std::size_t(r.id)) = std::move(r);
        ++seen;
    }
    if (seen != d.manifest.record_count) throw std::runtime_error("dataset record count mismatch");
    return d;
}

}  // namespace wrfgs
