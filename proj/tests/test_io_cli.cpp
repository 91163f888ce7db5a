// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wrfgs/cli.hpp"
#include "wrfgs/wrfgs.hpp"

using namespace wrfgs;
namespace fsys = std::filesystem;

namespace {

fsys::path fresh_dir(const std::string& name) {
    fsys::path dir = fsys::temp_directory_path() / name;
    fsys::remove_all(dir);
    fsys::create_directories(dir);
    return dir;
}

GenParams small_gen(TaskKind task, uint64_t seed) {
    GenParams p;
    p.task = task;
    p.scene.room_extent = Vec3(6, 4, 3);
    p.scene.rx_position = Vec3(0.8, 0.7, 1.0);
    p.scene.max_reflection_order = 1;
    p.scene.set_uniform_reflection({-0.5, 0.0});
    p.array.k_side = 4;
    p.array.wavelength = 0.327;
    p.array.spacing = 0.5 * 0.327;
    p.tx_region_min = Vec3(2.0, 1.0, 0.8);
    p.tx_region_extent = Vec3(1.6, 1.6, 1.2);
    p.n_train = 4;
    p.n_eval = 2;
    p.seed = seed;
    p.spectrum_h = 24;
    p.spectrum_w = 48;
    if (task == TaskKind::Csi)
        for (int k = 0; k < 52; ++k) p.subcarriers_hz.push_back(2.412e9 + (k - 25.5) * 312500.0);
    return p;
}

std::string dir_digest(const fsys::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fsys::directory_iterator(dir)) names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    std::string acc;
    for (const auto& n : names) acc += n + "=" + fnv1a64_hex(read_file(dir / n)) + ";";
    return acc;
}

}  // namespace

TEST_CASE("spectrum file: bit-exact round trip") {
    SpatialSpectrum s{7, 13};
    Rng rng(1);
    for (auto& v : s.values) v = float(rng.uniform01());  // f32-representable
    std::string blob = encode_spectrum(s);
    SpatialSpectrum back = decode_spectrum(blob);
    CHECK(back.h == 7);
    CHECK(back.w == 13);
    CHECK(back.values == s.values);
    CHECK(encode_spectrum(back) == blob);
    CHECK_THROWS(decode_spectrum(blob.substr(0, 20)));
}

TEST_CASE("dataset: generate, reload, verify, determinism") {
    for (TaskKind task : {TaskKind::Spectrum, TaskKind::Rssi, TaskKind::Csi}) {
        auto dir = fresh_dir("wrfgs_ds_" + task_name(task));
        generate_dataset(small_gen(task, 42), dir);
        Dataset ds = load_dataset(dir);
        CHECK(ds.manifest.task == task);
        CHECK(ds.manifest.record_count == 6);
        CHECK(ds.manifest.train_ids.size() == 4);
        CHECK(ds.manifest.eval_ids.size() == 2);
        for (const auto& r : ds.records) {
            CHECK(ds.manifest.scene.inside_room(r.tx));
            if (task == TaskKind::Spectrum) {
                CHECK(r.spectrum.h == 24);
                for (double v : r.spectrum.values) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0 + 1e-6);
                }
            } else if (task == TaskKind::Csi) {
                CHECK(r.uplink.size() == 26);
                CHECK(r.downlink.size() == 26);
            }
        }
        // identical seed -> identical directory bytes
        auto dir2 = fresh_dir("wrfgs_ds2_" + task_name(task));
        generate_dataset(small_gen(task, 42), dir2);
        CHECK(dir_digest(dir) == dir_digest(dir2));
    }
}

TEST_CASE("dataset: hash mismatch is rejected") {
    auto dir = fresh_dir("wrfgs_ds_corrupt");
    generate_dataset(small_gen(TaskKind::Rssi, 7), dir);
    {
        std::ofstream f(dir / "index.csv", std::ios::app);
        f << "tampered\n";
    }
    CHECK_THROWS(load_dataset(dir));
}

TEST_CASE("checkpoint: byte-exact round trip for both pipelines") {
    for (Pipeline p : {Pipeline::WrfGs, Pipeline::WrfGsPlus}) {
        Checkpoint c;
        c.task = TaskKind::Spectrum;
        c.canvas_h = 24;
        c.canvas_w = 48;
        c.rx.position = Vec3(1, 2, 0.5);
        c.eta = 0.2;
        c.config_hash = 0xdeadbeef12345678ull;
        c.store = init_random(Vec3::Zero(), Vec3(6, 4, 3), 16, 5, p, TaskKind::Spectrum,
                              ConditioningKind::TxPosition);
        c.store.step_count = 321;
        std::string a = encode_checkpoint(c);
        Checkpoint back = decode_checkpoint(a);
        CHECK(back.store.count() == 16);
        CHECK(back.store.step_count == 321);
        CHECK(back.config_hash == c.config_hash);
        CHECK(encode_checkpoint(back) == a);
    }
}

TEST_CASE("config: parsing, validation errors with line numbers, unknown keys") {
    ConfigFile f = parse_config_text("pipeline = wrfgs\niterations = 50 # comment\n", "t.cfg");
    TrainConfig cfg = train_config_from(f);
    CHECK(cfg.pipeline == Pipeline::WrfGs);
    CHECK(cfg.iterations == 50);

    ConfigFile bad = parse_config_text("\n\neta = 1.5\n", "bad.cfg");
    try {
        train_config_from(bad);
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("eta") != std::string::npos);
    }

    ConfigFile typo = parse_config_text("iteration = 50\n", "typo.cfg");
    try {
        train_config_from(typo);
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("typo.cfg:1") != std::string::npos);
    }

    CHECK_THROWS(parse_config_text("no equals sign\n", "x.cfg"));
}

TEST_CASE("cli: gen + train + render + eval round trip") {
    auto ds_dir = fresh_dir("wrfgs_cli_ds");
    auto out_dir = fresh_dir("wrfgs_cli_out");
    auto cfg_dir = fresh_dir("wrfgs_cli_cfg");
    ThreadPool pool(2);

    // scene config for gen
    write_file(cfg_dir / "scene.cfg",
               "task = spectrum\nroom_x = 6\nroom_y = 4\nroom_z = 3\n"
               "reflection_re = -0.5\nreflection_order = 1\n"
               "rx_x = 0.8\nrx_y = 0.7\nrx_z = 1.0\n"
               "wavelength = 0.327\n"
               "tx_min_x = 2.0\ntx_min_y = 1.0\ntx_min_z = 0.8\n"
               "tx_ext_x = 1.6\ntx_ext_y = 1.6\ntx_ext_z = 1.2\n"
               "n_train = 4\nn_eval = 2\nspectrum_h = 24\nspectrum_w = 48\n");
    CHECK(cmd_gen((cfg_dir / "scene.cfg").string(), ds_dir.string(), 42, "", &pool) == exit_ok);

    write_file(cfg_dir / "train.cfg",
               "pipeline = wrfgsplus\ntask = spectrum\niterations = 25\nn_init = 24\n"
               "canvas_h = 24\ncanvas_w = 48\ndensify_warmup = 1000\nseed = 3\n");
    std::string ds_before = dir_digest(ds_dir);
    CHECK(cmd_train(ds_dir.string(), (cfg_dir / "train.cfg").string(), out_dir.string(), "", "",
                    -1, "", &pool) == exit_ok);
    CHECK(fsys::exists(out_dir / "checkpoint.bin"));
    CHECK(fsys::exists(out_dir / "loss_log.txt"));
    CHECK(fsys::exists(out_dir / "metrics_train.csv"));
    CHECK(dir_digest(ds_dir) == ds_before);  // train never mutates the dataset

    // render a single TX and a query file, with heatmaps
    auto render_dir = fresh_dir("wrfgs_cli_render");
    CHECK(cmd_render((out_dir / "checkpoint.bin").string(), "2.4,1.8,1.2", "",
                     render_dir.string(), true, &pool) == exit_ok);
    CHECK(fsys::exists(render_dir / "spectrum_00000.f32"));
    CHECK(fsys::exists(render_dir / "spectrum_00000.pgm"));

    write_file(cfg_dir / "query.csv", "2.4,1.8,1.2\n2.6,2.0,1.0\n3.0,1.5,1.4\n");
    auto render_dir2 = fresh_dir("wrfgs_cli_render2");
    CHECK(cmd_render((out_dir / "checkpoint.bin").string(), "", (cfg_dir / "query.csv").string(),
                     render_dir2.string(), false, &pool) == exit_ok);
    CHECK(fsys::exists(render_dir2 / "spectrum_00002.f32"));

    // heatmap argmax pixel equals spectrum argmax bin
    SpatialSpectrum s = read_spectrum_file(render_dir / "spectrum_00000.f32");
    std::string pgm = read_file(render_dir / "spectrum_00000.pgm");
    std::size_t header_end = pgm.find("255\n") + 4;
    auto [pr, pc] = s.argmax();
    int best = -1;
    std::size_t best_i = 0;
    for (std::size_t i = header_end; i < pgm.size(); ++i)
        if (int(uint8_t(pgm[i])) > best) {
            best = int(uint8_t(pgm[i]));
            best_i = i - header_end;
        }
    CHECK(int(best_i) == pr * s.w + pc);

    // eval on the train split reproduces the metrics written by train
    auto eval_csv = out_dir / "eval_train.csv";
    CHECK(cmd_eval((out_dir / "checkpoint.bin").string(), ds_dir.string(), "train",
                   eval_csv.string(), &pool) == exit_ok);
    CHECK(read_file(eval_csv) == read_file(out_dir / "metrics_train.csv"));

    // idempotence: re-running eval produces identical bytes
    auto eval_csv2 = out_dir / "eval_train2.csv";
    CHECK(cmd_eval((out_dir / "checkpoint.bin").string(), ds_dir.string(), "train",
                   eval_csv2.string(), &pool) == exit_ok);
    CHECK(read_file(eval_csv) == read_file(eval_csv2));

    // the eval split works and writes a summary line
    auto eval_csv3 = out_dir / "eval_eval.csv";
    CHECK(cmd_eval((out_dir / "checkpoint.bin").string(), ds_dir.string(), "eval",
                   eval_csv3.string(), &pool) == exit_ok);
    CHECK(read_file(eval_csv3).find("# summary median=") != std::string::npos);
}

TEST_CASE("cli: validation failures use exit code 2") {
    ThreadPool pool(1);
    CHECK(cmd_train("/nonexistent_dataset", "/nonexistent.cfg", "/tmp/wrfgs_never", "", "", -1, "",
                    &pool) == exit_validation);
    auto cfg_dir = fresh_dir("wrfgs_cli_badcfg");
    write_file(cfg_dir / "bad.cfg", "eta = 1.5\n");
    auto ds_dir = fresh_dir("wrfgs_cli_ds_rssi");
    generate_dataset(small_gen(TaskKind::Rssi, 9), ds_dir);
    CHECK(cmd_train(ds_dir.string(), (cfg_dir / "bad.cfg").string(), "/tmp/wrfgs_never", "", "",
                    -1, "", &pool) == exit_validation);
}

TEST_CASE("cli: rssi and csi prediction commands") {
    ThreadPool pool(2);
    auto cfg_dir = fresh_dir("wrfgs_cli_predcfg");

    // rssi
    auto rssi_ds = fresh_dir("wrfgs_cli_rssi_ds");
    generate_dataset(small_gen(TaskKind::Rssi, 10), rssi_ds);
    auto rssi_out = fresh_dir("wrfgs_cli_rssi_out");
    write_file(cfg_dir / "rssi.cfg",
               "pipeline = wrfgsplus\ntask = rssi\niterations = 15\nn_init = 24\n"
               "canvas_h = 12\ncanvas_w = 24\ndensify_warmup = 1000\nseed = 3\n");
    CHECK(cmd_train(rssi_ds.string(), (cfg_dir / "rssi.cfg").string(), rssi_out.string(), "", "",
                    -1, "", &pool) == exit_ok);
    auto rssi_csv = rssi_out / "pred.csv";
    CHECK(cmd_predict_rssi((rssi_out / "checkpoint.bin").string(), "2.4,1.8,1.2", "",
                           rssi_csv.string(), &pool) == exit_ok);
    CHECK(read_file(rssi_csv).find("rssi_db") != std::string::npos);

    // csi
    auto csi_ds = fresh_dir("wrfgs_cli_csi_ds");
    generate_dataset(small_gen(TaskKind::Csi, 11), csi_ds);
    auto csi_out = fresh_dir("wrfgs_cli_csi_out");
    write_file(cfg_dir / "csi.cfg",
               "pipeline = wrfgsplus\ntask = csi\niterations = 15\nn_init = 24\n"
               "densify_warmup = 1000\nseed = 3\n");
    CHECK(cmd_train(csi_ds.string(), (cfg_dir / "csi.cfg").string(), csi_out.string(), "", "", -1,
                    "", &pool) == exit_ok);
    Dataset csi = load_dataset(csi_ds);
    std::string uplink_row;
    for (const auto& z : csi.records[0].uplink) {
        uplink_row += fmt_double(z.re) + ',';
        uplink_row += fmt_double(z.im) + ',';
    }
    uplink_row.back() = '\n';
    write_file(cfg_dir / "uplink.csv", uplink_row);
    auto csi_csv = csi_out / "pred.csv";
    CHECK(cmd_predict_csi((csi_out / "checkpoint.bin").string(), (cfg_dir / "uplink.csv").string(),
                          csi_csv.string(), &pool) == exit_ok);
    auto lines = read_file(csi_csv);
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);  // header + one row
}
