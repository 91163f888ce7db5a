// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cstdlib>
#include <memory>
#include <thread>

#include "wrfgs/cli.hpp"

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("WRFGS_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? int(hc) : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wrfgs: wireless radiation field reconstruction with complex-valued "
                 "3D Gaussian splatting"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: WRFGS_THREADS or hardware)");

    std::string dataset, config, checkpoint, out, tx, query, pipeline, task, split = "eval",
                                                                             resume, uplink;
    int64_t seed = -1;
    bool heatmap = false;

    auto* gen = app.add_subcommand("gen", "generate a synthetic oracle dataset");
    gen->add_option("--config", config, "scene/generation config file")->required();
    gen->add_option("--out", out, "output dataset directory")->required();
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--task", task, "spectrum|rssi|csi (overrides config)");

    auto* tr = app.add_subcommand("train", "train a field on a dataset");
    tr->add_option("--dataset", dataset, "dataset directory")->required();
    tr->add_option("--config", config, "training config file")->required();
    tr->add_option("--out", out, "output directory")->required();
    tr->add_option("--pipeline", pipeline, "wrfgs|wrfgsplus (overrides config)");
    tr->add_option("--task", task, "spectrum|rssi|csi (overrides config)");
    tr->add_option("--seed", seed, "seed (overrides config)");
    tr->add_option("--resume", resume, "checkpoint to resume from");

    auto* re = app.add_subcommand("render", "synthesize spectra from a checkpoint");
    re->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    re->add_option("--tx", tx, "single TX position x,y,z");
    re->add_option("--query", query, "CSV of TX positions");
    re->add_option("--out", out, "output directory")->required();
    re->add_flag("--heatmap", heatmap, "also write 8-bit PGM heatmaps");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--dataset", dataset, "dataset directory")->required();
    ev->add_option("--split", split, "train|eval (default eval)");
    ev->add_option("--out", out, "metric CSV path")->required();

    auto* pr = app.add_subcommand("predict-rssi", "predict RSSI at TX positions");
    pr->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    pr->add_option("--tx", tx, "single TX position x,y,z");
    pr->add_option("--query", query, "CSV of TX positions");
    pr->add_option("--out", out, "output CSV path");

    auto* pc = app.add_subcommand("predict-csi", "predict downlink CSI from uplink rows");
    pc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    pc->add_option("--uplink", uplink, "CSV of uplink rows (52 reals each)")->required();
    pc->add_option("--out", out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    wrfgs::ThreadPool pool(resolve_threads(threads));

    if (gen->parsed())
        return wrfgs::cmd_gen(config, out, seed >= 0 ? uint64_t(seed) : 1, task, &pool);
    if (tr->parsed())
        return wrfgs::cmd_train(dataset, config, out, pipeline, task, seed, resume, &pool);
    if (re->parsed()) {
        if (tx.empty() == query.empty()) {
            std::cerr << "render: provide exactly one of --tx / --query\n";
            return wrfgs::exit_validation;
        }
        return wrfgs::cmd_render(checkpoint, tx, query, out, heatmap, &pool);
    }
    if (ev->parsed()) {
        if (split != "train" && split != "eval") {
            std::cerr << "eval: --split must be train or eval\n";
            return wrfgs::exit_validation;
        }
        return wrfgs::cmd_eval(checkpoint, dataset, split, out, &pool);
    }
    if (pr->parsed()) {
        if (tx.empty() == query.empty()) {
            std::cerr << "predict-rssi: provide exactly one of --tx / --query\n";
            return wrfgs::exit_validation;
        }
        return wrfgs::cmd_predict_rssi(checkpoint, tx, query, out, &pool);
    }
    if (pc->parsed()) return wrfgs::cmd_predict_csi(checkpoint, uplink, out, &pool);
    return wrfgs::exit_validation;
}
