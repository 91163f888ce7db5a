// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>

#include "wrfgs/checkpoint.hpp"
#include "wrfgs/cli.hpp"
#include "wrfgs/ssim.hpp"
#include "wrfgs/train.hpp"

using namespace wrfgs;

namespace {

std::vector<double> structured_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> img(std::size_t(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img[std::size_t(y) * w + x] =
                0.5 + 0.4 * std::sin(0.3 * x) * std::cos(0.41 * y) + 0.05 * rng.uniform01();
    return img;
}

Dataset tiny_spectrum_dataset(const std::filesystem::path& dir, int n_train = 3, int n_eval = 2,
                              uint64_t seed = 5) {
    GenParams p;
    p.task = TaskKind::Spectrum;
    p.scene.room_extent = Vec3(6, 4, 3);
    p.scene.rx_position = Vec3(0.8, 0.7, 1.0);
    p.scene.max_reflection_order = 1;
    p.scene.set_uniform_reflection({-0.5, 0.0});
    p.array.k_side = 4;
    p.array.wavelength = 0.327;
    p.array.spacing = 0.5 * 0.327;
    p.tx_region_min = Vec3(2.0, 1.0, 0.8);
    p.tx_region_extent = Vec3(1.5, 1.5, 1.2);
    p.n_train = n_train;
    p.n_eval = n_eval;
    p.seed = seed;
    p.spectrum_h = 24;
    p.spectrum_w = 48;
    generate_dataset(p, dir);
    return load_dataset(dir);
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.task = TaskKind::Spectrum;
    cfg.pipeline = Pipeline::WrfGsPlus;
    cfg.canvas_h = 24;
    cfg.canvas_w = 48;
    cfg.n_init = 24;
    cfg.iterations = 40;
    cfg.densify_warmup = 1000;  // no densify in the smoke runs
    cfg.log_interval = 10;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("ssim: self-similarity, structure loss, symmetry") {
    auto x = structured_image(24, 48, 1);
    CHECK(ssim(x, x, 24, 48) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> flat(x.size(), 0.6);
    CHECK(ssim(x, flat, 24, 48) < 1.0);

    auto y = structured_image(24, 48, 2);
    CHECK(ssim(x, y, 24, 48) == doctest::Approx(ssim(y, x, 24, 48)).epsilon(1e-12));
}

TEST_CASE("ssim gradient matches finite differences") {
    const int h = 12, w = 20;
    auto a = structured_image(h, w, 3);
    auto b = structured_image(h, w, 4);
    SsimCache cache;
    ssim(a, b, h, w, &cache);
    std::vector<double> d_b(a.size(), 0.0);
    ssim_backward(cache, 1.0, d_b);

    Rng rng(7);
    const double eps = 1e-6;
    for (int t = 0; t < 40; ++t) {
        std::size_t i = rng.uniform_index(b.size());
        double orig = b[i];
        b[i] = orig + eps;
        double lp = ssim(a, b, h, w);
        b[i] = orig - eps;
        double lm = ssim(a, b, h, w);
        b[i] = orig;
        double fd = (lp - lm) / (2 * eps);
        CHECK(d_b[i] == doctest::Approx(fd).epsilon(2e-4).scale(1e-6));
    }
}

TEST_CASE("ssim gradient includes the dynamic-range dependence on max(pred)") {
    const int h = 10, w = 16;
    auto a = structured_image(h, w, 5);
    auto b = structured_image(h, w, 6);
    // make pred own the global max so Lr = max(b)
    std::size_t peak = 37;
    b[peak] = 3.0;
    SsimCache cache;
    ssim(a, b, h, w, &cache);
    REQUIRE(cache.lr_from_b);
    std::vector<double> d_b(a.size(), 0.0);
    ssim_backward(cache, 1.0, d_b);
    const double eps = 1e-6;
    double orig = b[peak];
    b[peak] = orig + eps;
    double lp = ssim(a, b, h, w);
    b[peak] = orig - eps;
    double lm = ssim(a, b, h, w);
    b[peak] = orig;
    double fd = (lp - lm) / (2 * eps);
    CHECK(d_b[peak] == doctest::Approx(fd).epsilon(1e-4).scale(1e-8));
}

TEST_CASE("loss: exact zero at equality, pure L1 at eta=0, constants case") {
    const int h = 8, w = 16;
    auto gt = structured_image(h, w, 9);
    SsimCache cache;
    std::vector<double> d;
    LossParts eq = spectrum_loss(gt, gt, h, w, 0.2, cache, d);
    CHECK(eq.total == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<double> pred(gt.size(), 0.25);
    LossParts l1only = spectrum_loss(pred, gt, h, w, 0.0, cache, d);
    double manual = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) manual += std::abs(gt[i] - pred[i]);
    CHECK(l1only.total == doctest::Approx(manual / double(gt.size())).epsilon(1e-12));

    // eta = 0.2, gt = ones, pred = zeros; Lr = 1, ssim = C1/(1+C1) per pixel
    std::vector<double> ones(gt.size(), 1.0), zeros(gt.size(), 0.0);
    LossParts c = spectrum_loss(zeros, ones, h, w, 0.2, cache, d);
    double c1 = 1e-4;
    double expect = 0.8 * 1.0 + 0.2 * (1.0 - c1 / (1.0 + c1));
    CHECK(c.total == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("loss gradient matches finite differences") {
    const int h = 10, w = 16;
    auto gt = structured_image(h, w, 11);
    auto pred = structured_image(h, w, 12);
    SsimCache cache;
    std::vector<double> d_pred;
    spectrum_loss(pred, gt, h, w, 0.2, cache, d_pred);
    Rng rng(13);
    const double eps = 1e-6;
    for (int t = 0; t < 30; ++t) {
        std::size_t i = rng.uniform_index(pred.size());
        double orig = pred[i];
        SsimCache c2;
        std::vector<double> dd;
        pred[i] = orig + eps;
        double lp = spectrum_loss(pred, gt, h, w, 0.2, c2, dd).total;
        pred[i] = orig - eps;
        double lm = spectrum_loss(pred, gt, h, w, 0.2, c2, dd).total;
        pred[i] = orig;
        double fd = (lp - lm) / (2 * eps);
        CHECK(d_pred[i] == doctest::Approx(fd).epsilon(2e-4).scale(1e-6));
    }
}

TEST_CASE("loss: identical cyclic shifts cancel, pred-only shifts hurt") {
    const int h = 16, w = 32;
    auto gt = structured_image(h, w, 21);
    auto pred = structured_image(h, w, 22);
    auto roll = [&](const std::vector<double>& img, int shift) {
        std::vector<double> out(img.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out[std::size_t(y) * w + x] = img[std::size_t(y) * w + (x + shift) % w];
        return out;
    };
    SsimCache cache;
    std::vector<double> d;
    double base = spectrum_loss(pred, gt, h, w, 0.2, cache, d).total;
    double both = spectrum_loss(roll(pred, 7), roll(gt, 7), h, w, 0.2, cache, d).total;
    CHECK(both == doctest::Approx(base).epsilon(1e-12));
    double only_pred = spectrum_loss(roll(pred, 7), gt, h, w, 0.2, cache, d).total;
    CHECK(only_pred > base);
}

TEST_CASE("adam: zero gradients leave parameters unchanged; steps bounded by lr") {
    ParamStore s = init_random(Vec3::Zero(), Vec3::Ones(), 16, 3, Pipeline::WrfGsPlus,
                               TaskKind::Spectrum, ConditioningKind::TxPosition);
    TrainConfig cfg = tiny_train_config();
    cfg.iterations = 1000;
    Checkpoint before{1, TaskKind::Spectrum, ConditioningKind::TxPosition, 24, 48,
                      RxPose{},          0.2,
                      0,                 s};
    std::string before_bytes = encode_checkpoint(before);
    s.zero_grad();
    adam_step(s, cfg);
    s.step_count = 0;  // ignore the counter for the byte comparison
    Checkpoint after{1, TaskKind::Spectrum, ConditioningKind::TxPosition, 24, 48,
                     RxPose{},          0.2,
                     0,                 s};
    CHECK(encode_checkpoint(after) == before_bytes);

    // constant gradient: per-step displacement stays bounded by ~lr
    double x = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 200; ++t) {
        double bc1 = 1.0 - std::pow(adam_beta1, t);
        double bc2 = 1.0 - std::pow(adam_beta2, t);
        double prev = x;
        detail::adam_scalar(x, 2.5, m, v, 1e-2, bc1, bc2);
        CHECK(std::abs(x - prev) <= 1e-2 * 1.05);
    }
    CHECK(x < 0.0);
}

TEST_CASE("cea: exact, zero, and scaled predictions") {
    std::vector<ComplexSample> gt(26);
    Rng rng(17);
    for (auto& z : gt) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(cea(gt, gt) == doctest::Approx(300.0));
    std::vector<ComplexSample> zero(26, ComplexSample{0, 0});
    CHECK(cea(zero, gt) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<ComplexSample> scaled(26);
    for (int i = 0; i < 26; ++i) scaled[i] = gt[i] * 1.1;
    CHECK(cea(scaled, gt) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK_THROWS(cea(gt, zero));
}

TEST_CASE("percentile: nearest-rank definition") {
    std::vector<double> v = {5, 1, 4, 2, 3};
    CHECK(percentile_nearest_rank(v, 0.5) == 3.0);  // ceil(2.5) = 3rd smallest
    CHECK(percentile_nearest_rank(v, 0.1) == 1.0);  // ceil(0.5) = 1st
    CHECK(percentile_nearest_rank(v, 0.9) == 5.0);  // ceil(4.5) = 5th
    CHECK(percentile_nearest_rank(v, 1.0) == 5.0);
}

TEST_CASE("train: overfit smoke test drops the loss") {
    auto dir = std::filesystem::temp_directory_path() / "wrfgs_smoke_ds";
    std::filesystem::remove_all(dir);
    Dataset ds = tiny_spectrum_dataset(dir, 1, 1, 5);
    TrainConfig cfg = tiny_train_config();
    cfg.iterations = 120;
    cfg.log_interval = 10;
    ThreadPool pool(2);
    TrainResult res = train(ds, cfg, &pool);
    REQUIRE(res.loss_curve.size() >= 2);
    CHECK(res.loss_curve.back() < res.loss_curve.front());
}

TEST_CASE("train: both pipelines complete the same schedule") {
    auto dir = std::filesystem::temp_directory_path() / "wrfgs_smoke_ds2";
    std::filesystem::remove_all(dir);
    Dataset ds = tiny_spectrum_dataset(dir, 3, 2, 6);
    ThreadPool pool(2);
    for (Pipeline p : {Pipeline::WrfGs, Pipeline::WrfGsPlus}) {
        TrainConfig cfg = tiny_train_config();
        cfg.pipeline = p;
        cfg.iterations = 20;
        TrainResult res = train(ds, cfg, &pool);
        CHECK(res.checkpoint.store.step_count == 20);
    }
}

TEST_CASE("train: NaN loss aborts with diagnostics") {
    auto dir = std::filesystem::temp_directory_path() / "wrfgs_smoke_ds3";
    std::filesystem::remove_all(dir);
    Dataset ds = tiny_spectrum_dataset(dir, 2, 1, 7);
    ds.records[ds.manifest.train_ids[0]].spectrum.values[5] =
        std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg = tiny_train_config();
    CHECK_THROWS_AS(train(ds, cfg, nullptr), NumericalAbort);
}

TEST_CASE("train: deterministic and resumable to identical checkpoints") {
    auto dir = std::filesystem::temp_directory_path() / "wrfgs_smoke_ds4";
    std::filesystem::remove_all(dir);
    Dataset ds = tiny_spectrum_dataset(dir, 3, 1, 8);
    ThreadPool pool(2);
    TrainConfig cfg = tiny_train_config();
    cfg.iterations = 30;

    TrainResult a = train(ds, cfg, &pool);
    TrainResult b = train(ds, cfg, &pool);
    CHECK(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint));

    // split run: pause at step 15 under the full schedule, then resume
    TrainResult first = train(ds, cfg, &pool, nullptr, nullptr, 0, 15);
    CHECK(first.checkpoint.store.step_count == 15);
    TrainResult second = train(ds, cfg, &pool, nullptr, &first.checkpoint);
    CHECK(encode_checkpoint(second.checkpoint) == encode_checkpoint(a.checkpoint));
}

TEST_CASE("train: config validation rejects bad eta") {
    TrainConfig cfg = tiny_train_config();
    cfg.eta = 1.5;
    CHECK_THROWS(cfg.validate());
}
