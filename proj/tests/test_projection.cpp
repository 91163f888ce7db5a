// Copyright Contributors to the wrfgs Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "wrfgs/projection.hpp"
#include "wrfgs/rng.hpp"

using namespace wrfgs;

TEST_CASE("project_point: hand-derived pixels") {
    auto p1 = project_point(Vec3(1, 0, 0), 360, 90);
    REQUIRE(p1.has_value());
    CHECK(p1->first.x() == doctest::Approx(180.0));
    CHECK(p1->first.y() == doctest::Approx(0.0));
    CHECK(p1->second == doctest::Approx(1.0));

    auto p2 = project_point(Vec3(0, 1, 0), 360, 90);
    REQUIRE(p2.has_value());
    CHECK(p2->first.x() == doctest::Approx(270.0));
    CHECK(p2->first.y() == doctest::Approx(0.0));

    auto p3 = project_point(Vec3(1, 0, 1), 360, 90);
    REQUIRE(p3.has_value());
    CHECK(p3->first.x() == doctest::Approx(180.0));
    CHECK(p3->first.y() == doctest::Approx(45.0));

    CHECK(!project_point(Vec3(0, 0, -1), 360, 90).has_value());
}

TEST_CASE("project_point: pixel stays in [0,W) across the seam") {
    // lon = +pi maps to px = W and must wrap to 0
    auto p = project_point(Vec3(-1, 0, 0.1), 360, 90);
    REQUIRE(p.has_value());
    CHECK(p->first.x() >= 0.0);
    CHECK(p->first.x() < 360.0);
    CHECK(p->first.x() == doctest::Approx(0.0));
    // just below the seam from the other side
    auto q = project_point(Vec3(-1, -1e-9, 0.1), 360, 90);
    REQUIRE(q.has_value());
    CHECK(q->first.x() < 360.0);
}

TEST_CASE("project_point: depth is the Euclidean norm, zenith lands at W/2") {
    auto p = project_point(Vec3(1, 2, 2), 360, 90);
    REQUIRE(p.has_value());
    CHECK(p->second == doctest::Approx(3.0));

    auto z = project_point(Vec3(0, 0, 5), 360, 90);
    REQUIRE(z.has_value());
    CHECK(z->first.x() == doctest::Approx(180.0));
    CHECK(z->first.y() < 90.0);
    CHECK(z->first.y() == doctest::Approx(90.0).epsilon(1e-9));

    CHECK(!project_point(Vec3(0, 0, 1e-6), 360, 90).has_value());  // below min range
}

TEST_CASE("project_point round-trips the upper hemisphere") {
    Rng rng(23);
    double worst = 0.0;
    for (int t = 0; t < 2000; ++t) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        v.normalize();
        if (v.z() <= 1e-3) continue;
        auto p = project_point(v, 360, 90);
        REQUIRE(p.has_value());
        double lon = (p->first.x() / 180.0 - 1.0) * pi;
        double lat = p->first.y() / 90.0 * 0.5 * pi;
        Vec3 back(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
        worst = std::max(worst, (back - v).norm());
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("monotonicity: p_y strictly increases with t_z") {
    double prev = -1.0;
    for (double tz = 0.05; tz < 4.0; tz += 0.05) {
        auto p = project_point(Vec3(1.0, 0.5, tz), 360, 90);
        REQUIRE(p.has_value());
        CHECK(p->first.y() > prev);
        prev = p->first.y();
    }
}

TEST_CASE("projection Jacobian and Hessians match finite differences") {
    Rng rng(31);
    const double step = 1e-5;
    double worst_j = 0.0, worst_h = 0.0;
    for (int t = 0; t < 300; ++t) {
        Vec3 v(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.2, 3));
        // keep away from seam (lon = +-pi) and pole
        double lon = std::atan2(v.y(), v.x());
        if (std::abs(std::abs(lon) - pi) < 0.1) continue;
        if (v.head<2>().norm() < 0.2) continue;
        ProjectionDerivs d = project_point_derivs(v, 360, 90);

        for (int a = 0; a < 3; ++a) {
            Vec3 vp = v, vm = v;
            vp[a] += step;
            vm[a] -= step;
            auto pp = project_point(vp, 360, 90), pm = project_point(vm, 360, 90);
            REQUIRE(pp.has_value());
            REQUIRE(pm.has_value());
            for (int r = 0; r < 2; ++r) {
                double fd = (pp->first[r] - pm->first[r]) / (2 * step);
                double an = d.jac(r, a);
                double rel = std::abs(fd - an) / std::max(1.0, std::abs(fd));
                worst_j = std::max(worst_j, rel);
            }
            // Hessians: finite differences of the analytic Jacobian
            ProjectionDerivs dp = project_point_derivs(vp, 360, 90);
            ProjectionDerivs dm = project_point_derivs(vm, 360, 90);
            for (int i = 0; i < 3; ++i) {
                double fd_lon = (dp.jac(0, i) - dm.jac(0, i)) / (2 * step) / d.kx;
                double fd_lat = (dp.jac(1, i) - dm.jac(1, i)) / (2 * step) / d.ky;
                worst_h = std::max(worst_h, std::abs(fd_lon - d.h_lon(i, a)) /
                                                std::max(1.0, std::abs(fd_lon)));
                worst_h = std::max(worst_h, std::abs(fd_lat - d.h_lat(i, a)) /
                                                std::max(1.0, std::abs(fd_lat)));
            }
        }
    }
    CHECK(worst_j < 1e-4);
    CHECK(worst_h < 1e-3);
}

TEST_CASE("project_covariance: floor, symmetry, rotational relation") {
    Mat23 j = project_point_derivs(Vec3(1, 0.3, 0.8), 360, 90).jac;
    Mat2 zero_case = project_covariance(Mat3::Zero(), j);
    CHECK((zero_case - cov2d_floor * Mat2::Identity()).norm() < 1e-12);

    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        Vec3 v(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.3, 2));
        if (v.head<2>().norm() < 0.3) continue;
        Mat3 a = Mat3::Random();
        Mat3 sigma = a * a.transpose();
        Mat2 c = project_covariance(sigma, project_point_derivs(v, 360, 90).jac);
        CHECK((c - c.transpose()).norm() < 1e-11 * std::max(1.0, c.norm()));
        Eigen::SelfAdjointEigenSolver<Mat2> es(c);
        CHECK(es.eigenvalues().minCoeff() >= cov2d_floor - 1e-9);
    }

    // isotropic covariance at two positions related by rotation about z
    // projects to the same 2x2 matrix (longitude shift only)
    Mat3 iso = 0.04 * Mat3::Identity();
    Vec3 v1(1.2, 0.4, 0.9);
    double ang = 1.1;
    Mat3 rz;
    rz << std::cos(ang), -std::sin(ang), 0, std::sin(ang), std::cos(ang), 0, 0, 0, 1;
    Mat2 c1 = project_covariance(iso, project_point_derivs(v1, 360, 90).jac);
    Mat2 c2 = project_covariance(iso, project_point_derivs(rz * v1, 360, 90).jac);
    CHECK((c1 - c2).norm() < 1e-9);
}

TEST_CASE("projection_backward matches finite differences") {
    Rng rng(41);
    Vec3 v(0.8, -0.5, 1.1);
    Mat3 a = Mat3::Random();
    Mat3 sigma = a * a.transpose();
    Vec2 d_pix(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Mat2 d_cov;
    d_cov << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);

    Vec3 d_t = Vec3::Zero();
    Mat3 d_sigma = Mat3::Zero();
    ProjectionDerivs pd = project_point_derivs(v, 360, 90);
    projection_backward(pd, sigma, d_pix, d_cov, d_t, d_sigma);

    auto loss = [&](const Vec3& t, const Mat3& s) {
        auto p = project_point(t, 360, 90);
        Mat2 c = project_covariance(s, project_point_derivs(t, 360, 90).jac);
        Mat2 sym = 0.5 * (d_cov + d_cov.transpose());
        return d_pix.dot(p->first) + (sym.array() * c.array()).sum();
    };
    const double eps = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Vec3 vp = v, vm = v;
        vp[i] += eps;
        vm[i] -= eps;
        double fd = (loss(vp, sigma) - loss(vm, sigma)) / (2 * eps);
        CHECK(d_t[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            Mat3 sp = sigma, sm = sigma;
            sp(r, c) += eps;
            sm(r, c) -= eps;
            double fd = (loss(v, sp) - loss(v, sm)) / (2 * eps);
            CHECK(d_sigma(r, c) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
}

TEST_CASE("footprint_tiles: single tile, wraparound, full coverage") {
    ProjectedGaussian pg;
    pg.cov2d = cov2d_floor * Mat2::Identity();
    pg.pixel = Vec2(24.0, 24.0);  // middle of tile (1,1)
    pg.depth = 1.0;
    auto tiles = footprint_tiles(pg, 16, 360, 90);
    REQUIRE(tiles.size() == 1);
    CHECK(tiles[0].tile == 1 * 23 + 1);
    CHECK(tiles[0].x_shift == 0.0);

    // seam crossing: center at px=1 with ~10 px radius -> tiles on both edges
    ProjectedGaussian edge;
    edge.cov2d = (10.0 / 3.0) * (10.0 / 3.0) * Mat2::Identity();
    edge.pixel = Vec2(1.0, 45.0);
    edge.depth = 1.0;
    auto et = footprint_tiles(edge, 16, 360, 90);
    bool left = false, right = false;
    for (const auto& t : et) {
        int tx = t.tile % 23;
        if (tx == 0 && t.x_shift == 0.0) left = true;
        if (tx == 22 && t.x_shift > 0.0) right = true;
    }
    CHECK(left);
    CHECK(right);

    // radius covering everything -> every tile present
    ProjectedGaussian big;
    big.cov2d = 1e6 * Mat2::Identity();
    big.pixel = Vec2(180.0, 45.0);
    big.depth = 1.0;
    auto bt = footprint_tiles(big, 16, 360, 90);
    std::vector<bool> seen(23 * 6, false);
    for (const auto& t : bt) seen[t.tile] = true;
    int covered = 0;
    for (bool b : seen) covered += b ? 1 : 0;
    CHECK(covered == 23 * 6);
}
