#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ridgescan/kde.hpp"
#include "test_helpers.hpp"

using namespace ridgescan;
using Catch::Approx;

namespace {

Sample two_atoms(double a) {
    Eigen::MatrixXd pts(2, 2);
    pts << -a, 0.0, a, 0.0;
    return Sample(pts);
}

} // namespace

TEST_CASE("single atom at the origin: value 1/(2 pi), zero gradient") {
    Eigen::MatrixXd pts(2, 2);
    pts << 0, 0, 0, 0;  // duplicated atom keeps n >= 2 without moving mass
    KdeModel m(Sample(pts), 1.0);
    const DensityJet j = m.jet(Eigen::Vector2d(0, 0), 1);
    CHECK(j.value == Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
    CHECK(j.grad.norm() == Approx(0.0).margin(1e-16));
}

TEST_CASE("two-atom midpoint: zero gradient, axis eigenvalue flips sign at a = h") {
    const double h = 1.0;
    const Eigen::Vector2d mid(0, 0);

    KdeModel close(two_atoms(0.5), h);  // a < h: midpoint is a mode
    DensityJet jc = close.jet(mid, 2);
    CHECK(jc.grad.norm() == 0.0);
    CHECK(jc.hess(0, 0) < 0.0);

    KdeModel far(two_atoms(2.0), h);  // a > h: midpoint is a saddle
    DensityJet jf = far.jet(mid, 2);
    CHECK(jf.grad.norm() == 0.0);
    CHECK(jf.hess(0, 0) > 0.0);

    // perpendicular direction always curves down
    CHECK(jc.hess(1, 1) < 0.0);
    CHECK(jf.hess(1, 1) < 0.0);
}

TEST_CASE("derivatives match central finite differences of the lower order") {
    for (int d : {2, 3}) {
        Rng rng(100 + d);
        Eigen::MatrixXd pts(40, d);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < d; ++j) pts(i, j) = rng.normal();
        KdeModel m(Sample(pts), 0.7);
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd x(d);
            for (int j = 0; j < d; ++j) x(j) = rng.uniform(-1.5, 1.5);
            const double step = 1e-5 * m.bandwidth();
            const DensityJet jet = m.jet(x, 3);
            const double scale = jet.value / m.bandwidth();

            CHECK(testutil::rel_err(testutil::fd_gradient(m, x, step), jet.grad,
                                    1e-9 * scale) < 1e-4);
            CHECK(testutil::rel_err(testutil::fd_hessian(m, x, step), jet.hess,
                                    1e-9 * scale) < 1e-4);
            const auto fd3 = testutil::fd_third(m, x, step);
            for (int k = 0; k < d; ++k)
                CHECK(testutil::rel_err(fd3[k], jet.third[k], 1e-9 * scale) < 1e-4);
        }
    }
}

TEST_CASE("jet tensors are exactly symmetric as stored") {
    Rng rng(7);
    Eigen::MatrixXd pts(25, 3);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
    KdeModel m(Sample(pts), 0.8);
    const DensityJet jet = m.jet(Eigen::Vector3d(0.2, -0.4, 0.1), 3);
    CHECK((jet.hess - jet.hess.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                const double t = jet.third[c](a, b);
                CHECK(jet.third[c](b, a) == t);
                CHECK(jet.third[b](a, c) == t);
                CHECK(jet.third[a](b, c) == t);
            }
    CHECK(jet.value >= 0.0);
}

TEST_CASE("translation equivariance") {
    Rng rng(11);
    Eigen::MatrixXd pts(30, 2);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 2; ++j) pts(i, j) = rng.normal();
    const Eigen::Vector2d shift(12.25, -3.5);
    const Eigen::Vector2d x(0.3, 0.8);
    KdeModel m(Sample(pts), 0.6);
    KdeModel ms(Sample((pts.rowwise() + shift.transpose()).eval()), 0.6);
    const DensityJet a = m.jet(x, 3);
    const DensityJet b = ms.jet(x + shift, 3);
    CHECK(a.value == Approx(b.value).epsilon(1e-12));
    CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() < 1e-12 * std::abs(a.value));
    CHECK((a.hess - b.hess).cwiseAbs().maxCoeff() < 1e-11 * std::abs(a.value));
}

TEST_CASE("density integrates to about one on a wide grid") {
    Sample s = testutil::circle_sample(120, 3, 1.5, 0.2);
    KdeModel m(s, 0.4);
    const double lo = -3.5, hi = 3.5;
    const int res = 140;
    const double cell = (hi - lo) / res;
    double mass = 0.0;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            Eigen::Vector2d x(lo + (i + 0.5) * cell, lo + (j + 0.5) * cell);
            mass += m.jet(x, 0).value * cell * cell;
        }
    CHECK(mass == Approx(1.0).margin(1e-3));
}

TEST_CASE("silverman bandwidth: frozen arithmetic, scale equivariance, errors") {
    // sigma_hat = 1 by construction: two coordinates each with sd 1
    Rng rng(21);
    Eigen::MatrixXd pts(500, 2);
    for (int i = 0; i < 500; ++i)
        for (int j = 0; j < 2; ++j) pts(i, j) = rng.normal();
    // normalize each column to sample sd exactly 1
    for (int j = 0; j < 2; ++j) {
        const double mean = pts.col(j).mean();
        const double sd = std::sqrt((pts.col(j).array() - mean).square().sum() / 499.0);
        pts.col(j) = (pts.col(j).array() - mean) / sd + mean;
    }
    Sample s(pts);
    // (4 / ((d+2) n))^(1/(d+4)) at d=2, n=500
    CHECK(silverman_bandwidth(s) == Approx(0.35495366597555705).epsilon(1e-12));

    const double c = 3.75;
    Sample scaled((pts * c).eval());
    CHECK(silverman_bandwidth(scaled) == Approx(c * silverman_bandwidth(s)).epsilon(1e-12));

    Eigen::MatrixXd tiny(2, 2);
    tiny << 0, 1, 1, 0;
    CHECK(silverman_bandwidth(Sample(tiny)) > 0.0);

    Eigen::MatrixXd flat(3, 2);
    flat << 1, 1, 1, 1, 1, 1;
    CHECK_THROWS_AS(silverman_bandwidth(Sample(flat)), input_error);
}

TEST_CASE("sup_norm_diff: identity, monotone in h', order nesting") {
    Sample s = testutil::circle_sample(60, 9);
    KdeModel base(s, 0.5);
    std::vector<Eigen::VectorXd> grid;
    for (int i = 0; i < 25; ++i) grid.push_back(Eigen::Vector2d(-3.0 + 0.25 * i, 0.4));

    CHECK(sup_norm_diff(base, base, grid, 3) == 0.0);

    double prev = std::numeric_limits<double>::infinity();
    for (double hp : {0.9, 0.75, 0.6, 0.55, 0.51}) {
        KdeModel other(s, hp);
        const double v = sup_norm_diff(base, other, grid, 2);
        CHECK(v < prev);
        prev = v;
    }

    KdeModel other(s, 0.8);
    CHECK(sup_norm_diff(base, other, grid, 0) <= sup_norm_diff(base, other, grid, 3));

    CHECK_THROWS_AS(sup_norm_diff(base, other, {}, 2), input_error);
}

TEST_CASE("jet input validation") {
    Sample s = testutil::circle_sample(10, 1);
    KdeModel m(s, 0.5);
    Eigen::Vector2d bad(std::nan(""), 0.0);
    CHECK_THROWS_AS(m.jet(bad, 1), input_error);
    CHECK_THROWS_AS(m.jet(Eigen::Vector2d(0, 0), 4), input_error);
    CHECK_THROWS_AS(KdeModel(s, 0.0), input_error);
    CHECK_THROWS_AS(KdeModel(s, -1.0), input_error);
}

TEST_CASE("optional cutoff radius approximates the exact sum") {
    Sample s = testutil::circle_sample(200, 17);
    KdeModel exact(s, 0.5);
    KdeModel truncated(s, 0.5, 5.0);  // 10 bandwidths: relative error ~ e^-50
    const Eigen::Vector2d x(2.5, 0.5);
    CHECK(truncated.jet(x, 1).value == Approx(exact.jet(x, 1).value).epsilon(1e-12));
}
