#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ridgescan/analytic.hpp"
#include "ridgescan/geometry.hpp"
#include "test_helpers.hpp"

using namespace ridgescan;
using Catch::Approx;

namespace {

DensityJet jet_with(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad) {
    DensityJet j;
    j.at = Eigen::VectorXd::Zero(hess.rows());
    j.order = 2;
    j.value = 1.0;
    j.grad = grad;
    j.hess = hess;
    return j;
}

} // namespace

TEST_CASE("eigen_frame sorts descending with deterministic signs") {
    Eigen::Matrix2d h;
    h << -1, 0, 0, -2;
    const EigenFrame f = eigen_frame(jet_with(h, Eigen::Vector2d(0, 0)));
    CHECK(f.eigenvalues(0) == Approx(-1.0));
    CHECK(f.eigenvalues(1) == Approx(-2.0));
    CHECK(f.eigenvectors.col(0).isApprox(Eigen::Vector2d(1, 0)));
    CHECK(f.eigenvectors.col(1).isApprox(Eigen::Vector2d(0, 1)));
}

TEST_CASE("eigen_frame of the zero matrix is an orthonormal frame") {
    const EigenFrame f =
        eigen_frame(jet_with(Eigen::Matrix3d::Zero(), Eigen::Vector3d(0, 0, 0)));
    CHECK(f.eigenvalues.cwiseAbs().maxCoeff() == 0.0);
    CHECK((f.eigenvectors.transpose() * f.eigenvectors - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
    for (int i = 0; i < 3; ++i) {
        Eigen::Index arg;
        f.eigenvectors.col(i).cwiseAbs().maxCoeff(&arg);
        CHECK(f.eigenvectors.col(i)(arg) > 0.0);
    }
}

TEST_CASE("eigen_frame reconstructs random symmetric matrices") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
        Eigen::Matrix3d h = 0.5 * (a + a.transpose());
        const EigenFrame f = eigen_frame(jet_with(h, Eigen::Vector3d::Zero()));
        Eigen::Matrix3d rebuilt = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 3; ++i)
            rebuilt += f.eigenvalues(i) * f.eigenvectors.col(i) * f.eigenvectors.col(i).transpose();
        CHECK((rebuilt - h).cwiseAbs().maxCoeff() < 1e-10);
        for (int i = 0; i < 3; ++i)
            CHECK((h * f.eigenvectors.col(i) - f.eigenvalues(i) * f.eigenvectors.col(i)).norm() <
                  1e-8 * h.cwiseAbs().maxCoeff() + 1e-12);
    }
}

TEST_CASE("projected gradient: annihilates v1, fixes span(V), contracts") {
    Eigen::Matrix2d h;
    h << -0.5, 0, 0, -2;  // v1 = e_x (largest eigenvalue -0.5)
    CHECK(projected_gradient(jet_with(h, Eigen::Vector2d(3, 0))).norm() == Approx(0.0).margin(1e-15));
    CHECK(projected_gradient(jet_with(h, Eigen::Vector2d(0, 1)))
              .isApprox(Eigen::Vector2d(0, 1), 1e-12));

    Rng rng(5);
    for (int rep = 0; rep < 25; ++rep) {
        Eigen::Matrix3d a;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
        Eigen::Vector3d g(rng.normal(), rng.normal(), rng.normal());
        const auto pg = projected_gradient(jet_with(0.5 * (a + a.transpose()), g));
        CHECK(pg.norm() <= g.norm() * (1.0 + 1e-12));
    }
}

TEST_CASE("is_ridge_point on the analytic anisotropic Gaussian") {
    analytic::AnisoGaussianDensity density(Eigen::Vector2d(3.0, 1.0), 0.5);
    // on the major axis: ridge
    CHECK(is_ridge_point(density.jet(Eigen::Vector2d(1.7, 0.0)), 1e-8));
    CHECK(is_ridge_point(density.jet(Eigen::Vector2d(-4.0, 0.0)), 1e-8));
    // off axis: not
    CHECK_FALSE(is_ridge_point(density.jet(Eigen::Vector2d(1.7, 0.4)), 1e-6));
    CHECK_FALSE(is_ridge_point(density.jet(Eigen::Vector2d(0.3, -1.2)), 1e-6));
}

TEST_CASE("is_ridge_point rejects lambda2 >= 0 regardless of the gradient") {
    Eigen::Matrix2d h;
    h << 1, 0, 0, 0.5;  // both eigenvalues positive: a local minimum
    CHECK_FALSE(is_ridge_point(jet_with(h, Eigen::Vector2d::Zero()), 1e-6));
    h << 1, 0, 0, 0;  // lambda2 exactly zero is still not a ridge
    CHECK_FALSE(is_ridge_point(jet_with(h, Eigen::Vector2d::Zero()), 1e-6));
}

TEST_CASE("normal frame on the major axis of the anisotropic Gaussian") {
    analytic::AnisoGaussianDensity density(Eigen::Vector2d(3.0, 1.0), 0.4);
    const NormalFrame f = normal_frame(density.jet(Eigen::Vector2d(2.0, 0.0)));
    // N spans the minor axis, e is the major-axis unit vector
    CHECK(std::abs(f.N(1, 0)) == Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(f.N(0, 0)) < 1e-10);
    CHECK(f.tangent.isApprox(Eigen::Vector2d(1, 0), 1e-10));
    CHECK((f.N.transpose() * f.N - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normal frame identities on KDE ridge-like points (claims 1-3)") {
    Sample s = testutil::circle_sample(300, 77);
    KdeModel m(s, 0.7);
    Rng rng(123);
    int checked = 0;
    for (int rep = 0; rep < 60 && checked < 25; ++rep) {
        const double th = rng.uniform(0.0, 2.0 * M_PI);
        Eigen::Vector2d x(2.9 * std::cos(th), 2.9 * std::sin(th));
        DensityJet jet = m.jet(x, 3);
        NormalFrame f;
        try {
            f = normal_frame(jet);
        } catch (const numeric_error&) {
            continue;
        }
        ++checked;
        // claim 1: N N^T is the projector onto col(M)
        const Eigen::MatrixXd proj =
            f.M * (f.M.transpose() * f.M).inverse() * f.M.transpose();
        CHECK((f.N * f.N.transpose() - proj).cwiseAbs().maxCoeff() < 1e-8);
        // claim 2: orthonormal columns
        CHECK((f.N.transpose() * f.N - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff() <
              1e-10);
        // claim 3 (via the tangent): e orthogonal to col(N)
        CHECK((f.tangent.transpose() * f.N).cwiseAbs().maxCoeff() < 1e-8);
        // W is symmetric and equals N H_N^{-1} N^T
        CHECK((f.W - f.W.transpose()).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::MatrixXd w2 =
            f.N * f.subspace_hessian.inverse() * f.N.transpose();
        CHECK((f.W - w2).cwiseAbs().maxCoeff() < 1e-10 * f.W.cwiseAbs().maxCoeff() + 1e-14);
    }
    CHECK(checked >= 25);
}

TEST_CASE("W is invariant under orthogonal re-basing of N (Lemma on W)") {
    analytic::AnisoGaussianDensity density(Eigen::Vector3d(3.0, 1.2, 0.8), 0.4);
    Eigen::Vector3d x(1.4, 0.0, 0.0);
    const DensityJet jet = density.jet(x);
    const NormalFrame f = normal_frame(jet);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::MatrixXd q = testutil::random_rotation(2, 900 + rep);
        const Eigen::MatrixXd n2 = f.N * q;
        const Eigen::MatrixXd hn2 = n2.transpose() * jet.hess * n2;
        const Eigen::MatrixXd w2 = n2 * hn2.inverse() * n2.transpose();
        CHECK((w2 - f.W).cwiseAbs().maxCoeff() < 1e-10 * f.W.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("eigengap collapse and degenerate inputs raise numeric errors") {
    // isotropic Hessian: lambda_1 = lambda_2 exactly
    DensityJet j = jet_with(-Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.1, 0.0));
    j.order = 3;
    j.third.assign(2, Eigen::MatrixXd::Zero(2, 2));
    CHECK_THROWS_AS(normal_frame(j), numeric_error);

    DensityJet low = jet_with(-Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.1, 0.0));
    CHECK_THROWS_AS(normal_frame(low), input_error);  // order < 3
}

TEST_CASE("sigma matrix: symmetric PSD, flat along the tangent, positive trace") {
    Sample s = testutil::circle_sample(400, 13);
    KdeModel m(s, 0.7);
    // take a ridge-adjacent point and its frame
    const DensityJet jet = m.jet(Eigen::Vector2d(2.8, 0.0), 3);
    const NormalFrame f = normal_frame(jet);
    const Eigen::MatrixXd sigma = sigma_matrix(m, f);

    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
    CHECK(sigma.trace() > 0.0);
    // W annihilates e(x), so the tangent direction carries ~none of the trace
    const double along_tangent = f.tangent.dot(sigma * f.tangent);
    CHECK(along_tangent < 1e-12 * sigma.trace());
}

TEST_CASE("condition report margins") {
    analytic::AnisoGaussianDensity density(Eigen::Vector2d(3.0, 1.0), 0.4);
    // near the mode every eigenvalue is negative -> p2 holds automatically
    const DensityJet at_mode = density.jet(Eigen::Vector2d(0.05, 0.0));
    const ConditionReport r1 = condition_report(at_mode, normal_frame(at_mode));
    CHECK(r1.lambda1 < 0.0);
    CHECK(r1.p2_ok);

    // a local-minimum jet (both eigenvalues positive) must report a
    // nonpositive p1 margin
    DensityJet j = jet_with((Eigen::Matrix2d() << 1, 0, 0, 0.2).finished(),
                            Eigen::Vector2d(0.1, 0.0));
    j.order = 3;
    j.third.assign(2, Eigen::MatrixXd::Zero(2, 2));
    NormalFrame f;
    f.at = j.at;
    f.tangent = Eigen::Vector2d(1, 0);
    const ConditionReport r2 = condition_report(j, f);
    CHECK(r2.p1_margin <= 0.0);
    CHECK(r2.lambda2 >= 0.0);
}

TEST_CASE("rotation equivariance of G, N N^T and W") {
    Sample s = testutil::circle_sample(250, 41);
    const Eigen::Vector2d x(2.85, 0.3);
    KdeModel m(s, 0.7);
    const DensityJet jet = m.jet(x, 3);
    const Eigen::VectorXd g = projected_gradient(jet);
    const NormalFrame f = normal_frame(jet);

    const Eigen::MatrixXd q = testutil::random_rotation(2, 6060);
    Sample rotated((s.points() * q.transpose()).eval());
    KdeModel mr(rotated, 0.7);
    const DensityJet jetr = mr.jet(q * x, 3);
    const Eigen::VectorXd gr = projected_gradient(jetr);
    const NormalFrame fr = normal_frame(jetr);

    CHECK((gr - q * g).cwiseAbs().maxCoeff() < 1e-8 * (g.norm() + 1e-30));
    CHECK((fr.N * fr.N.transpose() - q * f.N * f.N.transpose() * q.transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    CHECK((fr.W - q * f.W * q.transpose()).cwiseAbs().maxCoeff() <
          1e-8 * f.W.cwiseAbs().maxCoeff());
}

TEST_CASE("d=2 cross-check: N equals v2 up to sign on exact ridge points") {
    analytic::AnisoGaussianDensity density(Eigen::Vector2d(2.5, 1.0), 0.5);
    for (double t : {-3.0, -1.0, 0.4, 2.2}) {
        const DensityJet jet = density.jet(Eigen::Vector2d(t, 0.0));
        const EigenFrame ef = eigen_frame(jet);
        const NormalFrame nf = normal_frame(jet);
        const Eigen::Vector2d v2 = ef.eigenvectors.col(1);
        const double dot = std::abs(v2.dot(nf.N.col(0)));
        CHECK(dot == Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("projector continuity along the analytic ridge (claim 5)") {
    analytic::CircleDensity density(3.0, 0.3, 0.5);
    const double r = density.ridge_radius();
    auto projector_at = [&](double th) {
        const NormalFrame f =
            normal_frame(density.jet(Eigen::Vector2d(r * std::cos(th), r * std::sin(th))));
        return (f.N * f.N.transpose()).eval();
    };
    const double th0 = 0.7;
    double step = 0.2;
    double prev = (projector_at(th0 + step) - projector_at(th0)).cwiseAbs().maxCoeff();
    for (int k = 0; k < 4; ++k) {
        step *= 0.5;
        const double cur = (projector_at(th0 + step) - projector_at(th0)).cwiseAbs().maxCoeff();
        CHECK(cur < 0.75 * prev);  // halving the separation at least roughly halves the gap
        prev = cur;
    }
}

TEST_CASE("projector stability under density perturbation (claim 6, qualitative)") {
    Sample s = testutil::circle_sample(300, 55);
    const Eigen::Vector2d x(2.9, 0.1);
    KdeModel base(s, 0.7);
    const Eigen::MatrixXd p0 = [&] {
        const NormalFrame f = normal_frame(base.jet(x, 3));
        return (f.N * f.N.transpose()).eval();
    }();
    double prev = std::numeric_limits<double>::infinity();
    for (double hp : {0.85, 0.77, 0.72}) {
        KdeModel other(s, hp);
        const NormalFrame f = normal_frame(other.jet(x, 3));
        const double diff = (f.N * f.N.transpose() - p0).cwiseAbs().maxCoeff();
        CHECK(diff < prev);
        prev = diff;
    }
}
