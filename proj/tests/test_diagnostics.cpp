#include "kandy/diagnostics.hpp"
#include "kandy/systems.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace kandy;
using Catch::Matchers::WithinAbs;

TEST_CASE("Lyapunov exponents of maps", "[diagnostics]") {
    auto half = [](const Vec& x) { return Vec(0.5 * x); };
    // separation d0 = 1e-8 on O(1) states carries relative round-off near eps / d0
    CHECK_THAT(largest_lyapunov_map(half, Vec{{1.0, -2.0}}, 0, 20), WithinAbs(std::log(0.5), 1e-7));

    auto henon = [](const Vec& x) { return henon_step(x); };
    const double lambda = largest_lyapunov_map(henon, Vec{{0.1, 0.1}}, 1000, 1000000);
    INFO("lambda " << lambda);
    CHECK_THAT(lambda, WithinAbs(0.419, 0.02));

    CHECK(lyapunov_time(0.9) * 0.9 == 1.0);
    CHECK_THROWS_AS(lyapunov_time(-0.1), InvalidArgument);
}

TEST_CASE("cumulative NRMSE", "[diagnostics]") {
    Rng rng(3);
    Mat truth(100, 3);
    for (Eigen::Index r = 0; r < truth.rows(); ++r)
        for (Eigen::Index c = 0; c < 3; ++c) truth(r, c) = rng.normal() * (c + 1.0);
    Mat pred = truth;
    for (Eigen::Index r = 0; r < pred.rows(); ++r) pred(r, 1) += 0.01 * r;

    CHECK(nrmse_curve(truth, truth).cwiseAbs().maxCoeff() == 0.0);

    // brute force: every prefix recomputed from scratch
    const Vec curve = nrmse_curve(pred, truth);
    const double sigma = std::sqrt(truth.array().square().sum() / truth.size());
    for (Eigen::Index n = 0; n < truth.rows(); n += 9) {
        const auto k = n + 1;
        const double mse = (pred.topRows(k) - truth.topRows(k)).array().square().sum() / (k * 3.0);
        CHECK_THAT(curve[n], WithinAbs(std::sqrt(mse) / sigma, 1e-12));
    }
    CHECK_THAT(nrmse_curve(Mat::Zero(100, 3), truth)[99], WithinAbs(1.0, 1e-12));

    const Vec scaled = nrmse_curve(7.5 * pred, 7.5 * truth);
    CHECK((scaled - curve).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(nrmse_curve(Mat::Zero(5, 2), Mat::Zero(5, 2)), InvalidArgument);
    CHECK_THROWS_AS(nrmse_curve(Mat::Zero(5, 2), truth), InvalidArgument);
}

TEST_CASE("rollout of state models", "[diagnostics]") {
    SECTION("zero model stays at its initial state") {
        auto lift = std::make_shared<const LiftMap>(LiftMap::identity({"x", "y"}));
        const KandyModel m = init_model(lift, {"x", "y"}, SplineSpec{3, 1, 1.0, SplineInit::zero()}, false,
                                        Mat{{-1.0, -1.0}, {1.0, 1.0}});
        const Vec x0{{0.3, -0.4}};
        const auto r = rollout(m, x0, 50, DatasetKind::ode, Integrator::rk4, 0.01);
        CHECK_FALSE(r.diverged);
        REQUIRE(r.trajectory.size() == 51);
        for (Eigen::Index k = 0; k < 51; ++k) CHECK(r.trajectory.states.row(k) == x0.transpose());
    }
    SECTION("exact Lorenz field reproduces the generator") {
        const KandyModel m = oracle::exact_lorenz_model();
        LorenzSpec s;
        s.samples = 101;
        const Trajectory truth = gen_lorenz(s);
        const auto r = rollout(m, truth.states.row(0).transpose(), 100, DatasetKind::ode, Integrator::rk4, s.dt);
        REQUIRE(r.trajectory.size() == 101);
        CHECK((r.trajectory.states - truth.states).cwiseAbs().maxCoeff() < 1e-8);
        const auto again = rollout(m, truth.states.row(0).transpose(), 100, DatasetKind::ode, Integrator::rk4, s.dt);
        CHECK(again.trajectory.states == r.trajectory.states);

        const auto bounded = rollout(m, truth.states.row(0).transpose(), 100000, DatasetKind::ode, Integrator::rk4,
                                     s.dt, Vec::Constant(3, 5.0));
        CHECK(bounded.diverged);
        CHECK(bounded.trajectory.size() < 100000);
    }
}

TEST_CASE("error field", "[diagnostics]") {
    Mat a(4, 6), b(4, 6);
    a.setRandom();
    b.setRandom();
    CHECK(error_field(a, a).error.cwiseAbs().maxCoeff() == 0.0);
    const auto shifted = error_field((a.array() + 0.25).matrix(), a);
    CHECK((shifted.error.array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK((shifted.rms.array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK(error_field(a, b).error == -error_field(b, a).error);
    CHECK_THROWS_AS(error_field(a, Mat::Zero(4, 5)), InvalidArgument);
}

TEST_CASE("fiber metrics", "[diagnostics]") {
    const HopfData d = gen_hopf_dataset(4000, 20, 16, 9);
    Mat exact(d.x.rows(), 3);
    for (Eigen::Index r = 0; r < d.x.rows(); ++r) exact.row(r) = hopf_map(d.x.row(r).transpose()).transpose();

    SECTION("exact map has zero error") {
        const FiberMetrics fm = fiber_metrics(exact, d);
        CHECK(fm.mean_angular_error < 1e-12);
        CHECK(fm.p95_radial_error < 1e-12);
        CHECK(fm.mean_fiber_rms < 1e-12);
        CHECK(fm.max_fiber_error < 1e-12);
    }
    SECTION("constant north pole predictor") {
        Mat north = Mat::Zero(d.x.rows(), 3);
        north.col(2).setOnes();
        double oracle = 0.0;
        for (Eigen::Index r = 0; r < d.h.rows(); ++r) oracle += std::acos(std::clamp(d.h(r, 2), -1.0, 1.0));
        oracle /= static_cast<double>(d.h.rows());
        const FiberMetrics fm = fiber_metrics(north, d);
        CHECK_THAT(fm.mean_angular_error, WithinAbs(oracle, 1e-9));
        CHECK_THAT(fm.mean_angular_error, WithinAbs(std::numbers::pi / 2.0, 0.05));
        CHECK(fm.p95_radial_error == 0.0);
        CHECK(fm.mean_fiber_rms == 0.0);
    }
    SECTION("fiber spread of a non-invariant predictor") {
        const Mat pred = d.x.leftCols(3);
        const FiberMetrics fm = fiber_metrics(pred, d);
        double sum = 0.0;
        for (int f = 0; f < 20; ++f) {
            Eigen::Vector3d mean = Eigen::Vector3d::Zero();
            std::vector<Eigen::Index> idx;
            for (std::size_t r = 0; r < d.fiber.size(); ++r)
                if (d.fiber[r] == f) idx.push_back(static_cast<Eigen::Index>(r));
            for (auto r : idx) mean += pred.row(r).transpose();
            mean /= static_cast<double>(idx.size());
            double ss = 0.0;
            for (auto r : idx) ss += (pred.row(r).transpose() - mean).squaredNorm();
            sum += std::sqrt(ss / static_cast<double>(idx.size()));
        }
        CHECK_THAT(fm.mean_fiber_rms, WithinAbs(sum / 20.0, 1e-12));
        CHECK(fm.mean_fiber_rms > 0.1);
    }
    SECTION("invariant predictions do not move along rotated fibers") {
        Rng rng(4);
        double worst = 0.0;
        for (Eigen::Index r = 0; r < 200; ++r) {
            const Vec x = d.x.row(r).transpose();
            worst = std::max(worst, (hopf_map(hopf_rotate(x, rng.uniform(0.0, 6.3))) - hopf_map(x)).norm());
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("correlation dimension of synthetic sets", "[diagnostics]") {
    Rng rng(8);
    Mat line(5000, 2), square(5000, 2);
    for (Eigen::Index r = 0; r < 5000; ++r) {
        const double t = rng.uniform(0.0, 1.0);
        line.row(r) << t, 0.5 * t;
        square.row(r) << rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0);
    }
    CHECK_THAT(correlation_dimension(line, 0.005, 0.1), WithinAbs(1.0, 0.1));
    CHECK_THAT(correlation_dimension(square, 0.005, 0.1), WithinAbs(2.0, 0.1));

    const Trajectory h = iterate_map([](const Vec& x) { return henon_step(x); }, Vec{{0.1, 0.1}}, 5000, 1000, {"x", "y"});
    const double e = (h.states.colwise().maxCoeff() - h.states.colwise().minCoeff()).maxCoeff();
    const double dim = correlation_dimension(h.states, 0.005 * e, 0.1 * e);
    INFO("Henon dimension " << dim);
    CHECK_THAT(dim, WithinAbs(1.21, 0.05));

    CHECK_THROWS_AS(correlation_dimension(line, 0.1, 0.05), InvalidArgument);
    CHECK_THROWS_AS(correlation_dimension(Mat{{0.0, 0.0}, {1.0, 1.0}}, 1e-6, 1e-5), InvalidArgument);
}

TEST_CASE("Kolmogorov-Smirnov statistic", "[diagnostics]") {
    CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(ks_statistic({1.0, 2.0}, {3.0, 4.0}) == 1.0);
    CHECK_THAT(ks_statistic({1.0, 2.0, 3.0, 4.0}, {2.5, 3.5}), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(ks_statistic({}, {1.0}), InvalidArgument);
}
