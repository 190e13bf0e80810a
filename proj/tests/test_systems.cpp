#include "kandy/diagnostics.hpp"
#include "kandy/systems.hpp"

#include <catch_amalgamated.hpp>

using namespace kandy;
using Catch::Matchers::WithinAbs;

TEST_CASE("Lorenz vector field", "[systems]") {
    CHECK(lorenz_rhs(Vec::Zero(3)) == Vec::Zero(3));
    const Vec d = lorenz_rhs(Vec{{1.0, 1.0, 1.0}});
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 26.0);
    CHECK_THAT(d[2], WithinAbs(1.0 - 8.0 / 3.0, 1e-15));
    const double c = std::sqrt(8.0 / 3.0 * 27.0);
    CHECK(lorenz_rhs(Vec{{c, c, 27.0}}).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Lorenz generator", "[systems]") {
    LorenzSpec s;
    s.seed = 17;
    const Trajectory a = gen_lorenz(s);
    CHECK(a.size() == 10000);
    CHECK(a.dt == 0.005);
    CHECK(a.states.col(0).cwiseAbs().maxCoeff() < 30.0);
    CHECK(a.states.col(1).cwiseAbs().maxCoeff() < 30.0);
    CHECK(a.states.col(2).minCoeff() > 0.0);
    CHECK(a.states.col(2).maxCoeff() < 60.0);
    CHECK(gen_lorenz(s).states == a.states);
    s.seed = 18;
    CHECK(gen_lorenz(s).states != a.states);
}

TEST_CASE("Lorenz largest Lyapunov exponent", "[systems]") {
    auto f = [](const Vec& x) { return lorenz_rhs(x); };
    LyapunovSettings ls;
    ls.intervals = 2000;
    ls.transient = 50;
    const double lambda = largest_lyapunov_flow(f, Vec{{1.0, 1.0, 20.0}}, ls);
    INFO("lambda " << lambda);
    CHECK(lambda >= 0.85);
    CHECK(lambda <= 0.95);
}

TEST_CASE("Henon map", "[systems]") {
    CHECK(henon_step(Vec{{0.0, 0.0}}) == Vec{{1.0, 0.0}});
    const Vec n = henon_step(Vec{{1.0, 0.0}});
    CHECK_THAT(n[0], WithinAbs(-0.4, 1e-15));
    CHECK_THAT(n[1], WithinAbs(0.3, 1e-15));
    const Trajectory orbit = iterate_map([](const Vec& x) { return henon_step(x); }, Vec::Zero(2), 10000, 0, {"x", "y"});
    CHECK(orbit.states.cwiseAbs().maxCoeff() < 2.0);
}

TEST_CASE("Ikeda map", "[systems]") {
    CHECK(ikeda_step(Vec{{0.0, 0.0}}) == Vec{{1.0, 0.0}});
    IkedaParams off;
    off.u = 0.0;
    CHECK(ikeda_step(Vec{{0.3, -2.0}}, off) == Vec{{1.0, 0.0}});
    const Trajectory orbit = iterate_map([](const Vec& x) { return ikeda_step(x); }, Vec::Zero(2), 10000, 0, {"x", "y"});
    // |x_{n+1} - (1, 0)| = u |x_n|, so the attractor lies within 1/(1-u) of the origin
    CHECK(orbit.states.rowwise().norm().maxCoeff() < 1.0 / (1.0 - 0.9) + 1e-9);
}

TEST_CASE("Kuramoto-Sivashinsky generator", "[systems]") {
    KsSpec s;
    s.samples = 300;
    s.burn_in = 200;
    s.seed = 2;
    SECTION("zero initial condition stays zero") {
        KsSpec z = s;
        z.zero_ic = true;
        z.samples = 20;
        z.burn_in = 0;
        CHECK(gen_ks(z).u.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("chaotic attractor statistics") {
        const FieldTrajectory f = gen_ks(s);
        CHECK(f.snapshots() == 300);
        CHECK(f.points() == 64);
        CHECK_THAT(f.dx, WithinAbs(22.0 / 64.0, 1e-15));
        const double rms = std::sqrt(f.u.squaredNorm() / static_cast<double>(f.u.size()));
        INFO("rms " << rms);
        CHECK(rms >= 0.5);
        CHECK(rms <= 3.5);
        const double m0 = f.u.row(0).mean();
        for (Eigen::Index r = 1; r < f.u.rows(); ++r) REQUIRE(std::abs(f.u.row(r).mean() - m0) < 1e-10);
        CHECK(gen_ks(s).u == f.u);
    }
}

TEST_CASE("Burgers generator", "[systems]") {
    SECTION("sine initial condition forms a shock near t = 1") {
        BurgersSpec s;
        s.samples = 151;
        const FieldTrajectory f = gen_burgers(s);
        auto max_slope = [&](std::size_t k) {
            const Vec u = f.snapshot(k);
            double m = 0.0;
            for (Eigen::Index i = 0; i < u.size(); ++i) m = std::max(m, std::abs(u[(i + 1) % u.size()] - u[i]) / f.dx);
            return m;
        };
        const double s0 = max_slope(0);
        CHECK(max_slope(80) < 10.0 * s0);
        CHECK(max_slope(120) > 10.0 * s0);
        CHECK(std::abs((f.u.row(150).sum() - f.u.row(0).sum()) * f.dx) < 1e-10);
    }
    SECTION("random Fourier initial condition is seeded") {
        BurgersSpec s;
        s.ic = BurgersSpec::Ic::random_fourier;
        const Vec a = burgers_initial_condition(s);
        CHECK(burgers_initial_condition(s) == a);
        s.seed = 43;
        CHECK(burgers_initial_condition(s) != a);
        CHECK(std::abs(a.mean()) < 1e-12);
    }
}

TEST_CASE("Hopf map and dataset", "[systems]") {
    CHECK(hopf_map(Vec{{1.0, 0.0, 0.0, 0.0}}) == Vec{{0.0, 0.0, 1.0}});
    const double r = 1.0 / std::sqrt(2.0);
    const Vec h = hopf_map(Vec{{r, 0.0, r, 0.0}});
    CHECK_THAT(h[0], WithinAbs(1.0, 1e-15));
    CHECK_THAT(h[1], WithinAbs(0.0, 1e-15));
    CHECK_THAT(h[2], WithinAbs(0.0, 1e-15));

    const HopfData d = gen_hopf_dataset(300, 10, 16, 5);
    REQUIRE(d.x.rows() == 460);
    CHECK(std::count(d.fiber.begin(), d.fiber.end(), -1) == 300);
    Rng rng(1);
    for (Eigen::Index k = 0; k < d.x.rows(); ++k) {
        const Vec x = d.x.row(k).transpose();
        REQUIRE(std::abs(x.norm() - 1.0) < 1e-12);
        REQUIRE(std::abs(d.h.row(k).norm() - 1.0) < 1e-12);
        REQUIRE((hopf_map(hopf_rotate(x, rng.uniform(0.0, 7.0))) - hopf_map(x)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // points sharing a fiber share an image
    for (Eigen::Index k = 301; k < 316; ++k) CHECK((d.h.row(k) - d.h.row(300)).norm() < 1e-12);
    CHECK(gen_hopf_dataset(300, 10, 16, 5).x == d.x);
}
