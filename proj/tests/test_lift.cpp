#include "kandy/lift.hpp"

#include <catch_amalgamated.hpp>

using namespace kandy;
using Catch::Matchers::WithinAbs;

namespace {

Vec periodic_grid(int n, double length = 2.0 * std::numbers::pi) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = length * i / n;
    return x;
}

}  // namespace

TEST_CASE("state lift evaluates monomials in declared order", "[lift]") {
    const auto l = LiftMap::state({"x", "y", "z"}, {"x", "y", "z", "x*y", "x*z", "y*z"});
    const Vec theta = l.lift_state(Vec{{1.0, 2.0, 3.0}});
    CHECK(theta == Vec{{1.0, 2.0, 3.0, 2.0, 3.0, 6.0}});
    CHECK(l.labels() == std::vector<std::string>{"x", "y", "z", "x*y", "x*z", "y*z"});
    CHECK_THROWS_AS(l.lift_state(Vec{{1.0, 2.0}}), InvalidArgument);
}

TEST_CASE("Hopf lift at the north pole", "[lift]") {
    const auto l = LiftMap::state({"x1", "x2", "x3", "x4"},
                                  {"x1*x3", "x2*x4", "x2*x3", "x1*x4", "x1^2 + x2^2 - x3^2 - x4^2"});
    CHECK(l.lift_state(Vec{{1.0, 0.0, 0.0, 0.0}}) == Vec{{0.0, 0.0, 0.0, 0.0, 1.0}});
}

TEST_CASE("identity lift returns the state", "[lift]") {
    const auto l = LiftMap::identity({"a", "b"});
    const Vec x{{-0.25, 7.5}};
    CHECK(l.lift_state(x) == x);
}

TEST_CASE("term grammar", "[lift]") {
    const auto l = LiftMap::state({"x", "y"}, {"2.5*y", "x^3", "1", "x*x*y", " x - y "});
    const Vec t = l.lift_state(Vec{{2.0, -3.0}});
    CHECK_THAT(t[0], WithinAbs(-7.5, 1e-15));
    CHECK(t[1] == 8.0);
    CHECK(t[2] == 1.0);
    CHECK(t[3] == -12.0);
    CHECK(t[4] == 5.0);
    CHECK(l.labels()[4] == "x - y");

    CHECK_THROWS_AS(LiftMap::state({"x"}, {"w"}), InvalidArgument);
    CHECK_THROWS_AS(LiftMap::state({"x"}, {"x", "x"}), InvalidArgument);
    CHECK_THROWS_AS(LiftMap::state({"x"}, {"x^"}), InvalidArgument);
    CHECK_THROWS_AS(LiftMap::state({"x"}, {"x*cos_theta"}), InvalidArgument);
    CHECK_THROWS_AS(LiftMap::state({"u"}, {"u_x"}), InvalidArgument);
}

TEST_CASE("theta features follow the Ikeda angle", "[lift]") {
    const ThetaParams tp{0.4, 6.0};
    const auto l = LiftMap::state({"x", "y"}, {"x*cos_theta", "y*sin_theta", "x*sin_theta", "y*cos_theta"}, tp);
    const Vec x{{0.3, -0.8}};
    const double th = 0.4 - 6.0 / (1.0 + 0.09 + 0.64);
    const Vec t = l.lift_state(x);
    CHECK_THAT(t[0], WithinAbs(0.3 * std::cos(th), 1e-15));
    CHECK_THAT(t[1], WithinAbs(-0.8 * std::sin(th), 1e-15));
    CHECK_THAT(t[2], WithinAbs(0.3 * std::sin(th), 1e-15));
    CHECK_THAT(t[3], WithinAbs(-0.8 * std::cos(th), 1e-15));
}

TEST_CASE("state jacobian matches finite differences", "[lift]") {
    const auto l = LiftMap::state({"x", "y"}, {"x*cos_theta", "y*sin_theta", "x^2*y", "x - 3*y"}, ThetaParams{0.4, 6.0});
    const Vec x{{0.7, -0.2}};
    const Mat jac = l.state_jacobian(x);
    const double h = 1e-6;
    for (int v = 0; v < 2; ++v) {
        Vec p = x, m = x;
        p[v] += h;
        m[v] -= h;
        const Vec fd = (l.lift_state(p) - l.lift_state(m)) / (2.0 * h);
        for (int t = 0; t < 4; ++t) CHECK_THAT(jac(t, v), WithinAbs(fd[t], 1e-7));
    }
}

TEST_CASE("spectral derivatives of Fourier modes", "[lift]") {
    const int n = 128;
    const double dx = 2.0 * std::numbers::pi / n;
    const Vec x = periodic_grid(n);
    const Vec c2 = x.unaryExpr([](double v) { return std::cos(2.0 * v); });
    const Vec s1 = x.array().sin();

    const Vec d1 = spatial_derivative(c2, dx, 1, DerivativeScheme::spectral);
    CHECK((d1 - (-2.0 * (2.0 * x.array()).sin()).matrix()).cwiseAbs().maxCoeff() < 1e-8);
    const Vec d2 = spatial_derivative(s1, dx, 2, DerivativeScheme::spectral);
    CHECK((d2 + s1).cwiseAbs().maxCoeff() < 1e-6);
    const Vec d4 = spatial_derivative(s1, dx, 4, DerivativeScheme::spectral);
    CHECK((d4 - s1).cwiseAbs().maxCoeff() < 1e-6);

    for (auto scheme : {DerivativeScheme::spectral, DerivativeScheme::central_fd})
        for (int order : {1, 2, 4})
            CHECK(spatial_derivative(Vec::Constant(n, 3.0), dx, order, scheme).cwiseAbs().maxCoeff() < 1e-9);

    CHECK_THROWS_AS(spatial_derivative(s1, dx, 3, DerivativeScheme::spectral), InvalidArgument);
    CHECK_THROWS_AS(spatial_derivative(s1, 0.0, 1, DerivativeScheme::spectral), InvalidArgument);
}

TEST_CASE("central differences converge at second order", "[lift]") {
    auto err = [](int n) {
        const double dx = 2.0 * std::numbers::pi / n;
        const Vec x = periodic_grid(n);
        const Vec u = x.array().sin();
        const Vec d = spatial_derivative(u, dx, 1, DerivativeScheme::central_fd);
        return (d - Vec(x.array().cos())).cwiseAbs().maxCoeff();
    };
    const double order = std::log2(err(64) / err(128));
    CHECK_THAT(order, WithinAbs(2.0, 0.05));
}

TEST_CASE("field lift rows", "[lift]") {
    const int n = 128;
    const double dx = 2.0 * std::numbers::pi / n;
    const Vec x = periodic_grid(n);

    const auto flat = LiftMap::field("u", {"u", "u_x"}, dx);
    const Mat rows = flat.lift_field(Vec::Constant(n, 1.5));
    CHECK((rows.col(0).array() == 1.5).all());
    CHECK(rows.col(1).cwiseAbs().maxCoeff() < 1e-12);

    const auto l = LiftMap::field("u", {"u_xx", "u*u_x"}, dx);
    const Vec u = x.array().sin();
    const Mat r = l.lift_field(u);
    CHECK((r.col(0) + u).cwiseAbs().maxCoeff() < 1e-6);
    const Vec sc = (x.array().sin() * x.array().cos()).matrix();
    CHECK((r.col(1) - sc).cwiseAbs().maxCoeff() < 1e-6);

    CHECK_THROWS_AS(LiftMap::field("u", {"u"}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(LiftMap::field("u", {"u_xxx"}, dx), InvalidArgument);
}

TEST_CASE("field vjp is the adjoint of the lift linearization", "[lift]") {
    const int n = 32;
    const double dx = 22.0 / n;
    for (auto scheme : {DerivativeScheme::spectral, DerivativeScheme::central_fd}) {
        const auto l = LiftMap::field("u", {"u", "u*u_x", "u_xx^2", "u*u_xxxx"}, dx, scheme);
        Rng rng(5);
        Vec u(n), du(n);
        Mat up(n, 4);
        for (int i = 0; i < n; ++i) {
            u[i] = std::sin(2.0 * std::numbers::pi * i / n) + 0.3 * rng.normal();
            du[i] = rng.normal();
            for (int t = 0; t < 4; ++t) up(i, t) = rng.normal();
        }
        // <upstream, J du> by central differences vs <vjp, du>
        const double h = 1e-6;
        const Mat jd = (l.lift_field(u + h * du) - l.lift_field(u - h * du)) / (2.0 * h);
        const double lhs = (up.array() * jd.array()).sum();
        const double rhs = l.field_vjp(u, up).dot(du);
        CHECK_THAT(rhs, WithinAbs(lhs, 1e-5 * std::max(1.0, std::abs(lhs))));
    }
}

TEST_CASE("lifting is pure and json round trips", "[lift]") {
    const auto l = LiftMap::field("u", {"u", "u*u_x", "u_xxxx"}, 0.1, DerivativeScheme::central_fd);
    Vec u(20);
    for (int i = 0; i < 20; ++i) u[i] = std::cos(0.3 * i) + 0.01 * i * i;
    const auto back = LiftMap::from_json(nlohmann::json::parse(l.to_json().dump()));
    CHECK(l.lift_field(u) == l.lift_field(u));
    CHECK(back.lift_field(u) == l.lift_field(u));
    CHECK(back.labels() == l.labels());

    const auto s = LiftMap::state({"x", "y"}, {"x*cos_theta", "y"}, ThetaParams{0.4, 6.0});
    const auto s2 = LiftMap::from_json(s.to_json());
    const Vec x{{0.1, 0.2}};
    CHECK(s2.lift_state(x) == s.lift_state(x));
}
