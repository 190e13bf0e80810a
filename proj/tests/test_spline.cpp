#include "kandy/spline.hpp"

#include <catch_amalgamated.hpp>

#include <vector>

using namespace kandy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Spline1D random_spline(std::uint64_t seed) {
    Spline1D s = Spline1D::make(-2.0, 3.0, 6, 2, SplineInit::small_random(seed, 1.0));
    s.set_affine(0.7, -0.3);
    return s;
}

}  // namespace

TEST_CASE("construction validates the domain and grid", "[spline]") {
    CHECK_THROWS_AS(Spline1D::make(1.0, 1.0, 5, 3, SplineInit::zero()), InvalidArgument);
    CHECK_THROWS_AS(Spline1D::make(2.0, 1.0, 5, 3, SplineInit::zero()), InvalidArgument);
    CHECK_THROWS_AS(Spline1D::make(-1.0, 1.0, 1, 3, SplineInit::zero()), InvalidArgument);
    CHECK_THROWS_AS(Spline1D::make(-1.0, 1.0, 5, 0, SplineInit::zero()), InvalidArgument);
}

TEST_CASE("zero spline has uniform centers and evaluates to zero", "[spline]") {
    const Spline1D s = Spline1D::make(-1.0, 1.0, 5, 3, SplineInit::zero());
    CHECK(s.evaluate(0.37) == 0.0);
    const std::vector<double> expected{-1.0, -0.5, 0.0, 0.5, 1.0};
    for (int m = 0; m < 5; ++m) CHECK_THAT(s.center(m), WithinAbs(expected[m], 1e-15));
    CHECK_THAT(s.bandwidth(), WithinAbs(3.0 * 0.5, 1e-15));
    CHECK(s.param_count() == 7);
}

TEST_CASE("small random init is seeded", "[spline]") {
    const auto a = Spline1D::make(0.0, 2.0, 7, 1, SplineInit::small_random(7));
    const auto b = Spline1D::make(0.0, 2.0, 7, 1, SplineInit::small_random(7));
    const auto c = Spline1D::make(0.0, 2.0, 7, 1, SplineInit::small_random(8));
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());
    CHECK(a.coeffs().cwiseAbs().maxCoeff() <= 0.1);
    CHECK(a.slope() == 0.0);
    CHECK(a.bias() == 0.0);
}

TEST_CASE("evaluate follows the basis formula", "[spline]") {
    Spline1D affine = Spline1D::make(-1.0, 1.0, 5, 3, SplineInit::zero());
    affine.set_affine(2.0, 1.0);
    CHECK_THAT(affine.evaluate(3.0), WithinAbs(7.0, 1e-15));

    // one center at 0 with h = 1: domain [-0.5, 0.5], knots 1
    Spline1D bump = Spline1D::single(-0.5, 0.5, 1);
    const std::vector<double> one{1.0};
    bump.set_coeffs(one);
    REQUIRE(bump.center(0) == 0.0);
    REQUIRE(bump.bandwidth() == 1.0);
    CHECK_THAT(bump.evaluate(0.0), WithinAbs(1.0, 1e-15));
    CHECK_THAT(bump.evaluate(1.0), WithinAbs(0.049787068367863944, 1e-15));
    CHECK(bump.input_derivative(0.0) == 0.0);

    const Vec row = bump.basis_row(0.0);
    REQUIRE(row.size() == 3);
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 0.0);
    CHECK(row[2] == 1.0);
}

TEST_CASE("evaluate is the dot product of basis_row and params", "[spline]") {
    const Spline1D s = random_spline(3);
    Rng rng(11);
    for (int k = 0; k < 50; ++k) {
        const double x = rng.uniform(-4.0, 5.0);
        CHECK_THAT(s.basis_row(x).dot(s.params()), WithinAbs(s.evaluate(x), 1e-13));
    }
}

TEST_CASE("basis_row matches finite differences over parameters", "[spline]") {
    const Spline1D s = random_spline(4);
    const double h = 1e-6;
    for (double x : {-1.7, 0.2, 2.9}) {
        const Vec row = s.basis_row(x);
        for (int p = 0; p < s.param_count(); ++p) {
            Vec plus = s.params(), minus = s.params();
            plus[p] += h;
            minus[p] -= h;
            const double fd = (s.with_params(plus).evaluate(x) - s.with_params(minus).evaluate(x)) / (2.0 * h);
            CHECK_THAT(fd, WithinAbs(row[p], 1e-6 * std::max(1.0, std::abs(row[p]))));
        }
    }
}

TEST_CASE("input_derivative matches central differences", "[spline]") {
    Spline1D zero = Spline1D::make(-1.0, 1.0, 5, 3, SplineInit::zero());
    zero.set_affine(2.0, 0.0);
    CHECK(zero.input_derivative(0.3) == 2.0);

    const Spline1D s = random_spline(5);
    Rng rng(12);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const double x = rng.uniform(-2.0, 3.0);
        const double fd = (s.evaluate(x + h) - s.evaluate(x - h)) / (2.0 * h);
        const double an = s.input_derivative(x);
        CHECK_THAT(an, WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
    }
}

TEST_CASE("update_grid refits to the new domain", "[spline]") {
    SECTION("same domain keeps values at the samples") {
        const Spline1D s = random_spline(6);
        std::vector<double> xs;
        // samples whose min/max minus the 5% margin land exactly on [-2, 3]
        const double lo = -2.0 + 5.0 / 22.0, hi = 3.0 - 5.0 / 22.0;
        for (int k = 0; k <= 200; ++k) xs.push_back(lo + (hi - lo) * k / 200.0);
        const Spline1D t = s.update_grid(xs);
        CHECK_THAT(t.lo(), WithinAbs(-2.0, 1e-12));
        CHECK_THAT(t.hi(), WithinAbs(3.0, 1e-12));
        double ss = 0.0;
        for (double x : xs) ss += std::pow(t.evaluate(x) - s.evaluate(x), 2);
        CHECK(std::sqrt(ss / xs.size()) < 1e-6);
    }
    SECTION("zero spline stays zero") {
        const Spline1D s = Spline1D::make(-1.0, 1.0, 5, 3, SplineInit::zero());
        const std::vector<double> xs{-3.0, -1.0, 0.5, 4.0};
        const Spline1D t = s.update_grid(xs);
        CHECK(t.params().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("wider samples widen the domain") {
        const Spline1D s = random_spline(7);
        const std::vector<double> xs{-10.0, 0.0, 10.0};
        const Spline1D t = s.update_grid(xs);
        CHECK(t.lo() <= -10.0);
        CHECK(t.hi() >= 10.0);
    }
    SECTION("degenerate samples are rejected") {
        const std::vector<double> xs{1.0, 1.0, 1.0};
        CHECK_THROWS_AS(random_spline(8).update_grid(xs), InvalidArgument);
    }
}

TEST_CASE("json round trip is exact", "[spline]") {
    const Spline1D s = random_spline(9);
    const Spline1D t = Spline1D::from_json(nlohmann::json::parse(s.to_json().dump()));
    CHECK(s.same_grid(t));
    CHECK(s.params() == t.params());
    for (double x : {-1.0, 0.0, 2.5}) CHECK(s.evaluate(x) == t.evaluate(x));
    auto bad = s.to_json();
    bad["basis"] = "bspline";
    CHECK_THROWS_AS(Spline1D::from_json(bad), InvalidArgument);
}
