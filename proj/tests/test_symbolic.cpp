#include "kandy/symbolic.hpp"

#include <catch_amalgamated.hpp>

using namespace kandy;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = a + (b - a) * k / (n - 1);
    return v;
}

EdgeFit planted(double score, int complexity) {
    EdgeFit f;
    f.term.family = Family::linear;
    f.r2 = 1.0;
    f.score = score;
    f.complexity = complexity;
    return f;
}

// one output on inputs {x, y}: an exactly affine edge on x and a curved edge on y
KandyModel two_edge_model() {
    auto lift = std::make_shared<const LiftMap>(LiftMap::identity({"x", "y"}));
    std::vector<std::pair<double, double>> dom{{-2.0, 2.0}, {-2.0, 2.0}};
    KandyModel m = KandyModel::create(lift, {"f"}, SplineSpec{6, 2, 1.0, SplineInit::small_random(4, 1.0)},
                                      Normalization::identity(2), dom);
    Vec p = m.params();
    const auto x0 = static_cast<Eigen::Index>(m.param_offset(0, 0));
    p.segment(x0, 6).setZero();
    p[x0 + 6] = 1.5;
    p[x0 + 7] = 0.25;
    m.set_params(p);
    m.set_offsets(Vec{{-0.5}});
    return m;
}

Mat random_rows(std::uint64_t seed, Eigen::Index n) {
    Rng rng(seed);
    Mat rows(n, 2);
    for (Eigen::Index r = 0; r < n; ++r) rows.row(r) << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    return rows;
}

}  // namespace

TEST_CASE("score formula", "[symbolic]") {
    CHECK(score(1.0, 0, 1.0, 0.8) == 1.0);
    CHECK_THAT(score(0.99, 3, 1.0, 0.8), WithinAbs(-11.01, 1e-12));
    CHECK_THAT(score(0.9, 1, 1.0, 0.5), WithinAbs(-0.1, 1e-12));
    CHECK_THROWS_AS(score(0.9, 1, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(score(0.9, 1, 1.0, 0.0), InvalidArgument);
    for (int c = 0; c < 4; ++c) {
        CHECK(score(0.7, c + 1, 1.0, 0.8) < score(0.7, c, 1.0, 0.8));
        CHECK(score(0.8, c, 1.0, 0.8) > score(0.7, c, 1.0, 0.8));
    }
}

TEST_CASE("complexity weights", "[symbolic]") {
    CHECK(family_complexity(Family::zero) == 0);
    CHECK(family_complexity(Family::constant) == 0);
    CHECK(family_complexity(Family::linear) == 1);
    CHECK(family_complexity(Family::quadratic) == 2);
    CHECK(family_complexity(Family::cubic) == 3);
    for (Family f : {Family::sin, Family::cos, Family::tanh, Family::sech2, Family::exp, Family::reciprocal})
        CHECK(family_complexity(f) == 3);
}

TEST_CASE("fit_edge recovers planted functions", "[symbolic]") {
    const auto x = linspace(-3.0, 3.0, 200);
    std::vector<double> y(x.size());

    SECTION("linear") {
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = 2.0 * x[k];
        const EdgeFit f = fit_edge(x, y, SymbolicSettings{});
        CHECK(f.term.family == Family::linear);
        CHECK_THAT(f.term.alpha * f.term.beta, WithinAbs(2.0, 1e-6));
        CHECK_THAT(f.r2, WithinAbs(1.0, 1e-12));
    }
    SECTION("sech squared") {
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = 1.0 / std::pow(std::cosh(x[k]), 2);
        // a light complexity weight lets fit quality decide between families
        SymbolicSettings s;
        s.w = 1e-3;
        const EdgeFit f = fit_edge(x, y, s);
        CHECK(f.term.family == Family::sech2);
        CHECK(f.r2 >= 0.99);
    }
    SECTION("zero activations pick the zero family") {
        const EdgeFit f = fit_edge(x, y, SymbolicSettings{});
        CHECK(f.term.family == Family::zero);
        CHECK(f.complexity == 0);
    }
    SECTION("degenerate inputs give a zero fit with R2 = 0") {
        const std::vector<double> xd(20, 1.5);
        const std::vector<double> yd(20, 3.0);
        const EdgeFit f = fit_edge(xd, yd, SymbolicSettings{});
        CHECK(f.term.family == Family::zero);
        CHECK(f.r2 == 0.0);
    }
}

TEST_CASE("fit_edge is deterministic", "[symbolic]") {
    const auto x = linspace(-2.0, 2.0, 300);
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = 0.7 * std::sin(1.3 * x[k] + 0.2) + 0.1;
    SymbolicSettings s;
    s.w = 1e-3;
    const EdgeFit a = fit_edge(x, y, s, 5), b = fit_edge(x, y, s, 5);
    CHECK(a.term.family == Family::sin);
    CHECK(a.r2 > 0.999999);
    CHECK(a.term.alpha == b.term.alpha);
    CHECK(a.term.beta == b.term.beta);
}

TEST_CASE("select_edges", "[symbolic]") {
    const int inf = std::numeric_limits<int>::max();
    const auto all = std::numeric_limits<std::size_t>::max();

    SECTION("greedy complexity budget") {
        const std::vector<EdgeFit> fits{planted(0.9, 3), planted(0.8, 1), planted(0.7, 1)};
        CHECK(select_edges(fits, 0.0, all, 2) == std::vector<std::size_t>{1, 2});
        CHECK(select_edges(fits, 0.0, all, inf) == std::vector<std::size_t>{0, 1, 2});
        CHECK(select_edges(fits, 0.0, 1, inf) == std::vector<std::size_t>{0});
    }
    SECTION("threshold removes everything") {
        std::vector<EdgeFit> fits{planted(0.9, 1), planted(0.8, 1)};
        for (auto& f : fits) f.r2 = 0.5;
        CHECK(select_edges(fits, 0.8, all, inf).empty());
    }
    SECTION("ties go to lower complexity, then lower index") {
        const std::vector<EdgeFit> fits{planted(0.5, 2), planted(0.5, 1), planted(0.5, 1)};
        CHECK(select_edges(fits, 0.0, 1, inf) == std::vector<std::size_t>{1});
        CHECK(select_edges(fits, 0.0, 2, inf) == std::vector<std::size_t>{1, 2});
    }
    SECTION("zero fits never occupy a slot") {
        std::vector<EdgeFit> fits{planted(1.0, 0), planted(0.2, 1)};
        fits[0].term.family = Family::zero;
        CHECK(select_edges(fits, 0.0, 1, inf) == std::vector<std::size_t>{1});
    }
}

TEST_CASE("collect_activations samples every active edge", "[symbolic]") {
    KandyModel m = two_edge_model();
    const Mat rows = random_rows(1, 50);
    auto acts = collect_activations(m, rows);
    REQUIRE(acts.size() == 2);
    for (const auto& a : acts) CHECK(a.x.size() == 50);
    // affine edge gives collinear pairs
    for (std::size_t k = 0; k < 50; ++k) CHECK_THAT(acts[0].y[k], WithinAbs(1.5 * acts[0].x[k] + 0.25, 1e-14));
    m.prune_edge(1, 0);
    CHECK(collect_activations(m, rows).size() == 1);
    CHECK_THROWS_AS(collect_activations(m, Mat(0, 2)), InvalidArgument);
}

TEST_CASE("extraction substitutes, prunes and renders", "[symbolic]") {
    const KandyModel m = two_edge_model();
    const Mat rows = random_rows(2, 400);
    const Mat truth = m.forward_field(rows);
    const Dataset d = static_dataset(rows, truth);

    SECTION("exact edges are substituted without changing outputs") {
        SymbolicSettings s;
        s.tau = 0.999999;
        const auto r = extract_equations(m, d, s);
        REQUIRE(r.kept.size() == 1);
        CHECK(r.fits[r.kept[0]].input == 0);
        CHECK(r.model.edge(0, 0).state == EdgeState::symbolic);
        CHECK_FALSE(r.model.active(1, 0));
        const auto& eq = r.equations.outputs[0];
        CHECK_THAT(*eq.coefficient("x"), WithinAbs(1.5, 1e-10));
        CHECK_FALSE(eq.coefficient("y").has_value());

        // substitution fidelity on the affine edge
        double ss = 0.0;
        for (Eigen::Index k = 0; k < rows.rows(); ++k)
            ss += std::pow(r.model.edge_value(0, 0, rows(k, 0)) - m.edge_value(0, 0, rows(k, 0)), 2);
        CHECK(std::sqrt(ss / static_cast<double>(rows.rows())) < 1e-8);

        // zero fallback: the extra error is the variance of the zeroed activation
        const auto acts = collect_activations(m, rows);
        const auto& y = acts[1].y;
        double mu = 0.0, var = 0.0;
        for (double v : y) mu += v;
        mu /= static_cast<double>(y.size());
        for (double v : y) var += (v - mu) * (v - mu);
        var /= static_cast<double>(y.size());
        const double extra = (r.model.forward_field(rows) - truth).array().square().mean();
        INFO("extra " << extra << " variance " << var);
        CHECK(extra <= var * (1.0 + 1e-9) + 1e-14);
        CHECK(extra >= 0.99 * var);
    }
    SECTION("text and json are deterministic") {
        SymbolicSettings s;
        const auto a = extract_equations(m, d, s);
        const auto b = extract_equations(m, d, s);
        CHECK(a.equations.text() == b.equations.text());
        CHECK(a.equations.to_json().dump() == b.equations.to_json().dump());
        const auto back = DiscoveredEquation::from_json(nlohmann::json::parse(a.equations.to_json().dump()));
        CHECK(back.text() == a.equations.text());
        CHECK(a.equations.text().rfind("f = ", 0) == 0);
    }
    SECTION("a high threshold prunes the model to its mean") {
        SymbolicSettings s;
        s.tau = 1.0;
        s.w = 1e-3;
        KandyModel curved = m;
        Vec p = curved.params();
        p[static_cast<Eigen::Index>(curved.param_offset(0, 0))] = 0.3;  // bend the affine edge
        curved.set_params(p);
        const auto r = extract_equations(curved, d, s);
        CHECK(r.kept.empty());
        const Vec out = r.model.forward(Vec{{0.1, 0.2}});
        CHECK_THAT(out[0], WithinAbs(r.equations.outputs[0].constant, 1e-12));
        CHECK(r.equations.outputs[0].terms.empty());
    }
}
