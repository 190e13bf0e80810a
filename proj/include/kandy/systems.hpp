#pragma once

// Ground-truth generators: Lorenz, Henon, Ikeda, Kuramoto-Sivashinsky,
// Burgers, and the Hopf fibration dataset.

#include "kandy/integrators.hpp"
#include "kandy/io.hpp"

#include <array>

namespace kandy {

// ---------------------------------------------------------------- Lorenz

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

inline Vec lorenz_rhs(const Vec& s, const LorenzParams& p = {}) {
    Vec d(3);
    d[0] = p.sigma * (s[1] - s[0]);
    d[1] = s[0] * (p.rho - s[2]) - s[1];
    d[2] = s[0] * s[1] - p.beta * s[2];
    return d;
}

struct LorenzSpec {
    LorenzParams params;
    double dt = 0.005;
    std::size_t samples = 10000;
    double burn_in = 2.0;  // time units discarded before recording
    Vec ic = Vec::Zero(3);
    double perturbation = 1e-3;  // std of the seeded Gaussian kick added to ic
    std::uint64_t seed = 0;
};

inline Trajectory integrate_lorenz(const Vec& x0, const LorenzParams& p, double dt, std::size_t samples,
                                   std::size_t skip = 0) {
    auto f = [&](const Vec& x) { return lorenz_rhs(x, p); };
    Vec x = x0;
    for (std::size_t n = 0; n < skip; ++n) x = rk4_step(f, x, dt);
    Trajectory tr;
    tr.names = {"x", "y", "z"};
    tr.dt = dt;
    tr.t0 = static_cast<double>(skip) * dt;
    tr.states.resize(static_cast<Eigen::Index>(samples), 3);
    for (std::size_t n = 0; n < samples; ++n) {
        if (n > 0) x = rk4_step(f, x, dt);
        tr.states.row(static_cast<Eigen::Index>(n)) = x.transpose();
    }
    return tr;
}

inline Trajectory gen_lorenz(const LorenzSpec& s) {
    require(s.dt > 0.0 && s.samples >= 2 && s.burn_in >= 0.0, "invalid Lorenz spec");
    require(s.ic.size() == 3, "Lorenz initial condition must have 3 components");
    Rng rng(s.seed);
    Vec x0 = s.ic;
    for (int c = 0; c < 3; ++c) x0[c] += s.perturbation * rng.normal();
    const auto skip = static_cast<std::size_t>(std::llround(s.burn_in / s.dt));
    return integrate_lorenz(x0, s.params, s.dt, s.samples, skip);
}

// ---------------------------------------------------------------- maps

struct HenonParams {
    double a = 1.4;
    double b = 0.3;
};

inline Vec henon_step(const Vec& s, const HenonParams& p = {}) {
    Vec n(2);
    n[0] = 1.0 + s[1] - p.a * s[0] * s[0];
    n[1] = p.b * s[0];
    return n;
}

struct IkedaParams {
    double u = 0.9;
    double k = 0.4;
    double p = 6.0;
};

inline Vec ikeda_step(const Vec& s, const IkedaParams& q = {}) {
    const double th = q.k - q.p / (1.0 + s[0] * s[0] + s[1] * s[1]);
    const double c = std::cos(th), sn = std::sin(th);
    Vec n(2);
    n[0] = 1.0 + q.u * (s[0] * c - s[1] * sn);
    n[1] = q.u * (s[0] * sn + s[1] * c);
    return n;
}

/// Orbit of a map: `samples` states recorded after `burn_in` discarded iterates.
template <class Map>
Trajectory iterate_map(Map&& f, Vec x0, std::size_t samples, std::size_t burn_in, std::vector<std::string> names) {
    for (std::size_t n = 0; n < burn_in; ++n) x0 = f(x0);
    Trajectory tr;
    tr.names = std::move(names);
    tr.dt = 1.0;
    tr.t0 = static_cast<double>(burn_in);
    tr.states.resize(static_cast<Eigen::Index>(samples), x0.size());
    for (std::size_t n = 0; n < samples; ++n) {
        if (n > 0) x0 = f(x0);
        if (!x0.allFinite()) throw DivergenceError("map orbit diverged");
        tr.states.row(static_cast<Eigen::Index>(n)) = x0.transpose();
    }
    return tr;
}

// ---------------------------------------------------------------- KS

struct KsSpec {
    double length = 22.0;
    int n = 64;
    double nu = 1.0;
    double dt = 0.05;
    std::size_t samples = 2000;  // retained snapshots
    std::size_t burn_in = 200;   // discarded snapshots
    int sample_every = 1;        // solver steps per snapshot
    bool zero_ic = false;
    std::uint64_t seed = 0;
};

/// Smooth random initial condition: a few low Fourier modes with seeded
/// amplitudes and phases.
inline Vec ks_initial_condition(const KsSpec& s) {
    Vec u = Vec::Zero(s.n);
    if (s.zero_ic) return u;
    Rng rng(s.seed);
    for (int k = 1; k <= 4; ++k) {
        const double amp = 0.5 * rng.normal();
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int i = 0; i < s.n; ++i) {
            const double x = s.length * i / s.n;
            u[i] += amp * std::cos(2.0 * std::numbers::pi * k * x / s.length + phase);
        }
    }
    return u;
}

inline FieldTrajectory gen_ks(const KsSpec& s) {
    require(s.samples >= 1 && s.sample_every >= 1, "invalid KS spec");
    KsEtdrk4 stepper(s.n, s.length, s.nu, s.dt);
    auto v = stepper.to_spectral(ks_initial_condition(s));
    FieldTrajectory f;
    f.dx = s.length / s.n;
    f.dt = s.dt * s.sample_every;
    f.t0 = static_cast<double>(s.burn_in) * f.dt;
    f.u.resize(static_cast<Eigen::Index>(s.samples), s.n);
    const std::size_t total = s.burn_in + s.samples;
    for (std::size_t snap = 0; snap < total; ++snap) {
        if (snap > 0)
            for (int k = 0; k < s.sample_every; ++k) v = stepper.step_spectral(v);
        if (snap >= s.burn_in) f.u.row(static_cast<Eigen::Index>(snap - s.burn_in)) = stepper.to_physical(v).transpose();
    }
    return f;
}

// ---------------------------------------------------------------- Burgers

struct BurgersSpec {
    enum class Ic { sine, random_fourier } ic = Ic::sine;
    int modes = 20;          // K, random_fourier only
    double decay = 1.0;      // p in k^-p
    std::uint64_t seed = 42;
    double nu = 0.0;
    int n = 256;
    double domain = 2.0 * std::numbers::pi;
    double dt_out = 0.01;    // snapshot spacing
    std::size_t samples = 101;
};

inline Vec burgers_initial_condition(const BurgersSpec& s) {
    const double dx = s.domain / s.n;
    Vec u = Vec::Zero(s.n);
    if (s.ic == BurgersSpec::Ic::sine) {
        for (int i = 0; i < s.n; ++i) u[i] = std::sin(2.0 * std::numbers::pi * i * dx / s.domain);
        return u;
    }
    Rng rng(s.seed);
    for (int k = 1; k <= s.modes; ++k) {
        const double xi = rng.normal();
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = xi * std::pow(static_cast<double>(k), -s.decay);
        for (int i = 0; i < s.n; ++i) u[i] += amp * std::sin(k * (2.0 * std::numbers::pi * i * dx / s.domain) + phi);
    }
    return u;
}

inline FieldTrajectory gen_burgers(const BurgersSpec& s) {
    require(s.n >= 8 && s.domain > 0.0 && s.dt_out > 0.0 && s.samples >= 1 && s.nu >= 0.0, "invalid Burgers spec");
    FieldTrajectory f;
    f.dx = s.domain / s.n;
    f.dt = s.dt_out;
    f.u.resize(static_cast<Eigen::Index>(s.samples), s.n);
    Vec u = burgers_initial_condition(s);
    for (std::size_t snap = 0; snap < s.samples; ++snap) {
        if (snap > 0) u = burgers_advance(u, f.dx, s.nu, s.dt_out);
        f.u.row(static_cast<Eigen::Index>(snap)) = u.transpose();
    }
    return f;
}

// ---------------------------------------------------------------- Hopf

inline Vec hopf_map(const Vec& x) {
    Vec h(3);
    h[0] = 2.0 * (x[0] * x[2] + x[1] * x[3]);
    h[1] = 2.0 * (x[1] * x[2] - x[0] * x[3]);
    h[2] = x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3];
    return h;
}

/// Multiplies (z1, z2) by e^{i angle}.
inline Vec hopf_rotate(const Vec& x, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Vec y(4);
    y[0] = c * x[0] - s * x[1];
    y[1] = s * x[0] + c * x[1];
    y[2] = c * x[2] - s * x[3];
    y[3] = s * x[2] + c * x[3];
    return y;
}

struct HopfData {
    Mat x;                   // samples x 4, on S^3
    Mat h;                   // samples x 3, on S^2
    std::vector<int> fiber;  // fiber index per sample, -1 for scattered samples
};

/// `points` uniform samples on S^3 followed by `fibers` circles of
/// `per_fiber` equally spaced points each.
inline HopfData gen_hopf_dataset(std::size_t points, std::size_t fibers, std::size_t per_fiber, std::uint64_t seed) {
    require(points + fibers >= 1, "Hopf dataset needs at least one sample");
    require(fibers == 0 || per_fiber >= 2, "each fiber needs at least two points");
    Rng rng(seed);
    auto sphere = [&] {
        Vec v(4);
        do {
            for (int c = 0; c < 4; ++c) v[c] = rng.normal();
        } while (v.norm() < 1e-12);
        return Vec(v / v.norm());
    };
    const std::size_t total = points + fibers * per_fiber;
    HopfData d;
    d.x.resize(static_cast<Eigen::Index>(total), 4);
    d.h.resize(static_cast<Eigen::Index>(total), 3);
    d.fiber.assign(total, -1);
    std::size_t r = 0;
    for (; r < points; ++r) d.x.row(static_cast<Eigen::Index>(r)) = sphere().transpose();
    for (std::size_t f = 0; f < fibers; ++f) {
        const Vec base = sphere();
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t k = 0; k < per_fiber; ++k, ++r) {
            const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(per_fiber);
            d.x.row(static_cast<Eigen::Index>(r)) = hopf_rotate(base, a).transpose();
            d.fiber[r] = static_cast<int>(f);
        }
    }
    for (std::size_t i = 0; i < total; ++i)
        d.h.row(static_cast<Eigen::Index>(i)) = hopf_map(d.x.row(static_cast<Eigen::Index>(i)).transpose()).transpose();
    return d;
}

}  // namespace kandy
