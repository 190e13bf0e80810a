#pragma once

// Fixed-step integrators (Euler, RK4), the Rusanov finite-volume tendency for
// Burgers-type conservation laws, and an ETDRK4 Kuramoto-Sivashinsky stepper.

#include "kandy/core.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>

namespace kandy {

enum class Integrator { euler, rk4 };

inline const char* integrator_name(Integrator s) { return s == Integrator::euler ? "euler" : "rk4"; }

namespace detail {
inline Vec checked_state(Vec x, const char* who) {
    if (!x.allFinite()) throw DivergenceError(std::string(who) + " produced a non-finite state");
    return x;
}
}  // namespace detail

template <class F>
Vec euler_step(F&& f, const Vec& x, double dt) {
    return detail::checked_state(x + dt * f(x), "euler step");
}

template <class F>
Vec rk4_step(F&& f, const Vec& x, double dt) {
    const Vec k1 = f(x);
    const Vec k2 = f(Vec(x + 0.5 * dt * k1));
    const Vec k3 = f(Vec(x + 0.5 * dt * k2));
    const Vec k4 = f(Vec(x + dt * k3));
    return detail::checked_state(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), "rk4 step");
}

template <class F>
Vec step(Integrator scheme, F&& f, const Vec& x, double dt) {
    return scheme == Integrator::euler ? euler_step(f, x, dt) : rk4_step(f, x, dt);
}

/// Semi-discrete tendency of u_t + (u^2/2)_x = nu * u_xx on a periodic grid,
/// using first-order Rusanov (local Lax-Friedrichs) interface fluxes and a
/// central second difference for the viscous term.
inline Vec rusanov_rhs(const Vec& u, double dx, double nu) {
    require(dx > 0.0, "rusanov_rhs needs dx > 0");
    require(nu >= 0.0, "viscosity must be nonnegative");
    const Eigen::Index n = u.size();
    require(n >= 3, "rusanov_rhs needs at least 3 cells");
    Vec flux(n);  // flux[i] lives at interface i+1/2
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ul = u[i];
        const double ur = u[(i + 1) % n];
        const double a = std::max(std::abs(ul), std::abs(ur));
        flux[i] = 0.25 * (ul * ul + ur * ur) - 0.5 * a * (ur - ul);
    }
    Vec out(n);
    const double inv_dx2 = 1.0 / (dx * dx);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index im = (i + n - 1) % n;
        const Eigen::Index ip = (i + 1) % n;
        out[i] = -(flux[i] - flux[im]) / dx;
        if (nu > 0.0) out[i] += nu * (u[ip] - 2.0 * u[i] + u[im]) * inv_dx2;
    }
    return out;
}

/// Stable RK4 step size for the Rusanov scheme: 0.4 dx / max|u|, further
/// capped by the explicit diffusive limit when nu > 0.
inline double burgers_cfl_dt(const Vec& u, double dx, double nu) {
    const double umax = u.cwiseAbs().maxCoeff();
    double dt = umax > 0.0 ? 0.4 * dx / umax : std::numeric_limits<double>::infinity();
    if (nu > 0.0) dt = std::min(dt, 0.25 * dx * dx / nu);
    return dt;
}

/// Advances u by exactly `duration` with CFL-limited RK4 substeps.
inline Vec burgers_advance(Vec u, double dx, double nu, double duration) {
    double t = 0.0;
    auto rhs = [&](const Vec& v) { return rusanov_rhs(v, dx, nu); };
    while (t < duration) {
        double h = std::min(burgers_cfl_dt(u, dx, nu), duration - t);
        if (!std::isfinite(h)) h = duration - t;
        // avoid a sliver step from rounding at the end of the interval
        if (duration - t - h < 1e-12 * duration) h = duration - t;
        u = rk4_step(rhs, u, h);
        t += h;
    }
    return u;
}

/// ETDRK4 stepper (exponential time differencing, fourth order) for
///   u_t = -u u_x - nu u_xx - u_xxxx
/// on a periodic domain of length L with N points. Linear part in Fourier
/// space: nu k^2 - k^4. The phi-function coefficients are evaluated by a
/// 32-point contour mean; the quadratic term is dealiased with the 2/3 rule.
class KsEtdrk4 {
public:
    using Spectrum = std::vector<std::complex<double>>;

    KsEtdrk4(int n, double length, double nu, double dt) : n_(n), length_(length), nu_(nu), dt_(dt) {
        require(n >= 8 && n % 2 == 0, "KS grid size must be even and at least 8");
        require(length > 0.0 && dt > 0.0, "KS domain length and dt must be positive");
        const double dx = length / n;
        const std::complex<double> I(0.0, 1.0);
        e_.resize(n);
        e2_.resize(n);
        q_.resize(n);
        f1_.resize(n);
        f2_.resize(n);
        f3_.resize(n);
        g_.resize(n);
        constexpr int kContour = 32;
        for (int k = 0; k < n; ++k) {
            const int kk = (k <= n / 2) ? k : k - n;
            const double kappa = 2.0 * std::numbers::pi * kk / (n * dx);
            const double lin = nu * kappa * kappa - kappa * kappa * kappa * kappa;
            e_[k] = std::exp(dt * lin);
            e2_[k] = std::exp(0.5 * dt * lin);
            std::complex<double> q = 0.0, a = 0.0, b = 0.0, c = 0.0;
            for (int m = 0; m < kContour; ++m) {
                const std::complex<double> r = std::exp(I * (2.0 * std::numbers::pi * (m + 0.5) / kContour));
                const std::complex<double> z = dt * lin + r;
                const std::complex<double> ez = std::exp(z);
                const std::complex<double> z3 = z * z * z;
                q += (std::exp(0.5 * z) - 1.0) / z;
                a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                b += (2.0 + z + ez * (-2.0 + z)) / z3;
                c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            q_[k] = dt * (q / double(kContour)).real();
            f1_[k] = dt * (a / double(kContour)).real();
            f2_[k] = dt * (b / double(kContour)).real();
            f3_[k] = dt * (c / double(kContour)).real();
            // N(u) = -(1/2) (u^2)_x, dealiased
            const bool keep = std::abs(kk) < n / 3.0 && !(k == n / 2);
            g_[k] = keep ? -0.5 * I * kappa : 0.0;
        }
    }

    int size() const noexcept { return n_; }
    double dt() const noexcept { return dt_; }
    double length() const noexcept { return length_; }
    double nu() const noexcept { return nu_; }

    Spectrum to_spectral(const Vec& u) const {
        require(u.size() == n_, "KS field has wrong size");
        std::vector<double> in(u.data(), u.data() + n_);
        Spectrum s;
        fft_.fwd(s, in);
        return s;
    }

    Vec to_physical(const Spectrum& s) const {
        std::vector<double> out;
        Spectrum copy = s;
        fft_.inv(out, copy);
        Vec u(n_);
        for (int i = 0; i < n_; ++i) u[i] = out[i];
        return u;
    }

    Spectrum step_spectral(const Spectrum& v) const {
        const Spectrum nv = nonlinear(v);
        Spectrum a(n_), b(n_), c(n_), out(n_);
        for (int k = 0; k < n_; ++k) a[k] = e2_[k] * v[k] + q_[k] * nv[k];
        const Spectrum na = nonlinear(a);
        for (int k = 0; k < n_; ++k) b[k] = e2_[k] * v[k] + q_[k] * na[k];
        const Spectrum nb = nonlinear(b);
        for (int k = 0; k < n_; ++k) c[k] = e2_[k] * a[k] + q_[k] * (2.0 * nb[k] - nv[k]);
        const Spectrum nc = nonlinear(c);
        for (int k = 0; k < n_; ++k) {
            out[k] = e_[k] * v[k] + nv[k] * f1_[k] + 2.0 * (na[k] + nb[k]) * f2_[k] + nc[k] * f3_[k];
            if (!std::isfinite(out[k].real()) || !std::isfinite(out[k].imag()))
                throw DivergenceError("KS ETDRK4 step produced non-finite modes");
        }
        return out;
    }

    Vec step(const Vec& u) const { return to_physical(step_spectral(to_spectral(u))); }

    /// Exact right-hand side -u u_x - nu u_xx - u_xxxx, evaluated spectrally
    /// without dealiasing.
    Vec rhs(const Vec& u) const {
        require(u.size() == n_, "KS field has wrong size");
        const Spectrum s = to_spectral(u);
        const double dx = length_ / n_;
        const std::complex<double> I(0.0, 1.0);
        Spectrum ux(n_), lin(n_);
        for (int k = 0; k < n_; ++k) {
            const int kk = (k <= n_ / 2) ? k : k - n_;
            const double kappa = 2.0 * std::numbers::pi * kk / (n_ * dx);
            ux[k] = (k == n_ / 2) ? 0.0 : I * kappa * s[k];
            lin[k] = (nu_ * kappa * kappa - kappa * kappa * kappa * kappa) * s[k];
        }
        const Vec dudx = to_physical(ux);
        const Vec l = to_physical(lin);
        return (-u.array() * dudx.array()).matrix() + l;
    }

private:
    Spectrum nonlinear(const Spectrum& v) const {
        Vec u = to_physical(v);
        Vec u2 = u.array().square();
        Spectrum s = to_spectral(u2);
        for (int k = 0; k < n_; ++k) s[k] *= g_[k];
        return s;
    }

    int n_;
    double length_;
    double nu_;
    double dt_;
    std::vector<std::complex<double>> e_, e2_, q_, f1_, f2_, f3_, g_;
    mutable Eigen::FFT<double> fft_;
};

}  // namespace kandy
