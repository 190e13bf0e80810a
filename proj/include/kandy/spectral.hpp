#pragma once

// Periodic-grid spatial derivatives: Fourier spectral and second-order
// central finite differences. Both operators satisfy D^T = (-1)^order D,
// which the field lift relies on for its adjoint.

#include "kandy/core.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>

namespace kandy {

enum class DerivativeScheme { spectral, central_fd };

/// Angular wavenumber of FFT bin k on a periodic grid of n points spacing dx.
inline double wavenumber(int k, int n, double dx) {
    const int kk = (k <= n / 2) ? k : k - n;
    return 2.0 * std::numbers::pi * kk / (n * dx);
}

/// d^order u / dx^order on a periodic grid. order must be 1, 2 or 4.
/// Spectral mode accepts any n (mixed-radix FFT); for even n the Nyquist mode
/// is dropped on odd orders so the result stays real and the operator stays
/// antisymmetric.
inline Vec spatial_derivative(const Vec& u, double dx, int order, DerivativeScheme scheme) {
    require(order == 1 || order == 2 || order == 4, "derivative order must be 1, 2 or 4");
    require(dx > 0.0 && std::isfinite(dx), "grid spacing dx must be positive");
    const int n = static_cast<int>(u.size());
    require(n >= 5, "periodic derivative needs at least 5 grid points");
    Vec out(n);
    if (scheme == DerivativeScheme::central_fd) {
        auto at = [&](int i) { return u[((i % n) + n) % n]; };
        for (int i = 0; i < n; ++i) {
            switch (order) {
                case 1: out[i] = (at(i + 1) - at(i - 1)) / (2.0 * dx); break;
                case 2: out[i] = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (dx * dx); break;
                default:
                    out[i] = (at(i + 2) - 4.0 * at(i + 1) + 6.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) /
                             (dx * dx * dx * dx);
            }
        }
        return out;
    }
    Eigen::FFT<double> fft;
    std::vector<double> in(u.data(), u.data() + n);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, in);
    const std::complex<double> I(0.0, 1.0);
    for (int k = 0; k < n; ++k) {
        if (n % 2 == 0 && k == n / 2 && (order % 2 == 1)) {
            spec[k] = 0.0;
            continue;
        }
        const double kappa = wavenumber(k, n, dx);
        spec[k] *= std::pow(I * kappa, order);
    }
    std::vector<double> back;
    fft.inv(back, spec);
    for (int i = 0; i < n; ++i) out[i] = back[i];
    return out;
}

}  // namespace kandy
