#pragma once

// Evaluation tools for chaotic systems: Lyapunov exponents, NRMSE horizon
// curves, autoregressive rollouts, field error maps, Hopf fiber metrics,
// correlation dimension and the two-sample Kolmogorov-Smirnov statistic.

#include "kandy/systems.hpp"
#include "kandy/training.hpp"

#include <functional>
#include <numeric>

namespace kandy {

struct LyapunovSettings {
    double dt = 0.005;
    double renorm_interval = 1.0;  // time between renormalizations
    std::size_t transient = 100;   // intervals discarded
    std::size_t intervals = 10000; // intervals averaged
    double d0 = 1e-8;
    Integrator integrator = Integrator::rk4;
};

/// Benettin estimate for a flow x' = f(x): a companion trajectory at distance
/// d0 is renormalized after every interval; the exponent is the mean log
/// growth per unit time.
inline double largest_lyapunov_flow(const std::function<Vec(const Vec&)>& f, Vec x, const LyapunovSettings& s) {
    require(s.dt > 0.0 && s.renorm_interval >= s.dt && s.intervals >= 1, "invalid Lyapunov settings");
    const auto steps = static_cast<std::size_t>(std::llround(s.renorm_interval / s.dt));
    const double interval = static_cast<double>(steps) * s.dt;
    Vec dir = Vec::Ones(x.size()) / std::sqrt(static_cast<double>(x.size()));
    Vec y = x + s.d0 * dir;
    double sum = 0.0;
    for (std::size_t k = 0; k < s.transient + s.intervals; ++k) {
        for (std::size_t n = 0; n < steps; ++n) {
            x = step(s.integrator, f, x, s.dt);
            y = step(s.integrator, f, y, s.dt);
        }
        const double d = (y - x).norm();
        require(d > 0.0 && std::isfinite(d), "Lyapunov companion collapsed or diverged");
        if (k >= s.transient) sum += std::log(d / s.d0);
        y = x + (s.d0 / d) * (y - x);
    }
    return sum / (static_cast<double>(s.intervals) * interval);
}

/// Benettin estimate for a map, renormalized every iteration.
inline double largest_lyapunov_map(const std::function<Vec(const Vec&)>& f, Vec x, std::size_t transient,
                                   std::size_t iterations, double d0 = 1e-8) {
    require(iterations >= 1, "Lyapunov estimate needs at least one iteration");
    Vec y = x + d0 * Vec::Ones(x.size()) / std::sqrt(static_cast<double>(x.size()));
    double sum = 0.0;
    for (std::size_t k = 0; k < transient + iterations; ++k) {
        x = f(x);
        y = f(y);
        const double d = (y - x).norm();
        require(d > 0.0 && std::isfinite(d), "Lyapunov companion collapsed or diverged");
        if (k >= transient) sum += std::log(d / d0);
        y = x + (d0 / d) * (y - x);
    }
    return sum / static_cast<double>(iterations);
}

inline double lyapunov_time(double lambda_max) {
    require(lambda_max > 0.0, "Lyapunov time needs a positive exponent");
    return 1.0 / lambda_max;
}

/// Cumulative NRMSE: value n is
///   sqrt( (1/(n+1)) sum_{m<=n} |pred_m - truth_m|^2 / N ) / sigma,
/// sigma = RMS amplitude of truth over all samples and components.
inline Vec nrmse_curve(const Mat& pred, const Mat& truth) {
    require(pred.rows() == truth.rows() && pred.cols() == truth.cols() && pred.rows() > 0,
            "NRMSE needs aligned, nonempty trajectories");
    const double sigma = std::sqrt(truth.array().square().mean());
    if (!(sigma > 0.0)) throw InvalidArgument("NRMSE is undefined for an all-zero truth trajectory");
    const auto dims = static_cast<double>(truth.cols());
    Vec out(pred.rows());
    double acc = 0.0;
    for (Eigen::Index n = 0; n < pred.rows(); ++n) {
        acc += (pred.row(n) - truth.row(n)).squaredNorm();
        out[n] = std::sqrt(acc / (static_cast<double>(n + 1) * dims)) / sigma;
    }
    return out;
}

struct RolloutResult {
    Trajectory trajectory;
    bool diverged = false;
};

/// Autoregressive rollout of a state model. Aborts (keeping the partial
/// trajectory) when any component leaves `envelope` (per-component bound on
/// |x|) or becomes non-finite. Map models ignore the integrator and dt.
inline RolloutResult rollout(const KandyModel& m, const Vec& x0, std::size_t n_steps, DatasetKind kind,
                             Integrator scheme, double dt, const Vec& envelope = Vec()) {
    require(!m.lift().is_field(), "use rollout_field for field models");
    require(static_cast<std::size_t>(x0.size()) == m.lift().state_dim(), "initial state has wrong dimension");
    const LearnedField f(m);
    RolloutResult r;
    r.trajectory.names = m.lift().variables();
    r.trajectory.dt = kind == DatasetKind::map ? 1.0 : dt;
    std::vector<Vec> xs{x0};
    Vec x = x0;
    for (std::size_t n = 0; n < n_steps; ++n) {
        try {
            x = kind == DatasetKind::map ? f(x) : step(scheme, f, x, dt);
        } catch (const Error&) {
            r.diverged = true;
            break;
        }
        if (!x.allFinite() || (envelope.size() == x.size() && (x.cwiseAbs().array() > envelope.array()).any())) {
            r.diverged = true;
            break;
        }
        xs.push_back(x);
    }
    r.trajectory.states.resize(static_cast<Eigen::Index>(xs.size()), x0.size());
    for (std::size_t k = 0; k < xs.size(); ++k) r.trajectory.states.row(static_cast<Eigen::Index>(k)) = xs[k].transpose();
    return r;
}

/// Field rollout with `substeps` RK4 steps between stored snapshots.
inline FieldTrajectory rollout_field(const KandyModel& m, const Vec& u0, std::size_t snapshots, double dt,
                                     int substeps, bool* diverged = nullptr) {
    require(m.lift().is_field(), "rollout_field needs a field model");
    require(substeps >= 1 && dt > 0.0 && snapshots >= 1, "invalid field rollout settings");
    const LearnedField f(m);
    FieldTrajectory out;
    out.dx = m.lift().dx();
    out.dt = dt;
    out.variable = m.lift().variables()[0];
    std::vector<Vec> us{u0};
    Vec u = u0;
    const double h = dt / substeps;
    const double bound = 1e3 * std::max(1.0, u0.cwiseAbs().maxCoeff());
    bool bad = false;
    for (std::size_t s = 1; s < snapshots && !bad; ++s) {
        try {
            for (int k = 0; k < substeps; ++k) u = rk4_step(f, u, h);
        } catch (const Error&) {
            bad = true;
            break;
        }
        if (u.cwiseAbs().maxCoeff() > bound) {
            bad = true;
            break;
        }
        us.push_back(u);
    }
    out.u.resize(static_cast<Eigen::Index>(us.size()), u0.size());
    for (std::size_t k = 0; k < us.size(); ++k) out.u.row(static_cast<Eigen::Index>(k)) = us[k].transpose();
    if (diverged) *diverged = bad;
    return out;
}

struct ErrorField {
    Mat error;  // pred - truth
    Vec rms;    // per snapshot
};

inline ErrorField error_field(const Mat& pred, const Mat& truth) {
    require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "error field needs identical grids");
    ErrorField e;
    e.error = pred - truth;
    e.rms.resize(e.error.rows());
    for (Eigen::Index r = 0; r < e.error.rows(); ++r)
        e.rms[r] = std::sqrt(e.error.row(r).squaredNorm() / static_cast<double>(e.error.cols()));
    return e;
}

struct FiberMetrics {
    double mean_angular_error = 0.0;
    double p95_radial_error = 0.0;
    double mean_fiber_rms = 0.0;
    double max_fiber_error = 0.0;

    nlohmann::json to_json() const {
        return {{"mean_angular_error", mean_angular_error},
                {"p95_radial_error", p95_radial_error},
                {"mean_fiber_rms", mean_fiber_rms},
                {"max_fiber_error", max_fiber_error}};
    }
};

/// Metrics of predictions p (rows) against the Hopf dataset. Angular error is
/// the angle between p and the true point on S^2; radial error is
/// | |p| - 1 |; fiber RMS is the spread of predictions along each sampled
/// circle; max fiber error is the largest deviation from a fiber's mean.
inline FiberMetrics fiber_metrics(const Mat& pred, const HopfData& d) {
    require(pred.rows() == d.h.rows() && pred.cols() == 3, "predictions must be samples x 3");
    FiberMetrics fm;
    std::vector<double> radial(static_cast<std::size_t>(pred.rows()));
    double ang = 0.0;
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
        const Eigen::Vector3d p = pred.row(r).transpose();
        const Eigen::Vector3d h = d.h.row(r).transpose();
        ang += std::atan2(p.cross(h).norm(), p.dot(h));
        radial[static_cast<std::size_t>(r)] = std::abs(p.norm() - 1.0);
    }
    fm.mean_angular_error = ang / static_cast<double>(pred.rows());
    std::sort(radial.begin(), radial.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(radial.size()))) - 1;
    fm.p95_radial_error = radial[std::min(idx, radial.size() - 1)];

    int fibers = 0;
    for (int f : d.fiber) fibers = std::max(fibers, f + 1);
    double rms_sum = 0.0;
    for (int f = 0; f < fibers; ++f) {
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        int count = 0;
        for (std::size_t r = 0; r < d.fiber.size(); ++r)
            if (d.fiber[r] == f) {
                mean += pred.row(static_cast<Eigen::Index>(r)).transpose();
                ++count;
            }
        if (count == 0) continue;
        mean /= count;
        double ss = 0.0;
        for (std::size_t r = 0; r < d.fiber.size(); ++r)
            if (d.fiber[r] == f) {
                const double dev = (pred.row(static_cast<Eigen::Index>(r)).transpose() - mean).norm();
                ss += dev * dev;
                fm.max_fiber_error = std::max(fm.max_fiber_error, dev);
            }
        rms_sum += std::sqrt(ss / count);
    }
    fm.mean_fiber_rms = fibers > 0 ? rms_sum / fibers : 0.0;
    return fm;
}

inline Mat predict_static(const KandyModel& m, const Mat& inputs) {
    Mat rows(inputs.rows(), static_cast<Eigen::Index>(m.n_in()));
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) rows.row(r) = m.lift().lift_state(inputs.row(r).transpose()).transpose();
    return m.forward_field(rows);
}

inline FiberMetrics fiber_metrics(const KandyModel& m, const HopfData& d) { return fiber_metrics(predict_static(m, d.x), d); }

/// Grassberger-Procaccia dimension: least-squares slope of log C(r) against
/// log r at `count` log-spaced radii in [r_min, r_max], where C(r) is the
/// fraction of point pairs closer than r. Radii with C(r) = 0 are skipped.
inline double correlation_dimension(const Mat& points, double r_min, double r_max, int count = 12) {
    require(r_min > 0.0 && r_max > r_min && count >= 3, "invalid correlation-dimension radii");
    const auto n = static_cast<std::size_t>(points.rows());
    require(n >= 2, "correlation dimension needs points");
    std::vector<double> radii(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        radii[static_cast<std::size_t>(k)] = r_min * std::pow(r_max / r_min, double(k) / double(count - 1));
    constexpr std::size_t kChunk = 64;
    const std::size_t chunks = chunk_count(n, kChunk);
    std::vector<std::vector<std::uint64_t>> hist(chunks, std::vector<std::uint64_t>(radii.size() + 1, 0));
    parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        auto& h = hist[c];
        for (std::size_t i = b; i < e; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dist = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
                // first radius strictly greater than dist
                const auto bin = static_cast<std::size_t>(std::upper_bound(radii.begin(), radii.end(), dist) - radii.begin());
                ++h[bin];
            }
    });
    std::vector<std::uint64_t> total(radii.size() + 1, 0);
    for (const auto& h : hist)
        for (std::size_t k = 0; k < h.size(); ++k) total[k] += h[k];
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    std::vector<double> lx, ly;
    std::uint64_t cum = 0;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        cum += total[k];  // pairs with dist < radii[k]
        if (cum > 0) {
            lx.push_back(std::log(radii[k]));
            ly.push_back(std::log(static_cast<double>(cum) / pairs));
        }
    }
    if (lx.size() < 3) throw InvalidArgument("fewer than 3 radii with nonzero correlation sum");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxy += (lx[k] - mx) * (ly[k] - my);
        sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    return sxy / sxx;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "KS statistic needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

}  // namespace kandy
