#pragma once

// Learnable univariate edge function: an affine term plus a sum of Gaussian
// radial basis functions on a uniform grid.
//
//   s(x) = slope*x + bias + sum_m c_m * exp(-scale * ((x - center_m) / h)^2)
//
// Centers are uniformly spaced over [lo, hi]; the bandwidth is
// h = knots * (hi - lo) / (G - 1), so larger `knots` gives wider bumps.

#include "kandy/core.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>

namespace kandy {

enum class BasisKind { gaussian_rbf };

/// Initial coefficient policy for new splines.
struct SplineInit {
    enum class Kind { zero, small_random } kind = Kind::small_random;
    std::uint64_t seed = 0;
    double amplitude = 0.1;

    static SplineInit zero() { return {Kind::zero, 0, 0.0}; }
    static SplineInit small_random(std::uint64_t seed, double amplitude = 0.1) {
        return {Kind::small_random, seed, amplitude};
    }
};

class Spline1D {
public:
    static constexpr double kDefaultScale = 3.0;

    /// Grid spline with G >= 2 basis centers.
    static Spline1D make(double lo, double hi, int grid, int knots, SplineInit init,
                         double basis_scale = kDefaultScale) {
        require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "spline domain must satisfy lo < hi");
        require(grid >= 2, "spline grid size must be at least 2");
        require(knots >= 1, "spline knots must be at least 1");
        require(basis_scale > 0.0 && std::isfinite(basis_scale), "basis scale must be positive");
        Spline1D s(lo, hi, grid, knots, basis_scale);
        if (init.kind == SplineInit::Kind::small_random) {
            Rng rng(init.seed);
            for (int m = 0; m < grid; ++m) s.params_[m] = rng.uniform(-init.amplitude, init.amplitude);
        }
        return s;
    }

    /// Single-center spline. Its one coefficient is normally held at zero, which
    /// leaves a purely affine edge.
    static Spline1D single(double lo, double hi, int knots = 1, double basis_scale = kDefaultScale) {
        require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "spline domain must satisfy lo < hi");
        require(knots >= 1, "spline knots must be at least 1");
        return Spline1D(lo, hi, 1, knots, basis_scale);
    }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    int grid_size() const noexcept { return grid_; }
    int knots() const noexcept { return knots_; }
    double basis_scale() const noexcept { return scale_; }
    BasisKind basis() const noexcept { return BasisKind::gaussian_rbf; }

    double bandwidth() const noexcept {
        return grid_ == 1 ? knots_ * (hi_ - lo_) : knots_ * (hi_ - lo_) / (grid_ - 1);
    }
    double center(int m) const noexcept {
        return grid_ == 1 ? 0.5 * (lo_ + hi_) : lo_ + m * (hi_ - lo_) / (grid_ - 1);
    }

    /// Parameters laid out as [coeffs(G), slope, bias].
    const Vec& params() const noexcept { return params_; }
    Vec& params() noexcept { return params_; }
    int param_count() const noexcept { return grid_ + 2; }
    double slope() const noexcept { return params_[grid_]; }
    double bias() const noexcept { return params_[grid_ + 1]; }
    auto coeffs() const { return params_.head(grid_); }

    void set_affine(double slope, double bias) {
        params_[grid_] = slope;
        params_[grid_ + 1] = bias;
    }
    void set_coeffs(std::span<const double> c) {
        require(static_cast<int>(c.size()) == grid_, "coefficient count must equal grid size");
        for (int m = 0; m < grid_; ++m) params_[m] = c[m];
    }

    double evaluate(double x) const noexcept {
        const double inv_h = 1.0 / bandwidth();
        double acc = slope() * x + bias();
        for (int m = 0; m < grid_; ++m) {
            const double u = (x - center(m)) * inv_h;
            acc += params_[m] * std::exp(-scale_ * u * u);
        }
        return acc;
    }

    /// Gradient of evaluate(x) with respect to params(); evaluate is exactly
    /// the dot product of this row with params().
    void basis_row(double x, std::span<double> out) const noexcept {
        const double inv_h = 1.0 / bandwidth();
        for (int m = 0; m < grid_; ++m) {
            const double u = (x - center(m)) * inv_h;
            out[m] = std::exp(-scale_ * u * u);
        }
        out[grid_] = x;
        out[grid_ + 1] = 1.0;
    }
    Vec basis_row(double x) const {
        Vec row(param_count());
        basis_row(x, std::span<double>(row.data(), row.size()));
        return row;
    }

    double input_derivative(double x) const noexcept {
        const double inv_h = 1.0 / bandwidth();
        double acc = slope();
        for (int m = 0; m < grid_; ++m) {
            const double u = (x - center(m)) * inv_h;
            acc += params_[m] * (-2.0 * scale_ * u * inv_h) * std::exp(-scale_ * u * u);
        }
        return acc;
    }

    /// Moves the grid to cover the samples (with a 5% margin on each side) and
    /// refits all parameters by ridge-floored least squares so the function
    /// values at the samples are preserved as closely as the new basis allows.
    Spline1D update_grid(std::span<const double> samples) const {
        require(!samples.empty(), "grid update needs at least one sample");
        double smin = samples[0], smax = samples[0];
        for (double v : samples) {
            require(std::isfinite(v), "grid update samples must be finite");
            smin = std::min(smin, v);
            smax = std::max(smax, v);
        }
        if (!(smax > smin)) throw InvalidArgument("grid update samples are degenerate (all equal)");
        const double margin = 0.05 * (smax - smin);
        Spline1D fresh(smin - margin, smax + margin, grid_, knots_, scale_);

        const int p = param_count();
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
        Vec rhs = Vec::Zero(p);
        Vec row(p);
        for (double x : samples) {
            fresh.basis_row(x, std::span<double>(row.data(), p));
            const double y = evaluate(x);
            gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
            rhs += y * row;
        }
        gram.triangularView<Eigen::Upper>() = gram.transpose();
        const double ridge = 1e-8 * std::max(1.0, gram.diagonal().mean());
        gram.diagonal().array() += ridge;
        fresh.params_ = gram.ldlt().solve(rhs);
        if (grid_ == 1 && params_[0] == 0.0) fresh.params_[0] = 0.0;
        return fresh;
    }

    /// Same grid with parameters replaced.
    Spline1D with_params(const Vec& p) const {
        require(p.size() == param_count(), "parameter vector has wrong length");
        Spline1D s = *this;
        s.params_ = p;
        return s;
    }

    bool same_grid(const Spline1D& o) const noexcept {
        return lo_ == o.lo_ && hi_ == o.hi_ && grid_ == o.grid_ && knots_ == o.knots_ && scale_ == o.scale_;
    }

    nlohmann::json to_json() const {
        std::vector<double> c(params_.data(), params_.data() + grid_);
        return {{"lo", lo_},       {"hi", hi_},         {"G", grid_},     {"k", knots_},
                {"coeffs", c},     {"slope", slope()}, {"bias", bias()}, {"scale", scale_},
                {"basis", "gaussian_rbf"}};
    }

    static Spline1D from_json(const nlohmann::json& j) {
        if (j.at("basis").get<std::string>() != "gaussian_rbf")
            throw InvalidArgument("unsupported spline basis " + j.at("basis").get<std::string>());
        const double lo = j.at("lo").get<double>();
        const double hi = j.at("hi").get<double>();
        const int grid = j.at("G").get<int>();
        const int knots = j.at("k").get<int>();
        const double scale = j.value("scale", kDefaultScale);
        require(lo < hi && grid >= 1 && knots >= 1 && scale > 0.0, "invalid spline record");
        Spline1D s(lo, hi, grid, knots, scale);
        const auto c = j.at("coeffs").get<std::vector<double>>();
        s.set_coeffs(c);
        s.set_affine(j.at("slope").get<double>(), j.at("bias").get<double>());
        require(s.params_.allFinite(), "spline record has non-finite parameters");
        return s;
    }

private:
    Spline1D(double lo, double hi, int grid, int knots, double scale)
        : lo_(lo), hi_(hi), grid_(grid), knots_(knots), scale_(scale), params_(Vec::Zero(grid + 2)) {}

    double lo_;
    double hi_;
    int grid_;
    int knots_;
    double scale_;
    Vec params_;
};

}  // namespace kandy
