#pragma once

// Losses, gradients and the training loop.
//
// total = L_deriv + lambda_roll * L_roll
//
// L_deriv is the mean squared Euclidean error between model outputs and
// supervision targets. Because the model is linear in every spline parameter,
// training evaluates it through the normal-equation form
//   L_j = (p_j' M p_j - 2 b_j' p_j + t_j' t_j) / N
// with M = A'A built once per grid. L_roll integrates the learned vector field
// over windows of `horizon` steps (re-lifting every integrator stage) and is
// differentiated by reverse accumulation through the unrolled steps.

#include "kandy/integrators.hpp"
#include "kandy/io.hpp"
#include "kandy/model.hpp"

#include <optional>

namespace kandy {

enum class DatasetKind { ode, map, pde_field, static_map };

inline const char* dataset_kind_name(DatasetKind k) {
    switch (k) {
        case DatasetKind::ode: return "ode";
        case DatasetKind::map: return "map";
        case DatasetKind::pde_field: return "pde_field";
        case DatasetKind::static_map: return "static";
    }
    return "?";
}

enum class TargetScheme { provided, forward_diff, central_diff };

/// Supervision pairs plus, for ode/map/pde kinds, the underlying trajectory
/// used to cut rollout windows.
///   ode/static: states (N x d), targets (N x n_out)
///   map:        states = orbit[0..T-2], targets = orbit[1..T-1]
///   pde_field:  states = snapshots (T x grid), targets = u_t (T x grid)
struct Dataset {
    DatasetKind kind = DatasetKind::ode;
    Mat states;
    Mat targets;
    Mat trajectory;  // consecutive states, spacing dt
    double dt = 1.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(states.rows()); }
};

/// Time derivatives of uniformly sampled rows. forward: (x[n+1]-x[n])/dt with a
/// backward difference on the last row; central: (x[n+1]-x[n-1])/(2dt) with
/// second-order one-sided differences at both ends (first order if only two
/// samples exist).
inline Mat estimate_derivatives(const Mat& x, double dt, TargetScheme scheme) {
    require(dt > 0.0 && std::isfinite(dt), "derivative estimation needs dt > 0");
    require(x.rows() >= 2, "derivative estimation needs at least 2 samples");
    require(scheme != TargetScheme::provided, "provided targets are not estimated");
    const Eigen::Index n = x.rows();
    Mat d(n, x.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        if (scheme == TargetScheme::forward_diff || n == 2) {
            const Eigen::Index a = (r == n - 1) ? r - 1 : r;
            d.row(r) = (x.row(a + 1) - x.row(a)) / dt;
        } else if (r == 0) {
            d.row(r) = (-3.0 * x.row(0) + 4.0 * x.row(1) - x.row(2)) / (2.0 * dt);
        } else if (r == n - 1) {
            d.row(r) = (3.0 * x.row(r) - 4.0 * x.row(r - 1) + x.row(r - 2)) / (2.0 * dt);
        } else {
            d.row(r) = (x.row(r + 1) - x.row(r - 1)) / (2.0 * dt);
        }
    }
    return d;
}

inline Dataset ode_dataset(const Mat& trajectory, double dt, const Mat& derivatives) {
    require(trajectory.rows() == derivatives.rows() && trajectory.cols() == derivatives.cols(),
            "trajectory and derivative shapes differ");
    return {DatasetKind::ode, trajectory, derivatives, trajectory, dt};
}

inline Dataset map_dataset(const Mat& orbit) {
    require(orbit.rows() >= 2, "map dataset needs at least 2 iterates");
    const Eigen::Index n = orbit.rows() - 1;
    return {DatasetKind::map, orbit.topRows(n), orbit.bottomRows(n), orbit, 1.0};
}

inline Dataset field_dataset(const Mat& snapshots, double dt, const Mat& time_derivatives) {
    require(snapshots.rows() == time_derivatives.rows() && snapshots.cols() == time_derivatives.cols(),
            "field and tendency shapes differ");
    return {DatasetKind::pde_field, snapshots, time_derivatives, snapshots, dt};
}

inline Dataset static_dataset(const Mat& inputs, const Mat& outputs) {
    require(inputs.rows() == outputs.rows(), "static dataset inputs and outputs differ in length");
    return {DatasetKind::static_map, inputs, outputs, Mat(), 1.0};
}

/// Lifted design rows and matching target rows. Field datasets contribute
/// one row per grid point per snapshot.
inline std::pair<Mat, Mat> lifted_rows(const LiftMap& lift, const Dataset& d) {
    require(d.size() > 0, "dataset is empty");
    if (d.kind == DatasetKind::pde_field) {
        require(lift.is_field(), "field dataset needs a field lift");
        const Eigen::Index n = d.states.cols();
        Mat rows(d.states.rows() * n, static_cast<Eigen::Index>(lift.size()));
        Mat tgt(d.states.rows() * n, 1);
        parallel_chunks(d.size(), 16, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s) {
                const auto r0 = static_cast<Eigen::Index>(s) * n;
                rows.middleRows(r0, n) = lift.lift_field(d.states.row(static_cast<Eigen::Index>(s)).transpose());
                tgt.middleRows(r0, n) = d.targets.row(static_cast<Eigen::Index>(s)).transpose();
            }
        });
        return {std::move(rows), std::move(tgt)};
    }
    require(!lift.is_field(), "state dataset needs a state lift");
    Mat rows(d.states.rows(), static_cast<Eigen::Index>(lift.size()));
    for (Eigen::Index r = 0; r < d.states.rows(); ++r) rows.row(r) = lift.lift_state(d.states.row(r).transpose()).transpose();
    return {std::move(rows), d.targets};
}

/// Standardization statistics (mean, population std; std 0 -> 1).
inline Normalization fit_normalization(const Mat& rows) {
    require(rows.rows() > 0, "cannot standardize an empty design");
    Normalization n;
    n.shift = rows.colwise().mean().transpose();
    n.scale.resize(rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const double var = (rows.col(c).array() - n.shift[c]).square().mean();
        n.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return n;
}

/// New model whose spline domains span the empirical range of each lifted
/// feature (in standardized units when `standardize` is set).
inline KandyModel init_model(std::shared_ptr<const LiftMap> lift, std::vector<std::string> outputs,
                             const SplineSpec& spec, bool standardize, const Mat& rows) {
    Normalization norm = standardize ? fit_normalization(rows) : Normalization::identity(lift->size());
    std::vector<std::pair<double, double>> domains;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const auto z = ((rows.col(c).array() - norm.shift[c]) / norm.scale[c]).eval();
        domains.emplace_back(z.minCoeff(), z.maxCoeff());
    }
    return KandyModel::create(std::move(lift), std::move(outputs), spec, std::move(norm), domains);
}

// ---------------------------------------------------------------- losses

/// Mean squared Euclidean error of the model on the dataset, by direct
/// evaluation.
inline double derivative_loss(const KandyModel& m, const Dataset& d) {
    auto [rows, tgt] = lifted_rows(m.lift(), d);
    require(static_cast<std::size_t>(tgt.cols()) == m.n_out(), "target width must equal model output count");
    const Mat pred = m.forward_field(rows);
    return (pred - tgt).array().square().sum() / static_cast<double>(rows.rows());
}

/// Normal-equation form of the derivative loss for a fixed grid.
class GramSystem {
public:
    GramSystem() = default;

    GramSystem(const KandyModel& m, const Mat& rows, const Mat& targets) {
        require(rows.rows() == targets.rows() && rows.rows() > 0, "design and targets must be nonempty and aligned");
        require(static_cast<std::size_t>(targets.cols()) == m.n_out(), "target width must equal model output count");
        const std::size_t p = m.params_per_output();
        const std::size_t n = static_cast<std::size_t>(rows.rows());
        constexpr std::size_t kChunk = 512;
        const std::size_t chunks = chunk_count(n, kChunk);
        std::vector<Eigen::MatrixXd> grams(chunks);
        std::vector<Eigen::MatrixXd> cross(chunks);
        parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
            Mat a(static_cast<Eigen::Index>(e - b), static_cast<Eigen::Index>(p));
            for (std::size_t r = b; r < e; ++r) {
                for (std::size_t i = 0; i < m.n_in(); ++i) {
                    const Spline1D& s = m.edge(i, 0).spline;
                    const double z = m.standardize(i, rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)));
                    s.basis_row(z, std::span<double>(&a(static_cast<Eigen::Index>(r - b),
                                                        static_cast<Eigen::Index>(m.column_offset(i))),
                                                     static_cast<std::size_t>(s.param_count())));
                }
            }
            grams[c] = a.transpose() * a;
            cross[c] = a.transpose() * targets.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
        });
        gram_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
        cross_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), targets.cols());
        for (std::size_t c = 0; c < chunks; ++c) {
            gram_ += grams[c];
            cross_ += cross[c];
        }
        tt_ = targets.colwise().squaredNorm().transpose();
        n_ = static_cast<double>(n);
    }

    double samples() const noexcept { return n_; }
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    const Eigen::MatrixXd& cross() const noexcept { return cross_; }

    /// Loss at the given flat parameters; `mask` zeros the slots of
    /// non-spline edges.
    double loss(const Vec& params, const Vec& active) const {
        const Eigen::Index p = gram_.rows();
        double total = 0.0;
        for (Eigen::Index j = 0; j < cross_.cols(); ++j) {
            const Vec pj = params.segment(j * p, p).cwiseProduct(active.segment(j * p, p));
            total += pj.dot(gram_ * pj) - 2.0 * cross_.col(j).dot(pj) + tt_[j];
        }
        return std::max(0.0, total / n_);
    }

    /// Adds the loss gradient into grad.
    void add_gradient(const Vec& params, const Vec& active, double weight, Vec& grad) const {
        const Eigen::Index p = gram_.rows();
        for (Eigen::Index j = 0; j < cross_.cols(); ++j) {
            const Vec pj = params.segment(j * p, p).cwiseProduct(active.segment(j * p, p));
            const Vec g = (2.0 / n_) * (gram_ * pj - cross_.col(j));
            grad.segment(j * p, p) += weight * g.cwiseProduct(active.segment(j * p, p));
        }
    }

private:
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd cross_;
    Vec tt_;
    double n_ = 0.0;
};

// ---------------------------------------------------------------- rollouts

struct RolloutSettings {
    int horizon = 10;
    Integrator integrator = Integrator::rk4;
    double dt = 0.005;
};

/// Learned dynamics x -> F(x) = f(Phi(x)) together with its vector-Jacobian
/// products, for state lifts and for field lifts (one output).
class LearnedField {
public:
    explicit LearnedField(const KandyModel& m) : m_(m) {
        if (m.lift().is_field()) require(m.n_out() == 1, "field models must have exactly one output");
        else require(m.n_out() == m.lift().state_dim(), "dynamics models need as many outputs as state variables");
    }

    Vec operator()(const Vec& x) const {
        if (!m_.lift().is_field()) {
            const Vec theta = m_.lift().lift_state(x);
            if (!theta.allFinite()) throw DivergenceError("rollout produced non-finite features");
            return m_.forward(theta);
        }
        const Mat rows = m_.lift().lift_field(x);
        if (!rows.allFinite()) throw DivergenceError("field rollout produced non-finite features");
        Vec out(rows.rows());
        for (Eigen::Index r = 0; r < rows.rows(); ++r) out[r] = m_.forward(rows.row(r).transpose())[0];
        return out;
    }

    /// Returns J_F(x)' v and adds v' dF/dparams into grad.
    Vec vjp(const Vec& x, const Vec& v, Vec& grad) const {
        const LiftMap& lift = m_.lift();
        if (!lift.is_field()) {
            const Vec theta = lift.lift_state(x);
            m_.accumulate_param_gradient(theta, v, grad);
            const Vec g_theta = m_.input_jacobian(theta).transpose() * v;
            return lift.state_jacobian(x).transpose() * g_theta;
        }
        const Mat rows = lift.lift_field(x);
        Mat g_theta(rows.rows(), rows.cols());
        Vec up(1);
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
            const Vec theta = rows.row(r).transpose();
            up[0] = v[r];
            m_.accumulate_param_gradient(theta, up, grad);
            for (std::size_t i = 0; i < m_.n_in(); ++i)
                g_theta(r, static_cast<Eigen::Index>(i)) = v[r] * m_.edge_derivative(i, 0, theta[static_cast<Eigen::Index>(i)]);
        }
        return lift.field_vjp(x, g_theta);
    }

private:
    const KandyModel& m_;
};

/// Start indices of rollout windows: stride = horizon, each window needs
/// horizon + 1 consecutive states.
inline std::vector<std::size_t> rollout_windows(std::size_t length, int horizon) {
    require(horizon >= 1, "rollout horizon must be at least 1");
    const auto h = static_cast<std::size_t>(horizon);
    if (length < h + 1) throw InvalidArgument("rollout horizon exceeds trajectory length");
    std::vector<std::size_t> w;
    for (std::size_t s = 0; s + h < length; s += h) w.push_back(s);
    return w;
}

namespace detail {

inline Vec advance(DatasetKind kind, const LearnedField& f, Integrator scheme, const Vec& x, double dt) {
    if (kind == DatasetKind::map) {
        Vec y = f(x);
        if (!y.allFinite()) throw DivergenceError("map rollout produced a non-finite state");
        return y;
    }
    return step(scheme, f, x, dt);
}

/// Loss of one window and, when grad != nullptr, its parameter gradient.
inline double window_loss(const LearnedField& f, const Dataset& d, const RolloutSettings& rs, std::size_t start,
                          Vec* grad) {
    const int h = rs.horizon;
    const double dt = rs.dt;
    const double norm = d.kind == DatasetKind::pde_field ? static_cast<double>(d.trajectory.cols()) : 1.0;
    const bool rk4 = d.kind != DatasetKind::map && rs.integrator == Integrator::rk4;
    std::vector<Vec> xs(static_cast<std::size_t>(h) + 1);
    std::vector<std::array<Vec, 4>> stages(static_cast<std::size_t>(h));
    std::vector<std::array<Vec, 3>> ks(static_cast<std::size_t>(h));
    xs[0] = d.trajectory.row(static_cast<Eigen::Index>(start)).transpose();
    double loss = 0.0;
    for (int k = 0; k < h; ++k) {
        const Vec& x = xs[k];
        if (grad && rk4) {
            const Vec k1 = f(x);
            const Vec x2 = x + 0.5 * dt * k1;
            const Vec k2 = f(x2);
            const Vec x3 = x + 0.5 * dt * k2;
            const Vec k3 = f(x3);
            const Vec x4 = x + dt * k3;
            const Vec k4 = f(x4);
            xs[k + 1] = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            stages[k] = {x, x2, x3, x4};
            if (!xs[k + 1].allFinite()) throw DivergenceError("rollout produced a non-finite state");
        } else {
            xs[k + 1] = advance(d.kind, f, rs.integrator, x, dt);
        }
        const Vec err = xs[k + 1] - d.trajectory.row(static_cast<Eigen::Index>(start + k + 1)).transpose();
        loss += err.squaredNorm() / norm;
    }
    loss /= h;
    if (!grad) return loss;

    Vec adj = Vec::Zero(xs[0].size());
    for (int k = h; k >= 1; --k) {
        const Vec err = xs[k] - d.trajectory.row(static_cast<Eigen::Index>(start + k)).transpose();
        adj += (2.0 / (h * norm)) * err;
        const Vec& x = xs[k - 1];
        if (d.kind == DatasetKind::map) {
            adj = f.vjp(x, adj, *grad);
        } else if (!rk4) {
            adj = adj + f.vjp(x, dt * adj, *grad);
        } else {
            const auto& st = stages[k - 1];
            const Vec g4 = (dt / 6.0) * adj;
            Vec gk3 = (dt / 3.0) * adj;
            Vec gk2 = (dt / 3.0) * adj;
            Vec gk1 = (dt / 6.0) * adj;
            Vec gx = adj;
            const Vec b4 = f.vjp(st[3], g4, *grad);
            gx += b4;
            gk3 += dt * b4;
            const Vec b3 = f.vjp(st[2], gk3, *grad);
            gx += b3;
            gk2 += 0.5 * dt * b3;
            const Vec b2 = f.vjp(st[1], gk2, *grad);
            gx += b2;
            gk1 += 0.5 * dt * b2;
            gx += f.vjp(st[0], gk1, *grad);
            adj = gx;
        }
    }
    return loss;
}

}  // namespace detail

/// Mean rollout loss over the given windows; with grad != nullptr the
/// gradient (already divided by the window count) is added into *grad.
inline double rollout_loss(const KandyModel& m, const Dataset& d, const RolloutSettings& rs,
                           const std::vector<std::size_t>& windows, Vec* grad = nullptr) {
    require(d.kind != DatasetKind::static_map, "static datasets have no rollout loss");
    require(!windows.empty(), "no rollout windows");
    require(rs.dt > 0.0 || d.kind == DatasetKind::map, "rollout dt must be positive");
    const LearnedField f(m);
    constexpr std::size_t kChunk = 4;
    const std::size_t chunks = chunk_count(windows.size(), kChunk);
    std::vector<double> losses(chunks, 0.0);
    std::vector<Vec> grads(grad ? chunks : 0);
    parallel_chunks(windows.size(), kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        Vec* g = nullptr;
        if (grad) {
            grads[c] = Vec::Zero(static_cast<Eigen::Index>(m.param_count()));
            g = &grads[c];
        }
        for (std::size_t w = b; w < e; ++w) losses[c] += detail::window_loss(f, d, rs, windows[w], g);
    });
    double total = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total += losses[c];
        if (grad) *grad += grads[c] / static_cast<double>(windows.size());
    }
    return total / static_cast<double>(windows.size());
}

inline double rollout_loss(const KandyModel& m, const Dataset& d, const RolloutSettings& rs) {
    return rollout_loss(m, d, rs, rollout_windows(static_cast<std::size_t>(d.trajectory.rows()), rs.horizon));
}

// ---------------------------------------------------------------- training

enum class Optimizer { adam, adam_whitened };

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    double lr_final = 0.0;  // > 0: exponential decay to this rate by the last epoch
    int epochs = 300;
    double lambda_roll = 1.0;
    int rollout_horizon = 10;
    Integrator rollout_integrator = Integrator::rk4;
    double dt = 0.005;
    int grid_update_every = 50;
    int grid_update_until = 300;
    TargetScheme derivative_scheme = TargetScheme::central_diff;
    std::uint64_t seed = 0;
    int batch = 0;  // rollout windows per epoch, 0 = all
    bool freeze_coeffs = false;
    double whiten_rcond = 1e-10;  // adam_whitened: kept eigenvalues exceed this times the largest

    void validate() const {
        require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
        require(lr_final >= 0.0, "lr_final must be nonnegative");
        require(epochs >= 0, "epochs must be nonnegative");
        require(lambda_roll >= 0.0, "lambda_roll must be nonnegative");
        require(lambda_roll == 0.0 || rollout_horizon >= 1, "rollout_horizon must be at least 1");
        require(batch >= 0, "batch must be nonnegative");
        require(grid_update_every >= 0, "grid_update_every must be nonnegative");
        require(whiten_rcond >= 0.0 && whiten_rcond < 1.0, "whiten_rcond must lie in [0, 1)");
    }

    RolloutSettings rollout() const { return {rollout_horizon, rollout_integrator, dt}; }
};

struct LossRecord {
    int epoch = 0;
    double train_deriv = 0.0;
    double test_deriv = 0.0;
    double rollout = 0.0;
};

struct LossHistory {
    std::vector<LossRecord> rows;

    std::string csv() const {
        std::string s = "epoch,train_deriv,test_deriv,rollout\n";
        for (const auto& r : rows)
            s += std::to_string(r.epoch) + "," + format_double(r.train_deriv) + "," + format_double(r.test_deriv) +
                 "," + format_double(r.rollout) + "\n";
        return s;
    }
};

/// Full-dataset losses at one point in training.
struct LossSnapshot {
    double train_deriv = 0.0;
    double test_deriv = 0.0;
    double rollout = 0.0;

    nlohmann::json to_json() const {
        return {{"train_deriv", train_deriv}, {"test_deriv", test_deriv}, {"rollout", rollout}};
    }
};

struct TrainResult {
    LossHistory history;
    LossSnapshot initial;
    LossSnapshot final;
};

inline double total_loss(const KandyModel& m, const Dataset& d, const TrainConfig& cfg) {
    const double ld = derivative_loss(m, d);
    if (cfg.lambda_roll == 0.0) return ld;
    return ld + cfg.lambda_roll * rollout_loss(m, d, cfg.rollout());
}

/// Gradient of total_loss with respect to the flat parameters (non-spline
/// slots are zero).
inline Vec total_gradient(const KandyModel& m, const Dataset& d, const TrainConfig& cfg) {
    auto [rows, tgt] = lifted_rows(m.lift(), d);
    const GramSystem g(m, rows, tgt);
    const Vec active = m.trainable_mask();
    Vec grad = Vec::Zero(static_cast<Eigen::Index>(m.param_count()));
    g.add_gradient(m.params(), active, 1.0, grad);
    if (cfg.lambda_roll > 0.0) {
        Vec rg = Vec::Zero(grad.size());
        rollout_loss(m, d, cfg.rollout(), rollout_windows(static_cast<std::size_t>(d.trajectory.rows()), cfg.rollout_horizon), &rg);
        grad += cfg.lambda_roll * rg.cwiseProduct(active);
    }
    return grad;
}

namespace detail {

/// Optimizer coordinates for one output block: p_j = base_j + T_j q_j.
struct BlockCoords {
    Vec base;
    Eigen::MatrixXd t;
};

/// Plain mode: T selects the trainable slots. Whitened mode: T = V L^{-1/2}
/// over the eigenpairs of the trainable sub-Gram (divided by N) whose
/// eigenvalue exceeds `rcond` times the largest, so the derivative loss has
/// identity curvature in q and directions the data cannot see stay fixed.
inline std::vector<BlockCoords> block_coords(const KandyModel& m, const GramSystem& g, const Vec& update_mask,
                                             bool whiten, double rcond) {
    const auto p = static_cast<Eigen::Index>(m.params_per_output());
    const Vec params = m.params();
    std::vector<BlockCoords> out;
    for (std::size_t j = 0; j < m.n_out(); ++j) {
        const Eigen::Index off = static_cast<Eigen::Index>(j) * p;
        std::vector<Eigen::Index> idx;
        for (Eigen::Index q = 0; q < p; ++q)
            if (update_mask[off + q] != 0.0) idx.push_back(q);
        BlockCoords c;
        c.base = params.segment(off, p);
        const auto k = static_cast<Eigen::Index>(idx.size());
        if (!whiten) {
            c.t = Eigen::MatrixXd::Zero(p, k);
            for (Eigen::Index a = 0; a < k; ++a) c.t(idx[static_cast<std::size_t>(a)], a) = 1.0;
            out.push_back(std::move(c));
            continue;
        }
        Eigen::MatrixXd h(k, k);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b)
                h(a, b) = g.gram()(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]) / g.samples();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        const Vec& ev = es.eigenvalues();
        const double top = k > 0 ? ev.maxCoeff() : 0.0;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index a = 0; a < k; ++a)
            if (ev[a] > rcond * top && ev[a] > 0.0) keep.push_back(a);
        c.t = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t col = 0; col < keep.size(); ++col) {
            const Eigen::Index e = keep[col];
            const Vec v = es.eigenvectors().col(e) / std::sqrt(ev[e]);
            for (Eigen::Index a = 0; a < k; ++a) c.t(idx[static_cast<std::size_t>(a)], static_cast<Eigen::Index>(col)) = v[a];
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace detail

/// Adam on total_loss with optional grid updates. `test` (may be null) only
/// feeds the held-out column of the history.
inline TrainResult train(KandyModel& m, const Dataset& d, const Dataset* test, const TrainConfig& cfg) {
    cfg.validate();
    require(d.size() > 0, "training dataset is empty");
    for (std::size_t j = 0; j < m.n_out(); ++j)
        for (std::size_t i = 0; i < m.n_in(); ++i)
            require(m.edge(i, j).state != EdgeState::symbolic, "training expects spline or pruned edges only");

    auto [rows, tgt] = lifted_rows(m.lift(), d);
    require(static_cast<std::size_t>(tgt.cols()) == m.n_out(), "target width must equal model output count");
    Mat test_rows, test_tgt;
    if (test) std::tie(test_rows, test_tgt) = lifted_rows(m.lift(), *test);

    const bool roll = cfg.lambda_roll > 0.0;
    const RolloutSettings rs = cfg.rollout();
    std::vector<std::size_t> windows;
    if (roll) {
        require(d.kind != DatasetKind::static_map, "static datasets cannot use a rollout loss");
        windows = rollout_windows(static_cast<std::size_t>(d.trajectory.rows()), cfg.rollout_horizon);
    }

    GramSystem gram(m, rows, tgt);
    GramSystem test_gram;
    if (test) test_gram = GramSystem(m, test_rows, test_tgt);

    const Vec active = m.trainable_mask();
    Vec update_mask = active;
    if (cfg.freeze_coeffs) {
        for (std::size_t j = 0; j < m.n_out(); ++j)
            for (std::size_t i = 0; i < m.n_in(); ++i)
                update_mask.segment(static_cast<Eigen::Index>(m.param_offset(i, j)), m.edge(i, j).spline.grid_size()).setZero();
    }
    const bool whiten = cfg.optimizer == Optimizer::adam_whitened;

    auto full_snapshot = [&] {
        LossSnapshot s;
        const Vec p = m.params();
        s.train_deriv = gram.loss(p, active);
        s.test_deriv = test ? test_gram.loss(p, active) : 0.0;
        s.rollout = roll ? rollout_loss(m, d, rs, windows) : 0.0;
        return s;
    };

    auto batch_windows = [&](int epoch) {
        if (!roll || cfg.batch == 0 || static_cast<std::size_t>(cfg.batch) >= windows.size()) return windows;
        std::vector<std::size_t> b;
        const std::size_t w = windows.size();
        for (int k = 0; k < cfg.batch; ++k)
            b.push_back(windows[(static_cast<std::size_t>(epoch) * static_cast<std::size_t>(cfg.batch) + static_cast<std::size_t>(k)) % w]);
        return b;
    };

    TrainResult result;
    try {
        result.initial = full_snapshot();
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("initial model diverged: ") + e.what());
    }

    const auto pj = static_cast<Eigen::Index>(m.params_per_output());
    std::vector<detail::BlockCoords> coords;
    Vec q, mom, vel;
    auto reset_coords = [&] {
        coords = detail::block_coords(m, gram, update_mask, whiten, cfg.whiten_rcond);
        Eigen::Index total = 0;
        for (const auto& c : coords) total += c.t.cols();
        q = Vec::Zero(total);
        mom = Vec::Zero(total);
        vel = Vec::Zero(total);
    };
    reset_coords();
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int t_adam = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.grid_update_every > 0 && epoch > 0 && epoch % cfg.grid_update_every == 0 &&
            epoch <= cfg.grid_update_until) {
            std::vector<double> z(static_cast<std::size_t>(rows.rows()));
            for (std::size_t i = 0; i < m.n_in(); ++i) {
                for (Eigen::Index r = 0; r < rows.rows(); ++r)
                    z[static_cast<std::size_t>(r)] = m.standardize(i, rows(r, static_cast<Eigen::Index>(i)));
                m.update_column_grid(i, z);
            }
            gram = GramSystem(m, rows, tgt);
            if (test) test_gram = GramSystem(m, test_rows, test_tgt);
            reset_coords();
            t_adam = 0;
        }

        const Vec p = m.params();
        Vec grad = Vec::Zero(p.size());
        LossRecord rec;
        rec.epoch = epoch;
        rec.train_deriv = gram.loss(p, active);
        rec.test_deriv = test ? test_gram.loss(p, active) : 0.0;
        gram.add_gradient(p, active, 1.0, grad);
        if (roll) {
            Vec rg = Vec::Zero(p.size());
            try {
                rec.rollout = rollout_loss(m, d, rs, batch_windows(epoch), &rg);
            } catch (const DivergenceError& e) {
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            grad += cfg.lambda_roll * rg;
        }
        if (!std::isfinite(rec.train_deriv) || !std::isfinite(rec.rollout) || !grad.allFinite())
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
        result.history.rows.push_back(rec);

        Vec gq(q.size());
        for (std::size_t j = 0, at = 0; j < coords.size(); ++j) {
            const auto k = coords[j].t.cols();
            gq.segment(static_cast<Eigen::Index>(at), k) =
                coords[j].t.transpose() * grad.segment(static_cast<Eigen::Index>(j) * pj, pj);
            at += static_cast<std::size_t>(k);
        }
        double lr = cfg.learning_rate;
        if (cfg.lr_final > 0.0 && cfg.epochs > 1)
            lr = cfg.learning_rate * std::pow(cfg.lr_final / cfg.learning_rate, double(epoch) / double(cfg.epochs - 1));
        ++t_adam;
        mom = b1 * mom + (1.0 - b1) * gq;
        vel = b2 * vel + (1.0 - b2) * gq.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, t_adam);
        const double c2 = 1.0 - std::pow(b2, t_adam);
        q -= (lr * (mom / c1).array() / ((vel / c2).array().sqrt() + eps)).matrix();

        Vec next(p.size());
        for (std::size_t j = 0, at = 0; j < coords.size(); ++j) {
            const auto k = coords[j].t.cols();
            next.segment(static_cast<Eigen::Index>(j) * pj, pj) =
                coords[j].base + coords[j].t * q.segment(static_cast<Eigen::Index>(at), k);
            at += static_cast<std::size_t>(k);
        }
        m.set_params(next);
    }

    try {
        result.final = full_snapshot();
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("trained model diverged: ") + e.what());
    }
    if (!std::isfinite(result.final.train_deriv) || !std::isfinite(result.final.rollout))
        throw DivergenceError("training finished with a non-finite loss");
    LossRecord last{cfg.epochs, result.final.train_deriv, result.final.test_deriv, result.final.rollout};
    result.history.rows.push_back(last);
    return result;
}

}  // namespace kandy
