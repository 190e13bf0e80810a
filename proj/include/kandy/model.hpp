#pragma once

// Zero-depth Kolmogorov-Arnold model: one univariate edge per (lifted input,
// output) pair, summed per output.
//
//   out_j(Theta) = offset_j + sum_i phi_ij(Theta_i)
//
// Spline edges see the standardized feature z_i = (Theta_i - shift_i) / scale_i;
// symbolic edges are closed-form functions of the raw feature Theta_i. A pruned
// edge contributes nothing.

#include "kandy/lift.hpp"
#include "kandy/spline.hpp"

#include <memory>

namespace kandy {

inline constexpr const char* kModelSchema = "kandy.model/1";

enum class Family { zero, constant, linear, quadratic, cubic, sin, cos, tanh, sech2, exp, reciprocal };

inline constexpr Family kAllFamilies[] = {Family::zero, Family::constant, Family::linear, Family::quadratic,
                                          Family::cubic, Family::sin,     Family::cos,    Family::tanh,
                                          Family::sech2, Family::exp,     Family::reciprocal};

inline const char* family_name(Family f) {
    switch (f) {
        case Family::zero: return "zero";
        case Family::constant: return "constant";
        case Family::linear: return "linear";
        case Family::quadratic: return "quadratic";
        case Family::cubic: return "cubic";
        case Family::sin: return "sin";
        case Family::cos: return "cos";
        case Family::tanh: return "tanh";
        case Family::sech2: return "sech2";
        case Family::exp: return "exp";
        case Family::reciprocal: return "reciprocal";
    }
    return "?";
}

inline Family family_from_name(const std::string& s) {
    for (Family f : kAllFamilies)
        if (s == family_name(f)) return f;
    throw InvalidArgument("unknown symbolic family '" + s + "'");
}

inline int family_complexity(Family f) {
    switch (f) {
        case Family::zero:
        case Family::constant: return 0;
        case Family::linear: return 1;
        case Family::quadratic: return 2;
        case Family::cubic: return 3;
        default: return 3;
    }
}

inline int family_power(Family f) {
    switch (f) {
        case Family::linear: return 1;
        case Family::quadratic: return 2;
        case Family::cubic: return 3;
        default: return 0;
    }
}

inline bool is_polynomial(Family f) { return family_power(f) > 0; }

/// y = alpha * f(beta * x + gamma) + delta. Polynomial families use
/// y = alpha * x^p + delta (beta = 1, gamma = 0).
struct SymbolicTerm {
    Family family = Family::zero;
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = 0.0;
    double delta = 0.0;

    static double base(Family f, double t) {
        switch (f) {
            case Family::sin: return std::sin(t);
            case Family::cos: return std::cos(t);
            case Family::tanh: return std::tanh(t);
            case Family::sech2: {
                const double c = std::cosh(t);
                return 1.0 / (c * c);
            }
            case Family::exp: return std::exp(t);
            case Family::reciprocal: return 1.0 / t;
            default: return 0.0;
        }
    }

    static double base_derivative(Family f, double t) {
        switch (f) {
            case Family::sin: return std::cos(t);
            case Family::cos: return -std::sin(t);
            case Family::tanh: {
                const double c = std::cosh(t);
                return 1.0 / (c * c);
            }
            case Family::sech2: {
                const double c = std::cosh(t);
                return -2.0 * std::tanh(t) / (c * c);
            }
            case Family::exp: return std::exp(t);
            case Family::reciprocal: return -1.0 / (t * t);
            default: return 0.0;
        }
    }

    double evaluate(double x) const {
        switch (family) {
            case Family::zero: return 0.0;
            case Family::constant: return delta;
            case Family::linear: return alpha * x + delta;
            case Family::quadratic: return alpha * x * x + delta;
            case Family::cubic: return alpha * x * x * x + delta;
            default: return alpha * base(family, beta * x + gamma) + delta;
        }
    }

    double derivative(double x) const {
        switch (family) {
            case Family::zero:
            case Family::constant: return 0.0;
            case Family::linear: return alpha;
            case Family::quadratic: return 2.0 * alpha * x;
            case Family::cubic: return 3.0 * alpha * x * x;
            default: return alpha * beta * base_derivative(family, beta * x + gamma);
        }
    }

    int complexity() const { return family_complexity(family); }

    nlohmann::json to_json() const {
        return {{"family", family_name(family)}, {"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"delta", delta}};
    }
    static SymbolicTerm from_json(const nlohmann::json& j) {
        SymbolicTerm t;
        t.family = family_from_name(j.at("family").get<std::string>());
        t.alpha = j.at("alpha").get<double>();
        t.beta = j.at("beta").get<double>();
        t.gamma = j.at("gamma").get<double>();
        t.delta = j.at("delta").get<double>();
        return t;
    }
};

enum class EdgeState { spline, symbolic, pruned };

inline const char* edge_state_name(EdgeState s) {
    switch (s) {
        case EdgeState::spline: return "spline";
        case EdgeState::symbolic: return "symbolic";
        case EdgeState::pruned: return "pruned";
    }
    return "?";
}

struct Edge {
    Spline1D spline;
    EdgeState state = EdgeState::spline;
    SymbolicTerm symbolic;
};

struct SplineSpec {
    int grid = 5;
    int knots = 3;
    double basis_scale = Spline1D::kDefaultScale;
    SplineInit init = SplineInit::small_random(0);
};

/// Per-feature affine standardization z = (Theta - shift) / scale.
struct Normalization {
    Vec shift;
    Vec scale;

    static Normalization identity(std::size_t n) { return {Vec::Zero(n), Vec::Ones(n)}; }
};

class KandyModel {
public:
    /// New model. `domains` are per-input-column spline ranges in standardized
    /// units; a column whose range is empty is widened to [v - 1, v + 1].
    static KandyModel create(std::shared_ptr<const LiftMap> lift, std::vector<std::string> outputs,
                             const SplineSpec& spec, Normalization norm,
                             const std::vector<std::pair<double, double>>& domains) {
        require(lift != nullptr, "model needs a lift map");
        require(!outputs.empty(), "model needs at least one output");
        const std::size_t n_in = lift->size();
        require(domains.size() == n_in, "one spline domain per lifted input is required");
        require(static_cast<std::size_t>(norm.shift.size()) == n_in &&
                    static_cast<std::size_t>(norm.scale.size()) == n_in,
                "normalization size must match lifted dimension");
        require((norm.scale.array() > 0.0).all() && norm.shift.allFinite() && norm.scale.allFinite(),
                "normalization scales must be positive and finite");
        KandyModel m;
        m.lift_ = std::move(lift);
        m.outputs_ = std::move(outputs);
        m.norm_ = std::move(norm);
        m.n_in_ = n_in;
        m.n_out_ = m.outputs_.size();
        m.offsets_ = Vec::Zero(static_cast<Eigen::Index>(m.n_out_));
        m.edges_.reserve(n_in * m.n_out_);
        for (std::size_t j = 0; j < m.n_out_; ++j) {
            for (std::size_t i = 0; i < n_in; ++i) {
                auto [lo, hi] = domains[i];
                require(std::isfinite(lo) && std::isfinite(hi), "spline domain must be finite");
                if (!(hi > lo)) {
                    const double c = 0.5 * (lo + hi);
                    lo = c - 1.0;
                    hi = c + 1.0;
                }
                SplineInit init = spec.init;
                init.seed = derive_seed(spec.init.seed, j * n_in + i);
                Spline1D s = spec.grid == 1 ? Spline1D::single(lo, hi, spec.knots, spec.basis_scale)
                                            : Spline1D::make(lo, hi, spec.grid, spec.knots, init, spec.basis_scale);
                m.edges_.push_back(Edge{std::move(s), EdgeState::spline, {}});
            }
        }
        m.rebuild_layout();
        return m;
    }

    std::size_t n_in() const noexcept { return n_in_; }
    std::size_t n_out() const noexcept { return n_out_; }
    const LiftMap& lift() const noexcept { return *lift_; }
    std::shared_ptr<const LiftMap> lift_ptr() const noexcept { return lift_; }
    const std::vector<std::string>& outputs() const noexcept { return outputs_; }
    const Normalization& normalization() const noexcept { return norm_; }
    const Vec& offsets() const noexcept { return offsets_; }
    void set_offsets(const Vec& o) {
        require(static_cast<std::size_t>(o.size()) == n_out_, "offset vector has wrong length");
        offsets_ = o;
    }

    const Edge& edge(std::size_t i, std::size_t j) const { return edges_.at(index(i, j)); }
    bool active(std::size_t i, std::size_t j) const { return edge(i, j).state != EdgeState::pruned; }

    /// Active-edge mask, n_in x n_out.
    std::vector<std::vector<bool>> mask() const {
        std::vector<std::vector<bool>> m(n_in_, std::vector<bool>(n_out_));
        for (std::size_t i = 0; i < n_in_; ++i)
            for (std::size_t j = 0; j < n_out_; ++j) m[i][j] = active(i, j);
        return m;
    }

    double standardize(std::size_t i, double theta) const { return (theta - norm_.shift[i]) / norm_.scale[i]; }

    double edge_value(std::size_t i, std::size_t j, double theta) const {
        const Edge& e = edges_[index(i, j)];
        switch (e.state) {
            case EdgeState::spline: return e.spline.evaluate(standardize(i, theta));
            case EdgeState::symbolic: return e.symbolic.evaluate(theta);
            case EdgeState::pruned: return 0.0;
        }
        return 0.0;
    }

    double edge_derivative(std::size_t i, std::size_t j, double theta) const {
        const Edge& e = edges_[index(i, j)];
        switch (e.state) {
            case EdgeState::spline: return e.spline.input_derivative(standardize(i, theta)) / norm_.scale[i];
            case EdgeState::symbolic: return e.symbolic.derivative(theta);
            case EdgeState::pruned: return 0.0;
        }
        return 0.0;
    }

    Vec forward(const Vec& theta) const {
        check_input(theta);
        return forward_unchecked(theta);
    }

    /// Row-wise forward over a lifted design matrix.
    Mat forward_field(const Mat& rows) const {
        require(static_cast<std::size_t>(rows.cols()) == n_in_, "lifted row width must equal model input count");
        require(rows.allFinite(), "model input contains non-finite values");
        Mat out(rows.rows(), static_cast<Eigen::Index>(n_out_));
        parallel_chunks(static_cast<std::size_t>(rows.rows()), 256, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t r = b; r < e; ++r) {
                const Vec th = rows.row(static_cast<Eigen::Index>(r)).transpose();
                out.row(static_cast<Eigen::Index>(r)) = forward_unchecked(th).transpose();
            }
        });
        return out;
    }

    /// J[j, i] = d out_j / d Theta_i.
    Mat input_jacobian(const Vec& theta) const {
        check_input(theta);
        Mat jac(static_cast<Eigen::Index>(n_out_), static_cast<Eigen::Index>(n_in_));
        for (std::size_t j = 0; j < n_out_; ++j)
            for (std::size_t i = 0; i < n_in_; ++i) jac(j, i) = edge_derivative(i, j, theta[i]);
        return jac;
    }

    // Flat parameter vector: spline parameters of every edge, output-major
    // (all inputs of output 0, then output 1, ...). Non-spline edges keep their
    // slots so the layout never changes.
    std::size_t param_count() const noexcept { return per_output_ * n_out_; }
    std::size_t params_per_output() const noexcept { return per_output_; }
    std::size_t column_offset(std::size_t i) const { return col_offset_.at(i); }
    std::size_t column_width(std::size_t i) const { return edges_[index(i, 0)].spline.param_count(); }
    std::size_t param_offset(std::size_t i, std::size_t j) const { return j * per_output_ + col_offset_.at(i); }

    Vec params() const {
        Vec p(static_cast<Eigen::Index>(param_count()));
        for (std::size_t j = 0; j < n_out_; ++j)
            for (std::size_t i = 0; i < n_in_; ++i)
                p.segment(static_cast<Eigen::Index>(param_offset(i, j)), edge(i, j).spline.param_count()) =
                    edge(i, j).spline.params();
        return p;
    }

    void set_params(const Vec& p) {
        require(static_cast<std::size_t>(p.size()) == param_count(), "parameter vector has wrong length");
        require(p.allFinite(), "parameters must be finite");
        for (std::size_t j = 0; j < n_out_; ++j)
            for (std::size_t i = 0; i < n_in_; ++i) {
                Spline1D& s = edges_[index(i, j)].spline;
                s.params() = p.segment(static_cast<Eigen::Index>(param_offset(i, j)), s.param_count());
            }
    }

    /// 1 for parameters of spline edges, 0 for symbolic or pruned edges.
    Vec trainable_mask() const {
        Vec m = Vec::Zero(static_cast<Eigen::Index>(param_count()));
        for (std::size_t j = 0; j < n_out_; ++j)
            for (std::size_t i = 0; i < n_in_; ++i)
                if (edge(i, j).state == EdgeState::spline)
                    m.segment(static_cast<Eigen::Index>(param_offset(i, j)), column_width(i)).setOnes();
        return m;
    }

    /// Adds sum_j upstream_j * d out_j / d params into grad.
    void accumulate_param_gradient(const Vec& theta, const Vec& upstream, Vec& grad) const {
        std::vector<double> row;
        for (std::size_t i = 0; i < n_in_; ++i) {
            const double z = standardize(i, theta[i]);
            const std::size_t w = column_width(i);
            row.resize(w);
            bool computed = false;
            for (std::size_t j = 0; j < n_out_; ++j) {
                const Edge& e = edges_[index(i, j)];
                if (e.state != EdgeState::spline || upstream[j] == 0.0) continue;
                if (!computed) {
                    e.spline.basis_row(z, row);
                    computed = true;
                }
                const std::size_t off = param_offset(i, j);
                for (std::size_t q = 0; q < w; ++q) grad[off + q] += upstream[j] * row[q];
            }
        }
    }

    Vec param_gradient(const Vec& theta, const Vec& upstream) const {
        check_input(theta);
        require(static_cast<std::size_t>(upstream.size()) == n_out_, "upstream gradient has wrong length");
        Vec g = Vec::Zero(static_cast<Eigen::Index>(param_count()));
        accumulate_param_gradient(theta, upstream, g);
        return g;
    }

    void prune_edge(std::size_t i, std::size_t j) { edges_.at(checked(i, j)).state = EdgeState::pruned; }

    void set_edge_symbolic(std::size_t i, std::size_t j, const SymbolicTerm& term) {
        Edge& e = edges_.at(checked(i, j));
        if (term.family == Family::zero) {
            e.state = EdgeState::pruned;
            return;
        }
        e.state = EdgeState::symbolic;
        e.symbolic = term;
    }

    /// Re-grids every spline of input column i to the given standardized
    /// samples. Columns whose samples are all equal are left unchanged.
    void update_column_grid(std::size_t i, std::span<const double> samples) {
        require(i < n_in_, "column index out of range");
        const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
        if (samples.empty() || !(*mx > *mn)) return;
        for (std::size_t j = 0; j < n_out_; ++j) {
            Edge& e = edges_[index(i, j)];
            e.spline = e.spline.update_grid(samples);
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kModelSchema;
        j["lift"] = lift_->to_json();
        j["outputs"] = outputs_;
        j["n_in"] = n_in_;
        j["n_out"] = n_out_;
        j["normalization"] = {{"shift", std::vector<double>(norm_.shift.data(), norm_.shift.data() + n_in_)},
                              {"scale", std::vector<double>(norm_.scale.data(), norm_.scale.data() + n_in_)}};
        j["offsets"] = std::vector<double>(offsets_.data(), offsets_.data() + n_out_);
        nlohmann::json mask = nlohmann::json::array();
        for (const auto& row : this->mask()) mask.push_back(row);
        j["mask"] = mask;
        nlohmann::json edges = nlohmann::json::array();
        for (std::size_t jj = 0; jj < n_out_; ++jj)
            for (std::size_t i = 0; i < n_in_; ++i) {
                const Edge& e = edge(i, jj);
                nlohmann::json r = {{"input", i},
                                    {"output", jj},
                                    {"term", lift_->terms()[i].label},
                                    {"state", edge_state_name(e.state)},
                                    {"spline", e.spline.to_json()}};
                if (e.state == EdgeState::symbolic) r["symbolic"] = e.symbolic.to_json();
                edges.push_back(std::move(r));
            }
        j["edges"] = edges;
        return j;
    }

    static KandyModel from_json(const nlohmann::json& j) {
        if (!j.contains("schema") || j["schema"] != kModelSchema)
            throw InvalidArgument(std::string("model record is not a ") + kModelSchema + " document");
        KandyModel m;
        m.lift_ = std::make_shared<const LiftMap>(LiftMap::from_json(j.at("lift")));
        m.outputs_ = j.at("outputs").get<std::vector<std::string>>();
        m.n_in_ = j.at("n_in").get<std::size_t>();
        m.n_out_ = j.at("n_out").get<std::size_t>();
        require(m.n_in_ == m.lift_->size() && m.n_out_ == m.outputs_.size(), "model record has inconsistent sizes");
        auto shift = j.at("normalization").at("shift").get<std::vector<double>>();
        auto scale = j.at("normalization").at("scale").get<std::vector<double>>();
        require(shift.size() == m.n_in_ && scale.size() == m.n_in_, "normalization has wrong length");
        m.norm_.shift = Eigen::Map<Vec>(shift.data(), static_cast<Eigen::Index>(shift.size()));
        m.norm_.scale = Eigen::Map<Vec>(scale.data(), static_cast<Eigen::Index>(scale.size()));
        auto off = j.at("offsets").get<std::vector<double>>();
        require(off.size() == m.n_out_, "offsets have wrong length");
        m.offsets_ = Eigen::Map<Vec>(off.data(), static_cast<Eigen::Index>(off.size()));
        const auto& edges = j.at("edges");
        require(edges.size() == m.n_in_ * m.n_out_, "edge count mismatch in model record");
        m.edges_.reserve(edges.size());
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto& r = edges[k];
            require(r.at("input").get<std::size_t>() == k % m.n_in_ && r.at("output").get<std::size_t>() == k / m.n_in_,
                    "edges must be stored output-major");
            Edge e{Spline1D::from_json(r.at("spline")), EdgeState::spline, {}};
            const std::string st = r.at("state").get<std::string>();
            if (st == "pruned") {
                e.state = EdgeState::pruned;
            } else if (st == "symbolic") {
                e.state = EdgeState::symbolic;
                e.symbolic = SymbolicTerm::from_json(r.at("symbolic"));
            } else if (st != "spline") {
                throw InvalidArgument("unknown edge state '" + st + "'");
            }
            m.edges_.push_back(std::move(e));
        }
        for (std::size_t i = 0; i < m.n_in_; ++i)
            for (std::size_t jj = 1; jj < m.n_out_; ++jj)
                require(m.edge(i, jj).spline.param_count() == m.edge(i, 0).spline.param_count(),
                        "edges of one input column must share a grid size");
        m.rebuild_layout();
        return m;
    }

private:
    KandyModel() = default;

    std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * n_in_ + i; }
    std::size_t checked(std::size_t i, std::size_t j) const {
        if (i >= n_in_ || j >= n_out_)
            throw InvalidArgument("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
        return index(i, j);
    }

    void check_input(const Vec& theta) const {
        require(static_cast<std::size_t>(theta.size()) == n_in_, "lifted input has wrong dimension");
        require(theta.allFinite(), "model input contains non-finite values");
    }

    Vec forward_unchecked(const Vec& theta) const {
        Vec out = offsets_;
        for (std::size_t j = 0; j < n_out_; ++j)
            for (std::size_t i = 0; i < n_in_; ++i) out[j] += edge_value(i, j, theta[i]);
        return out;
    }

    void rebuild_layout() {
        col_offset_.assign(n_in_, 0);
        std::size_t acc = 0;
        for (std::size_t i = 0; i < n_in_; ++i) {
            col_offset_[i] = acc;
            acc += edges_[index(i, 0)].spline.param_count();
        }
        per_output_ = acc;
    }

    std::shared_ptr<const LiftMap> lift_;
    std::vector<std::string> outputs_;
    Normalization norm_;
    Vec offsets_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> col_offset_;
    std::size_t per_output_ = 0;
    std::size_t n_in_ = 0;
    std::size_t n_out_ = 0;
};

}  // namespace kandy
