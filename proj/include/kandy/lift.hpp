#pragma once

// Lifting map from raw states (or periodic fields) to the lifted feature
// vector consumed by the model. Terms are declared as strings:
//
//   "x"  "x*z"  "x^2"  "x1^2 + x2^2 - x3^2 - x4^2"  "2.5*y"  "1"
//   "u_x"  "u*u_xx"  "u_x^2"            (field mode; derivative orders 1, 2, 4)
//   "x*cos_theta"  "y*sin_theta"        (theta = a - b / (1 + |x|^2))
//
// Column i of every lifted matrix corresponds to terms()[i].

#include "kandy/core.hpp"
#include "kandy/spectral.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace kandy {

struct ThetaParams {
    double a = 0.0;
    double b = 0.0;
};

enum class FactorKind { variable, derivative, cos_theta, sin_theta };

struct Factor {
    FactorKind kind = FactorKind::variable;
    int var = 0;    // state variable index (variable / derivative)
    int order = 0;  // spatial derivative order (derivative)
    int power = 1;
};

struct Monomial {
    double coeff = 1.0;
    std::vector<Factor> factors;
};

struct FeatureTerm {
    enum class Kind { monomial, spatial_derivative, product_of, custom_trig };
    std::string label;
    std::vector<Monomial> monomials;
    Kind kind = Kind::monomial;
};

namespace detail {

class TermParser {
public:
    TermParser(std::string_view text, const std::vector<std::string>& vars, bool field_mode, bool has_theta)
        : text_(text), vars_(vars), field_(field_mode), theta_(has_theta) {}

    std::vector<Monomial> parse() {
        std::vector<Monomial> out;
        skip();
        double sign = 1.0;
        if (peek() == '+' || peek() == '-') sign = (get() == '-') ? -1.0 : 1.0;
        for (;;) {
            Monomial m = monomial();
            m.coeff *= sign;
            out.push_back(std::move(m));
            skip();
            if (pos_ >= text_.size()) break;
            const char c = get();
            if (c != '+' && c != '-') fail("expected '+' or '-'");
            sign = (c == '-') ? -1.0 : 1.0;
        }
        return out;
    }

private:
    Monomial monomial() {
        Monomial m;
        factor(m);
        skip();
        while (peek() == '*') {
            get();
            factor(m);
            skip();
        }
        return m;
    }

    void factor(Monomial& m) {
        skip();
        if (pos_ >= text_.size()) fail("unexpected end of term");
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const double v = number();
            const int p = power();
            m.coeff *= std::pow(v, p);
            return;
        }
        if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) fail("unexpected character");
        const std::string id = ident();
        Factor f = resolve(id);
        f.power = power();
        // merge repeated factors, e.g. "x*x"
        for (auto& g : m.factors) {
            if (g.kind == f.kind && g.var == f.var && g.order == f.order) {
                g.power += f.power;
                return;
            }
        }
        m.factors.push_back(f);
    }

    int power() {
        skip();
        if (peek() != '^') return 1;
        get();
        skip();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) fail("expected a nonnegative integer exponent");
        return std::stoi(std::string(text_.substr(start, pos_ - start)));
    }

    Factor resolve(const std::string& id) {
        Factor f;
        if (id == "cos_theta" || id == "sin_theta") {
            if (!theta_) fail("'" + id + "' needs theta parameters");
            f.kind = id == "cos_theta" ? FactorKind::cos_theta : FactorKind::sin_theta;
            return f;
        }
        for (std::size_t v = 0; v < vars_.size(); ++v) {
            if (id == vars_[v]) {
                f.kind = FactorKind::variable;
                f.var = static_cast<int>(v);
                return f;
            }
        }
        if (field_) {
            for (std::size_t v = 0; v < vars_.size(); ++v) {
                const std::string prefix = vars_[v] + "_";
                if (id.size() > prefix.size() && id.compare(0, prefix.size(), prefix) == 0) {
                    const std::string suffix = id.substr(prefix.size());
                    if (suffix.find_first_not_of('x') != std::string::npos) continue;
                    const int order = static_cast<int>(suffix.size());
                    if (order != 1 && order != 2 && order != 4)
                        fail("derivative order " + std::to_string(order) + " not supported (use 1, 2 or 4)");
                    f.kind = FactorKind::derivative;
                    f.var = static_cast<int>(v);
                    f.order = order;
                    return f;
                }
            }
        }
        fail("unknown symbol '" + id + "'");
    }

    double number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' || text_[pos_] == 'e' ||
                ((text_[pos_] == '-' || text_[pos_] == '+') && pos_ > start && text_[pos_ - 1] == 'e')))
            ++pos_;
        try {
            return std::stod(std::string(text_.substr(start, pos_ - start)));
        } catch (const std::exception&) {
            fail("malformed number");
        }
    }

    std::string ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    char get() { return text_[pos_++]; }

    [[noreturn]] void fail(const std::string& why) const {
        throw InvalidArgument("cannot parse lift term '" + std::string(text_) + "': " + why);
    }

    std::string_view text_;
    const std::vector<std::string>& vars_;
    bool field_;
    bool theta_;
    std::size_t pos_ = 0;
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace detail

class LiftMap {
public:
    /// Lift for ODEs, maps and static data: terms over the named state variables.
    static LiftMap state(std::vector<std::string> variables, const std::vector<std::string>& terms,
                         std::optional<ThetaParams> theta = std::nullopt) {
        LiftMap l;
        l.variables_ = std::move(variables);
        l.theta_ = theta;
        l.build(terms);
        return l;
    }

    /// Lift for a scalar periodic field sampled with spacing dx.
    static LiftMap field(std::string variable, const std::vector<std::string>& terms, double dx,
                         DerivativeScheme scheme = DerivativeScheme::spectral) {
        require(dx > 0.0 && std::isfinite(dx), "field lift needs dx > 0");
        LiftMap l;
        l.variables_ = {std::move(variable)};
        l.is_field_ = true;
        l.dx_ = dx;
        l.scheme_ = scheme;
        l.build(terms);
        return l;
    }

    static LiftMap identity(std::vector<std::string> variables) {
        std::vector<std::string> terms = variables;
        return state(std::move(variables), terms);
    }

    std::size_t size() const noexcept { return terms_.size(); }
    std::size_t state_dim() const noexcept { return variables_.size(); }
    bool is_field() const noexcept { return is_field_; }
    double dx() const noexcept { return dx_; }
    DerivativeScheme scheme() const noexcept { return scheme_; }
    const std::vector<FeatureTerm>& terms() const noexcept { return terms_; }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::optional<ThetaParams>& theta() const noexcept { return theta_; }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& t : terms_) out.push_back(t.label);
        return out;
    }

    /// Theta = lifted term values at one state.
    Vec lift_state(const Vec& x) const {
        require(!is_field_, "lift_state is for state-space lifts; use lift_field for fields");
        require(static_cast<std::size_t>(x.size()) == state_dim(), "state dimension mismatch in lift_state");
        const auto [c, s] = trig(x);
        Vec out(size());
        for (std::size_t t = 0; t < size(); ++t) {
            double acc = 0.0;
            for (const auto& m : terms_[t].monomials) {
                double prod = m.coeff;
                for (const auto& f : m.factors) prod *= ipow(state_factor(f, x, c, s), f.power);
                acc += prod;
            }
            out[t] = acc;
        }
        return out;
    }

    /// d Theta / d x, shape (terms x state_dim).
    Mat state_jacobian(const Vec& x) const {
        require(!is_field_, "state_jacobian is for state-space lifts");
        require(static_cast<std::size_t>(x.size()) == state_dim(), "state dimension mismatch in state_jacobian");
        const auto [c, s] = trig(x);
        const int d = static_cast<int>(state_dim());
        // d theta / d x_v
        Vec dtheta = Vec::Zero(d);
        if (theta_) {
            const double r = 1.0 + x.squaredNorm();
            for (int v = 0; v < d; ++v) dtheta[v] = 2.0 * theta_->b * x[v] / (r * r);
        }
        Mat jac = Mat::Zero(size(), d);
        for (std::size_t t = 0; t < size(); ++t) {
            for (const auto& m : terms_[t].monomials) {
                for (std::size_t k = 0; k < m.factors.size(); ++k) {
                    const Factor& fk = m.factors[k];
                    double rest = m.coeff;
                    for (std::size_t q = 0; q < m.factors.size(); ++q)
                        if (q != k) rest *= ipow(state_factor(m.factors[q], x, c, s), m.factors[q].power);
                    const double val = state_factor(fk, x, c, s);
                    const double outer = rest * fk.power * ipow(val, fk.power - 1);
                    switch (fk.kind) {
                        case FactorKind::variable: jac(t, fk.var) += outer; break;
                        case FactorKind::cos_theta:
                            for (int v = 0; v < d; ++v) jac(t, v) += outer * (-s) * dtheta[v];
                            break;
                        case FactorKind::sin_theta:
                            for (int v = 0; v < d; ++v) jac(t, v) += outer * c * dtheta[v];
                            break;
                        case FactorKind::derivative: break;
                    }
                }
            }
        }
        return jac;
    }

    /// Spatial derivative fields needed by the terms, keyed by order (0 = u).
    std::map<int, Vec> derivative_fields(const Vec& u) const {
        std::map<int, Vec> d;
        d.emplace(0, u);
        for (int order : orders_) d.emplace(order, spatial_derivative(u, dx_, order, scheme_));
        return d;
    }

    /// Lifted design matrix of one field snapshot: one row per grid point.
    Mat lift_field(const Vec& u) const {
        require(is_field_, "lift_field needs a field lift");
        const auto d = derivative_fields(u);
        const Eigen::Index n = u.size();
        Mat out(n, static_cast<Eigen::Index>(size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < size(); ++t) {
                double acc = 0.0;
                for (const auto& m : terms_[t].monomials) {
                    double prod = m.coeff;
                    for (const auto& f : m.factors) prod *= ipow(d.at(f.order)[i], f.power);
                    acc += prod;
                }
                out(i, static_cast<Eigen::Index>(t)) = acc;
            }
        }
        return out;
    }

    /// Vector-Jacobian product of lift_field: given dL/dTheta (grid x terms),
    /// returns dL/du.
    Vec field_vjp(const Vec& u, const Mat& upstream) const {
        require(is_field_, "field_vjp needs a field lift");
        require(upstream.rows() == u.size() && upstream.cols() == static_cast<Eigen::Index>(size()),
                "field_vjp upstream has wrong shape");
        const auto d = derivative_fields(u);
        std::map<int, Vec> adj;
        for (const auto& [order, _] : d) adj.emplace(order, Vec::Zero(u.size()));
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            for (std::size_t t = 0; t < size(); ++t) {
                const double g = upstream(i, static_cast<Eigen::Index>(t));
                if (g == 0.0) continue;
                for (const auto& m : terms_[t].monomials) {
                    for (std::size_t k = 0; k < m.factors.size(); ++k) {
                        double rest = m.coeff;
                        for (std::size_t q = 0; q < m.factors.size(); ++q)
                            if (q != k) rest *= ipow(d.at(m.factors[q].order)[i], m.factors[q].power);
                        const Factor& fk = m.factors[k];
                        adj.at(fk.order)[i] += g * rest * fk.power * ipow(d.at(fk.order)[i], fk.power - 1);
                    }
                }
            }
        }
        Vec grad = adj.at(0);
        for (const auto& [order, a] : adj) {
            if (order == 0) continue;
            const Vec back = spatial_derivative(a, dx_, order, scheme_);
            grad += (order % 2 == 1) ? Vec(-back) : back;
        }
        return grad;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["variables"] = variables_;
        j["terms"] = labels();
        j["is_field"] = is_field_;
        if (is_field_) {
            j["dx"] = dx_;
            j["scheme"] = scheme_ == DerivativeScheme::spectral ? "spectral" : "central_fd";
        }
        if (theta_) j["theta"] = {{"a", theta_->a}, {"b", theta_->b}};
        return j;
    }

    static LiftMap from_json(const nlohmann::json& j) {
        const auto vars = j.at("variables").get<std::vector<std::string>>();
        const auto terms = j.at("terms").get<std::vector<std::string>>();
        if (j.value("is_field", false)) {
            require(vars.size() == 1, "field lift has exactly one variable");
            const auto scheme = j.value("scheme", std::string("spectral")) == "central_fd"
                                    ? DerivativeScheme::central_fd
                                    : DerivativeScheme::spectral;
            return field(vars[0], terms, j.at("dx").get<double>(), scheme);
        }
        std::optional<ThetaParams> theta;
        if (j.contains("theta")) theta = ThetaParams{j["theta"].at("a").get<double>(), j["theta"].at("b").get<double>()};
        return state(vars, terms, theta);
    }

private:
    LiftMap() = default;

    void build(const std::vector<std::string>& terms) {
        require(!variables_.empty(), "lift needs at least one state variable");
        require(!terms.empty(), "lift needs at least one term");
        std::set<std::string> seen;
        for (const auto& raw : terms) {
            FeatureTerm t;
            t.label = detail::trim(raw);
            require(!t.label.empty(), "lift term label is empty");
            require(seen.insert(t.label).second, "duplicate lift term '" + t.label + "'");
            t.monomials = detail::TermParser(t.label, variables_, is_field_, theta_.has_value()).parse();
            t.kind = classify(t);
            for (const auto& m : t.monomials)
                for (const auto& f : m.factors)
                    if (f.kind == FactorKind::derivative) orders_.insert(f.order);
            terms_.push_back(std::move(t));
        }
    }

    FeatureTerm::Kind classify(const FeatureTerm& t) const {
        bool trig_term = false, deriv = false;
        std::size_t factor_count = 0;
        for (const auto& m : t.monomials) {
            factor_count += m.factors.size();
            for (const auto& f : m.factors) {
                trig_term |= f.kind == FactorKind::cos_theta || f.kind == FactorKind::sin_theta;
                deriv |= f.kind == FactorKind::derivative;
            }
        }
        if (trig_term) return FeatureTerm::Kind::custom_trig;
        if (!is_field_) return FeatureTerm::Kind::monomial;
        if (deriv && t.monomials.size() == 1 && factor_count == 1 && t.monomials[0].factors[0].power == 1)
            return FeatureTerm::Kind::spatial_derivative;
        return FeatureTerm::Kind::product_of;
    }

    std::pair<double, double> trig(const Vec& x) const {
        if (!theta_) return {0.0, 0.0};
        const double th = theta_->a - theta_->b / (1.0 + x.squaredNorm());
        return {std::cos(th), std::sin(th)};
    }

    static double state_factor(const Factor& f, const Vec& x, double c, double s) {
        switch (f.kind) {
            case FactorKind::variable: return x[f.var];
            case FactorKind::cos_theta: return c;
            case FactorKind::sin_theta: return s;
            case FactorKind::derivative: break;
        }
        return 0.0;
    }

    static double ipow(double v, int p) {
        double r = 1.0;
        for (int k = 0; k < p; ++k) r *= v;
        return r;
    }

    std::vector<std::string> variables_;
    std::vector<FeatureTerm> terms_;
    std::optional<ThetaParams> theta_;
    std::set<int> orders_;
    bool is_field_ = false;
    double dx_ = 0.0;
    DerivativeScheme scheme_ = DerivativeScheme::spectral;
};

}  // namespace kandy
