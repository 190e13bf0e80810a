#pragma once

// Experiment configuration: TOML schema, validation with field paths, and a
// canonical JSON echo used for the manifest and its hash.
//
// Schema (keys not listed are rejected):
//   seed (int, required), name, output_dir
//   [system]     name (required: lorenz|henon|ikeda|ks|burgers|hopf),
//                per-system parameters, test_fraction
//   [lift]       terms (required), scheme = spectral|central_fd, standardize
//   [spline]     grid, knots (required), basis_scale, init = small_random|zero, init_amplitude
//   [train]      learning_rate, epochs, lambda_roll (required), optimizer, lr_final,
//                rollout_horizon, rollout_integrator, dt, grid_update_every,
//                grid_update_until, derivative_scheme, batch, freeze_coeffs, whiten_rcond
//   [symbolic]   tau, w, w_s, top_t, c_max, min_contribution, center, max_fit_samples
//   [diagnostics] per-system settings, see DiagnosticsConfig

#include "kandy/symbolic.hpp"
#include "kandy/systems.hpp"
#include "kandy/training.hpp"

#include <toml.hpp>

#include <set>

namespace kandy {

enum class SystemKind { lorenz, henon, ikeda, ks, burgers, hopf };

inline const char* system_name(SystemKind k) {
    switch (k) {
        case SystemKind::lorenz: return "lorenz";
        case SystemKind::henon: return "henon";
        case SystemKind::ikeda: return "ikeda";
        case SystemKind::ks: return "ks";
        case SystemKind::burgers: return "burgers";
        case SystemKind::hopf: return "hopf";
    }
    return "?";
}

inline bool is_field_system(SystemKind k) { return k == SystemKind::ks || k == SystemKind::burgers; }

inline std::vector<std::string> system_variables(SystemKind k) {
    switch (k) {
        case SystemKind::lorenz: return {"x", "y", "z"};
        case SystemKind::henon:
        case SystemKind::ikeda: return {"x", "y"};
        case SystemKind::ks:
        case SystemKind::burgers: return {"u"};
        case SystemKind::hopf: return {"x1", "x2", "x3", "x4"};
    }
    return {};
}

struct MapSpec {
    std::size_t samples = 3000;
    std::size_t burn_in = 100;
    Vec x0 = Vec::Zero(2);
};

struct HopfSpec {
    std::size_t points = 2000;      // scattered training samples
    std::size_t fibers = 0;         // training fibers
    std::size_t per_fiber = 32;
    std::size_t test_points = 500;
    std::size_t test_fibers = 20;   // held-out fibers for the fiber metrics
};

struct SystemConfig {
    SystemKind kind = SystemKind::lorenz;
    LorenzSpec lorenz;
    HenonParams henon;
    IkedaParams ikeda;
    MapSpec map;
    KsSpec ks;
    BurgersSpec burgers;
    HopfSpec hopf;
    double test_fraction = 0.2;  // trailing share of samples held out
};

struct LiftConfig {
    std::vector<std::string> terms;
    DerivativeScheme scheme = DerivativeScheme::spectral;
    bool standardize = false;
};

struct DiagnosticsConfig {
    // lorenz
    std::size_t lyapunov_intervals = 2000;
    std::size_t lyapunov_transient = 50;
    Vec nrmse_ic = (Vec(3) << 25.0, 5.0, 4.0).finished();
    double nrmse_horizon = 3.0;      // Lyapunov times
    Vec reentry_ic = (Vec(3) << 5.0, -25.0, 1.0).finished();
    double reentry_time = 2.0;
    double coherence_horizon = 5.0;  // Lyapunov times for the KS-statistic check
    // maps
    std::size_t map_lyapunov_iterations = 100000;
    std::size_t dimension_points = 5000;
    // fields
    std::size_t field_snapshots = 50;
    int field_substeps = 8;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string name;
    std::string output_dir;
    SystemConfig system;
    LiftConfig lift;
    SplineSpec spline;
    TrainConfig train;
    SymbolicSettings symbolic;
    DiagnosticsConfig diagnostics;

    /// Stage seeds: generate 1, train 2, discover 3, diagnose 4.
    std::uint64_t stage_seed(int stage) const { return derive_seed(seed, static_cast<std::uint64_t>(stage)); }

    nlohmann::json to_json() const;
};

namespace detail {

/// Typed access to one TOML table that remembers which keys were read, so
/// leftovers can be reported as unknown.
class TableReader {
public:
    TableReader(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

    bool has(const std::string& key) const { return t_ && t_->contains(key); }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const toml::node* node(const std::string& key) {
        seen_.insert(key);
        return t_ ? t_->get(key) : nullptr;
    }

    double real(const std::string& key, std::optional<double> def = std::nullopt) {
        const toml::node* n = node(key);
        if (!n) return fallback(key, def);
        if (auto v = n->value_exact<double>()) return finite(key, *v);
        if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
        throw ConfigError(where(key), "expected a number");
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> def = std::nullopt) {
        const toml::node* n = node(key);
        if (!n) return fallback(key, def);
        if (auto v = n->value_exact<std::int64_t>()) return *v;
        throw ConfigError(where(key), "expected an integer");
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> def = std::nullopt, std::size_t min = 0) {
        const std::int64_t v = integer(key, def ? std::optional<std::int64_t>(static_cast<std::int64_t>(*def)) : std::nullopt);
        if (v < static_cast<std::int64_t>(min)) throw ConfigError(where(key), "must be at least " + std::to_string(min));
        return static_cast<std::size_t>(v);
    }

    bool boolean(const std::string& key, std::optional<bool> def = std::nullopt) {
        const toml::node* n = node(key);
        if (!n) return fallback(key, def);
        if (auto v = n->value_exact<bool>()) return *v;
        throw ConfigError(where(key), "expected a boolean");
    }

    std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
        const toml::node* n = node(key);
        if (!n) return fallback(key, def);
        if (auto v = n->value_exact<std::string>()) return *v;
        throw ConfigError(where(key), "expected a string");
    }

    template <class E>
    E choice(const std::string& key, const std::vector<std::pair<std::string, E>>& options, std::optional<E> def) {
        std::optional<std::string> d;
        if (def)
            for (const auto& [n, v] : options)
                if (v == *def) d = n;
        const std::string s = string(key, d);
        for (const auto& [n, v] : options)
            if (n == s) return v;
        std::string all;
        for (const auto& [n, v] : options) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError(where(key), "unknown value '" + s + "' (expected one of: " + all + ")");
    }

    Vec vector(const std::string& key, std::optional<Vec> def, Eigen::Index size) {
        const toml::node* n = node(key);
        if (!n) return fallback(key, def);
        const auto* a = n->as_array();
        if (!a) throw ConfigError(where(key), "expected an array of numbers");
        if (static_cast<Eigen::Index>(a->size()) != size)
            throw ConfigError(where(key), "expected " + std::to_string(size) + " entries");
        Vec v(size);
        for (Eigen::Index i = 0; i < size; ++i) {
            const toml::node& e = *a->get(static_cast<std::size_t>(i));
            if (auto d = e.value_exact<double>()) v[i] = finite(key, *d);
            else if (auto k = e.value_exact<std::int64_t>()) v[i] = static_cast<double>(*k);
            else throw ConfigError(where(key), "expected an array of numbers");
        }
        return v;
    }

    std::vector<std::string> strings(const std::string& key) {
        const toml::node* n = node(key);
        if (!n) throw ConfigError(where(key), "missing required field");
        const auto* a = n->as_array();
        if (!a) throw ConfigError(where(key), "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : *a) {
            auto s = e.value_exact<std::string>();
            if (!s) throw ConfigError(where(key), "expected an array of strings");
            out.push_back(*s);
        }
        return out;
    }

    /// Rejects keys that were never read.
    void finish() const {
        if (!t_) return;
        for (const auto& [k, v] : *t_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw ConfigError(where(key), "unknown field");
        }
    }

private:
    template <class T>
    T fallback(const std::string& key, const std::optional<T>& def) const {
        if (!def) throw ConfigError(where(key), "missing required field");
        return *def;
    }

    double finite(const std::string& key, double v) const {
        if (!std::isfinite(v)) throw ConfigError(where(key), "must be finite");
        return v;
    }

    const toml::table* t_;
    std::string path_;
    std::set<std::string> seen_;
};

inline const toml::table* subtable(const toml::table& root, const std::string& key, bool required) {
    const toml::node* n = root.get(key);
    if (!n) {
        if (required) throw ConfigError(key, "missing required table");
        return nullptr;
    }
    if (!n->is_table()) throw ConfigError(key, "expected a table");
    return n->as_table();
}

inline void check(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

inline void read_system(TableReader& r, SystemConfig& s) {
    s.kind = r.choice<SystemKind>("name",
                                  {{"lorenz", SystemKind::lorenz},
                                   {"henon", SystemKind::henon},
                                   {"ikeda", SystemKind::ikeda},
                                   {"ks", SystemKind::ks},
                                   {"burgers", SystemKind::burgers},
                                   {"hopf", SystemKind::hopf}},
                                  std::nullopt);
    if (s.kind != SystemKind::hopf) {
        s.test_fraction = r.real("test_fraction", s.test_fraction);
        check(s.test_fraction >= 0.0 && s.test_fraction < 1.0, r.where("test_fraction"), "must lie in [0, 1)");
    }
    switch (s.kind) {
        case SystemKind::lorenz: {
            auto& l = s.lorenz;
            l.params.sigma = r.real("sigma", l.params.sigma);
            l.params.rho = r.real("rho", l.params.rho);
            l.params.beta = r.real("beta", l.params.beta);
            l.dt = r.real("dt", l.dt);
            check(l.dt > 0.0, r.where("dt"), "must be positive");
            l.samples = r.count("samples", l.samples, 16);
            l.burn_in = r.real("burn_in", l.burn_in);
            check(l.burn_in >= 0.0, r.where("burn_in"), "must be nonnegative");
            l.ic = r.vector("ic", l.ic, 3);
            l.perturbation = r.real("perturbation", l.perturbation);
            check(l.perturbation >= 0.0, r.where("perturbation"), "must be nonnegative");
            break;
        }
        case SystemKind::henon:
        case SystemKind::ikeda: {
            if (s.kind == SystemKind::henon) {
                s.henon.a = r.real("a", s.henon.a);
                s.henon.b = r.real("b", s.henon.b);
            } else {
                s.ikeda.u = r.real("u", s.ikeda.u);
                s.ikeda.k = r.real("k", s.ikeda.k);
                s.ikeda.p = r.real("p", s.ikeda.p);
            }
            s.map.samples = r.count("samples", s.map.samples, 16);
            s.map.burn_in = r.count("burn_in", s.map.burn_in);
            s.map.x0 = r.vector("x0", s.map.x0, 2);
            break;
        }
        case SystemKind::ks: {
            auto& k = s.ks;
            k.length = r.real("length", k.length);
            check(k.length > 0.0, r.where("length"), "must be positive");
            k.n = static_cast<int>(r.count("n", static_cast<std::size_t>(k.n), 8));
            check(k.n % 2 == 0, r.where("n"), "must be even");
            k.nu = r.real("nu", k.nu);
            k.dt = r.real("dt", k.dt);
            check(k.dt > 0.0, r.where("dt"), "must be positive");
            k.samples = r.count("samples", k.samples, 4);
            k.burn_in = r.count("burn_in", k.burn_in);
            k.sample_every = static_cast<int>(r.count("sample_every", static_cast<std::size_t>(k.sample_every), 1));
            break;
        }
        case SystemKind::burgers: {
            auto& b = s.burgers;
            b.ic = r.choice<BurgersSpec::Ic>(
                "ic", {{"sine", BurgersSpec::Ic::sine}, {"random_fourier", BurgersSpec::Ic::random_fourier}}, b.ic);
            b.modes = static_cast<int>(r.count("modes", static_cast<std::size_t>(b.modes), 1));
            b.decay = r.real("decay", b.decay);
            b.seed = static_cast<std::uint64_t>(r.count("ic_seed", static_cast<std::size_t>(b.seed)));
            b.nu = r.real("nu", b.nu);
            check(b.nu >= 0.0, r.where("nu"), "must be nonnegative");
            b.n = static_cast<int>(r.count("n", static_cast<std::size_t>(b.n), 8));
            b.domain = r.real("domain", b.domain);
            check(b.domain > 0.0, r.where("domain"), "must be positive");
            b.dt_out = r.real("dt_out", b.dt_out);
            check(b.dt_out > 0.0, r.where("dt_out"), "must be positive");
            b.samples = r.count("samples", b.samples, 4);
            break;
        }
        case SystemKind::hopf: {
            auto& h = s.hopf;
            h.points = r.count("points", h.points);
            h.fibers = r.count("fibers", h.fibers);
            h.per_fiber = r.count("per_fiber", h.per_fiber, 2);
            h.test_points = r.count("test_points", h.test_points);
            h.test_fibers = r.count("test_fibers", h.test_fibers, 1);
            check(h.points + h.fibers > 0, r.where("points"), "training set is empty");
            break;
        }
    }
}

inline void read_train(TableReader& r, TrainConfig& t, double default_dt) {
    t.learning_rate = r.real("learning_rate");
    check(t.learning_rate > 0.0, r.where("learning_rate"), "must be positive");
    t.epochs = static_cast<int>(r.count("epochs"));
    t.lambda_roll = r.real("lambda_roll");
    check(t.lambda_roll >= 0.0, r.where("lambda_roll"), "must be nonnegative");
    t.optimizer = r.choice<Optimizer>("optimizer",
                                      {{"adam", Optimizer::adam}, {"adam_whitened", Optimizer::adam_whitened}},
                                      Optimizer::adam);
    t.lr_final = r.real("lr_final", 0.0);
    check(t.lr_final >= 0.0, r.where("lr_final"), "must be nonnegative");
    t.rollout_horizon = static_cast<int>(r.count("rollout_horizon", 10));
    check(t.lambda_roll == 0.0 || t.rollout_horizon >= 1, r.where("rollout_horizon"),
          "must be at least 1 when lambda_roll > 0");
    t.rollout_integrator = r.choice<Integrator>("rollout_integrator",
                                                {{"rk4", Integrator::rk4}, {"euler", Integrator::euler}},
                                                Integrator::rk4);
    t.dt = r.real("dt", default_dt);
    check(t.dt > 0.0, r.where("dt"), "must be positive");
    t.grid_update_every = static_cast<int>(r.count("grid_update_every", 0));
    t.grid_update_until = static_cast<int>(r.count("grid_update_until", static_cast<std::size_t>(t.epochs)));
    t.derivative_scheme = r.choice<TargetScheme>("derivative_scheme",
                                                 {{"provided", TargetScheme::provided},
                                                  {"forward_diff", TargetScheme::forward_diff},
                                                  {"central_diff", TargetScheme::central_diff}},
                                                 TargetScheme::central_diff);
    t.batch = static_cast<int>(r.count("batch", 0));
    t.freeze_coeffs = r.boolean("freeze_coeffs", false);
    t.whiten_rcond = r.real("whiten_rcond", t.whiten_rcond);
    check(t.whiten_rcond >= 0.0 && t.whiten_rcond < 1.0, r.where("whiten_rcond"), "must lie in [0, 1)");
}

inline void read_symbolic(TableReader& r, SymbolicSettings& s) {
    s.tau = r.real("tau", s.tau);
    check(s.tau >= 0.0 && s.tau <= 1.0, r.where("tau"), "must lie in [0, 1]");
    s.w = r.real("w", s.w);
    check(s.w > 0.0, r.where("w"), "must be positive");
    s.w_s = r.real("w_s", s.w_s);
    check(s.w_s > 0.0 && s.w_s < 1.0, r.where("w_s"), "must lie in (0, 1)");
    if (r.has("top_t")) s.top_t = r.count("top_t");
    else r.node("top_t");
    if (r.has("c_max")) s.c_max = static_cast<int>(r.count("c_max"));
    else r.node("c_max");
    s.min_contribution = r.real("min_contribution", s.min_contribution);
    check(s.min_contribution >= 0.0, r.where("min_contribution"), "must be nonnegative");
    s.center = r.boolean("center", s.center);
    s.max_fit_samples = r.count("max_fit_samples", s.max_fit_samples, 16);
}

inline void read_diagnostics(TableReader& r, DiagnosticsConfig& d, SystemKind kind) {
    switch (kind) {
        case SystemKind::lorenz:
            d.lyapunov_intervals = r.count("lyapunov_intervals", d.lyapunov_intervals, 10);
            d.lyapunov_transient = r.count("lyapunov_transient", d.lyapunov_transient);
            d.nrmse_ic = r.vector("nrmse_ic", d.nrmse_ic, 3);
            d.nrmse_horizon = r.real("nrmse_horizon", d.nrmse_horizon);
            check(d.nrmse_horizon > 0.0, r.where("nrmse_horizon"), "must be positive");
            d.reentry_ic = r.vector("reentry_ic", d.reentry_ic, 3);
            d.reentry_time = r.real("reentry_time", d.reentry_time);
            d.coherence_horizon = r.real("coherence_horizon", d.coherence_horizon);
            check(d.coherence_horizon > 0.0, r.where("coherence_horizon"), "must be positive");
            d.dimension_points = r.count("dimension_points", d.dimension_points, 100);
            break;
        case SystemKind::henon:
        case SystemKind::ikeda:
            d.map_lyapunov_iterations = r.count("lyapunov_iterations", d.map_lyapunov_iterations, 100);
            d.dimension_points = r.count("dimension_points", d.dimension_points, 100);
            break;
        case SystemKind::ks:
        case SystemKind::burgers:
            d.field_snapshots = r.count("snapshots", d.field_snapshots, 2);
            d.field_substeps = static_cast<int>(r.count("substeps", static_cast<std::size_t>(d.field_substeps), 1));
            break;
        case SystemKind::hopf: break;
    }
}

inline double system_dt(const SystemConfig& s) {
    switch (s.kind) {
        case SystemKind::lorenz: return s.lorenz.dt;
        case SystemKind::ks: return s.ks.dt * s.ks.sample_every;
        case SystemKind::burgers: return s.burgers.dt_out;
        default: return 1.0;
    }
}

}  // namespace detail

/// Parses and validates a TOML document. Every failure is a ConfigError whose
/// path names the offending field.
inline ExperimentConfig parse_config(std::string_view text, const std::string& source = "config") {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        const auto& b = e.source().begin;
        throw ConfigError(source + ":" + std::to_string(b.line) + ":" + std::to_string(b.column),
                          std::string(e.description()));
    }
    ExperimentConfig c;
    detail::TableReader top(&root, "");
    const std::int64_t seed = top.integer("seed");
    detail::check(seed >= 0, "seed", "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);

    detail::TableReader sys(detail::subtable(root, "system", true), "system");
    top.node("system");
    detail::read_system(sys, c.system);
    sys.finish();
    c.name = top.string("name", std::string(system_name(c.system.kind)));
    c.output_dir = top.string("output_dir", "runs/" + c.name);

    detail::TableReader lift(detail::subtable(root, "lift", true), "lift");
    top.node("lift");
    c.lift.terms = lift.strings("terms");
    detail::check(!c.lift.terms.empty(), "lift.terms", "must list at least one term");
    c.lift.scheme = lift.choice<DerivativeScheme>(
        "scheme", {{"spectral", DerivativeScheme::spectral}, {"central_fd", DerivativeScheme::central_fd}},
        DerivativeScheme::spectral);
    c.lift.standardize = lift.boolean("standardize", false);
    lift.finish();
    try {
        // grid spacing does not affect term validity
        if (is_field_system(c.system.kind)) LiftMap::field("u", c.lift.terms, 1.0, c.lift.scheme);
        else if (c.system.kind == SystemKind::ikeda) LiftMap::state(system_variables(c.system.kind), c.lift.terms, ThetaParams{});
        else LiftMap::state(system_variables(c.system.kind), c.lift.terms);
    } catch (const InvalidArgument& e) {
        throw ConfigError("lift.terms", e.what());
    }

    detail::TableReader sp(detail::subtable(root, "spline", true), "spline");
    top.node("spline");
    c.spline.grid = static_cast<int>(sp.count("grid", std::nullopt, 1));
    c.spline.knots = static_cast<int>(sp.count("knots", std::nullopt, 1));
    c.spline.basis_scale = sp.real("basis_scale", Spline1D::kDefaultScale);
    detail::check(c.spline.basis_scale > 0.0, "spline.basis_scale", "must be positive");
    const bool zero_init = sp.choice<bool>("init", {{"small_random", false}, {"zero", true}}, false);
    const double amp = sp.real("init_amplitude", 0.1);
    detail::check(amp >= 0.0, "spline.init_amplitude", "must be nonnegative");
    c.spline.init = zero_init ? SplineInit::zero() : SplineInit::small_random(c.stage_seed(2), amp);
    sp.finish();

    detail::TableReader tr(detail::subtable(root, "train", true), "train");
    top.node("train");
    detail::read_train(tr, c.train, detail::system_dt(c.system));
    c.train.seed = c.stage_seed(2);
    tr.finish();
    if (c.spline.grid == 1)
        detail::check(c.train.freeze_coeffs, "train.freeze_coeffs", "must be true when spline.grid = 1");
    if (c.system.kind == SystemKind::hopf)
        detail::check(c.train.lambda_roll == 0.0, "train.lambda_roll", "must be 0 for static data");

    detail::TableReader sym(detail::subtable(root, "symbolic", false), "symbolic");
    top.node("symbolic");
    detail::read_symbolic(sym, c.symbolic);
    c.symbolic.seed = c.stage_seed(3);
    sym.finish();

    detail::TableReader dg(detail::subtable(root, "diagnostics", false), "diagnostics");
    top.node("diagnostics");
    detail::read_diagnostics(dg, c.diagnostics, c.system.kind);
    dg.finish();

    top.finish();
    return c;
}

/// Replaces the global seed and every seed derived from it.
inline void set_seed(ExperimentConfig& c, std::uint64_t seed) {
    c.seed = seed;
    if (c.spline.init.kind == SplineInit::Kind::small_random) c.spline.init.seed = c.stage_seed(2);
    c.train.seed = c.stage_seed(2);
    c.symbolic.seed = c.stage_seed(3);
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
    return parse_config(read_text(p), p.string());
}

namespace detail {

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

/// Resolved configuration including defaults; the manifest records it and its
/// hash covers it.
inline nlohmann::json ExperimentConfig::to_json() const {
    using nlohmann::json;
    json sys = {{"name", system_name(system.kind)}};
    if (system.kind != SystemKind::hopf) sys["test_fraction"] = system.test_fraction;
    switch (system.kind) {
        case SystemKind::lorenz: {
            const auto& l = system.lorenz;
            sys.update({{"sigma", l.params.sigma}, {"rho", l.params.rho}, {"beta", l.params.beta}, {"dt", l.dt},
                        {"samples", l.samples}, {"burn_in", l.burn_in}, {"ic", detail::vec_json(l.ic)},
                        {"perturbation", l.perturbation}});
            break;
        }
        case SystemKind::henon:
            sys.update({{"a", system.henon.a}, {"b", system.henon.b}});
            [[fallthrough]];
        case SystemKind::ikeda:
            if (system.kind == SystemKind::ikeda)
                sys.update({{"u", system.ikeda.u}, {"k", system.ikeda.k}, {"p", system.ikeda.p}});
            sys.update({{"samples", system.map.samples}, {"burn_in", system.map.burn_in},
                        {"x0", detail::vec_json(system.map.x0)}});
            break;
        case SystemKind::ks: {
            const auto& k = system.ks;
            sys.update({{"length", k.length}, {"n", k.n}, {"nu", k.nu}, {"dt", k.dt}, {"samples", k.samples},
                        {"burn_in", k.burn_in}, {"sample_every", k.sample_every}});
            break;
        }
        case SystemKind::burgers: {
            const auto& b = system.burgers;
            sys.update({{"ic", b.ic == BurgersSpec::Ic::sine ? "sine" : "random_fourier"}, {"modes", b.modes},
                        {"decay", b.decay}, {"ic_seed", b.seed}, {"nu", b.nu}, {"n", b.n}, {"domain", b.domain},
                        {"dt_out", b.dt_out}, {"samples", b.samples}});
            break;
        }
        case SystemKind::hopf: {
            const auto& h = system.hopf;
            sys.update({{"points", h.points}, {"fibers", h.fibers}, {"per_fiber", h.per_fiber},
                        {"test_points", h.test_points}, {"test_fibers", h.test_fibers}});
            break;
        }
    }
    const auto& t = train;
    const char* schemes[] = {"provided", "forward_diff", "central_diff"};
    json tr = {{"optimizer", t.optimizer == Optimizer::adam ? "adam" : "adam_whitened"},
               {"learning_rate", t.learning_rate},
               {"lr_final", t.lr_final},
               {"epochs", t.epochs},
               {"lambda_roll", t.lambda_roll},
               {"rollout_horizon", t.rollout_horizon},
               {"rollout_integrator", integrator_name(t.rollout_integrator)},
               {"dt", t.dt},
               {"grid_update_every", t.grid_update_every},
               {"grid_update_until", t.grid_update_until},
               {"derivative_scheme", schemes[static_cast<int>(t.derivative_scheme)]},
               {"batch", t.batch},
               {"freeze_coeffs", t.freeze_coeffs},
               {"whiten_rcond", t.whiten_rcond},
               {"seed", t.seed}};
    const auto& s = symbolic;
    json sym = {{"tau", s.tau},
                {"w", s.w},
                {"w_s", s.w_s},
                {"min_contribution", s.min_contribution},
                {"center", s.center},
                {"max_fit_samples", s.max_fit_samples},
                {"seed", s.seed}};
    sym["top_t"] = s.top_t == std::numeric_limits<std::size_t>::max() ? json("inf") : json(s.top_t);
    sym["c_max"] = s.c_max == std::numeric_limits<int>::max() ? json("inf") : json(s.c_max);
    const auto& d = diagnostics;
    json dg;
    switch (system.kind) {
        case SystemKind::lorenz:
            dg = {{"lyapunov_intervals", d.lyapunov_intervals}, {"lyapunov_transient", d.lyapunov_transient},
                  {"nrmse_ic", detail::vec_json(d.nrmse_ic)}, {"nrmse_horizon", d.nrmse_horizon},
                  {"reentry_ic", detail::vec_json(d.reentry_ic)}, {"reentry_time", d.reentry_time},
                  {"coherence_horizon", d.coherence_horizon}, {"dimension_points", d.dimension_points}};
            break;
        case SystemKind::henon:
        case SystemKind::ikeda:
            dg = {{"lyapunov_iterations", d.map_lyapunov_iterations}, {"dimension_points", d.dimension_points}};
            break;
        case SystemKind::ks:
        case SystemKind::burgers:
            dg = {{"snapshots", d.field_snapshots}, {"substeps", d.field_substeps}};
            break;
        case SystemKind::hopf: dg = json::object(); break;
    }
    return {{"seed", seed},
            {"name", name},
            {"system", sys},
            {"lift",
             {{"terms", lift.terms},
              {"scheme", lift.scheme == DerivativeScheme::spectral ? "spectral" : "central_fd"},
              {"standardize", lift.standardize}}},
            {"spline",
             {{"grid", spline.grid},
              {"knots", spline.knots},
              {"basis_scale", spline.basis_scale},
              {"init", spline.init.kind == SplineInit::Kind::zero ? "zero" : "small_random"},
              {"init_amplitude", spline.init.amplitude},
              {"init_seed", spline.init.seed}}},
            {"train", tr},
            {"symbolic", sym},
            {"diagnostics", dg}};
}

}  // namespace kandy
