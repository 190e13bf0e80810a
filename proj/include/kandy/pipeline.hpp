#pragma once

// Experiment stages generate -> train -> discover -> diagnose over a directory
// of persisted artifacts, plus the run manifest.
//
// Layout under the output directory:
//   data/trajectory.csv | data/field.{bin,json} | data/hopf_{train,test}.csv
//   model.json, loss_history.csv, train_summary.json
//   equations.json, equations.txt, edge_fits.json, symbolic_model.json
//   diagnostics.json (+ nrmse.csv, rollout.csv, error_rms.csv by system)
//   manifest.json

#include "kandy/config.hpp"
#include "kandy/diagnostics.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace kandy {

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return s.str();
}

inline std::string file_sha256(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return sha256_hex(s.str());
}

enum class Stage { generate, train, discover, diagnose };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::generate: return "generate";
        case Stage::train: return "train";
        case Stage::discover: return "discover";
        case Stage::diagnose: return "diagnose";
    }
    return "?";
}

/// Loaded training and held-out data for one experiment.
struct ExperimentData {
    Dataset train;
    Dataset test;
    bool has_test = false;
    Trajectory trajectory;   // state systems
    FieldTrajectory field;   // field systems
    HopfData hopf_train;
    HopfData hopf_test;
    std::size_t n_train = 0; // leading samples (or snapshots) used for training
};

class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::filesystem::path out) : cfg_(std::move(cfg)), out_(std::move(out)) {}

    const ExperimentConfig& config() const noexcept { return cfg_; }
    const std::filesystem::path& out() const noexcept { return out_; }

    void run(Stage s) {
        switch (s) {
            case Stage::generate: generate(); break;
            case Stage::train: train_stage(); break;
            case Stage::discover: discover(); break;
            case Stage::diagnose: diagnose(); break;
        }
        update_manifest(s);
    }

    void run_all() {
        for (Stage s : {Stage::generate, Stage::train, Stage::discover, Stage::diagnose}) run(s);
    }

    // ------------------------------------------------------------ helpers

    bool is_field() const { return is_field_system(cfg_.system.kind); }
    bool is_map() const { return cfg_.system.kind == SystemKind::henon || cfg_.system.kind == SystemKind::ikeda; }

    std::vector<std::string> state_variables() const { return system_variables(cfg_.system.kind); }

    std::vector<std::string> output_names() const {
        if (is_field()) return {"u_t"};
        if (cfg_.system.kind == SystemKind::hopf) return {"h1", "h2", "h3"};
        std::vector<std::string> o;
        for (const auto& v : state_variables()) o.push_back(v + "'");
        return o;
    }

    std::shared_ptr<const LiftMap> make_lift(double dx) const {
        const auto& terms = cfg_.lift.terms;
        try {
            if (is_field()) return std::make_shared<LiftMap>(LiftMap::field("u", terms, dx, cfg_.lift.scheme));
            std::optional<ThetaParams> theta;
            if (cfg_.system.kind == SystemKind::ikeda) theta = ThetaParams{cfg_.system.ikeda.k, cfg_.system.ikeda.p};
            return std::make_shared<LiftMap>(LiftMap::state(state_variables(), terms, theta));
        } catch (const InvalidArgument& e) {
            throw ConfigError("lift.terms", e.what());
        }
    }

    std::filesystem::path path(const std::string& rel) const { return out_ / rel; }

    std::filesystem::path need(const std::string& rel) const {
        const auto p = path(rel);
        if (!std::filesystem::exists(p)) throw MissingArtifactError("missing artifact " + p.string());
        return p;
    }

    /// Reads the generated data and splits it into training and held-out parts.
    ExperimentData load_data() const {
        ExperimentData d;
        const auto& sys = cfg_.system;
        auto split = [&](std::size_t n) {
            const auto held = static_cast<std::size_t>(std::floor(sys.test_fraction * static_cast<double>(n)));
            return n - held;
        };
        if (sys.kind == SystemKind::hopf) {
            d.hopf_train = read_hopf(need("data/hopf_train.csv"));
            d.hopf_test = read_hopf(need("data/hopf_test.csv"));
            d.train = static_dataset(d.hopf_train.x, d.hopf_train.h);
            d.has_test = d.hopf_test.x.rows() > 0;
            if (d.has_test) d.test = static_dataset(d.hopf_test.x, d.hopf_test.h);
            d.n_train = static_cast<std::size_t>(d.hopf_train.x.rows());
            return d;
        }
        if (is_field()) {
            need("data/field.json");
            need("data/field.bin");
            d.field = read_field(path("data/field"));
            const std::size_t n = d.field.snapshots();
            d.n_train = split(n);
            const Eigen::Index a = static_cast<Eigen::Index>(d.n_train);
            auto part = [&](Eigen::Index r0, Eigen::Index rows) {
                const Mat u = d.field.u.middleRows(r0, rows);
                return field_dataset(u, d.field.dt, estimate_derivatives(u, d.field.dt, cfg_.train.derivative_scheme));
            };
            d.train = part(0, a);
            d.has_test = static_cast<std::size_t>(a) + 2 <= n;
            if (d.has_test) d.test = part(a, static_cast<Eigen::Index>(n) - a);
            return d;
        }
        d.trajectory = read_trajectory_csv(need("data/trajectory.csv"));
        const std::size_t n = d.trajectory.size();
        d.n_train = split(n);
        const auto a = static_cast<Eigen::Index>(d.n_train);
        const auto rest = static_cast<Eigen::Index>(n) - a;
        require(a >= 2, "too few training samples");
        if (is_map()) {
            d.train = map_dataset(d.trajectory.states.topRows(a));
            d.has_test = rest >= 2;
            if (d.has_test) d.test = map_dataset(d.trajectory.states.bottomRows(rest));
            return d;
        }
        const Mat der = estimate_derivatives(d.trajectory.states, d.trajectory.dt, cfg_.train.derivative_scheme);
        d.train = ode_dataset(d.trajectory.states.topRows(a), d.trajectory.dt, der.topRows(a));
        d.has_test = rest >= 2;
        if (d.has_test) d.test = ode_dataset(d.trajectory.states.bottomRows(rest), d.trajectory.dt, der.bottomRows(rest));
        return d;
    }

    KandyModel load_model(const std::string& rel) const {
        const auto j = read_json(need(rel));
        try {
            return KandyModel::from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(rel + " is not a valid model file: " + e.what());
        } catch (const InvalidArgument& e) {
            throw IoError(rel + " is not a valid model file: " + e.what());
        }
    }

    // ------------------------------------------------------------ stages

    void generate() {
        const auto& sys = cfg_.system;
        const std::uint64_t seed = cfg_.stage_seed(1);
        nlohmann::json meta = {{"system", system_name(sys.kind)}, {"seed", seed}};
        switch (sys.kind) {
            case SystemKind::lorenz: {
                LorenzSpec spec = sys.lorenz;
                spec.seed = seed;
                const Trajectory tr = gen_lorenz(spec);
                write_trajectory_csv(path("data/trajectory.csv"), tr);
                meta["samples"] = tr.size();
                break;
            }
            case SystemKind::henon:
            case SystemKind::ikeda: {
                const Trajectory tr =
                    sys.kind == SystemKind::henon
                        ? iterate_map([&](const Vec& x) { return henon_step(x, sys.henon); }, sys.map.x0, sys.map.samples,
                                      sys.map.burn_in, {"x", "y"})
                        : iterate_map([&](const Vec& x) { return ikeda_step(x, sys.ikeda); }, sys.map.x0, sys.map.samples,
                                      sys.map.burn_in, {"x", "y"});
                write_trajectory_csv(path("data/trajectory.csv"), tr);
                meta["samples"] = tr.size();
                break;
            }
            case SystemKind::ks: {
                KsSpec spec = sys.ks;
                spec.seed = seed;
                const FieldTrajectory f = gen_ks(spec);
                write_field(path("data/field"), f);
                meta["snapshots"] = f.snapshots();
                break;
            }
            case SystemKind::burgers: {
                const FieldTrajectory f = gen_burgers(sys.burgers);
                write_field(path("data/field"), f);
                meta["snapshots"] = f.snapshots();
                break;
            }
            case SystemKind::hopf: {
                const auto& h = sys.hopf;
                write_hopf(path("data/hopf_train.csv"), gen_hopf_dataset(h.points, h.fibers, h.per_fiber, derive_seed(seed, 0)));
                write_hopf(path("data/hopf_test.csv"),
                           gen_hopf_dataset(h.test_points, h.test_fibers, h.per_fiber, derive_seed(seed, 1)));
                meta["train_samples"] = h.points + h.fibers * h.per_fiber;
                meta["test_samples"] = h.test_points + h.test_fibers * h.per_fiber;
                break;
            }
        }
        write_json(path("data/meta.json"), meta);
    }

    void train_stage() {
        const ExperimentData data = load_data();
        const auto lift = make_lift(is_field() ? data.field.dx : 1.0);
        const Mat rows = lifted_rows(*lift, data.train).first;
        KandyModel m = init_model(lift, output_names(), cfg_.spline, cfg_.lift.standardize, rows);
        const TrainResult r = train(m, data.train, data.has_test ? &data.test : nullptr, cfg_.train);
        write_json(path("model.json"), m.to_json());
        write_text(path("loss_history.csv"), r.history.csv());
        write_json(path("train_summary.json"), {{"initial", r.initial.to_json()},
                                                {"final", r.final.to_json()},
                                                {"epochs", cfg_.train.epochs},
                                                {"train_samples", data.train.size()},
                                                {"test_samples", data.has_test ? data.test.size() : 0},
                                                {"parameters", m.param_count()}});
    }

    void discover() {
        const KandyModel m = load_model("model.json");
        const ExperimentData data = load_data();
        const ExtractionResult r = extract_equations(m, data.train, cfg_.symbolic);
        write_json(path("equations.json"), r.equations.to_json());
        write_text(path("equations.txt"), r.equations.text());
        write_json(path("symbolic_model.json"), r.model.to_json());
        nlohmann::json fits = nlohmann::json::array();
        for (std::size_t k = 0; k < r.fits.size(); ++k) {
            const EdgeFit& f = r.fits[k];
            fits.push_back({{"input", m.lift().terms()[f.input].label},
                            {"output", m.outputs()[f.output]},
                            {"family", family_name(f.term.family)},
                            {"term", f.term.to_json()},
                            {"R2", f.r2},
                            {"score", f.score},
                            {"complexity", f.complexity},
                            {"contribution", f.contribution},
                            {"kept", std::find(r.kept.begin(), r.kept.end(), k) != r.kept.end()}});
        }
        write_json(path("edge_fits.json"), fits);
    }

    void diagnose() {
        const KandyModel m = load_model("model.json");
        const ExperimentData data = load_data();
        nlohmann::json rep;
        switch (cfg_.system.kind) {
            case SystemKind::lorenz: rep = diagnose_lorenz(m, data); break;
            case SystemKind::henon:
            case SystemKind::ikeda: rep = diagnose_map(m, data); break;
            case SystemKind::ks:
            case SystemKind::burgers: rep = diagnose_field(m, data); break;
            case SystemKind::hopf: rep = diagnose_hopf(m, data); break;
        }
        rep["system"] = system_name(cfg_.system.kind);
        write_json(path("diagnostics.json"), rep);
    }

private:
    // ------------------------------------------------------------ data files

    static void write_hopf(const std::filesystem::path& p, const HopfData& d) {
        std::string s = "x1,x2,x3,x4,h1,h2,h3,fiber\n";
        for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
            for (int c = 0; c < 4; ++c) s += format_double(d.x(r, c)) + ",";
            for (int c = 0; c < 3; ++c) s += format_double(d.h(r, c)) + ",";
            s += std::to_string(d.fiber[static_cast<std::size_t>(r)]) + "\n";
        }
        write_text(p, s);
    }

    static HopfData read_hopf(const std::filesystem::path& p) {
        std::istringstream in(read_text(p));
        std::string line;
        std::getline(in, line);
        if (line != "x1,x2,x3,x4,h1,h2,h3,fiber") throw IoError(p.string() + ": unexpected header");
        std::vector<std::array<double, 7>> rows;
        std::vector<int> fiber;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::array<double, 7> v{};
            std::size_t at = 0;
            for (int c = 0; c < 8; ++c) {
                const std::size_t next = line.find(',', at);
                const std::string cell = line.substr(at, next == std::string::npos ? std::string::npos : next - at);
                if (cell.empty()) throw IoError(p.string() + ": malformed row");
                if (c < 7) v[static_cast<std::size_t>(c)] = parse_double(cell);
                else fiber.push_back(std::stoi(cell));
                if (next == std::string::npos && c < 7) throw IoError(p.string() + ": malformed row");
                at = next + 1;
            }
            rows.push_back(v);
        }
        HopfData d;
        d.x.resize(static_cast<Eigen::Index>(rows.size()), 4);
        d.h.resize(static_cast<Eigen::Index>(rows.size()), 3);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (int c = 0; c < 4; ++c) d.x(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
            for (int c = 0; c < 3; ++c) d.h(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(4 + c)];
        }
        d.fiber = std::move(fiber);
        return d;
    }

    // ------------------------------------------------------------ diagnostics

    static double attractor_extent(const Mat& pts) {
        return (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).maxCoeff();
    }

    /// Correlation dimension over [0.005, 0.1] of the point-cloud extent, or
    /// null when the estimate is unavailable.
    static nlohmann::json dimension_or_null(const Mat& pts) {
        try {
            const double e = attractor_extent(pts);
            if (!(e > 0.0) || !pts.allFinite()) return nullptr;
            return correlation_dimension(pts, 0.005 * e, 0.1 * e);
        } catch (const Error&) {
            return nullptr;
        }
    }

    static double first_crossing(const Vec& curve, double level, double dt) {
        for (Eigen::Index n = 0; n < curve.size(); ++n)
            if (curve[n] >= level) return static_cast<double>(n) * dt;
        return std::numeric_limits<double>::infinity();
    }

    static nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

    nlohmann::json diagnose_lorenz(const KandyModel& m, const ExperimentData& data) const {
        const auto& dc = cfg_.diagnostics;
        const auto& p = cfg_.system.lorenz.params;
        const double dt = data.trajectory.dt;
        const Integrator scheme = cfg_.train.rollout_integrator;
        const Mat& states = data.trajectory.states;
        const Vec x_start = states.row(static_cast<Eigen::Index>(data.n_train) - 1).transpose();

        LyapunovSettings ls;
        ls.dt = dt;
        ls.transient = dc.lyapunov_transient;
        ls.intervals = dc.lyapunov_intervals;
        ls.integrator = Integrator::rk4;
        const double lam_true = largest_lyapunov_flow([&](const Vec& x) { return lorenz_rhs(x, p); }, x_start, ls);
        const LearnedField f(m);
        ls.integrator = scheme;
        double lam_model = std::numeric_limits<double>::quiet_NaN();
        try {
            lam_model = largest_lyapunov_flow([&](const Vec& x) { return f(x); }, x_start, ls);
        } catch (const Error&) {
        }
        const double tau = lyapunov_time(lam_true);

        const Vec envelope = 10.0 * states.cwiseAbs().colwise().maxCoeff().transpose();
        auto truth_from = [&](const Vec& x0, std::size_t n) { return integrate_lorenz(x0, p, dt, n + 1).states; };

        // NRMSE horizon from the out-of-distribution initial condition
        const auto n_nrmse = static_cast<std::size_t>(std::ceil(dc.nrmse_horizon * tau / dt));
        const RolloutResult pr = rollout(m, dc.nrmse_ic, n_nrmse, DatasetKind::ode, scheme, dt, envelope);
        const Mat truth = truth_from(dc.nrmse_ic, n_nrmse);
        const Eigen::Index len = pr.trajectory.states.rows();
        const Vec curve = nrmse_curve(pr.trajectory.states, truth.topRows(len));
        std::string csv = "t,t_over_tau,nrmse\n";
        for (Eigen::Index n = 0; n < curve.size(); ++n) {
            const double t = static_cast<double>(n) * dt;
            csv += format_double(t) + "," + format_double(t / tau) + "," + format_double(curve[n]) + "\n";
        }
        write_text(path("nrmse.csv"), csv);
        const double t01 = first_crossing(curve, 0.1, dt);
        const double t04 = first_crossing(curve, 0.4, dt);

        // re-entry from a far initial condition
        const auto n_re = static_cast<std::size_t>(std::ceil(dc.reentry_time / dt));
        const RolloutResult re = rollout(m, dc.reentry_ic, n_re, DatasetKind::ode, scheme, dt, envelope);
        const Vec lo = states.colwise().minCoeff().transpose(), hi = states.colwise().maxCoeff().transpose();
        const Vec margin = 0.1 * (hi - lo);
        const Vec last = re.trajectory.states.bottomRows(1).transpose();
        const bool reentered = !re.diverged && (last.array() >= (lo - margin).array()).all() &&
                               (last.array() <= (hi + margin).array()).all();

        // coherence: amplitude distributions over the configured horizon
        const Vec x_test = data.has_test ? data.test.states.row(0).transpose() : x_start;
        const auto n_coh = static_cast<std::size_t>(std::ceil(dc.coherence_horizon * tau / dt));
        const RolloutResult co = rollout(m, x_test, n_coh, DatasetKind::ode, scheme, dt, envelope);
        const Mat co_truth = truth_from(x_test, n_coh);
        write_trajectory_csv(path("rollout.csv"), co.trajectory);
        nlohmann::json ks = nlohmann::json::array();
        double ks_max = 0.0;
        for (Eigen::Index c = 0; c < 3; ++c) {
            const Vec a = co.trajectory.states.col(c), b = co_truth.col(c);
            const double v = ks_statistic({a.data(), a.data() + a.size()}, {b.data(), b.data() + b.size()});
            ks.push_back(v);
            ks_max = std::max(ks_max, v);
        }

        const auto n_dim = std::min<std::size_t>(dc.dimension_points, n_coh + 1);
        const auto dim_rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(n_dim), co.trajectory.states.rows());
        return {{"lyapunov_true", lam_true},
                {"lyapunov_model", finite_or_null(lam_model)},
                {"lyapunov_time", tau},
                {"nrmse_ic", detail::vec_json(dc.nrmse_ic)},
                {"nrmse_diverged", pr.diverged},
                {"nrmse_steps", curve.size()},
                {"nrmse_cross_0_1_time", finite_or_null(t01)},
                {"nrmse_cross_0_1_tau", finite_or_null(t01 / tau)},
                {"nrmse_cross_0_4_time", finite_or_null(t04)},
                {"nrmse_cross_0_4_tau", finite_or_null(t04 / tau)},
                {"nrmse_final", curve.size() ? curve[curve.size() - 1] : 0.0},
                {"reentry_ic", detail::vec_json(dc.reentry_ic)},
                {"reentered", reentered},
                {"coherence_diverged", co.diverged},
                {"coherence_ks", ks},
                {"coherence_ks_max", ks_max},
                {"correlation_dimension_model", dimension_or_null(co.trajectory.states.topRows(dim_rows))},
                {"correlation_dimension_true", dimension_or_null(co_truth.topRows(dim_rows))}};
    }

    nlohmann::json diagnose_map(const KandyModel& m, const ExperimentData& data) const {
        const auto& dc = cfg_.diagnostics;
        const auto& sys = cfg_.system;
        const std::function<Vec(const Vec&)> truth = sys.kind == SystemKind::henon
                                                         ? std::function<Vec(const Vec&)>([&](const Vec& x) { return henon_step(x, sys.henon); })
                                                         : std::function<Vec(const Vec&)>([&](const Vec& x) { return ikeda_step(x, sys.ikeda); });
        const LearnedField f(m);
        const Vec x0 = data.trajectory.state(data.n_train - 1);
        const double lam_true = largest_lyapunov_map(truth, x0, 100, dc.map_lyapunov_iterations, 1e-8);
        double lam_model = std::numeric_limits<double>::quiet_NaN();
        try {
            lam_model = largest_lyapunov_map([&](const Vec& x) { return f(x); }, x0, 100, dc.map_lyapunov_iterations, 1e-8);
        } catch (const Error&) {
        }
        const Vec envelope = 10.0 * data.trajectory.states.cwiseAbs().colwise().maxCoeff().transpose();
        const RolloutResult orbit = rollout(m, x0, dc.dimension_points - 1, DatasetKind::map, Integrator::rk4, 1.0, envelope);
        const Trajectory true_orbit = iterate_map(truth, x0, dc.dimension_points, 0, {"x", "y"});
        write_trajectory_csv(path("rollout.csv"), orbit.trajectory);
        const double test_mse = data.has_test ? derivative_loss(m, data.test) : 0.0;
        return {{"lyapunov_true", lam_true},
                {"lyapunov_model", finite_or_null(lam_model)},
                {"one_step_test_mse", test_mse},
                {"orbit_diverged", orbit.diverged},
                {"correlation_dimension_model", orbit.diverged ? nlohmann::json(nullptr) : dimension_or_null(orbit.trajectory.states)},
                {"correlation_dimension_true", dimension_or_null(true_orbit.states)}};
    }

    nlohmann::json diagnose_field(const KandyModel& m, const ExperimentData& data) const {
        const auto& dc = cfg_.diagnostics;
        const FieldTrajectory& f = data.field;
        const std::size_t start = data.has_test ? data.n_train : 0;
        const std::size_t n = std::min(dc.field_snapshots, f.snapshots() - start);
        bool diverged = false;
        const FieldTrajectory pred = rollout_field(m, f.snapshot(start), n, f.dt, dc.field_substeps, &diverged);
        const Eigen::Index len = static_cast<Eigen::Index>(pred.snapshots());
        const Mat truth = f.u.middleRows(static_cast<Eigen::Index>(start), len);
        const ErrorField e = error_field(pred.u, truth);
        const double amp = std::sqrt(truth.array().square().mean());
        std::string csv = "t,rms_error,relative_rms_error\n";
        for (Eigen::Index s = 0; s < e.rms.size(); ++s)
            csv += format_double(static_cast<double>(s) * f.dt) + "," + format_double(e.rms[s]) + "," +
                   format_double(amp > 0.0 ? e.rms[s] / amp : 0.0) + "\n";
        write_text(path("error_rms.csv"), csv);
        FieldTrajectory ef = pred;
        ef.u = e.error;
        write_field(path("error_field"), ef);
        const double test_mse = data.has_test ? derivative_loss(m, data.test) : 0.0;
        return {{"rollout_snapshots", len},
                {"rollout_diverged", diverged},
                {"substeps", dc.field_substeps},
                {"final_rms_error", e.rms.size() ? e.rms[e.rms.size() - 1] : 0.0},
                {"truth_rms", amp},
                {"tendency_test_mse", test_mse}};
    }

    nlohmann::json diagnose_hopf(const KandyModel& m, const ExperimentData& data) const {
        const HopfData& test = data.hopf_test;
        nlohmann::json rep = {{"model", fiber_metrics(m, test).to_json()}};
        if (std::filesystem::exists(path("symbolic_model.json")))
            rep["symbolic_model"] = fiber_metrics(load_model("symbolic_model.json"), test).to_json();
        return rep;
    }

    // ------------------------------------------------------------ manifest

    void update_manifest(Stage s) const {
        const nlohmann::json resolved = cfg_.to_json();
        const std::string hash = sha256_hex(resolved.dump());
        const auto mp = path("manifest.json");
        nlohmann::json man;
        if (std::filesystem::exists(mp)) {
            try {
                man = read_json(mp);
            } catch (const Error&) {
                man = nullptr;
            }
            if (!man.is_object() || man.value("config_sha256", std::string()) != hash) man = nullptr;
        }
        if (man.is_null()) {
            man = {{"tool", "kandy"},
                   {"version", kVersion},
                   {"seed", cfg_.seed},
                   {"config_sha256", hash},
                   {"config", resolved},
                   {"stage_seeds",
                    {{"generate", cfg_.stage_seed(1)},
                     {"train", cfg_.stage_seed(2)},
                     {"discover", cfg_.stage_seed(3)},
                     {"diagnose", cfg_.stage_seed(4)}}},
                   {"stages", nlohmann::json::array()},
                   {"artifacts", nlohmann::json::object()}};
        }
        auto& stages = man["stages"];
        if (std::find(stages.begin(), stages.end(), stage_name(s)) == stages.end()) stages.push_back(stage_name(s));
        nlohmann::json arts = nlohmann::json::object();
        for (const auto& e : std::filesystem::recursive_directory_iterator(out_)) {
            if (!e.is_regular_file()) continue;
            const std::string rel = std::filesystem::relative(e.path(), out_).generic_string();
            if (rel == "manifest.json") continue;
            arts[rel] = file_sha256(e.path());
        }
        man["artifacts"] = arts;
        write_json(mp, man);
    }

    ExperimentConfig cfg_;
    std::filesystem::path out_;
};

}  // namespace kandy
