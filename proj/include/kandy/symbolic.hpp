#pragma once

// Symbolic extraction: fit closed-form candidates to each edge's global
// activation, score them by R^2 penalized for complexity, keep the best edges
// and zero the rest.
//
//   S = R^2 - w * (w_s / (1 - w_s)) * complexity

#include "kandy/training.hpp"

#include <cstdio>
#include <limits>

namespace kandy {

struct SymbolicSettings {
    double tau = 0.0;         // minimum R^2 to stay eligible
    double w = 1.0;           // complexity weight
    double w_s = 0.8;         // complexity scale, in (0, 1)
    std::size_t top_t = std::numeric_limits<std::size_t>::max();
    int c_max = std::numeric_limits<int>::max();
    // Edges whose activation standard deviation is below this fraction of
    // their output's standard deviation are treated as zero before fitting.
    double min_contribution = 0.0;
    bool center = false;      // omit the constant term when rendering
    std::uint64_t seed = 0;
    std::size_t max_fit_samples = 4000;

    void validate() const {
        if (!(w_s > 0.0 && w_s < 1.0)) throw InvalidArgument("w_s must lie in (0, 1)");
        if (!(w > 0.0)) throw InvalidArgument("complexity weight w must be positive");
        if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
        if (c_max < 0) throw InvalidArgument("c_max must be nonnegative");
        if (min_contribution < 0.0) throw InvalidArgument("min_contribution must be nonnegative");
    }
};

inline double score(double r2, int complexity, double w, double w_s) {
    if (!(w_s > 0.0 && w_s < 1.0)) throw InvalidArgument("w_s must lie in (0, 1)");
    return r2 - w * (w_s / (1.0 - w_s)) * complexity;
}

struct EdgeFit {
    std::size_t input = 0;
    std::size_t output = 0;
    SymbolicTerm term;
    double r2 = 0.0;
    double score = 0.0;
    int complexity = 0;
    double mean_activation = 0.0;
    double contribution = 0.0;  // activation std / output std
};

namespace detail {

inline double r_squared(std::span<const double> y, std::span<const double> pred) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        ss_res += (y[k] - pred[k]) * (y[k] - pred[k]);
        ss_tot += (y[k] - mean) * (y[k] - mean);
    }
    if (!(ss_tot > 0.0)) return ss_res <= 1e-24 * static_cast<double>(y.size()) ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

inline double candidate_r2(const SymbolicTerm& t, std::span<const double> x, std::span<const double> y) {
    std::vector<double> pred(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        pred[k] = t.evaluate(x[k]);
        if (!std::isfinite(pred[k])) return -std::numeric_limits<double>::infinity();
    }
    return r_squared(y, pred);
}

/// y = a x^p + d by ordinary least squares.
inline SymbolicTerm fit_polynomial(Family f, std::span<const double> x, std::span<const double> y) {
    const int p = family_power(f);
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> xp(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        xp[k] = std::pow(x[k], p);
        mx += xp[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (xp[k] - mx) * (y[k] - my);
        sxx += (xp[k] - mx) * (xp[k] - mx);
    }
    SymbolicTerm t;
    t.family = f;
    t.alpha = sxx > 0.0 ? sxy / sxx : 0.0;
    t.delta = my - t.alpha * mx;
    return t;
}

/// y = alpha f(b u + g) + delta on standardized u by Levenberg-Marquardt from
/// several seeded starts; returns parameters mapped back to raw x.
inline std::optional<SymbolicTerm> fit_transcendental(Family f, std::span<const double> x, std::span<const double> y,
                                                      std::uint64_t seed) {
    const std::size_t n = x.size();
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(n);
    double sd = 0.0;
    for (double v : x) sd += (v - mu) * (v - mu);
    sd = std::sqrt(sd / static_cast<double>(n));
    if (!(sd > 0.0)) return std::nullopt;
    std::vector<double> u(n);
    double umax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        u[k] = (x[k] - mu) / sd;
        umax = std::max(umax, std::abs(u[k]));
    }

    auto sse_of = [&](const Eigen::Vector4d& q, std::vector<double>* res) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = q[1] * u[k] + q[2];
            const double v = q[0] * SymbolicTerm::base(f, t) + q[3];
            const double r = y[k] - v;
            if (!std::isfinite(r) || std::abs(t) > 60.0) return std::numeric_limits<double>::infinity();
            if (res) (*res)[k] = r;
            s += r * r;
        }
        return s;
    };

    // linear (alpha, delta) for fixed (b, g)
    auto linear_part = [&](double b, double g) -> std::optional<Eigen::Vector4d> {
        double s1 = 0.0, sf = 0.0, sff = 0.0, sy = 0.0, sfy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = b * u[k] + g;
            const double v = SymbolicTerm::base(f, t);
            if (!std::isfinite(v) || std::abs(t) > 60.0) return std::nullopt;
            s1 += 1.0;
            sf += v;
            sff += v * v;
            sy += y[k];
            sfy += v * y[k];
        }
        const double det = s1 * sff - sf * sf;
        Eigen::Vector4d q;
        q << 0.0, b, g, sy / s1;
        if (std::abs(det) > 1e-14 * s1 * std::max(1.0, sff)) {
            q[0] = (s1 * sfy - sf * sy) / det;
            q[3] = (sy - q[0] * sf) / s1;
        }
        return q;
    };

    Rng rng(seed);
    std::optional<Eigen::Vector4d> best;
    double best_sse = std::numeric_limits<double>::infinity();
    std::vector<double> res(n), res_try(n);
    constexpr int kStarts = 8;
    for (int start = 0; start < kStarts; ++start) {
        double b = start == 0 ? 1.0 : std::exp(rng.uniform(std::log(0.3), std::log(3.0)));
        if (start > 0 && rng.uniform() < 0.5) b = -b;
        double g = start == 0 ? 0.0 : rng.uniform(-2.0, 2.0);
        if (f == Family::sin || f == Family::cos) g = start == 0 ? 0.0 : rng.uniform(-std::numbers::pi, std::numbers::pi);
        if (f == Family::reciprocal) {
            // keep the pole outside the sample range
            const double side = (start % 2 == 0) ? 1.0 : -1.0;
            g = side * (std::abs(b) * umax + 0.25 + 0.5 * start);
        }
        auto init = linear_part(b, g);
        if (!init) continue;
        Eigen::Vector4d q = *init;
        double sse = sse_of(q, &res);
        if (!std::isfinite(sse)) continue;
        double lambda = 1e-3;
        for (int it = 0; it < 100; ++it) {
            Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
            Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
            for (std::size_t k = 0; k < n; ++k) {
                const double t = q[1] * u[k] + q[2];
                const double fv = SymbolicTerm::base(f, t);
                const double dv = SymbolicTerm::base_derivative(f, t);
                const Eigen::Vector4d jrow(fv, q[0] * u[k] * dv, q[0] * dv, 1.0);
                jtj.selfadjointView<Eigen::Lower>().rankUpdate(jrow);
                jtr += jrow * res[k];
            }
            jtj.triangularView<Eigen::Upper>() = jtj.transpose();
            bool improved = false;
            for (int tries = 0; tries < 10 && !improved; ++tries) {
                Eigen::Matrix4d a = jtj;
                for (int d = 0; d < 4; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
                const Eigen::Vector4d step = a.ldlt().solve(jtr);
                if (!step.allFinite()) {
                    lambda *= 10.0;
                    continue;
                }
                const Eigen::Vector4d cand = q + step;
                const double s_try = sse_of(cand, &res_try);
                if (s_try < sse) {
                    const double gain = sse - s_try;
                    q = cand;
                    std::swap(res, res_try);
                    sse = s_try;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    improved = true;
                    if (gain <= 1e-14 * std::max(sse, 1e-300)) it = 100;
                } else {
                    lambda *= 10.0;
                }
            }
            if (!improved) break;
        }
        if (sse < best_sse) {
            best_sse = sse;
            best = q;
        }
    }
    if (!best) return std::nullopt;
    SymbolicTerm t;
    t.family = f;
    t.alpha = (*best)[0];
    t.beta = (*best)[1] / sd;
    t.gamma = (*best)[2] - (*best)[1] * mu / sd;
    t.delta = (*best)[3];
    return t;
}

}  // namespace detail

/// Best candidate for one edge's (input, activation) pairs. Constant
/// activations are described by the zero or constant family; otherwise the
/// non-trivial families compete on score.
inline EdgeFit fit_edge(std::span<const double> x, std::span<const double> y, const SymbolicSettings& s,
                        std::uint64_t seed = 0) {
    s.validate();
    require(x.size() == y.size(), "fit_edge needs equally many inputs and outputs");
    EdgeFit fit;
    if (x.empty()) return fit;
    double ymean = 0.0;
    for (double v : y) ymean += v;
    ymean /= static_cast<double>(y.size());
    fit.mean_activation = ymean;

    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const bool degenerate_x = x.size() < 8 || !(*xmax - *xmin > 1e-12 * std::max(1.0, std::abs(*xmax)));
    if (degenerate_x) {
        fit.term.family = Family::zero;
        fit.r2 = 0.0;
        fit.score = score(0.0, 0, s.w, s.w_s);
        return fit;
    }

    double yvar = 0.0;
    for (double v : y) yvar += (v - ymean) * (v - ymean);
    yvar /= static_cast<double>(y.size());
    const bool constant_y = std::sqrt(yvar) <= 1e-12 * std::max(1.0, std::abs(ymean));

    // subsample for the iterative fits
    std::vector<double> xs, ys;
    const std::size_t stride = std::max<std::size_t>(1, (x.size() + s.max_fit_samples - 1) / s.max_fit_samples);
    for (std::size_t k = 0; k < x.size(); k += stride) {
        xs.push_back(x[k]);
        ys.push_back(y[k]);
    }

    std::vector<SymbolicTerm> candidates;
    if (constant_y) {
        candidates.push_back(SymbolicTerm{Family::zero});
        SymbolicTerm c{Family::constant};
        c.delta = ymean;
        candidates.push_back(c);
    } else {
        for (Family f : kAllFamilies) {
            if (f == Family::zero || f == Family::constant) continue;
            if (is_polynomial(f)) {
                candidates.push_back(detail::fit_polynomial(f, x, y));
            } else if (auto t = detail::fit_transcendental(f, xs, ys, derive_seed(seed, static_cast<std::uint64_t>(f)))) {
                candidates.push_back(*t);
            }
        }
    }

    bool have = false;
    for (const auto& t : candidates) {
        const double r2 = detail::candidate_r2(t, x, y);
        if (!std::isfinite(r2)) continue;
        const int c = t.complexity();
        const double sc = score(r2, c, s.w, s.w_s);
        const bool better = !have || sc > fit.score || (sc == fit.score && c < fit.complexity);
        if (better) {
            fit.term = t;
            fit.r2 = r2;
            fit.score = sc;
            fit.complexity = c;
            have = true;
        }
    }
    return fit;
}

/// Indices into `fits` that survive: R^2 >= tau, ranked by score (ties: lower
/// complexity, then lower index), greedily up to top_t edges and total
/// complexity c_max. Zero and constant fits never occupy a slot; their edges
/// are represented by the output constant.
inline std::vector<std::size_t> select_edges(const std::vector<EdgeFit>& fits, double tau, std::size_t top_t,
                                             int c_max) {
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        const Family f = fits[k].term.family;
        if (f == Family::zero || f == Family::constant) continue;
        if (fits[k].r2 >= tau) order.push_back(k);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (fits[a].score != fits[b].score) return fits[a].score > fits[b].score;
        if (fits[a].complexity != fits[b].complexity) return fits[a].complexity < fits[b].complexity;
        return a < b;
    });
    std::vector<std::size_t> kept;
    long budget = c_max;
    for (std::size_t k : order) {
        if (kept.size() >= top_t) break;
        if (fits[k].complexity <= budget) {
            kept.push_back(k);
            budget -= fits[k].complexity;
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

struct DiscoveredTerm {
    std::size_t input = 0;
    std::string label;
    SymbolicTerm term;
    double r2 = 0.0;
    double score = 0.0;
    int complexity = 0;
};

struct OutputEquation {
    std::string name;
    double constant = 0.0;
    std::vector<DiscoveredTerm> terms;

    /// Coefficient of a polynomial term on the given lift label, if present.
    std::optional<double> coefficient(const std::string& label) const {
        for (const auto& t : terms)
            if (t.label == label) return t.term.alpha;
        return std::nullopt;
    }
};

inline std::string format_coeff(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct DiscoveredEquation {
    std::vector<OutputEquation> outputs;
    bool centered = false;

    /// One line per output, terms in lift order, constant first.
    std::string text() const {
        std::string s;
        for (const auto& eq : outputs) {
            std::string rhs;
            auto append = [&](double coeff, const std::string& body) {
                if (rhs.empty()) {
                    rhs = (coeff < 0 ? "-" : "") + format_coeff(std::abs(coeff)) + body;
                } else {
                    rhs += (coeff < 0 ? " - " : " + ") + format_coeff(std::abs(coeff)) + body;
                }
            };
            if (!centered && eq.constant != 0.0) append(eq.constant, "");
            for (const auto& t : eq.terms) {
                const bool simple = t.label.find_first_of(" +-*^") == std::string::npos;
                const std::string arg = simple ? t.label : "(" + t.label + ")";
                const SymbolicTerm& q = t.term;
                switch (q.family) {
                    case Family::linear: append(q.alpha, "*" + arg); break;
                    case Family::quadratic: append(q.alpha, "*" + arg + "^2"); break;
                    case Family::cubic: append(q.alpha, "*" + arg + "^3"); break;
                    default:
                        append(q.alpha, std::string("*") + family_name(q.family) + "(" + format_coeff(q.beta) + "*" +
                                            arg + (q.gamma < 0 ? " - " : " + ") + format_coeff(std::abs(q.gamma)) +
                                            ")");
                }
            }
            if (rhs.empty()) rhs = "0";
            s += eq.name + " = " + rhs + "\n";
        }
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& eq : outputs) {
            nlohmann::json terms = nlohmann::json::array();
            for (const auto& t : eq.terms) {
                terms.push_back({{"term", t.label},
                                 {"input", t.input},
                                 {"family", family_name(t.term.family)},
                                 {"coefficients",
                                  {{"alpha", t.term.alpha}, {"beta", t.term.beta}, {"gamma", t.term.gamma}}},
                                 {"R2", t.r2},
                                 {"score", t.score},
                                 {"complexity", t.complexity}});
            }
            out.push_back({{"output", eq.name}, {"constant", eq.constant}, {"terms", terms}});
        }
        return {{"equations", out}, {"centered", centered}};
    }

    static DiscoveredEquation from_json(const nlohmann::json& j) {
        DiscoveredEquation d;
        d.centered = j.value("centered", false);
        for (const auto& e : j.at("equations")) {
            OutputEquation eq;
            eq.name = e.at("output").get<std::string>();
            eq.constant = e.at("constant").get<double>();
            for (const auto& t : e.at("terms")) {
                DiscoveredTerm dt;
                dt.label = t.at("term").get<std::string>();
                dt.input = t.at("input").get<std::size_t>();
                dt.term.family = family_from_name(t.at("family").get<std::string>());
                dt.term.alpha = t.at("coefficients").at("alpha").get<double>();
                dt.term.beta = t.at("coefficients").at("beta").get<double>();
                dt.term.gamma = t.at("coefficients").at("gamma").get<double>();
                dt.r2 = t.at("R2").get<double>();
                dt.score = t.at("score").get<double>();
                dt.complexity = t.at("complexity").get<int>();
                eq.terms.push_back(std::move(dt));
            }
            d.outputs.push_back(std::move(eq));
        }
        return d;
    }
};

/// Per active edge, the (raw feature, activation) pairs over the dataset.
struct EdgeActivations {
    std::size_t input = 0;
    std::size_t output = 0;
    std::vector<double> x;
    std::vector<double> y;
};

inline std::vector<EdgeActivations> collect_activations(const KandyModel& m, const Mat& rows) {
    require(rows.rows() > 0, "cannot collect activations on an empty dataset");
    require(static_cast<std::size_t>(rows.cols()) == m.n_in(), "lifted rows have wrong width");
    std::vector<EdgeActivations> out;
    for (std::size_t j = 0; j < m.n_out(); ++j)
        for (std::size_t i = 0; i < m.n_in(); ++i) {
            if (!m.active(i, j)) continue;
            EdgeActivations a{i, j, {}, {}};
            a.x.resize(static_cast<std::size_t>(rows.rows()));
            a.y.resize(a.x.size());
            for (Eigen::Index r = 0; r < rows.rows(); ++r) {
                a.x[static_cast<std::size_t>(r)] = rows(r, static_cast<Eigen::Index>(i));
                a.y[static_cast<std::size_t>(r)] = m.edge_value(i, j, a.x[static_cast<std::size_t>(r)]);
            }
            out.push_back(std::move(a));
        }
    return out;
}

inline std::vector<EdgeActivations> collect_activations(const KandyModel& m, const Dataset& d) {
    return collect_activations(m, lifted_rows(m.lift(), d).first);
}

struct ExtractionResult {
    KandyModel model;
    DiscoveredEquation equations;
    std::vector<EdgeFit> fits;
    std::vector<std::size_t> kept;  // indices into fits
};

/// collect -> fit -> select -> substitute. Kept edges become symbolic; every
/// other edge is pruned and its mean activation moves into the output offset.
inline ExtractionResult extract_equations(const KandyModel& m, const Dataset& d, const SymbolicSettings& s) {
    s.validate();
    const Mat rows = lifted_rows(m.lift(), d).first;
    const auto acts = collect_activations(m, rows);

    // output spread, for the contribution gate and the reported ratios
    Vec out_sd = Vec::Zero(static_cast<Eigen::Index>(m.n_out()));
    {
        const Mat pred = m.forward_field(rows);
        for (Eigen::Index j = 0; j < pred.cols(); ++j) {
            const double mu = pred.col(j).mean();
            out_sd[j] = std::sqrt((pred.col(j).array() - mu).square().mean());
        }
    }

    std::vector<EdgeFit> fits(acts.size());
    parallel_chunks(acts.size(), 1, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const auto& a = acts[k];
            double mu = 0.0;
            for (double v : a.y) mu += v;
            mu /= static_cast<double>(a.y.size());
            double var = 0.0;
            for (double v : a.y) var += (v - mu) * (v - mu);
            const double sd = std::sqrt(var / static_cast<double>(a.y.size()));
            const double osd = out_sd[static_cast<Eigen::Index>(a.output)];
            EdgeFit f;
            if (s.min_contribution > 0.0 && sd < s.min_contribution * osd) {
                f.mean_activation = mu;
                f.term.family = Family::zero;
                f.score = score(0.0, 0, s.w, s.w_s);
            } else {
                f = fit_edge(a.x, a.y, s, derive_seed(s.seed, a.output * m.n_in() + a.input));
            }
            f.input = a.input;
            f.output = a.output;
            f.contribution = osd > 0.0 ? sd / osd : 0.0;
            fits[k] = f;
        }
    });

    const auto kept = select_edges(fits, s.tau, s.top_t, s.c_max);
    std::vector<bool> keep(fits.size(), false);
    for (std::size_t k : kept) keep[k] = true;

    KandyModel out = m;
    Vec offsets = m.offsets();
    DiscoveredEquation eq;
    eq.centered = s.center;
    for (std::size_t j = 0; j < m.n_out(); ++j) eq.outputs.push_back(OutputEquation{m.outputs()[j], 0.0, {}});
    for (std::size_t k = 0; k < fits.size(); ++k) {
        const EdgeFit& f = fits[k];
        if (keep[k]) {
            out.set_edge_symbolic(f.input, f.output, f.term);
            SymbolicTerm shown = f.term;
            eq.outputs[f.output].constant += shown.delta;
            shown.delta = 0.0;
            eq.outputs[f.output].terms.push_back(
                DiscoveredTerm{f.input, m.lift().terms()[f.input].label, shown, f.r2, f.score, f.complexity});
        } else {
            out.prune_edge(f.input, f.output);
            offsets[static_cast<Eigen::Index>(f.output)] += f.mean_activation;
        }
    }
    out.set_offsets(offsets);
    for (std::size_t j = 0; j < m.n_out(); ++j) eq.outputs[j].constant += offsets[static_cast<Eigen::Index>(j)];
    return {std::move(out), std::move(eq), std::move(fits), kept};
}

}  // namespace kandy
