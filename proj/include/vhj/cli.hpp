#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "vhj/asymptotics.hpp"
#include "vhj/config.hpp"
#include "vhj/ergodic.hpp"
#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/jobs.hpp"
#include "vhj/reference.hpp"

namespace vhj {

using Json = nlohmann::ordered_json;

struct CliOptions {
    std::string out_dir = "out";
    int jobs = 1;
    bool json = false;
    bool allow_partial = false;
    std::optional<std::uint64_t> seed;
    std::ostream* log = &std::cout;
};

struct CommandOutcome {
    int exit_code = 0;
    Json results = Json::object();
};

// ---------------------------------------------------------------------------
// Report writing

namespace cli_detail {

inline Json num(double v) {
    if (!std::isfinite(v)) return Json(format_double(v));
    return Json(v);
}

inline void emit_json_as_yaml(YAML::Emitter& out, const Json& j) {
    if (j.is_object()) {
        out << YAML::BeginMap;
        for (auto it = j.begin(); it != j.end(); ++it) {
            out << YAML::Key << it.key() << YAML::Value;
            emit_json_as_yaml(out, it.value());
        }
        out << YAML::EndMap;
    } else if (j.is_array()) {
        const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
        if (flat) out << YAML::Flow;
        out << YAML::BeginSeq;
        for (const auto& e : j) emit_json_as_yaml(out, e);
        out << YAML::EndSeq;
    } else if (j.is_number_float()) {
        out << format_double(j.get<double>());
    } else if (j.is_number_integer()) {
        out << j.get<long long>();
    } else if (j.is_number_unsigned()) {
        out << j.get<unsigned long long>();
    } else if (j.is_boolean()) {
        out << j.get<bool>();
    } else if (j.is_null()) {
        out << YAML::Null;
    } else {
        out << j.get<std::string>();
    }
}

}  // namespace cli_detail

/// Output directory for one command: CSV tables with the resolved config as
/// comment header, and a summary in YAML (and JSON on request).
class Reporter {
public:
    Reporter(std::string dir, const RunConfig& cfg, bool json) : dir_(std::move(dir)), cfg_(cfg), json_(json) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) fail(ErrorKind::io, "cannot create output directory '" + dir_ + "': " + ec.message());
    }

    const std::string& dir() const { return dir_; }
    std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

    std::vector<std::string> comments(const std::vector<std::string>& extra = {}) const {
        std::vector<std::string> c = extra;
        for (auto& l : config_comment_lines(cfg_)) c.push_back(l);
        return c;
    }

    std::ofstream open(const std::string& name) const {
        const std::filesystem::path p = std::filesystem::path(dir_) / name;
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        std::ofstream os(p, std::ios::binary);
        if (!os) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
        return os;
    }

    /// Table with rows of preformatted cells.
    void table(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, const std::vector<std::string>& extra = {}) const {
        std::ofstream os = open(name);
        for (const auto& c : comments(extra)) os << "# " << c << "\n";
        for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
        os << "\n";
        for (const auto& r : rows) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
            os << "\n";
        }
    }

    void grid_function(const std::string& name, const GridFunction& g, const std::vector<std::string>& extra = {}) const {
        std::ofstream os = open(name);
        write_csv(g, os, comments(extra));
    }

    void summary(const std::string& command, const Json& results) const {
        YAML::Emitter out;
        out << YAML::BeginMap;
        out << YAML::Key << "command" << YAML::Value << command;
        out << YAML::Key << "config" << YAML::Value;
        emit_config(out, cfg_);
        out << YAML::Key << "results" << YAML::Value;
        cli_detail::emit_json_as_yaml(out, results);
        out << YAML::EndMap;
        std::ofstream os = open("summary.yaml");
        os << out.c_str() << "\n";
        if (json_) {
            YAML::Emitter cy;
            emit_config(cy, cfg_);
            Json doc = Json::object();
            doc["command"] = command;
            doc["config_yaml"] = std::string(cy.c_str());
            doc["results"] = results;
            std::ofstream js = open("summary.json");
            js << doc.dump(2) << "\n";
        }
    }

private:
    std::string dir_;
    const RunConfig& cfg_;
    bool json_;
};

inline std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// validate

inline CommandOutcome cmd_validate(const RunConfig& cfg, const CliOptions& opt) {
    Reporter rep(opt.out_dir, cfg, opt.json);
    EnvelopeOptions env;
    env.directions = cfg.validate.directions;
    const H1Report h1 = certify_h1(cfg.problem.f, cfg.problem.dim, cfg.validate.radii, env);
    const H2Report h2 = check_h2_ratio(cfg.problem.f, cfg.problem.m, cfg.validate.radii, cfg.problem.dim,
                                       cfg.validate.directions);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < h1.radii.size(); ++k)
        rows.push_back({fmt(h1.radii[k]), fmt(h1.envelope[k]), fmt(h1.radial_min[k]), fmt(h2.ratios[k])});
    rep.table("hypotheses.csv", {"radius", "envelope", "radial_min", "h2_ratio"}, rows);

    CommandOutcome out;
    Json& r = out.results;
    r["h1"] = {{"plausible", h1.plausible},
               {"envelope_monotone", h1.envelope_monotone},
               {"tail_growing", h1.tail_growing},
               {"radial_monotone_tail", h1.radial_monotone_tail},
               {"note", h1.note}};
    r["h2"] = {{"plausible", h2.plausible}, {"median", cli_detail::num(h2.median)}, {"skipped", h2.skipped.size()}};
    r["pass"] = h1.plausible && h2.plausible;
    rep.summary("validate", r);
    *opt.log << "validate: H1 " << (h1.plausible ? "plausible" : "FAIL") << (h1.note.empty() ? "" : " (" + h1.note + ")")
             << ", H2 " << (h2.plausible ? "plausible" : "FAIL") << "\n";
    out.exit_code = h1.plausible && h2.plausible ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// ergodic

struct LadderResults {
    std::vector<ErgodicApprox> state;
    std::vector<ErgodicApprox> periodic;
    std::optional<ErgodicApprox> lambda_1;
    std::vector<double> wall_state, wall_periodic;
    double wall_lambda_1 = 0.0;
};

/// Runs the R- and cutoff-ladders (and the B_1 run when the simplicity checks
/// are enabled) as independent jobs.
inline LadderResults run_ladders(const RunConfig& cfg, int jobs, bool with_lambda_1) {
    struct Job {
        int kind;  // 0 state, 1 periodic, 2 lambda_1
        double value;
    };
    std::vector<Job> list;
    for (double R : cfg.ergodic.R_ladder) list.push_back({0, R});
    for (double c : cfg.ergodic.cutoff_ladder) list.push_back({1, c});
    if (with_lambda_1) list.push_back({2, cfg.ergodic.lambda_1_R});
    struct Done {
        ErgodicApprox a;
        double wall = 0.0;
    };
    const auto done = parallel_map<Done>(list.size(), jobs, [&](std::size_t k) {
        const auto t0 = std::chrono::steady_clock::now();
        Done d;
        const Job& j = list[k];
        d.a = j.kind == 1 ? solve_periodic(cfg.problem, j.value, cfg.ergodic_config(true))
                          : solve_state_constraint(cfg.problem, j.value, cfg.ergodic_config());
        d.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return d;
    });
    LadderResults out;
    for (std::size_t k = 0; k < list.size(); ++k) {
        if (list[k].kind == 0) {
            out.state.push_back(done[k].a);
            out.wall_state.push_back(done[k].wall);
        } else if (list[k].kind == 1) {
            out.periodic.push_back(done[k].a);
            out.wall_periodic.push_back(done[k].wall);
        } else {
            out.lambda_1 = done[k].a;
            out.wall_lambda_1 = done[k].wall;
        }
    }
    return out;
}

inline std::string profile_file(const ErgodicApprox& a) {
    return a.kind == ApproxKind::state_constraint ? "profiles/state_R" + fmt(a.half_width) + ".csv"
                                                  : "profiles/periodic_cutoff" + fmt(a.cutoff) + ".csv";
}

struct SimplicityResults {
    std::vector<ScalingReport> scaling;
    std::vector<ArgmaxReport> argmax;
    bool confined = true;
    bool pass = true;
};

/// Scaling check on every box run, and argmax confinement of v = φ_ref + 5
/// (φ_ref the largest-R profile) against each μ_R-scaled profile.
inline SimplicityResults simplicity_checks(const RunConfig& cfg, const LadderResults& runs, double lambda_star) {
    SimplicityResults s;
    if (runs.state.empty() || !runs.lambda_1) return s;
    const double lambda_1 = runs.lambda_1->constant;
    const ErgodicApprox& ref = runs.state.back();
    for (const auto& a : runs.state) {
        s.scaling.push_back(scaling_check_super(a, lambda_star, a.source, a.m, cfg.ergodic.C, cfg.ergodic.bracket_tol));
        const GridFunction v = transform(resample(ref.profile, a.profile.grid), [](double x) { return x + 5.0; });
        // Differences below the discretization tolerance C·h² cannot be resolved,
        // so they are treated as ties.
        const double h = a.profile.grid.h();
        s.argmax.push_back(argmax_confinement(v, a, lambda_star, lambda_1, a.source, 0.05, cfg.ergodic.C * h * h));
    }
    for (const auto& r : s.scaling) s.pass = s.pass && r.pass;
    for (const auto& r : s.argmax) {
        const bool inside = std::abs(r.x[0]) <= cfg.ergodic.confinement_window + 1e-12 &&
                            std::abs(r.x[1]) <= cfg.ergodic.confinement_window + 1e-12;
        s.confined = s.confined && inside;
        s.pass = s.pass && r.pass && inside;
    }
    return s;
}

inline Json approx_json(const ErgodicApprox& a, double wall) {
    (void)wall;
    return {{"kind", to_string(a.kind)},
            {"half_width", cli_detail::num(a.half_width)},
            {"cutoff", cli_detail::num(a.cutoff)},
            {"constant", cli_detail::num(a.constant)},
            {"residual_norm", cli_detail::num(a.residual_norm)},
            {"converged", a.stopping.converged},
            {"stopping", a.stopping.describe()},
            {"profile", profile_file(a)}};
}

inline Json estimate_json(const LambdaStarEstimate& e) {
    return {{"value", cli_detail::num(e.value)},
            {"upper_bracket", cli_detail::num(e.upper_bracket)},
            {"lower_bracket", cli_detail::num(e.lower_bracket)},
            {"gap", cli_detail::num(e.gap)},
            {"gap_infinite", std::isinf(e.gap)},
            {"lower_bracket_heuristic", e.lower_heuristic},
            {"method", e.method}};
}

/// Writes per-run rows, profiles, stopping histories and wall times.
inline void write_ladders(const Reporter& rep, const LadderResults& runs) {
    std::vector<std::vector<std::string>> rows, slopes, timing;
    auto add = [&](const ErgodicApprox& a, double wall) {
        const Grid& g = a.profile.grid;
        rows.push_back({to_string(a.kind), fmt(a.half_width), fmt(a.cutoff), fmt(a.constant), fmt(a.residual_norm),
                        fmt(a.residual_window), a.stopping.converged ? "1" : "0", fmt(a.stopping.final_time),
                        std::to_string(a.stopping.steps), to_string(a.hamiltonian), std::to_string(g.nodes_per_axis()),
                        fmt(g.h())});
        for (std::size_t k = 0; k < a.stopping.times.size(); ++k)
            slopes.push_back({to_string(a.kind), fmt(a.half_width), fmt(a.cutoff), fmt(a.stopping.times[k]),
                              fmt(a.stopping.slopes[k])});
        timing.push_back({to_string(a.kind), fmt(a.half_width), fmt(a.cutoff), fmt(wall)});
        rep.grid_function(profile_file(a), a.profile,
                          {std::string("kind ") + to_string(a.kind) + ", half-width " + fmt(a.half_width) +
                               ", constant " + fmt(a.constant),
                           "stopping: " + a.stopping.describe()});
    };
    for (std::size_t k = 0; k < runs.state.size(); ++k) add(runs.state[k], runs.wall_state[k]);
    for (std::size_t k = 0; k < runs.periodic.size(); ++k) add(runs.periodic[k], runs.wall_periodic[k]);
    if (runs.lambda_1) add(*runs.lambda_1, runs.wall_lambda_1);
    rep.table("runs.csv",
              {"kind", "half_width", "cutoff", "constant", "residual_norm", "residual_window", "converged",
               "final_time", "steps", "hamiltonian", "nodes_per_axis", "h"},
              rows);
    rep.table("slopes.csv", {"kind", "half_width", "cutoff", "t", "slope"}, slopes);
    // Wall times vary between runs and are kept out of the reproducible tables.
    std::ofstream os = rep.open("timing.csv");
    os << "kind,half_width,cutoff,wall_time\n";
    for (const auto& r : timing) os << r[0] << "," << r[1] << "," << r[2] << "," << r[3] << "\n";
}

struct ErgodicOutput {
    LadderResults runs;
    LambdaStarEstimate estimate;
    SimplicityResults simplicity;
    bool monotone = true;
    bool floor_ok = true;
    bool all_converged = true;
};

inline ErgodicOutput compute_ergodic(const RunConfig& cfg, const CliOptions& opt) {
    ErgodicOutput o;
    o.runs = run_ladders(cfg, opt.jobs, cfg.ergodic.simplicity);
    const auto& st = o.runs.state;
    for (const auto& a : st) o.all_converged = o.all_converged && a.stopping.converged;
    for (const auto& a : o.runs.periodic) o.all_converged = o.all_converged && a.stopping.converged;
    if (o.runs.lambda_1) o.all_converged = o.all_converged && o.runs.lambda_1->stopping.converged;
    if (!o.all_converged && !opt.allow_partial) {
        for (const auto* v : {&o.runs.state, &o.runs.periodic})
            for (const auto& a : *v)
                if (!a.stopping.converged)
                    fail(ErrorKind::convergence, std::string(to_string(a.kind)) + " run at half-width " +
                                                     fmt(a.half_width) + " did not converge: " + a.stopping.describe());
        fail(ErrorKind::convergence, "the B_1 run did not converge: " + o.runs.lambda_1->stopping.describe());
    }
    o.estimate = estimate_lambda_star(st, o.runs.periodic, cfg.ergodic.bracket_tol);
    const double fmin = [&] {
        double m = INFINITY;
        for (const auto& a : st) m = std::min(m, min_value(a.source));
        return m;
    }();
    for (std::size_t k = 0; k < st.size(); ++k) {
        if (k > 0 && st[k].constant > st[k - 1].constant + 1e-2) o.monotone = false;
        if (st[k].constant < fmin - 1e-2) o.floor_ok = false;
    }
    if (cfg.ergodic.simplicity) o.simplicity = simplicity_checks(cfg, o.runs, o.estimate.value);
    return o;
}

inline Json ergodic_json(const ErgodicOutput& o) {
    Json r = Json::object();
    r["lambda_star"] = estimate_json(o.estimate);
    Json runs = Json::array();
    for (std::size_t k = 0; k < o.runs.state.size(); ++k) runs.push_back(approx_json(o.runs.state[k], o.runs.wall_state[k]));
    for (std::size_t k = 0; k < o.runs.periodic.size(); ++k)
        runs.push_back(approx_json(o.runs.periodic[k], o.runs.wall_periodic[k]));
    r["runs"] = runs;
    r["all_converged"] = o.all_converged;
    r["monotone_nonincreasing"] = o.monotone;
    r["floor_min_f"] = o.floor_ok;
    if (o.runs.lambda_1) r["lambda_1"] = cli_detail::num(o.runs.lambda_1->constant);
    if (!o.simplicity.scaling.empty()) {
        Json sc = Json::array(), am = Json::array();
        for (std::size_t k = 0; k < o.simplicity.scaling.size(); ++k) {
            const auto& s = o.simplicity.scaling[k];
            sc.push_back({{"half_width", cli_detail::num(o.runs.state[k].half_width)},
                          {"mu", cli_detail::num(s.mu)},
                          {"residual", cli_detail::num(s.residual)},
                          {"threshold", cli_detail::num(s.threshold)},
                          {"pass", s.pass}});
            const auto& a = o.simplicity.argmax[k];
            am.push_back({{"half_width", cli_detail::num(o.runs.state[k].half_width)},
                          {"x", Json::array({cli_detail::num(a.x[0]), cli_detail::num(a.x[1])})},
                          {"f_at_x", cli_detail::num(a.f_at)},
                          {"bound", cli_detail::num(a.bound)},
                          {"ties", a.ties},
                          {"on_boundary", a.on_boundary},
                          {"pass", a.pass}});
        }
        r["scaling_check"] = sc;
        r["argmax_confinement"] = am;
        r["confined"] = o.simplicity.confined;
        r["simplicity_pass"] = o.simplicity.pass;
    }
    return r;
}

inline CommandOutcome cmd_ergodic(const RunConfig& cfg, const CliOptions& opt) {
    Reporter rep(opt.out_dir, cfg, opt.json);
    const ErgodicOutput o = compute_ergodic(cfg, opt);
    write_ladders(rep, o.runs);
    CommandOutcome out;
    out.results = ergodic_json(o);
    rep.summary("ergodic", out.results);
    *opt.log << "ergodic: lambda* = " << fmt(o.estimate.value) << " in [" << fmt(o.estimate.lower_bracket) << ", "
             << fmt(o.estimate.upper_bracket) << "], gap " << fmt(o.estimate.gap) << " (" << o.estimate.method << ")\n";
    const bool ok = o.all_converged && o.monotone && o.floor_ok && (!cfg.ergodic.simplicity || o.simplicity.pass);
    out.exit_code = ok ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// longtime

/// True when the problem is one of the closed-form oracle pairs f = |x|^m.
inline bool is_oracle_problem(const ProblemSpec& p) {
    return p.f.family == SourceFamily::power && p.f.alpha == p.m && p.f.shift == 0.0;
}

namespace cli_detail {

inline std::string problem_block(const RunConfig& c) {
    YAML::Emitter out;
    emit_config(out, c);
    const YAML::Node n = YAML::Load(out.c_str());
    YAML::Emitter p;
    p << n["problem"];
    return p.c_str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "missing artifact: expected file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Loads the ladder runs and λ* written by a previous ergodic command.
inline void load_artifacts(const RunConfig& cfg, const std::string& dir, LadderResults& runs, double& lambda_star) {
    namespace fs = std::filesystem;
    const std::string summary_path = (fs::path(dir) / "summary.yaml").string();
    const YAML::Node s = YAML::Load(read_file(summary_path));
    if (!s["config"] || !s["results"] || !s["results"]["lambda_star"])
        fail(ErrorKind::io, "artifact '" + summary_path + "' is not an ergodic summary");
    YAML::Emitter got;
    got << s["config"]["problem"];
    if (std::string(got.c_str()) != problem_block(cfg))
        fail(ErrorKind::io, "stale artifact '" + summary_path + "': its problem block differs from the current config");
    lambda_star = parse_double(s["results"]["lambda_star"]["value"].Scalar(), summary_path);
    YAML::Emitter prev_text;
    prev_text << s["config"];
    const RunConfig prev = parse_config(prev_text.c_str(), cfg.path);
    for (const auto& r : s["results"]["runs"]) {
        ErgodicApprox a;
        a.kind = r["kind"].Scalar() == "periodic" ? ApproxKind::periodic : ApproxKind::state_constraint;
        a.half_width = parse_double(r["half_width"].Scalar(), summary_path);
        a.cutoff = parse_double(r["cutoff"].Scalar(), summary_path);
        a.constant = parse_double(r["constant"].Scalar(), summary_path);
        a.m = cfg.problem.m;
        a.stopping.converged = r["converged"].as<bool>();
        const std::string prof = (fs::path(dir) / r["profile"].Scalar()).string();
        if (!fs::exists(prof)) fail(ErrorKind::io, "missing artifact: expected profile file '" + prof + "'");
        const GridFunction box = read_grid_function_csv(prof, cfg.problem.dim);
        const ErgodicConfig ec = prev.ergodic_config(a.kind == ApproxKind::periodic);
        const int n = ec.nodes_for(a.half_width);
        const Grid g = a.kind == ApproxKind::periodic ? Grid::torus(cfg.problem.dim, a.half_width, n)
                                                      : Grid::box(cfg.problem.dim, a.half_width, n);
        if (box.size() != g.size())
            fail(ErrorKind::io, "artifact '" + prof + "' does not match the grid " + g.describe());
        a.profile = GridFunction(g);
        a.profile.values = box.values;
        a.full_source = sample(cfg.problem.f, g);
        a.source = a.kind == ApproxKind::periodic
                       ? transform(a.full_source, [c = a.cutoff](double v) { return std::min(v, c); })
                       : a.full_source;
        a.hamiltonian = resolve_hamiltonian(cfg.scheme.hamiltonian, cfg.problem.dim, cfg.problem.m);
        (a.kind == ApproxKind::periodic ? runs.periodic : runs.state).push_back(std::move(a));
    }
    if (runs.state.empty()) fail(ErrorKind::io, "artifact '" + summary_path + "' lists no state-constraint runs");
}

}  // namespace cli_detail

struct LongtimeOutput {
    LargeTimeReport report;
    std::vector<BarrierReport> upper, lower;  ///< at ε then 2ε, per run
    SandwichReport sandwich;
    bool upper_m_decreasing = true, lower_m_decreasing = true;
    bool barriers_pass = true;
    std::string phi_source;
};

inline LongtimeOutput compute_longtime(const RunConfig& cfg, const CliOptions& opt, const LadderResults* given = nullptr,
                                       const LambdaStarEstimate* given_estimate = nullptr) {
    LongtimeOutput o;
    LadderResults runs;
    double lambda_star = 0.0;
    Field phi;
    const std::string& from = cfg.longtime.phi_from;
    if (from == "inline" || from == "oracle") {
        if (given) {
            runs = *given;
            lambda_star = given_estimate->value;
        } else {
            const ErgodicOutput e = compute_ergodic(cfg, opt);
            runs = e.runs;
            lambda_star = e.estimate.value;
        }
        if (from == "oracle") {
            if (!is_oracle_problem(cfg.problem))
                fail(ErrorKind::config, "longtime.phi_from = oracle requires source power with alpha = m and no shift");
            lambda_star = cfg.problem.dim;
            phi = half_square;
            o.phi_source = "oracle |x|^2/2";
        } else {
            phi = field_of(runs.state.back().profile);
            o.phi_source = "state-constraint profile at R = " + fmt(runs.state.back().half_width);
        }
    } else {
        cli_detail::load_artifacts(cfg, from, runs, lambda_star);
        phi = field_of(runs.state.back().profile);
        o.phi_source = "artifact " + from;
    }
    const LargeTimeConfig lc = cfg.longtime_config();
    o.report = run_large_time(cfg.problem, lambda_star, phi, lc);
    if (cfg.longtime.barriers) {
        if (std::isnan(o.report.t_n)) {
            o.barriers_pass = false;
        } else {
            for (double eps : {lc.epsilon, 2.0 * lc.epsilon}) {
                BarrierConfig bc;
                bc.epsilon = eps;
                bc.C = cfg.longtime.C;
                bc.trusted_fraction = lc.trusted_fraction;
                bc.bracket_tol = cfg.ergodic.bracket_tol;
                for (const auto& a : runs.state) o.upper.push_back(barrier_check_upper(a, phi, lambda_star, o.report, bc));
                for (const auto& a : runs.periodic) o.lower.push_back(barrier_check_lower(a, phi, lambda_star, o.report, bc));
            }
            std::vector<double> mu, ml;
            for (std::size_t k = 0; k < runs.state.size(); ++k) mu.push_back(o.upper[k].m_value);
            for (std::size_t k = 0; k < runs.periodic.size(); ++k) ml.push_back(o.lower[k].m_value);
            o.upper_m_decreasing = decreasing_to_zero(mu, cfg.ergodic.bracket_tol);
            o.lower_m_decreasing = ml.empty() || decreasing_to_zero(ml, cfg.ergodic.bracket_tol);
            for (std::size_t k = 0; k < runs.state.size(); ++k) o.barriers_pass = o.barriers_pass && o.upper[k].pass;
            for (std::size_t k = 0; k < runs.periodic.size(); ++k) o.barriers_pass = o.barriers_pass && o.lower[k].pass;
            o.barriers_pass = o.barriers_pass && o.upper_m_decreasing && o.lower_m_decreasing;
            o.sandwich = sandwich_check(o.report, phi, lc.epsilon, lc.tol);
        }
    }
    return o;
}

inline CommandOutcome cmd_longtime(const RunConfig& cfg, const CliOptions& opt, const LadderResults* given = nullptr,
                                   const LambdaStarEstimate* given_estimate = nullptr) {
    Reporter rep(opt.out_dir, cfg, opt.json);
    const LongtimeOutput o = compute_longtime(cfg, opt, given, given_estimate);
    const LargeTimeReport& lt = o.report;
    {
        std::ofstream os = rep.open("history.csv");
        write_history_csv(lt, os, rep.comments());
    }
    {
        std::ofstream os = rep.open("trace.csv");
        write_trace_csv(lt.trace, os, rep.comments());
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto* list : {&o.upper, &o.lower})
        for (const auto& b : *list)
            rows.push_back({b.upper ? "upper" : "lower", fmt(b.half_width), fmt(b.cutoff), fmt(b.epsilon), fmt(b.t_n),
                            fmt(b.scale), fmt(b.m_value), fmt(b.residual), fmt(b.threshold),
                            b.residual_pass ? "1" : "0", fmt(b.initial_margin), b.initial_pass ? "1" : "0",
                            fmt(b.later_margin), b.later_pass ? "1" : "0", b.pass ? "1" : "0"});
    rep.table("barriers.csv",
              {"barrier", "half_width", "cutoff", "epsilon", "t_n", "scale", "m", "residual", "threshold",
               "residual_pass", "initial_margin", "initial_pass", "later_margin", "later_pass", "pass"},
              rows);

    CommandOutcome out;
    Json& r = out.results;
    r["lambda_star_used"] = cli_detail::num(lt.lambda_star_used);
    r["phi_source"] = o.phi_source;
    r["c_hat"] = cli_detail::num(lt.c_hat);
    r["flatness"] = cli_detail::num(lt.flatness);
    r["final_error"] = cli_detail::num(lt.final_error);
    r["window"] = cli_detail::num(lt.window);
    r["T"] = cli_detail::num(lt.T);
    r["t_n"] = cli_detail::num(lt.t_n);
    r["eventually_decreasing"] = lt.eventually_decreasing;
    r["converged"] = lt.converged;
    if (cfg.longtime.barriers) {
        r["barriers_pass"] = o.barriers_pass;
        r["m_R_decreasing"] = o.upper_m_decreasing;
        r["m_tilde_R_decreasing"] = o.lower_m_decreasing;
        r["sandwich"] = {{"min_gap", cli_detail::num(o.sandwich.min_gap)},
                         {"max_gap", cli_detail::num(o.sandwich.max_gap)},
                         {"pass", o.sandwich.pass}};
    }
    rep.summary("longtime", r);
    *opt.log << "longtime: c_hat = " << fmt(lt.c_hat) << ", sup_K error " << fmt(lt.final_error) << " at T = "
             << fmt(lt.T) << (lt.converged ? " (converged)" : " (NOT converged)");
    if (cfg.longtime.barriers) *opt.log << ", barriers " << (o.barriers_pass && o.sandwich.pass ? "pass" : "FAIL");
    *opt.log << "\n";
    const bool ok = lt.converged && (!cfg.longtime.barriers || (o.barriers_pass && o.sandwich.pass));
    out.exit_code = ok ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// oracle

/// Counts order violations of one explicit step over random ordered pairs
/// u ≤ v (perturbations of the sampled profile).
inline std::size_t step_monotonicity_violations(const ProblemSpec& p, const Grid& g, int pairs, std::uint64_t seed,
                                                const SchemeConfig& sc) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const GridFunction f = sample(p.f, g);
    const EvolutionOperator op(g, f.values, p.m, sc);
    const GridFunction base = sample(g, [](const Point& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); });
    std::size_t violations = 0;
    for (int k = 0; k < pairs; ++k) {
        EvolutionState a, b;
        a.u = base;
        for (double& x : a.u.values) x += 0.2 * (unit(rng) - 0.5);
        b.u = a.u;
        for (double& x : b.u.values) x += 0.1 * unit(rng);
        const double dt = std::min(admissible_dt(a.u, op, sc), admissible_dt(b.u, op, sc));
        const EvolutionState a1 = step(a, op, dt), b1 = step(b, op, dt);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (a1.u.values[i] > b1.u.values[i] + 1e-12 * (1.0 + std::abs(b1.u.values[i]))) {
                ++violations;
                break;
            }
    }
    return violations;
}

inline CommandOutcome cmd_oracle(const RunConfig& cfg, const CliOptions& opt) {
    Reporter rep(opt.out_dir, cfg, opt.json);
    const ProblemSpec& p = cfg.problem;
    const OracleBlock& ob = cfg.oracle;
    const std::uint64_t seed = opt.seed.value_or(cfg.seed);
    struct Row {
        std::string check;
        double computed, exact, tol;
        bool pass;
    };
    std::vector<Row> rows;
    auto add = [&](const std::string& name, double c, double e, double tol) {
        rows.push_back({name, c, e, tol, std::abs(c - e) <= tol});
    };
    const Grid g = Grid::box(p.dim, ob.R, cfg.ergodic_config().nodes_for(ob.R));
    const double K = std::min(2.0, align_down(g, g.half_width() / 4.0));
    const ErgodicApprox sc = solve_state_constraint(p, ob.R, cfg.ergodic_config());
    if (ob.kind == "hopf_cole") {
        if (p.m != 2.0) fail(ErrorKind::contract, "oracle: hopf_cole requires m = 2, got m = " + fmt(p.m));
        const GridFunction f = sample(p.f, g);
        const EigenResult e = hopf_cole_eigenvalue(f);
        add("eigenvalue_vs_state_constraint", sc.constant, e.lambda, ob.tol);
        add("eigen_profile_vs_state_constraint_on_K", 0.0,
            sup_norm_diff(restrict(e.profile(), K), restrict(sc.profile, K)), ob.tol);
        const GridFunction u0 = sample(p.u0, g);
        const GridFunction uh = hopf_cole_parabolic(f, u0, ob.T);
        const EvolutionState st = evolve(p, g, ob.T, cfg.scheme);
        add("parabolic_field_on_K_at_T", 0.0, sup_norm_diff(restrict(uh, K), restrict(st.u, K)), ob.tol);
        if (is_oracle_problem(p)) add("eigenvalue_vs_exact", e.lambda, p.dim, ob.tol);
    } else {
        if (!is_oracle_problem(p))
            fail(ErrorKind::contract, "oracle: manufactured pair requires source power with alpha = m and no shift");
        const OracleSolution o = manufactured(p.m, p.dim);
        add("lambda_R_vs_exact", sc.constant, o.lambda_exact, ob.tol);
        const GridFunction exact = sample(restrict(sc.profile, K).grid, o.phi_exact);
        add("profile_on_K", 0.0, sup_norm_diff(restrict(sc.profile, K), exact), ob.tol);
        const GridFunction phi = sample(g, o.phi_exact);
        const GridFunction res = residual_ergodic(o.lambda_exact, phi, sample(o.f, g), p.m, Stencil::central);
        double rn = 0.0;
        for (double v : res.values) rn = std::max(rn, std::abs(v));
        add("sampled_oracle_central_residual", rn, 0.0, 1e-9 * (1.0 + std::pow(ob.R, p.m)));
    }
    const std::size_t viol = step_monotonicity_violations(p, Grid::box(p.dim, ob.R, p.dim == 1 ? 161 : 41),
                                                          ob.random_pairs, seed, cfg.scheme);
    rows.push_back({"step_monotonicity_violations", static_cast<double>(viol), 0.0, 0.0, viol == 0});

    std::vector<std::vector<std::string>> table;
    bool all = true;
    Json checks = Json::array();
    for (const auto& r : rows) {
        table.push_back({r.check, fmt(r.computed), fmt(r.exact), fmt(std::abs(r.computed - r.exact)), fmt(r.tol),
                         r.pass ? "1" : "0"});
        checks.push_back({{"check", r.check},
                          {"computed", cli_detail::num(r.computed)},
                          {"exact", cli_detail::num(r.exact)},
                          {"pass", r.pass}});
        all = all && r.pass;
    }
    rep.table("oracle.csv", {"check", "computed", "exact", "abs_error", "tol", "pass"}, table);
    CommandOutcome out;
    out.results["kind"] = ob.kind;
    out.results["seed"] = seed;
    out.results["checks"] = checks;
    out.results["pass"] = all;
    rep.summary("oracle", out.results);
    *opt.log << "oracle (" << ob.kind << "): " << (all ? "all checks pass" : "FAIL") << "\n";
    out.exit_code = all ? 0 : 1;
    return out;
}

// ---------------------------------------------------------------------------
// all

inline CommandOutcome cmd_all(const RunConfig& cfg, const CliOptions& opt) {
    namespace fs = std::filesystem;
    CommandOutcome out;
    auto sub = [&](const std::string& name) {
        CliOptions o = opt;
        o.out_dir = (fs::path(opt.out_dir) / name).string();
        return o;
    };
    const CommandOutcome v = cmd_validate(cfg, sub("validate"));
    const CliOptions eo = sub("ergodic");
    Reporter erep(eo.out_dir, cfg, opt.json);
    const ErgodicOutput e = compute_ergodic(cfg, eo);
    write_ladders(erep, e.runs);
    const Json ej = ergodic_json(e);
    erep.summary("ergodic", ej);
    *opt.log << "ergodic: lambda* = " << fmt(e.estimate.value) << ", gap " << fmt(e.estimate.gap) << "\n";
    const bool eok = e.all_converged && e.monotone && e.floor_ok && (!cfg.ergodic.simplicity || e.simplicity.pass);
    const CommandOutcome l = cmd_longtime(cfg, sub("longtime"), &e.runs, &e.estimate);
    std::optional<CommandOutcome> orc;
    if (cfg.problem.m == 2.0 || cfg.oracle.kind == "manufactured") {
        RunConfig oc = cfg;
        if (oc.oracle.kind == "manufactured" && !is_oracle_problem(cfg.problem)) oc.oracle.kind = "hopf_cole";
        if (oc.oracle.kind == "hopf_cole" && cfg.problem.m != 2.0) oc.oracle.kind = "manufactured";
        if (oc.oracle.kind == "hopf_cole" || is_oracle_problem(cfg.problem)) orc = cmd_oracle(oc, sub("oracle"));
    }
    out.results["validate"] = v.results;
    out.results["ergodic"] = ej;
    out.results["longtime"] = l.results;
    if (orc) out.results["oracle"] = orc->results;
    out.exit_code = std::max({v.exit_code, eok ? 0 : 1, l.exit_code, orc ? orc->exit_code : 0});
    Reporter rep(opt.out_dir, cfg, opt.json);
    rep.summary("all", Json{{"validate_exit", v.exit_code},
                            {"ergodic_exit", eok ? 0 : 1},
                            {"longtime_exit", l.exit_code},
                            {"oracle_exit", orc ? Json(orc->exit_code) : Json("skipped")}});
    return out;
}

/// Dispatches a command by name and converts library errors to exit codes.
inline int run_command(const std::string& command, const std::string& config_path, const CliOptions& opt,
                       std::ostream& err = std::cerr) {
    try {
        RunConfig cfg = load_config(config_path);
        if (opt.seed) cfg.seed = *opt.seed;
        if (opt.jobs < 1) fail(ErrorKind::config, "--jobs must be >= 1");
        CommandOutcome r;
        if (command == "validate") r = cmd_validate(cfg, opt);
        else if (command == "ergodic") r = cmd_ergodic(cfg, opt);
        else if (command == "longtime") r = cmd_longtime(cfg, opt);
        else if (command == "oracle") r = cmd_oracle(cfg, opt);
        else if (command == "all") r = cmd_all(cfg, opt);
        else fail(ErrorKind::config, "unknown command '" + command + "'");
        return r.exit_code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const YAML::Exception& e) {
        err << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace vhj
