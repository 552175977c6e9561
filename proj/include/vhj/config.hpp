#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "vhj/asymptotics.hpp"
#include "vhj/ergodic.hpp"
#include "vhj/error.hpp"
#include "vhj/format.hpp"
#include "vhj/problem.hpp"
#include "vhj/scheme.hpp"
#include "vhj/table.hpp"

namespace vhj {

struct ValidateBlock {
    std::vector<double> radii{1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
    int directions = 64;
};

struct ErgodicBlock {
    std::vector<double> R_ladder{4.0, 8.0, 16.0};
    std::vector<double> cutoff_ladder{16.0};
    ErgodicConfig run;       ///< stopping rule; resolution is filled from the grid block
    double bracket_tol = 1e-2;
    bool simplicity = true;  ///< scaling check and argmax confinement
    double lambda_1_R = 1.0;
    double confinement_window = 2.0;
    double C = 10.0;
};

struct LongtimeBlock {
    LargeTimeConfig run;
    std::string phi_from = "inline";  ///< inline, oracle, or a directory with ergodic artifacts
    bool barriers = true;
    double C = 10.0;
};

struct OracleBlock {
    std::string kind = "hopf_cole";  ///< hopf_cole or manufactured
    double R = 8.0;
    double T = 5.0;
    double tol = 0.05;
    int random_pairs = 1000;
};

/// A fully resolved run description. Every field has a default except the
/// problem's m, which must be given.
struct RunConfig {
    std::string path;  ///< file the config was read from; tables resolve relative to it
    ProblemSpec problem;
    std::string source_table;
    std::string initial_table;
    SchemeConfig scheme;
    int nodes_per_axis = 321;
    double max_h = 0.0;
    int periodic_nodes_per_axis = 0;  ///< 0 uses nodes_per_axis
    ValidateBlock validate;
    ErgodicBlock ergodic;
    LongtimeBlock longtime;
    OracleBlock oracle;
    std::uint64_t seed = 1;

    ErgodicConfig ergodic_config(bool periodic = false) const {
        ErgodicConfig c = ergodic.run;
        c.scheme = scheme;
        c.nodes_per_axis = periodic && periodic_nodes_per_axis > 0 ? periodic_nodes_per_axis : nodes_per_axis;
        c.max_h = max_h;
        return c;
    }
    LargeTimeConfig longtime_config() const {
        LargeTimeConfig c = longtime.run;
        c.scheme = scheme;
        return c;
    }
};

namespace detail {

inline std::string where(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    if (m.line < 0) return "";
    return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

/// Map reader that remembers which keys were consumed and rejects the rest.
class Block {
public:
    Block(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) fail(ErrorKind::config, "'" + path_ + "' must be a mapping" + where(node_));
    }
    ~Block() = default;

    bool has(const std::string& key) const {
        const YAML::Node& n = node_;
        return n && n.IsMap() && n[key];
    }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node get(const std::string& key) {
        seen_.insert(key);
        const YAML::Node& n = node_;
        if (!n || !n.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
        return n[key];
    }

    double number(const std::string& key, double def) {
        const YAML::Node n = get(key);
        if (!n) return def;
        return scalar_number(n, field(key));
    }
    double required_number(const std::string& key) {
        const YAML::Node n = get(key);
        if (!n) fail(ErrorKind::config, "missing required field '" + field(key) + "'" + where(node_));
        return scalar_number(n, field(key));
    }
    int integer(const std::string& key, int def) {
        const YAML::Node n = get(key);
        if (!n) return def;
        const double v = scalar_number(n, field(key));
        if (v != std::floor(v) || std::abs(v) > 2e9)
            fail(ErrorKind::config, "field '" + field(key) + "' must be an integer" + where(n));
        return static_cast<int>(v);
    }
    bool boolean(const std::string& key, bool def) {
        const YAML::Node n = get(key);
        if (!n) return def;
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail(ErrorKind::config, "field '" + field(key) + "' must be true or false" + where(n));
        }
    }
    std::string text(const std::string& key, const std::string& def) {
        const YAML::Node n = get(key);
        if (!n) return def;
        if (!n.IsScalar()) fail(ErrorKind::config, "field '" + field(key) + "' must be a scalar" + where(n));
        return n.Scalar();
    }
    std::vector<double> numbers(const std::string& key, const std::vector<double>& def) {
        const YAML::Node n = get(key);
        if (!n) return def;
        if (!n.IsSequence()) fail(ErrorKind::config, "field '" + field(key) + "' must be a list" + where(n));
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i)
            out.push_back(scalar_number(n[i], field(key) + "[" + std::to_string(i) + "]"));
        return out;
    }

    /// Raises on keys that were never read.
    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            const std::string k = it->first.Scalar();
            if (!seen_.count(k)) fail(ErrorKind::config, "unknown field '" + field(k) + "'" + where(it->first));
        }
    }

    static double scalar_number(const YAML::Node& n, const std::string& name) {
        if (!n.IsScalar()) fail(ErrorKind::config, "field '" + name + "' must be a number" + where(n));
        return parse_double(n.Scalar(), "field '" + name + "'" + where(n));
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class E>
E parse_enum(const std::string& value, const std::map<std::string, E>& options, const std::string& field) {
    auto it = options.find(value);
    if (it != options.end()) return it->second;
    std::string list;
    for (auto& [k, v] : options) list += (list.empty() ? "" : ", ") + k;
    fail(ErrorKind::config, "field '" + field + "': unknown value '" + value + "' (expected one of: " + list + ")");
}

inline std::string resolve_path(const std::string& base_file, const std::string& p) {
    namespace fs = std::filesystem;
    if (p.empty() || fs::path(p).is_absolute() || base_file.empty()) return p;
    return (fs::path(base_file).parent_path() / p).lexically_normal().string();
}

}  // namespace detail

inline std::string hamiltonian_name(HamiltonianKind k) { return to_string(k); }

/// Parses a run config from YAML text. `path` is used for messages and to
/// resolve table paths.
inline RunConfig parse_config(const std::string& text, const std::string& path = "") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        fail(ErrorKind::config, "config parse error" + (path.empty() ? "" : " in '" + path + "'") + " (line " +
                                    std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) +
                                    "): " + e.msg);
    }
    if (!root || root.IsNull()) fail(ErrorKind::config, "config is empty");
    RunConfig c;
    c.path = path;
    detail::Block top(root, "");

    {
        detail::Block pb(top.get("problem"), "problem");
        if (!top.has("problem")) fail(ErrorKind::config, "missing required block 'problem'");
        c.problem.m = pb.required_number("m");
        c.problem.dim = pb.integer("dim", 1);
        {
            detail::Block sb(pb.get("source"), "problem.source");
            const std::string fam = sb.text("family", "power");
            const double alpha = sb.number("alpha", 2.0);
            const double amp = sb.number("amp", 0.0);
            const double shift = sb.number("shift", 0.0);
            const std::string table = sb.text("table", "");
            sb.finish();
            if (fam == "power" || fam == "shifted_power") {
                c.problem.f = SourceSpec::power_law(alpha, shift);
                if (fam == "shifted_power") c.problem.f.family = SourceFamily::shifted_power;
            } else if (fam == "power_oscillating") {
                c.problem.f = SourceSpec::oscillating(alpha, amp);
                c.problem.f.shift = shift;
            } else if (fam == "custom_table") {
                if (table.empty()) fail(ErrorKind::config, "field 'problem.source.table' required for custom_table");
                c.source_table = table;
                const std::string resolved = detail::resolve_path(path, table);
                c.problem.f = SourceSpec::from_table(std::make_shared<Table>(read_table_csv(resolved, c.problem.dim)));
                c.problem.f.table_path = table;
                c.problem.f.shift = shift;
            } else {
                fail(ErrorKind::config, "field 'problem.source.family': unknown value '" + fam +
                                            "' (expected one of: power, power_oscillating, shifted_power, custom_table)");
            }
        }
        {
            detail::Block ib(pb.get("initial"), "problem.initial");
            const std::string fam = ib.text("family", "zero");
            const double a = ib.number("a", 0.5);
            const double offset = ib.number("offset", 0.0);
            const double amp = ib.number("amp", 1.0);
            const double width = ib.number("width", 1.0);
            const std::vector<double> center = ib.numbers("center", {0.0, 0.0});
            const std::string table = ib.text("table", "");
            ib.finish();
            if (center.size() != 2) fail(ErrorKind::config, "field 'problem.initial.center' must have two entries");
            if (fam == "zero") {
                c.problem.u0 = InitialSpec::zero();
            } else if (fam == "quadratic_bowl") {
                c.problem.u0 = InitialSpec::bowl(a);
            } else if (fam == "bump") {
                c.problem.u0 = InitialSpec::make_bump(amp, width, {center[0], center[1]});
            } else if (fam == "custom_table") {
                if (table.empty()) fail(ErrorKind::config, "field 'problem.initial.table' required for custom_table");
                c.initial_table = table;
                c.problem.u0.family = InitialFamily::custom_table;
                c.problem.u0.table =
                    std::make_shared<Table>(read_table_csv(detail::resolve_path(path, table), c.problem.dim));
                c.problem.u0.table_path = table;
            } else {
                fail(ErrorKind::config, "field 'problem.initial.family': unknown value '" + fam +
                                            "' (expected one of: zero, quadratic_bowl, bump, custom_table)");
            }
            c.problem.u0.offset = offset;
        }
        pb.finish();
    }
    {
        detail::Block gb(top.get("grid"), "grid");
        c.nodes_per_axis = gb.integer("nodes_per_axis", c.nodes_per_axis);
        c.max_h = gb.number("max_h", c.max_h);
        c.periodic_nodes_per_axis = gb.integer("periodic_nodes_per_axis", c.periodic_nodes_per_axis);
        gb.finish();
    }
    {
        detail::Block sb(top.get("scheme"), "scheme");
        SchemeConfig& s = c.scheme;
        s.cfl_safety = sb.number("cfl_safety", s.cfl_safety);
        s.grad_cap = sb.number("grad_cap", s.grad_cap);
        s.cap_headroom = sb.number("cap_headroom", s.cap_headroom);
        s.grad_hard_limit = sb.number("grad_hard_limit", s.grad_hard_limit);
        s.guard_window_fraction = sb.number("guard_window_fraction", s.guard_window_fraction);
        s.hamiltonian = detail::parse_enum<HamiltonianKind>(
            sb.text("hamiltonian", "auto"),
            {{"auto", HamiltonianKind::automatic}, {"hybrid", HamiltonianKind::hybrid}, {"rouy_tourin", HamiltonianKind::rouy_tourin}},
            "scheme.hamiltonian");
        s.residual_stencil = detail::parse_enum<Stencil>(
            sb.text("residual_stencil", "central"),
            {{"central", Stencil::central}, {"upwind", Stencil::upwind}, {"hybrid", Stencil::hybrid}},
            "scheme.residual_stencil");
        sb.finish();
    }
    {
        detail::Block vb(top.get("validate"), "validate");
        c.validate.radii = vb.numbers("radii", c.validate.radii);
        c.validate.directions = vb.integer("directions", c.validate.directions);
        vb.finish();
    }
    {
        detail::Block eb(top.get("ergodic"), "ergodic");
        ErgodicBlock& e = c.ergodic;
        e.R_ladder = eb.numbers("R_ladder", e.R_ladder);
        e.cutoff_ladder = eb.numbers("cutoff_ladder", e.cutoff_ladder);
        e.run.slope_tol = eb.number("slope_tol", e.run.slope_tol);
        e.run.consecutive = eb.integer("consecutive", e.run.consecutive);
        e.run.delta_T = eb.number("delta_T", e.run.delta_T);
        e.run.max_time = eb.number("max_time", e.run.max_time);
        e.run.window = eb.number("window", e.run.window);
        e.bracket_tol = eb.number("bracket_tol", e.bracket_tol);
        e.simplicity = eb.boolean("simplicity", e.simplicity);
        e.lambda_1_R = eb.number("lambda_1_R", e.lambda_1_R);
        e.confinement_window = eb.number("confinement_window", e.confinement_window);
        e.C = eb.number("C", e.C);
        eb.finish();
    }
    {
        detail::Block lb(top.get("longtime"), "longtime");
        LargeTimeConfig& l = c.longtime.run;
        l.half_width = lb.number("half_width", l.half_width);
        l.nodes_per_axis = lb.integer("nodes_per_axis", l.nodes_per_axis);
        l.window = lb.number("window", l.window);
        l.T = lb.number("T", l.T);
        l.sample_interval = lb.number("sample_interval", l.sample_interval);
        l.tol = lb.number("tol", l.tol);
        l.flatness_tol = lb.number("flatness_tol", l.flatness_tol);
        l.epsilon = lb.number("epsilon", l.epsilon);
        l.trusted_fraction = lb.number("trusted_fraction", l.trusted_fraction);
        c.longtime.phi_from = lb.text("phi_from", c.longtime.phi_from);
        c.longtime.barriers = lb.boolean("barriers", c.longtime.barriers);
        c.longtime.C = lb.number("C", c.longtime.C);
        lb.finish();
    }
    {
        detail::Block ob(top.get("oracle"), "oracle");
        OracleBlock& o = c.oracle;
        o.kind = ob.text("kind", o.kind);
        o.R = ob.number("R", o.R);
        o.T = ob.number("T", o.T);
        o.tol = ob.number("tol", o.tol);
        o.random_pairs = ob.integer("random_pairs", o.random_pairs);
        ob.finish();
        if (o.kind != "hopf_cole" && o.kind != "manufactured")
            fail(ErrorKind::config, "field 'oracle.kind': unknown value '" + o.kind + "' (expected hopf_cole or manufactured)");
    }
    {
        const double s = top.number("seed", 1.0);
        if (s < 0 || s != std::floor(s)) fail(ErrorKind::config, "field 'seed' must be a nonnegative integer");
        c.seed = static_cast<std::uint64_t>(s);
    }
    top.finish();

    c.problem.validate();
    c.scheme.validate();
    c.ergodic_config().validate();
    c.longtime_config().validate();
    for (double R : c.ergodic.R_ladder)
        if (!(R > 0.0)) fail(ErrorKind::config, "ergodic.R_ladder entries must be > 0");
    for (std::size_t k = 1; k < c.ergodic.R_ladder.size(); ++k)
        if (!(c.ergodic.R_ladder[k] > c.ergodic.R_ladder[k - 1]))
            fail(ErrorKind::config, "ergodic.R_ladder must be increasing");
    for (std::size_t k = 1; k < c.ergodic.cutoff_ladder.size(); ++k)
        if (!(c.ergodic.cutoff_ladder[k] > c.ergodic.cutoff_ladder[k - 1]))
            fail(ErrorKind::config, "ergodic.cutoff_ladder must be increasing");
    if (c.periodic_nodes_per_axis != 0 && (c.periodic_nodes_per_axis < 9 || c.periodic_nodes_per_axis % 2 == 0))
        fail(ErrorKind::config, "grid.periodic_nodes_per_axis must be 0 or odd and >= 9");
    if (c.validate.radii.size() < 3) fail(ErrorKind::config, "validate.radii needs at least three radii");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {

inline std::string source_family_name(const SourceSpec& f) { return to_string(f.family); }

inline void emit_list(YAML::Emitter& out, const std::vector<double>& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) out << format_double(x);
    out << YAML::EndSeq;
}

}  // namespace detail

/// Writes the resolved config as a YAML mapping into an open emitter.
inline void emit_config(YAML::Emitter& out, const RunConfig& c) {
    using detail::emit_list;
    const auto num = [](double v) { return format_double(v); };
    out << YAML::BeginMap;
    out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "m" << YAML::Value << num(c.problem.m);
    out << YAML::Key << "dim" << YAML::Value << c.problem.dim;
    out << YAML::Key << "source" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << detail::source_family_name(c.problem.f);
    out << YAML::Key << "alpha" << YAML::Value << num(c.problem.f.alpha);
    out << YAML::Key << "amp" << YAML::Value << num(c.problem.f.osc_amp);
    out << YAML::Key << "shift" << YAML::Value << num(c.problem.f.shift);
    if (!c.source_table.empty()) out << YAML::Key << "table" << YAML::Value << c.source_table;
    out << YAML::EndMap;
    const InitialSpec& u0 = c.problem.u0;
    out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << to_string(u0.family);
    out << YAML::Key << "a" << YAML::Value << num(u0.a);
    out << YAML::Key << "offset" << YAML::Value << num(u0.offset);
    out << YAML::Key << "amp" << YAML::Value << num(u0.amp);
    out << YAML::Key << "width" << YAML::Value << num(u0.width);
    out << YAML::Key << "center" << YAML::Value;
    emit_list(out, {u0.center[0], u0.center[1]});
    if (!c.initial_table.empty()) out << YAML::Key << "table" << YAML::Value << c.initial_table;
    out << YAML::EndMap;
    out << YAML::EndMap;

    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "nodes_per_axis" << YAML::Value << c.nodes_per_axis;
    out << YAML::Key << "max_h" << YAML::Value << num(c.max_h);
    out << YAML::Key << "periodic_nodes_per_axis" << YAML::Value << c.periodic_nodes_per_axis;
    out << YAML::EndMap;

    const SchemeConfig& s = c.scheme;
    out << YAML::Key << "scheme" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "cfl_safety" << YAML::Value << num(s.cfl_safety);
    out << YAML::Key << "grad_cap" << YAML::Value << num(s.grad_cap);
    out << YAML::Key << "cap_headroom" << YAML::Value << num(s.cap_headroom);
    out << YAML::Key << "grad_hard_limit" << YAML::Value << num(s.grad_hard_limit);
    out << YAML::Key << "guard_window_fraction" << YAML::Value << num(s.guard_window_fraction);
    out << YAML::Key << "hamiltonian" << YAML::Value << to_string(s.hamiltonian);
    out << YAML::Key << "residual_stencil" << YAML::Value << to_string(s.residual_stencil);
    out << YAML::EndMap;

    out << YAML::Key << "validate" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "radii" << YAML::Value;
    emit_list(out, c.validate.radii);
    out << YAML::Key << "directions" << YAML::Value << c.validate.directions;
    out << YAML::EndMap;

    const ErgodicBlock& e = c.ergodic;
    out << YAML::Key << "ergodic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "R_ladder" << YAML::Value;
    emit_list(out, e.R_ladder);
    out << YAML::Key << "cutoff_ladder" << YAML::Value;
    emit_list(out, e.cutoff_ladder);
    out << YAML::Key << "slope_tol" << YAML::Value << num(e.run.slope_tol);
    out << YAML::Key << "consecutive" << YAML::Value << e.run.consecutive;
    out << YAML::Key << "delta_T" << YAML::Value << num(e.run.delta_T);
    out << YAML::Key << "max_time" << YAML::Value << num(e.run.max_time);
    out << YAML::Key << "window" << YAML::Value << num(e.run.window);
    out << YAML::Key << "bracket_tol" << YAML::Value << num(e.bracket_tol);
    out << YAML::Key << "simplicity" << YAML::Value << e.simplicity;
    out << YAML::Key << "lambda_1_R" << YAML::Value << num(e.lambda_1_R);
    out << YAML::Key << "confinement_window" << YAML::Value << num(e.confinement_window);
    out << YAML::Key << "C" << YAML::Value << num(e.C);
    out << YAML::EndMap;

    const LargeTimeConfig& l = c.longtime.run;
    out << YAML::Key << "longtime" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "half_width" << YAML::Value << num(l.half_width);
    out << YAML::Key << "nodes_per_axis" << YAML::Value << l.nodes_per_axis;
    out << YAML::Key << "window" << YAML::Value << num(l.window);
    out << YAML::Key << "T" << YAML::Value << num(l.T);
    out << YAML::Key << "sample_interval" << YAML::Value << num(l.sample_interval);
    out << YAML::Key << "tol" << YAML::Value << num(l.tol);
    out << YAML::Key << "flatness_tol" << YAML::Value << num(l.flatness_tol);
    out << YAML::Key << "epsilon" << YAML::Value << num(l.epsilon);
    out << YAML::Key << "trusted_fraction" << YAML::Value << num(l.trusted_fraction);
    out << YAML::Key << "phi_from" << YAML::Value << c.longtime.phi_from;
    out << YAML::Key << "barriers" << YAML::Value << c.longtime.barriers;
    out << YAML::Key << "C" << YAML::Value << num(c.longtime.C);
    out << YAML::EndMap;

    const OracleBlock& o = c.oracle;
    out << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << o.kind;
    out << YAML::Key << "R" << YAML::Value << num(o.R);
    out << YAML::Key << "T" << YAML::Value << num(o.T);
    out << YAML::Key << "tol" << YAML::Value << num(o.tol);
    out << YAML::Key << "random_pairs" << YAML::Value << o.random_pairs;
    out << YAML::EndMap;

    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::EndMap;
}

inline std::string config_to_yaml(const RunConfig& c) {
    YAML::Emitter out;
    emit_config(out, c);
    return std::string(out.c_str()) + "\n";
}

/// The resolved config as lines, for embedding in CSV comment headers.
inline std::vector<std::string> config_comment_lines(const RunConfig& c) {
    std::vector<std::string> lines{"resolved config:"};
    std::istringstream is(config_to_yaml(c));
    for (std::string line; std::getline(is, line);)
        if (!line.empty()) lines.push_back("  " + line);
    return lines;
}

}  // namespace vhj
