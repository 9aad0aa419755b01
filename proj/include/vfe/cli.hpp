#pragma once

// Command-line front end: parameter parsing and validation, one pipeline per
// command, series/manifest/plot output. run_command is usable in-process.

#include "vfe/algebraic.hpp"
#include "vfe/analysis.hpp"
#include "vfe/evolution.hpp"
#include "vfe/geometry.hpp"
#include "vfe/io.hpp"
#include "vfe/onecorner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace vfe::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"angles",      "algebraic", "evolve",    "trajectory",
                                                "fingerprint", "riemann",   "onecorner", "sweep"};
    return names;
}

inline std::string usage_text()
{
    return "usage: vfe <command> [options]\n"
           "commands:\n"
           "  angles       derived scalars of the helical M-polygon (b, theta0, rho0, c_theta0, c_M)\n"
           "  algebraic    exact polygon at t = (2pi/M^2)(p/q)\n"
           "  evolve       spectral evolution with snapshots at the rational times p/q\n"
           "  trajectory   corner trajectory X(0,t), its channels and stereographic projection\n"
           "  fingerprint  Fourier fingerprint of a trajectory channel\n"
           "  riemann      Riemann-type series (classic, phi, phi_cd, phi_M)\n"
           "  onecorner    self-similar one-corner profile, or the curvature table (--table1)\n"
           "  sweep        independent evolve runs over lists of M and b\n"
           "common options: --M --b --theta0 c/dpi --Ngrid --Nt --tend --p --q --renorm on|off --out DIR\n"
           "                --config FILE (key=value lines or one JSON object; flags override)\n"
           "run 'vfe <command> --help' for the full option list\n";
}

/// Invalid user input; the message names the offending parameter.
class ParamError : public std::invalid_argument {
public:
    ParamError(const std::string& param, const std::string& what)
        : std::invalid_argument(param + ": " + what), param_(param) {}
    const std::string& param() const noexcept { return param_; }

private:
    std::string param_;
};

struct Params {
    std::string command;
    int M = 3;
    std::optional<double> b;
    std::optional<std::string> theta0;
    int Ngrid = 480;
    std::optional<long long> Nt;
    std::optional<double> tend;
    std::vector<long long> p;
    std::vector<long long> q;
    std::string renorm = "on";
    std::string dealias = "off";
    std::string out = "out";
    std::size_t stride = 1;
    // trajectory / fingerprint
    std::string channel = "X3tilde";
    int nmax = 200;
    double periods = 1.0;
    std::string rotate = "cw";
    std::string conjugate = "on";
    std::string compare = "off";
    // riemann
    std::string variant = "phi";
    long long K = 1024;
    long long samples = 4096;
    long long c = 1;
    long long d = 1;
    // onecorner
    bool table1 = false;
    double c0 = 0.4;
    double S = 200.0;
    double ds = 0.01;
    // sweep
    std::vector<int> Ms;
    std::vector<double> bs;
    int jobs = 0;
};

/// theta0 as "c/dpi", "cpi/d", "pi/d", "pi" or plain radians.
inline TorsionSpec parse_theta0(const std::string& text)
{
    static const std::regex frac(R"(^\s*(\d+)\s*/\s*(\d+)\s*pi\s*$)");
    static const std::regex frac2(R"(^\s*(\d*)\s*pi\s*/\s*(\d+)\s*$)");
    static const std::regex whole(R"(^\s*(\d*)\s*pi\s*$)");
    std::smatch m;
    try {
        if (std::regex_match(text, m, frac))
            return PiFraction{std::stoll(m[1]), std::stoll(m[2])};
        if (std::regex_match(text, m, frac2))
            return PiFraction{m[1].length() ? std::stoll(m[1]) : 1, std::stoll(m[2])};
        if (std::regex_match(text, m, whole))
            return PiFraction{m[1].length() ? std::stoll(m[1]) : 1, 1};
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size())
            throw ParamError("theta0", "cannot parse '" + text + "' (use c/dpi or radians)");
        return TorsionAngle{v};
    } catch (const std::logic_error&) {
        throw ParamError("theta0", "cannot parse '" + text + "' (use c/dpi or radians)");
    }
}

inline std::string theta0_text(const PolygonConfig& cfg)
{
    if (!cfg.theta0_pi)
        return format_double(cfg.theta0);
    return std::to_string(cfg.theta0_pi->num) + "/" + std::to_string(cfg.theta0_pi->den) + "pi";
}

inline PolygonConfig make_config(const Params& prm)
{
    if (prm.M < 3)
        throw ParamError("M", "must be >= 3 (got " + std::to_string(prm.M) + ")");
    if (prm.b && prm.theta0)
        throw ParamError("b/theta0", "give only one of --b and --theta0");
    if (!prm.b && !prm.theta0)
        throw ParamError("b/theta0", "one of --b and --theta0 is required");
    try {
        if (prm.b)
            return polygon_config_b(prm.M, *prm.b);
        return polygon_config(prm.M, parse_theta0(*prm.theta0));
    } catch (const DomainError& e) {
        throw ParamError(prm.b ? "b" : "theta0", e.what());
    }
}

inline std::vector<std::pair<long long, long long>> rational_pairs(const Params& prm)
{
    if (prm.p.size() != prm.q.size())
        throw ParamError("p/q", "need as many --p values as --q values");
    std::vector<std::pair<long long, long long>> out;
    for (std::size_t i = 0; i < prm.p.size(); ++i) {
        if (prm.q[i] < 1)
            throw ParamError("q", "must be >= 1 (got " + std::to_string(prm.q[i]) + ")");
        if (prm.p[i] < 0)
            throw ParamError("p", "must be >= 0 (got " + std::to_string(prm.p[i]) + ")");
        out.emplace_back(prm.p[i], prm.q[i]);
    }
    return out;
}

inline bool on(const std::string& flag) { return flag == "on"; }

struct TimeGrid {
    double tend = 0.0;
    long long Nt = 0;
};

/// Resolve t_end and the step count. Without --Nt the smallest count honoring the
/// stability bound that also puts every requested time on a step is chosen.
inline TimeGrid time_grid(const Params& prm, const PolygonConfig& cfg, double default_tend,
                          const std::vector<double>& on_step_times)
{
    if (prm.Ngrid < 2)
        throw ParamError("Ngrid", "must be >= 2 (got " + std::to_string(prm.Ngrid) + ")");
    TimeGrid g;
    g.tend = prm.tend.value_or(default_tend);
    if (!(g.tend > 0.0) || !std::isfinite(g.tend))
        throw ParamError("tend", "must be positive (got " + format_double(g.tend) + ")");
    for (double t : on_step_times)
        if (t > g.tend * (1.0 + 1e-12))
            throw ParamError("p/q", "requested time " + format_double(t) + " lies beyond tend");
    const int N = prm.Ngrid * cfg.M;
    const double dt_max = max_stable_dt(N);
    auto aligned = [&](long long nt) {
        for (double t : on_step_times) {
            const double k = t / g.tend * static_cast<double>(nt);
            if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
                return false;
        }
        return true;
    };
    if (prm.Nt) {
        g.Nt = *prm.Nt;
        if (g.Nt < 1)
            throw ParamError("Nt", "must be >= 1");
        if (g.tend / static_cast<double>(g.Nt) > dt_max)
            throw ParamError("Nt", "dt = tend/Nt = " + format_double(g.tend / g.Nt) + " exceeds the stability bound " +
                                       format_double(dt_max) + " for Ngrid = " + std::to_string(prm.Ngrid));
        if (!aligned(g.Nt))
            throw ParamError("Nt", "the requested times p/q do not fall on step boundaries");
        return g;
    }
    const long long start = static_cast<long long>(std::ceil(g.tend / dt_max));
    for (long long nt = std::max<long long>(1, start); nt < start + 1000000; ++nt)
        if (aligned(nt)) {
            g.Nt = nt;
            return g;
        }
    throw ParamError("Nt", "no step count below the search limit puts every p/q on a step; pass --Nt");
}

inline Json params_json(const Params& prm, const PolygonConfig* cfg)
{
    Json j;
    j["M"] = prm.M;
    if (cfg && cfg->theta0_pi)
        j["theta0"] = theta0_text(*cfg);
    else if (prm.theta0)
        j["theta0"] = *prm.theta0;
    else if (prm.b)
        j["b"] = *prm.b;
    return j;
}

// ---------------------------------------------------------------------------
// config files

inline std::map<std::string, std::vector<std::string>> load_config(const fs::path& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        throw ParamError("config", e.what());
    }
    std::map<std::string, std::vector<std::string>> kv;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        Json j;
        try {
            j = Json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ParamError("config", path.string() + ": " + e.what());
        }
        if (j.contains("parameters") && j["parameters"].is_object())
            j = j["parameters"]; // a run manifest
        auto scalar = [&](const std::string& key, const Json& v) -> std::string {
            if (v.is_string())
                return v.get<std::string>();
            if (v.is_boolean())
                return v.get<bool>() ? "on" : "off";
            if (v.is_number_integer())
                return std::to_string(v.get<long long>());
            if (v.is_number())
                return format_double(v.get<double>());
            throw ParamError(key, "unsupported value type in config");
        };
        for (const auto& [key, v] : j.items()) {
            std::vector<std::string> vals;
            if (v.is_array())
                for (const auto& e : v)
                    vals.push_back(scalar(key, e));
            else
                vals.push_back(scalar(key, v));
            kv[key] = vals;
        }
        return kv;
    }
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos)
            end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParamError("config", path.string() + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        std::vector<std::string> vals;
        std::size_t s = 0;
        while (true) {
            const auto c = val.find(',', s);
            vals.push_back(trim(val.substr(s, c == std::string::npos ? std::string::npos : c - s)));
            if (c == std::string::npos)
                break;
            s = c + 1;
        }
        kv[key] = vals;
    }
    return kv;
}

// ---------------------------------------------------------------------------
// output helpers

struct Output {
    fs::path dir;
    RunManifest manifest;

    void series(const std::string& name, const SeriesFile& s)
    {
        write_series(s, dir / name);
        add_artifact(manifest, dir, name);
    }
    void svg(const std::string& name, const std::vector<PlotChannel>& ch, const PlotStyle& st)
    {
        write_svg(dir / name, ch, st);
        add_artifact(manifest, dir, name);
    }
    void finish() { write_manifest(manifest, dir / "manifest.json"); }
};

inline Output open_output(const Params& prm, Json parameters)
{
    Output o;
    o.dir = prm.out;
    std::error_code ec;
    fs::create_directories(o.dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + o.dir.string() + "': " + ec.message());
    o.manifest.command = prm.command;
    o.manifest.parameters = std::move(parameters);
    return o;
}

inline std::string fmt(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline EvolutionOptions evolution_options(const Params& prm)
{
    EvolutionOptions o;
    o.renormalize = on(prm.renorm);
    o.dealias = on(prm.dealias);
    return o;
}

inline Json evolution_params(const Params& prm, const PolygonConfig& cfg, const TimeGrid& g)
{
    Json j = params_json(prm, &cfg);
    j["Ngrid"] = prm.Ngrid;
    j["Nt"] = g.Nt;
    j["tend"] = g.tend;
    j["p"] = prm.p;
    j["q"] = prm.q;
    j["renorm"] = prm.renorm;
    j["dealias"] = prm.dealias;
    j["stride"] = prm.stride;
    return j;
}

inline SeriesFile trajectory_file(const EvolutionResult& res, const PolygonConfig& cfg)
{
    const auto tr = trajectory_series(res, cfg);
    const auto ch = trajectory_components(tr);
    std::vector<double> x1, x2, x3;
    for (const auto& p : tr.points) {
        x1.push_back(p.x());
        x2.push_back(p.y());
        x3.push_back(p.z());
    }
    SeriesFile s = make_series({"t", "X1", "X2", "X3", "R", "nu", "X3tilde"}, {tr.times, x1, x2, x3, ch.R, ch.nu, ch.X3tilde});
    s.metadata = {{"c_M", format_double(cfg.c_M)}, {"T_f", format_double(cfg.time_period())}};
    return s;
}

inline void trajectory_plots(Output& o, const EvolutionResult& res, const PolygonConfig& cfg)
{
    const auto tr = trajectory_series(res, cfg);
    const auto ch = trajectory_components(tr);
    std::vector<double> x1, x2;
    for (const auto& p : tr.points) {
        x1.push_back(p.x());
        x2.push_back(p.y());
    }
    o.svg("trajectory_xy.svg", {{"X(0,t)", x1, x2, MarkStyle::line, "#1f4e9c"}},
          {"corner trajectory, M=" + std::to_string(cfg.M), "X1", "X2", 720, 480, true});
    o.svg("X3tilde.svg", {{"X3 - c_M t", tr.times, ch.X3tilde, MarkStyle::line, "#1f4e9c"}},
          {"vertical channel", "t", "X3 - c_M t"});
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_angles(const Params& prm, std::ostream& out)
{
    const auto cfg = make_config(prm);
    Json pj = params_json(prm, &cfg);
    pj["q"] = prm.q;
    Output o = open_output(prm, pj);
    out << "M        = " << cfg.M << "\n"
        << "b        = " << fmt(cfg.b) << "\n"
        << "theta0   = " << fmt(cfg.theta0) << "\n"
        << "rho0     = " << fmt(cfg.rho0) << "\n"
        << "c_theta0 = " << fmt(cfg.c_theta0) << "\n"
        << "c_M      = " << fmt(cfg.c_M) << "\n"
        << "T_f      = " << fmt(cfg.time_period()) << "\n";
    o.series("angles.csv", make_series({"M", "b", "theta0", "rho0", "c_theta0", "c_M", "T_f"},
                                       {{double(cfg.M)}, {cfg.b}, {cfg.theta0}, {cfg.rho0}, {cfg.c_theta0}, {cfg.c_M},
                                        {cfg.time_period()}}));
    if (!prm.q.empty()) {
        std::vector<double> qs, rq;
        for (long long q : prm.q) {
            if (q < 1)
                throw ParamError("q", "must be >= 1 (got " + std::to_string(q) + ")");
            qs.push_back(static_cast<double>(q));
            rq.push_back(rho_q(cfg, q));
            out << "rho_q(" << q << ") = " << fmt(rq.back()) << "\n";
        }
        o.series("rho_q.csv", make_series({"q", "rho_q"}, {qs, rq}));
    }
    o.manifest.results = {{"b", cfg.b},           {"theta0", cfg.theta0}, {"rho0", cfg.rho0},
                          {"c_theta0", cfg.c_theta0}, {"c_M", cfg.c_M},   {"T_f", cfg.time_period()}};
    o.finish();
    return kExitOk;
}

inline int cmd_algebraic(const Params& prm, std::ostream& out)
{
    const auto cfg = make_config(prm);
    auto pairs = rational_pairs(prm);
    if (pairs.empty())
        pairs.emplace_back(0, 1);
    Json pj = params_json(prm, &cfg);
    pj["p"] = prm.p;
    pj["q"] = prm.q;
    Output o = open_output(prm, pj);
    Json results = Json::array();
    for (const auto& [p, q] : pairs) {
        const auto sol = algebraic_solution(cfg, p, q);
        const auto& c = sol.curve;
        std::vector<double> s, x1, x2, x3, t1, t2, t3;
        for (std::size_t j = 0; j < c.vertices.size(); ++j) {
            const Vec3 tg = c.tangents[std::min(j, c.tangents.size() - 1)];
            s.push_back(c.arc[j]);
            x1.push_back(c.vertices[j].x());
            x2.push_back(c.vertices[j].y());
            x3.push_back(c.vertices[j].z());
            t1.push_back(tg.x());
            t2.push_back(tg.y());
            t3.push_back(tg.z());
        }
        const std::string tag = "p" + std::to_string(sol.time.p) + "_q" + std::to_string(sol.time.q);
        SeriesFile sf = make_series({"s", "X1", "X2", "X3", "T1", "T2", "T3"}, {s, x1, x2, x3, t1, t2, t3});
        sf.metadata = {{"t", format_double(sol.time.t)}, {"corners", std::to_string(sol.time.corner_count)}};
        o.series("vertices_" + tag + ".csv", sf);
        o.svg("vertices_" + tag + ".svg", {{"X(s)", x1, x2, MarkStyle::line, "#1f4e9c"}},
              {"polygon at t_pq, " + tag, "X1", "X2", 720, 480, true});
        const double rq = rho_q(cfg, sol.time.q);
        out << tag << ": t = " << fmt(sol.time.t) << ", corners = " << sol.time.corner_count
            << ", rho_q = " << fmt(rq) << ", Galilean shift = " << fmt(sol.time.galilean_shift) << "\n";
        results.push_back({{"p", sol.time.p},
                           {"q", sol.time.q},
                           {"t", sol.time.t},
                           {"corners", sol.time.corner_count},
                           {"rho_q", rq},
                           {"galilean_shift", sol.time.galilean_shift}});
    }
    o.manifest.results = {{"times", results}};
    o.finish();
    return kExitOk;
}

inline int cmd_evolve(const Params& prm, std::ostream& out)
{
    const auto cfg = make_config(prm);
    const auto pairs = rational_pairs(prm);
    std::vector<double> snap_times;
    for (const auto& [p, q] : pairs)
        snap_times.push_back(cfg.time_period() * static_cast<double>(p) / static_cast<double>(q));
    const TimeGrid g = time_grid(prm, cfg, cfg.time_period(), snap_times);
    Output o = open_output(prm, evolution_params(prm, cfg, g));

    EvolveRequest req;
    req.n_per_side = prm.Ngrid;
    req.Nt = g.Nt;
    req.t_end = g.tend;
    req.options = evolution_options(prm);
    req.snapshot_times = snap_times;
    req.record_stride = prm.stride;
    const auto res = evolve(cfg, req);

    o.series("trajectory.csv", trajectory_file(res, cfg));
    trajectory_plots(o, res, cfg);
    Json results;
    results["dt"] = res.dt;
    if (g.tend >= cfg.time_period() * (1.0 - 1e-12)) {
        const auto cs = center_speed_num(res, cfg);
        results["c_M"] = cfg.c_M;
        results["c_M_num"] = cs.finite_difference;
        results["c_M_abs_error"] = std::abs(cs.finite_difference - cfg.c_M);
        out << "c_M = " << fmt(cfg.c_M) << ", numerical = " << fmt(cs.finite_difference) << "\n";
    }
    const auto initial = expand_tangents(initial_state(cfg, prm.Ngrid * cfg.M));
    Json snaps = Json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& st = res.snapshots[i];
        const auto rt = rational_time(cfg, pairs[i].first, pairs[i].second);
        const auto tg = expand_tangents(st);
        const auto xs = expand_curve(st);
        std::vector<double> s, t1, t2, t3, x1, x2, x3;
        for (std::size_t j = 0; j < tg.size(); ++j) {
            s.push_back(kTwoPi * static_cast<double>(j) / static_cast<double>(tg.size()));
            t1.push_back(tg[j].x());
            t2.push_back(tg[j].y());
            t3.push_back(tg[j].z());
            x1.push_back(xs[j].x());
            x2.push_back(xs[j].y());
            x3.push_back(xs[j].z());
        }
        const std::string tag = "p" + std::to_string(pairs[i].first) + "_q" + std::to_string(pairs[i].second);
        SeriesFile sf = make_series({"s", "T1", "T2", "T3", "X1", "X2", "X3"}, {s, t1, t2, t3, x1, x2, x3});
        sf.metadata = {{"t", format_double(st.t)}};
        o.series("snapshot_" + tag + ".csv", sf);
        Json sj = {{"p", pairs[i].first}, {"q", pairs[i].second}, {"t", st.t}};
        if (pairs[i].first > 0) {
            try {
                const auto na = numeric_angles(tg, cfg, rt, rho_q(cfg, rt.q));
                sj["rho_q"] = na.rho_exact;
                sj["rho_abs_error"] = na.abs_error;
                sj["rho_rel_error"] = na.rel_error;
                out << tag << ": rho_q = " << fmt(na.rho_exact) << ", max |error| = " << fmt(na.abs_error) << "\n";
            } catch (const ResolutionError& e) {
                sj["rho_note"] = e.what();
            }
            if (rt.corner_count == cfg.M) {
                const double ph = phase_shift(initial, tg, cfg, rt);
                sj["phase_shift"] = ph;
                out << tag << ": phase shift = " << fmt(ph) << "\n";
            }
        }
        snaps.push_back(sj);
    }
    results["snapshots"] = snaps;
    o.manifest.results = results;
    o.finish();
    return kExitOk;
}

inline std::vector<Complex> aligned_projection(const TrajectorySeries& tr, const Params& prm, int M)
{
    auto z = rotate_align(stereo_project(tr), M, prm.rotate == "cw");
    if (on(prm.conjugate))
        for (auto& v : z)
            v = std::conj(v);
    return z;
}

inline int cmd_trajectory(const Params& prm, std::ostream& out)
{
    const auto cfg = make_config(prm);
    const TimeGrid g = time_grid(prm, cfg, cfg.time_period(), {});
    Json pj = evolution_params(prm, cfg, g);
    pj["rotate"] = prm.rotate;
    pj["conjugate"] = prm.conjugate;
    pj["compare"] = prm.compare;
    pj["K"] = prm.K;
    Output o = open_output(prm, pj);

    EvolveRequest req;
    req.n_per_side = prm.Ngrid;
    req.Nt = g.Nt;
    req.t_end = g.tend;
    req.options = evolution_options(prm);
    req.record_stride = prm.stride;
    const auto res = evolve(cfg, req);
    o.series("trajectory.csv", trajectory_file(res, cfg));
    trajectory_plots(o, res, cfg);

    const auto tr = trajectory_series(res, cfg);
    const auto ch = trajectory_components(tr);
    Json results;
    try {
        const auto fit = linear_fit(tr.times, ch.nu);
        results["nu_slope"] = fit.slope;
        out << "nu(t) slope = " << fmt(fit.slope) << "\n";
    } catch (const DegenerateFitError&) {
        results["nu_slope"] = nullptr;
    }
    try {
        const auto z = aligned_projection(tr, prm, cfg.M);
        std::vector<double> re, im;
        for (const auto& v : z) {
            re.push_back(v.real());
            im.push_back(v.imag());
        }
        o.series("stereo.csv", make_series({"t", "re", "im"}, {tr.times, re, im}));
        std::vector<PlotChannel> plot{{"z_M", re, im, MarkStyle::line, "#1f4e9c"}};
        if (on(prm.compare)) {
            // phi_M lives on [0, 1]; the run must cover t in [0, 2 pi] on a uniform record
            if (std::abs(g.tend - kTwoPi) > 1e-12)
                throw ParamError("compare", "needs tend = 2pi");
            const std::size_t Lsteps = static_cast<std::size_t>(g.Nt / static_cast<long long>(prm.stride));
            if (static_cast<long long>(Lsteps) * static_cast<long long>(prm.stride) != g.Nt)
                throw ParamError("stride", "must divide Nt when --compare is on");
            RiemannParams rp{RiemannVariant::phi_M, 1, 1, cfg.M};
            const auto phi = riemann_phi_grid(rp, static_cast<std::size_t>(prm.K), Lsteps, Lsteps + 1);
            const auto fit = affine_fit(z, phi);
            results["phi_M_lambda"] = fit.lambda;
            results["phi_M_abs_error"] = fit.abs_err;
            results["phi_M_rel_error"] = fit.rel_err;
            out << "affine fit against phi_M: lambda = " << fmt(fit.lambda) << ", abs error = " << fmt(fit.abs_err)
                << ", rel error = " << fmt(fit.rel_err) << "\n";
            std::vector<double> fr, fi;
            for (const auto& v : z) {
                const Complex w = fit.lambda * v + fit.mu;
                fr.push_back(w.real());
                fi.push_back(w.imag());
            }
            std::vector<double> pr, pi;
            for (const auto& v : phi) {
                pr.push_back(v.real());
                pi.push_back(v.imag());
            }
            plot = {{"phi_M", pr, pi, MarkStyle::line, "#c0392b"}, {"lambda z_M + mu", fr, fi, MarkStyle::line, "#1f4e9c"}};
        }
        o.svg("stereo.svg", plot, {"stereographic projection", "Re", "Im", 720, 480, true});
    } catch (const ProjectionPoleError& e) {
        results["stereo_note"] = e.what();
    }
    o.manifest.results = results;
    o.finish();
    return kExitOk;
}

inline int cmd_fingerprint(const Params& prm, std::ostream& out)
{
    const auto cfg = make_config(prm);
    if (!cfg.theta0_pi)
        throw ParamError("theta0", "fingerprint needs theta0 as an exact fraction c/dpi");
    if (!(prm.periods >= 1.0) || prm.periods != std::floor(prm.periods))
        throw ParamError("periods", "must be a whole number >= 1");
    if (prm.nmax < 1)
        throw ParamError("nmax", "must be >= 1");
    static const std::set<std::string> channels{"X3tilde", "R", "X1", "X2", "X3"};
    if (!channels.count(prm.channel))
        throw ParamError("channel", "unknown channel '" + prm.channel + "'");
    const double P = trajectory_period(cfg);
    Params p2 = prm;
    if (!p2.tend)
        p2.tend = prm.periods * P;
    const TimeGrid g = time_grid(p2, cfg, *p2.tend, {});
    Json pj = evolution_params(p2, cfg, g);
    pj["channel"] = prm.channel;
    pj["nmax"] = prm.nmax;
    pj["periods"] = prm.periods;
    Output o = open_output(prm, pj);

    EvolveRequest req;
    req.n_per_side = prm.Ngrid;
    req.Nt = g.Nt;
    req.t_end = g.tend;
    req.options = evolution_options(prm);
    req.record_stride = prm.stride;
    const auto res = evolve(cfg, req);
    o.series("trajectory.csv", trajectory_file(res, cfg));

    const auto tr = trajectory_series(res, cfg);
    const auto ch = trajectory_components(tr);
    std::vector<double> x;
    if (prm.channel == "X3tilde")
        x = ch.X3tilde;
    else if (prm.channel == "R")
        x = ch.R;
    else
        for (const auto& pt : tr.points)
            x.push_back(prm.channel == "X1" ? pt.x() : prm.channel == "X2" ? pt.y() : pt.z());
    const auto fp = fingerprint(std::span<const double>(x), tr.times, P, prm.nmax, prm.channel);
    const auto set = frequency_set_cd(cfg.theta0_pi->num, cfg.theta0_pi->den, prm.nmax);

    std::vector<double> n, re, im, ab, mem, sn, sa;
    for (std::size_t i = 0; i < fp.indices.size(); ++i) {
        const int k = fp.indices[i];
        n.push_back(k);
        re.push_back(fp.values[i].real());
        im.push_back(fp.values[i].imag());
        ab.push_back(std::abs(fp.values[i]));
        mem.push_back(set.contains(k) ? 1.0 : 0.0);
        if (set.contains(k)) {
            sn.push_back(k);
            sa.push_back(ab.back());
        }
    }
    SeriesFile sf = make_series({"n", "re", "im", "abs", "member"}, {n, re, im, ab, mem});
    sf.metadata = {{"period", format_double(P)}, {"channel", prm.channel}, {"scaling", fp.scaling}};
    o.series("fingerprint.csv", sf);
    std::vector<PlotChannel> plot{{"|n b_n|", n, ab, MarkStyle::dots, "#555555"}};
    if (!sn.empty())
        plot.push_back({"members of A_cd", sn, sa, MarkStyle::stars, "#c0392b"});
    o.svg("fingerprint.svg", plot, {"fingerprint of " + prm.channel, "n", "|n b_n|"});

    const auto dom = dominant_indices(fp, 10);
    Json dj = Json::array();
    out << "period = " << fmt(P) << "\n";
    for (int k : dom) {
        dj.push_back({{"n", k}, {"abs", std::abs(fp.value(k))}, {"member", set.contains(k)}});
        out << "n = " << k << "  |n b_n| = " << fmt(std::abs(fp.value(k))) << (set.contains(k) ? "  (in A_cd)" : "")
            << "\n";
    }
    o.manifest.results = {{"period", P}, {"dominant", dj}};
    o.finish();
    return kExitOk;
}

inline int cmd_riemann(const Params& prm, std::ostream& out)
{
    static const std::map<std::string, RiemannVariant> variants{{"classic", RiemannVariant::classic},
                                                                {"phi", RiemannVariant::phi},
                                                                {"phi_cd", RiemannVariant::phi_cd},
                                                                {"phi_M", RiemannVariant::phi_M}};
    const auto it = variants.find(prm.variant);
    if (it == variants.end())
        throw ParamError("variant", "unknown variant '" + prm.variant + "'");
    if (prm.K < 1)
        throw ParamError("K", "must be >= 1");
    if (prm.samples < 2)
        throw ParamError("samples", "must be >= 2");
    RiemannParams rp{it->second, prm.c, prm.d, prm.M};
    if (rp.variant == RiemannVariant::phi_cd && (prm.d < 1 || prm.c < 0 || std::gcd(prm.c, prm.d) != 1))
        throw ParamError("c/d", "need gcd(c, d) = 1 with d >= 1");
    if (rp.variant == RiemannVariant::phi_M && prm.M < 3)
        throw ParamError("M", "must be >= 3");
    Json pj{{"variant", prm.variant}, {"K", prm.K}, {"samples", prm.samples}, {"c", prm.c}, {"d", prm.d}, {"M", prm.M}};
    Output o = open_output(prm, pj);
    const double tau = (rp.variant == RiemannVariant::classic || rp.variant == RiemannVariant::phi) ? 2.0 : 1.0;
    const auto L = static_cast<std::size_t>(prm.samples);
    const auto vals = riemann_phi_grid(rp, static_cast<std::size_t>(prm.K), L, L + 1);
    std::vector<double> t, re, im;
    for (std::size_t j = 0; j <= L; ++j) {
        t.push_back(tau * static_cast<double>(j) / static_cast<double>(L));
        re.push_back(vals[j].real());
        im.push_back(vals[j].imag());
    }
    o.series("riemann.csv", make_series({"t", "re", "im"}, {t, re, im}));
    if (rp.variant == RiemannVariant::classic)
        o.svg("riemann.svg", {{prm.variant, t, re, MarkStyle::line, "#1f4e9c"}}, {"Riemann series", "t", "value"});
    else
        o.svg("riemann.svg", {{prm.variant, re, im, MarkStyle::line, "#1f4e9c"}},
              {"Riemann series", "Re", "Im", 720, 480, true});
    out << "wrote " << (L + 1) << " samples over [0, " << fmt(tau) << "]\n";
    o.manifest.results = {{"value_at_0", {vals[0].real(), vals[0].imag()}}};
    o.finish();
    return kExitOk;
}

inline int cmd_onecorner(const Params& prm, std::ostream& out)
{
    if (prm.table1) {
        const auto cfg = make_config(prm);
        Json pj = params_json(prm, &cfg);
        pj["table1"] = true;
        Output o = open_output(prm, pj);
        const auto rows = curvature_table(cfg, kCurvatureTableQ);
        std::vector<double> qs, ap, er;
        Json rj = Json::array();
        out << "q        approximation     |c_theta0 - approximation|\n";
        for (const auto& r : rows) {
            char line[128];
            std::snprintf(line, sizeof line, "%-8lld %.10f  %.7e\n", r.q, r.approx, r.error);
            out << line;
            qs.push_back(static_cast<double>(r.q));
            ap.push_back(r.approx);
            er.push_back(r.error);
            rj.push_back({{"q", r.q}, {"approx", r.approx}, {"error", r.error}});
        }
        o.series("table1.csv", make_series({"q", "approx", "error"}, {qs, ap, er}));
        o.manifest.results = {{"c_theta0", cfg.c_theta0}, {"rows", rj}};
        o.finish();
        return kExitOk;
    }
    if (!(prm.c0 > 0.0))
        throw ParamError("c0", "must be positive");
    if (!(prm.S > 0.0))
        throw ParamError("S", "must be positive");
    if (!(prm.ds > 0.0) || prm.ds > prm.S)
        throw ParamError("ds", "must lie in (0, S]");
    Json pj{{"c0", prm.c0}, {"S", prm.S}, {"ds", prm.ds}};
    Output o = open_output(prm, pj);
    const auto sol = selfsimilar_frame(prm.c0, 1.0, prm.S, prm.ds);
    std::vector<double> t1, t2, t3, x1, x2, x3;
    for (std::size_t i = 0; i < sol.s.size(); ++i) {
        t1.push_back(sol.frames[i].T.x());
        t2.push_back(sol.frames[i].T.y());
        t3.push_back(sol.frames[i].T.z());
        x1.push_back(sol.curve[i].x());
        x2.push_back(sol.curve[i].y());
        x3.push_back(sol.curve[i].z());
    }
    o.series("profile.csv", make_series({"s", "T1", "T2", "T3", "X1", "X2", "X3"}, {sol.s, t1, t2, t3, x1, x2, x3}));
    o.svg("profile.svg", {{"G(s)", x1, x3, MarkStyle::line, "#1f4e9c"}}, {"self-similar profile", "X1", "X3", 720, 480, true});
    Json results;
    const double expected = std::exp(-kPi * prm.c0 * prm.c0 / 2.0);
    results["A1_expected"] = expected;
    try {
        const auto asym = asymptotes(sol);
        results["A1"] = asym.symmetric();
        results["A1_abs_error"] = std::abs(asym.symmetric() - expected);
        results["corner_angle"] = asym.angle();
        out << "A1 = " << fmt(asym.symmetric()) << ", exp(-pi c0^2/2) = " << fmt(expected) << "\n";
    } catch (const InsufficientDomainError& e) {
        results["A1_note"] = e.what();
        results["required_S"] = e.required_extent();
        out << e.what() << " (increase S to about " << fmt(e.required_extent()) << ")\n";
    }
    o.manifest.results = results;
    o.finish();
    return kExitOk;
}

inline int run_parsed(const Params& prm, std::ostream& out, std::ostream& err);

inline int cmd_sweep(const Params& prm, std::ostream& out, std::ostream& err)
{
    if (prm.Ms.empty())
        throw ParamError("Ms", "need at least one value");
    std::vector<double> bs = prm.bs;
    if (bs.empty()) {
        if (!prm.b)
            throw ParamError("bs", "need --bs or --b");
        bs.push_back(*prm.b);
    }
    for (int M : prm.Ms)
        if (M < 3)
            throw ParamError("Ms", "every M must be >= 3 (got " + std::to_string(M) + ")");
    for (double b : bs)
        if (!(b >= 0.0 && b < 1.0))
            throw ParamError("bs", "every b must lie in [0, 1) (got " + format_double(b) + ")");
    if (prm.jobs < 0)
        throw ParamError("jobs", "must be >= 0");

    std::vector<Params> runs;
    for (int M : prm.Ms)
        for (double b : bs) {
            Params r = prm;
            r.command = "evolve";
            r.M = M;
            r.b = b;
            r.theta0.reset();
            char name[64];
            std::snprintf(name, sizeof name, "M%d_b%.6g", M, b);
            r.out = (fs::path(prm.out) / name).string();
            runs.push_back(r);
        }
    // validate everything before starting work
    for (const auto& r : runs) {
        const auto cfg = make_config(r);
        std::vector<double> ts;
        for (const auto& [p, q] : rational_pairs(r))
            ts.push_back(cfg.time_period() * static_cast<double>(p) / static_cast<double>(q));
        time_grid(r, cfg, cfg.time_period(), ts);
    }
    std::error_code ec;
    fs::create_directories(prm.out, ec);
    if (ec)
        throw IoError("cannot create output directory '" + prm.out + "': " + ec.message());

    const std::size_t jobs = prm.jobs > 0 ? static_cast<std::size_t>(prm.jobs)
                                          : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::vector<int> codes(runs.size(), kExitFailure);
    std::vector<std::string> logs(runs.size()), errs(runs.size());
    for (std::size_t first = 0; first < runs.size(); first += jobs) {
        std::vector<std::future<void>> batch;
        for (std::size_t i = first; i < std::min(runs.size(), first + jobs); ++i)
            batch.push_back(std::async(std::launch::async, [&, i] {
                std::ostringstream o, e;
                codes[i] = run_parsed(runs[i], o, e);
                logs[i] = o.str();
                errs[i] = e.str();
            }));
        for (auto& f : batch)
            f.get();
    }

    Json pj{{"Ms", prm.Ms}, {"bs", bs}, {"Ngrid", prm.Ngrid}, {"p", prm.p}, {"q", prm.q}, {"renorm", prm.renorm},
            {"dealias", prm.dealias}, {"stride", prm.stride}};
    if (prm.Nt)
        pj["Nt"] = *prm.Nt;
    if (prm.tend)
        pj["tend"] = *prm.tend;
    RunManifest m;
    m.command = "sweep";
    m.parameters = pj;
    Json rj = Json::array();
    int worst = kExitOk;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::string rel = fs::path(runs[i].out).filename().string();
        out << "[" << rel << "]\n" << logs[i];
        err << errs[i];
        rj.push_back({{"dir", rel}, {"exit", codes[i]}});
        if (codes[i] == kExitOk)
            m.artifacts.push_back({rel + "/manifest.json", sha256_file(fs::path(runs[i].out) / "manifest.json")});
        worst = std::max(worst, codes[i]);
    }
    m.results = {{"runs", rj}};
    write_manifest(m, fs::path(prm.out) / "manifest.json");
    return worst;
}

/// Runs one parsed command, mapping errors to exit codes.
inline int run_parsed(const Params& prm, std::ostream& out, std::ostream& err)
{
    try {
        if (prm.command == "angles")
            return cmd_angles(prm, out);
        if (prm.command == "algebraic")
            return cmd_algebraic(prm, out);
        if (prm.command == "evolve")
            return cmd_evolve(prm, out);
        if (prm.command == "trajectory")
            return cmd_trajectory(prm, out);
        if (prm.command == "fingerprint")
            return cmd_fingerprint(prm, out);
        if (prm.command == "riemann")
            return cmd_riemann(prm, out);
        if (prm.command == "onecorner")
            return cmd_onecorner(prm, out);
        if (prm.command == "sweep")
            return cmd_sweep(prm, out, err);
        err << "unknown command '" << prm.command << "'\n" << usage_text();
        return kExitUsage;
    } catch (const ParamError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

namespace detail {

// Flags that take a list of values.
inline bool list_key(const std::string& k) { return k == "p" || k == "q" || k == "Ms" || k == "bs"; }

inline void add_options(CLI::App& app, Params& prm)
{
    const auto onoff = CLI::IsMember({"on", "off"});
    app.add_option("--M", prm.M, "number of sides");
    app.add_option("--b", prm.b, "vertical tangent component in [0, 1)");
    app.add_option("--theta0", prm.theta0, "torsion angle as c/dpi or radians");
    app.add_option("--Ngrid", prm.Ngrid, "grid points per side (N/M)");
    app.add_option("--Nt", prm.Nt, "number of time steps");
    app.add_option("--tend", prm.tend, "final time");
    app.add_option("--p", prm.p, "rational time numerators")->delimiter(',');
    app.add_option("--q", prm.q, "rational time denominators")->delimiter(',');
    app.add_option("--renorm", prm.renorm, "project T onto the sphere after each step")->check(onoff);
    app.add_option("--dealias", prm.dealias, "2/3-rule filter after each step")->check(onoff);
    app.add_option("--out", prm.out, "output directory");
    app.add_option("--stride", prm.stride, "record every n-th step of the trajectory")->check(CLI::PositiveNumber);
    app.add_option("--channel", prm.channel, "fingerprint channel: X3tilde, R, X1, X2, X3");
    app.add_option("--nmax", prm.nmax, "largest fingerprint index");
    app.add_option("--periods", prm.periods, "trajectory periods covered by the fingerprint");
    app.add_option("--rotate", prm.rotate, "rotation of the projected trajectory")->check(CLI::IsMember({"cw", "ccw"}));
    app.add_option("--conjugate", prm.conjugate, "complex-conjugate the projected trajectory")->check(onoff);
    app.add_option("--compare", prm.compare, "affine fit of the projection against phi_M")->check(onoff);
    app.add_option("--variant", prm.variant, "classic, phi, phi_cd or phi_M");
    app.add_option("--K", prm.K, "number of series terms");
    app.add_option("--samples", prm.samples, "samples per base period");
    app.add_option("--c", prm.c, "numerator c of phi_cd");
    app.add_option("--d", prm.d, "denominator d of phi_cd");
    app.add_flag("--table1", prm.table1, "print the curvature table");
    app.add_option("--c0", prm.c0, "curvature constant of the one-corner solution");
    app.add_option("--S", prm.S, "half-width of the profile domain");
    app.add_option("--ds", prm.ds, "profile step");
    app.add_option("--Ms", prm.Ms, "sweep values of M")->delimiter(',');
    app.add_option("--bs", prm.bs, "sweep values of b")->delimiter(',');
    app.add_option("--jobs", prm.jobs, "concurrent runs (0 = hardware threads)");
}

} // namespace detail

/// Full entry point. `args` excludes the program name.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (args.empty() || args.front() == "--help" || args.front() == "-h") {
        (args.empty() ? err : out) << usage_text();
        return args.empty() ? kExitUsage : kExitOk;
    }
    const std::string command = args.front();
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        err << "unknown command '" << command << "'\n" << usage_text();
        return kExitUsage;
    }

    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::string config_path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        std::string tok = rest[i];
        if (tok.rfind("--", 0) != 0)
            continue;
        std::string key = tok.substr(2);
        std::optional<std::string> inline_val;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            inline_val = key.substr(eq + 1);
            key.erase(eq);
        }
        if (key == "config") {
            if (inline_val)
                config_path = *inline_val;
            else if (i + 1 < rest.size())
                config_path = rest[i + 1];
            else {
                err << "invalid configuration: config: missing file name\n";
                return kExitConfig;
            }
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i), rest.begin() +
                                                                        static_cast<std::ptrdiff_t>(i + (inline_val ? 1 : 2)));
            --i;
            continue;
        }
        given.insert(key);
    }

    Params prm;
    prm.command = command;
    CLI::App app{"vfe " + command, "vfe " + command};
    detail::add_options(app, prm);

    std::vector<std::string> tokens;
    if (!config_path.empty()) {
        std::map<std::string, std::vector<std::string>> kv;
        try {
            kv = load_config(config_path);
        } catch (const ParamError& e) {
            err << "invalid configuration: " << e.what() << "\n";
            return kExitConfig;
        }
        const bool torsion_on_cli = given.count("b") || given.count("theta0");
        for (const auto& [key, vals] : kv) {
            if (!app.get_option_no_throw("--" + key)) {
                err << "invalid configuration: " << key << ": unknown key in " << config_path << "\n";
                return kExitConfig;
            }
            if (given.count(key) || ((key == "b" || key == "theta0") && torsion_on_cli) || vals.empty())
                continue;
            if (key == "table1") {
                if (on(vals.front()) || vals.front() == "true" || vals.front() == "1")
                    tokens.push_back("--table1");
                continue;
            }
            tokens.push_back("--" + key);
            if (detail::list_key(key))
                tokens.insert(tokens.end(), vals.begin(), vals.end());
            else
                tokens.push_back(vals.front());
        }
    }
    tokens.insert(tokens.end(), rest.begin(), rest.end());
    std::reverse(tokens.begin(), tokens.end());
    try {
        app.parse(tokens);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ConversionError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CLI::ValidationError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << usage_text();
        return kExitUsage;
    }
    return run_parsed(prm, out, err);
}

} // namespace vfe::cli
