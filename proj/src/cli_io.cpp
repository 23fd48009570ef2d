#include "sdot/cli_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace sdot {

namespace {

using Json = nlohmann::json;

void write_canonical(const Json& j, std::string& out) {
    switch (j.type()) {
        case Json::value_t::null: out += "null"; break;
        case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
        case Json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
        case Json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) {
                out += "null";
                break;
            }
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += buf;
            break;
        }
        case Json::value_t::string: out += j.dump(); break;
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ',';
                first = false;
                write_canonical(e, out);
            }
            out += ']';
            break;
        }
        case Json::value_t::object: {
            // nlohmann objects are std::map backed, so iteration is key-sorted.
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += Json(it.key()).dump();
                out += ':';
                write_canonical(it.value(), out);
            }
            out += '}';
            break;
        }
        default: fail(ErrorKind::data, "binary or discarded JSON values have no canonical form");
    }
}

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
    fail(ErrorKind::config, path + ": " + what);
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) config_fail(where.empty() ? "config" : where, "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(ErrorKind::config, "unknown key \"" + it.key() + "\" at " + (where.empty() ? it.key() : where + "." + it.key()));
}

double get_number(const Json& j, const std::string& key, const std::string& path, double def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_number()) config_fail(path + key, "must be a number");
    return j[key].get<double>();
}

long long get_integer(const Json& j, const std::string& key, const std::string& path, long long def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_number_integer()) config_fail(path + key, "must be an integer");
    return j[key].get<long long>();
}

bool get_bool(const Json& j, const std::string& key, const std::string& path, bool def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_boolean()) config_fail(path + key, "must be a boolean");
    return j[key].get<bool>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& path, const std::string& def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_string()) config_fail(path + key, "must be a string");
    return j[key].get<std::string>();
}

std::vector<double> get_list(const Json& j, const std::string& key, const std::string& path, const std::vector<double>& def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_array()) config_fail(path + key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : j[key]) {
        if (!e.is_number()) config_fail(path + key, "must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

// Sub-parsers report their own local names; prefix the field path.
template <class F>
auto nested(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::config) throw;
        fail(ErrorKind::config, path + ": " + e.what());
    }
}

bool sorted_positive(const std::vector<double>& v) {
    return std::is_sorted(v.begin(), v.end()) && std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

void validate(const ScenarioConfig& c) {
    if (c.n < 1) config_fail("n", "must be at least 1");
    if (!(c.tol > 0.0)) config_fail("tol", "must be positive");
    if (c.lloyd_steps < 0) config_fail("lloyd_steps", "must be nonnegative");
    const ProbeConfig& p = c.probe;
    if (!(p.h0 > 0.0 && p.h0 <= 0.25)) config_fail("probe.h0", "must lie in (0, 0.25]");
    if (!(p.K >= 1.0)) config_fail("probe.K", "must be at least 1");
    if (!(p.tau > 0.0 && p.tau < 0.5)) config_fail("probe.tau", "must lie in (0, 1/2)");
    if (!(p.eps > 0.0 && p.eps < 0.25)) config_fail("probe.eps", "must lie in (0, 1/4)");
    if (p.radii.size() < 3 || !sorted_positive(p.radii)) config_fail("probe.radii", "needs at least 3 sorted positive radii");
    if (p.boundary_points < 1) config_fail("probe.boundary_points", "must be at least 1");
    if (p.k_max < 1) config_fail("probe.k_max", "must be at least 1");
    if (p.p.empty() || std::any_of(p.p.begin(), p.p.end(), [](double x) { return !(x >= 1.0); }))
        config_fail("probe.p", "needs exponents >= 1");
    if (!(p.grid_h >= 0.0)) config_fail("probe.grid_h", "must be nonnegative");
    if (!(p.hessian_h > 0.0)) config_fail("probe.hessian_h", "must be positive");
    if (!(c.mass_fraction > 0.0 && c.mass_fraction <= 1.0)) config_fail("mass_fraction", "must lie in (0, 1]");
    if (!(c.barrier_mesh > 0.0)) config_fail("barrier_mesh", "must be positive");
    if (c.barrier_heights.empty() || std::any_of(c.barrier_heights.begin(), c.barrier_heights.end(), [](double h) { return !(h > 0.0); }))
        config_fail("barrier_heights", "needs positive heights");
    if (c.kind == ScenarioKind::delta_sweep) {
        if (c.deltas.empty() || !std::is_sorted(c.deltas.begin(), c.deltas.end())) config_fail("deltas", "must be a nonempty sorted list");
        if (c.deltas.front() < 0.0) config_fail("deltas", "must be nonnegative");
    }
    if (c.kind == ScenarioKind::two_component || c.kind == ScenarioKind::partial_transport)
        if (c.separations.empty() || !sorted_positive(c.separations)) config_fail("separations", "must be a nonempty sorted positive list");
}

}  // namespace

std::string canonical_json(const nlohmann::json& j) {
    std::string out;
    write_canonical(j, out);
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) fail(ErrorKind::io, "SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"name", "kind", "source", "target", "source_perturbation", "source_density", "target_density", "n", "seed",
                         "lloyd_steps", "tol", "deltas", "separations", "mass_fraction", "symmetric", "scale_target_to_source_area",
                         "barrier_heights", "barrier_mesh", "probe", "output_dir"},
                        "");
    ScenarioConfig c;
    c.name = get_string(j, "name", "", c.name);
    c.kind = nested("kind", [&] { return scenario_kind_from_string(get_string(j, "kind", "", to_string(c.kind))); });
    if (j.contains("source")) c.source = nested("source", [&] { return shape_from_json(j["source"]); });
    if (j.contains("target")) c.target = nested("target", [&] { return shape_from_json(j["target"]); });
    if (j.contains("source_perturbation") && !j["source_perturbation"].is_null())
        c.source_perturbation = nested("source_perturbation", [&] { return perturbation_from_json(j["source_perturbation"]); });
    if (j.contains("source_density")) c.source_density = nested("source_density", [&] { return density_from_json(j["source_density"]); });
    if (j.contains("target_density")) c.target_density = nested("target_density", [&] { return density_from_json(j["target_density"]); });
    const long long n = get_integer(j, "n", "", static_cast<long long>(c.n));
    if (n < 1) config_fail("n", "must be at least 1");
    c.n = static_cast<std::size_t>(n);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
            config_fail("seed", "must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    c.lloyd_steps = static_cast<int>(get_integer(j, "lloyd_steps", "", c.lloyd_steps));
    c.tol = get_number(j, "tol", "", c.tol);
    c.deltas = get_list(j, "deltas", "", c.deltas);
    c.separations = get_list(j, "separations", "", c.separations);
    c.mass_fraction = get_number(j, "mass_fraction", "", c.mass_fraction);
    c.symmetric = get_bool(j, "symmetric", "", c.symmetric);
    c.scale_target_to_source_area = get_bool(j, "scale_target_to_source_area", "", c.scale_target_to_source_area);
    c.barrier_heights = get_list(j, "barrier_heights", "", c.barrier_heights);
    c.barrier_mesh = get_number(j, "barrier_mesh", "", c.barrier_mesh);
    c.output_dir = get_string(j, "output_dir", "", c.output_dir);
    if (j.contains("probe")) {
        const Json& p = j["probe"];
        reject_unknown_keys(p, {"h0", "K", "tau", "eps", "radii", "boundary_points", "k_max", "p", "grid_h", "hessian_h"}, "probe");
        ProbeConfig& pc = c.probe;
        pc.h0 = get_number(p, "h0", "probe.", pc.h0);
        pc.K = get_number(p, "K", "probe.", pc.K);
        pc.tau = get_number(p, "tau", "probe.", pc.tau);
        pc.eps = get_number(p, "eps", "probe.", pc.eps);
        pc.radii = get_list(p, "radii", "probe.", pc.radii);
        pc.boundary_points = static_cast<int>(get_integer(p, "boundary_points", "probe.", pc.boundary_points));
        pc.k_max = static_cast<int>(get_integer(p, "k_max", "probe.", pc.k_max));
        pc.p = get_list(p, "p", "probe.", pc.p);
        pc.grid_h = get_number(p, "grid_h", "probe.", pc.grid_h);
        pc.hessian_h = get_number(p, "hessian_h", "probe.", pc.hessian_h);
    }
    validate(c);
    return c;
}

namespace {

Json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::config, path.string() + ": " + e.what());
    }
}

}  // namespace

ScenarioConfig parse_config(const std::filesystem::path& path) {
    return config_from_json(parse_json_file(path));
}

nlohmann::json to_json(const ScenarioConfig& c) {
    const ProbeConfig& p = c.probe;
    return {{"name", c.name},
            {"kind", to_string(c.kind)},
            {"source", to_json(c.source)},
            {"target", to_json(c.target)},
            {"source_perturbation", c.source_perturbation ? to_json(*c.source_perturbation) : Json(nullptr)},
            {"source_density", to_json(c.source_density)},
            {"target_density", to_json(c.target_density)},
            {"n", c.n},
            {"seed", c.seed},
            {"lloyd_steps", c.lloyd_steps},
            {"tol", c.tol},
            {"deltas", c.deltas},
            {"separations", c.separations},
            {"mass_fraction", c.mass_fraction},
            {"symmetric", c.symmetric},
            {"scale_target_to_source_area", c.scale_target_to_source_area},
            {"barrier_heights", c.barrier_heights},
            {"barrier_mesh", c.barrier_mesh},
            {"probe",
             {{"h0", p.h0},
              {"K", p.K},
              {"tau", p.tau},
              {"eps", p.eps},
              {"radii", p.radii},
              {"boundary_points", p.boundary_points},
              {"k_max", p.k_max},
              {"p", p.p},
              {"grid_h", p.grid_h},
              {"hessian_h", p.hessian_h}}},
            {"output_dir", c.output_dir}};
}

MaConfig ma_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"name", "region", "boundary", "h_mesh", "method", "tol", "max_iter", "output_dir"}, "");
    MaConfig c;
    c.name = get_string(j, "name", "", c.name);
    if (j.contains("region")) c.region = nested("region", [&] { return shape_from_json(j["region"]); });
    const std::vector<double> g = get_list(j, "boundary", "", {c.boundary.begin(), c.boundary.end()});
    if (g.size() != 6) config_fail("boundary", "needs 6 coefficients (1, x, y, x^2, xy, y^2)");
    std::copy(g.begin(), g.end(), c.boundary.begin());
    c.h_mesh = get_number(j, "h_mesh", "", c.h_mesh);
    if (!(c.h_mesh > 0.0)) config_fail("h_mesh", "must be positive");
    const std::string method = get_string(j, "method", "", "newton");
    if (method == "newton")
        c.method = MaMethod::newton;
    else if (method == "sweeps")
        c.method = MaMethod::sweeps;
    else
        config_fail("method", "must be newton or sweeps");
    c.tol = get_number(j, "tol", "", c.tol);
    if (!(c.tol > 0.0)) config_fail("tol", "must be positive");
    c.max_iter = static_cast<int>(get_integer(j, "max_iter", "", c.max_iter));
    if (c.max_iter < 1) config_fail("max_iter", "must be at least 1");
    c.output_dir = get_string(j, "output_dir", "", c.output_dir);
    return c;
}

nlohmann::json to_json(const MaConfig& c) {
    return {{"name", c.name}, {"region", to_json(c.region)}, {"boundary", c.boundary}, {"h_mesh", c.h_mesh},
            {"method", c.method == MaMethod::newton ? "newton" : "sweeps"}, {"tol", c.tol}, {"max_iter", c.max_iter},
            {"output_dir", c.output_dir}};
}

MaConfig parse_ma_config(const std::filesystem::path& path) { return ma_config_from_json(parse_json_file(path)); }

RegularityReport run_ma_dirichlet(const MaConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Polygon region = make_domain(c.region).boundary;
    const auto g = c.boundary;
    const BoundaryData data = [g](const Vec2& x) {
        return g[0] + g[1] * x.x + g[2] * x.y + g[3] * x.x * x.x + g[4] * x.x * x.y + g[5] * x.y * x.y;
    };
    MaOptions opt;
    opt.tol = c.tol;
    opt.max_iter = c.max_iter;
    opt.method = c.method;
    const MaSolution sol = op_solve(region, data, c.h_mesh, opt);
    RegularityReport rep;
    Json& b = rep.body;
    b["nodes"] = sol.w.size();
    b["interior_nodes"] = sol.w.interior();
    b["iterations"] = sol.report.iterations;
    b["damping_events"] = sol.report.damping_events;
    b["final_residual"] = sol.report.final_residual;
    b["history"] = sol.report.history;
    b["convex_position_error"] = sol.w.convex_position_error();
    // Hessian of g is [[2 c3, c4], [c4, 2 c5]].
    const double det = 4.0 * g[3] * g[5] - g[4] * g[4];
    if (std::abs(det - 1.0) <= 1e-12 && g[3] > 0.0) {
        double err = 0.0;
        for (std::size_t k = 0; k < sol.w.interior(); ++k) err = std::max(err, std::abs(sol.w.values()[k] - data(sol.w.nodes()[k])));
        b["exact_nodal_error"] = err;
    }
    std::string csv = "x,y,value,measure,target\n";
    char buf[160];
    for (std::size_t k = 0; k < sol.w.size(); ++k) {
        const Vec2& x = sol.w.nodes()[k];
        const bool inner = k < sol.w.interior();
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", x.x, x.y, sol.w.values()[k],
                      inner ? sol.measures[k] : 0.0, inner ? sol.targets[k] : 0.0);
        csv += buf;
    }
    rep.artifacts["nodes.csv"] = csv;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

nlohmann::json to_json(const RunManifest& m) {
    Json files = Json::array();
    for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return {{"config", m.config}, {"config_hash", m.config_hash}, {"seeds", m.seeds},
            {"version", m.version}, {"wall_times", m.wall_times}, {"files", files}};
}

std::map<std::string, std::uint64_t> seed_registry(std::uint64_t seed) {
    return {{"target_sampling", seed}, {"pushforward_audit", seed + 1}, {"monotonicity_audit", seed + 2},
            {"comparison_gap", seed + 3}, {"second_component_sampling", seed + 7}};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

RunManifest write_outputs(const std::vector<RegularityReport>& reports, const nlohmann::json& config,
                          const std::map<std::string, std::uint64_t>& seeds, const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / "run_manifest.json";
    std::error_code ec;
    if (fs::exists(manifest_path) && !force)
        fail(ErrorKind::io, dir.string() + " already holds a run; pass --force to overwrite");
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

    RunManifest m;
    m.config = config;
    m.config_hash = sha256_hex(canonical_json(config));
    m.seeds = seeds;
    auto put = [&](const fs::path& rel, const std::string& bytes) {
        const fs::path full = dir / rel;
        if (rel.has_parent_path()) {
            fs::create_directories(dir / rel.parent_path(), ec);
            if (ec) fail(ErrorKind::io, "cannot create " + (dir / rel.parent_path()).string() + ": " + ec.message());
        }
        write_file(full, bytes);
        m.files.push_back({rel.generic_string(), sha256_hex(bytes), bytes.size()});
    };
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const RegularityReport& r = reports[k];
        const bool top = k + 1 == reports.size();
        const fs::path sub = top ? fs::path() : fs::path("entry_" + std::to_string(k));
        put(sub / "report.json", canonical_json(r.body) + "\n");
        for (const auto& [name, bytes] : r.artifacts) put(sub / name, bytes);
        m.wall_times[top ? "report" : sub.string()] = r.wall_time;
    }
    write_file(manifest_path, to_json(m).dump(2) + "\n");
    return m;
}

RunManifest write_outputs(const std::vector<RegularityReport>& reports, const ScenarioConfig& cfg,
                          const std::filesystem::path& dir, bool force) {
    return write_outputs(reports, to_json(cfg), seed_registry(cfg.seed), dir, force);
}

}  // namespace sdot
