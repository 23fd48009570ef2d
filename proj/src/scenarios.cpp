#include "sdot/scenarios.hpp"

#include "sdot/error.hpp"
#include "sdot/ma_dirichlet.hpp"
#include "sdot/power_diagram.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace sdot {

namespace {

using Json = nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json point_json(const Vec2& p) { return Json::array({p.x, p.y}); }

std::string rows_to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
    out += "\n";
    char buf[64];
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", r[k]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

// Points at equal arclength along the boundary, starting at vertex 0.
std::vector<Vec2> boundary_probe_points(const Polygon& poly, int count) {
    std::vector<Vec2> out;
    const double total = perimeter(poly);
    const std::size_t n = poly.size();
    std::size_t e = 0;
    double start = 0.0;
    for (int k = 0; k < count; ++k) {
        const double s = total * k / count;
        while (start + norm(poly[(e + 1) % n] - poly[e]) < s && e + 1 < n) {
            start += norm(poly[(e + 1) % n] - poly[e]);
            ++e;
        }
        const Vec2 a = poly[e], b = poly[(e + 1) % n];
        const double l = norm(b - a);
        out.push_back(a + (b - a) * std::clamp((s - start) / l, 0.0, 1.0));
    }
    return out;
}

std::vector<Vec2> interior_probe_points(const Polygon& poly, double stencil_h) {
    const Vec2 c = centroid(poly);
    const double r = 0.4 * distance_to_boundary(poly, c);
    std::vector<Vec2> out;
    for (const Vec2& p : {c, c + Vec2{r, 0.0}, c - Vec2{r, 0.0}, c + Vec2{0.0, r}, c - Vec2{0.0, r}})
        if (contains(poly, p) && distance_to_boundary(poly, p) > 2.0 * stencil_h) out.push_back(p);
    return out;
}

DiscreteMeasure target_measure(const ScenarioConfig& cfg, const Domain& target, double mass, std::uint64_t seed, std::size_t n) {
    return quantize(cfg.target_density, target, n, seed, cfg.lloyd_steps, mass);
}

struct Solved {
    Domain source;
    DensityField f;
    DiscreteMeasure target;
    SolveResult result;
    std::vector<int> labels;
};

SolveOptions solve_options(const ScenarioConfig& cfg) {
    SolveOptions o;
    o.tol = cfg.tol;
    o.max_iter = 200;
    return o;
}

Solved solve_plain(const ScenarioConfig& cfg, const Domain& source, const DiscreteMeasure& target) {
    Solved s{source, cfg.source_density, target, damped_newton_solve(source, cfg.source_density, target, solve_options(cfg)), {}};
    return s;
}

// Solve report, audits and regularity probes for one converged solve.
RegularityReport probe_report(const ScenarioConfig& cfg, const Solved& s) {
    RegularityReport rep;
    Json& b = rep.body;
    const BrenierPotential& u = s.result.potential;
    const Polygon& src = s.source.boundary;
    const double mass = integrate(s.f, src);
    double sum = 0.0;
    for (double m : s.result.masses) sum += m;
    b["solve"] = {{"n", u.size()},
                  {"iterations", s.result.report.iterations},
                  {"final_residual", s.result.report.final_residual},
                  {"damping_events", s.result.report.damping_events},
                  {"rescaled_start", s.result.report.rescaled_start},
                  {"source_mass", mass},
                  {"max_relative_mass_error", relative_residual(s.result.masses, s.target.masses)},
                  {"mass_sum_relative_error", std::abs(sum - mass) / mass},
                  {"source_delta", s.source.delta}};
    b["audit"] = {{"pushforward_error", pushforward_error(u.sites(), s.target.masses, s.result.masses, 10, cfg.seed + 1)},
                  {"monotonicity_violations", monotonicity_violations(u, 1000, cfg.seed + 2)}};

    const ProbeConfig& pc = cfg.probe;
    const std::vector<Vec2> bpts = boundary_probe_points(src, pc.boundary_points);
    Json holder = Json::array();
    double beta_min = std::numeric_limits<double>::infinity();
    for (const auto& x : bpts) {
        Json j;
        try {
            const HolderFit f = holder_fit(u, x, pc.radii);
            beta_min = std::min(beta_min, f.beta_hat);
            j = to_json(f);
        } catch (const Error& e) {
            // u is affine near x (inactive reservoir region): no exponent.
            if (e.kind() != ErrorKind::data) throw;
            j = {{"beta_hat", nullptr}, {"error", e.what()}};
        }
        j["point"] = point_json(x);
        holder.push_back(j);
    }
    b["holder"] = holder;
    b["beta_min"] = std::isfinite(beta_min) ? Json(beta_min) : Json(nullptr);

    Json hess = Json::array();
    double eig_lo = std::numeric_limits<double>::infinity(), eig_hi = 0.0;
    const ScalarField uf = [&u](const Vec2& x) { return u.value(x); };
    for (const auto& x : interior_probe_points(src, pc.hessian_h)) {
        const HessianEstimate e = hessian_estimate(uf, src, x, pc.hessian_h);
        const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(e.hessian).eigenvalues();
        eig_lo = std::min(eig_lo, ev(0));
        eig_hi = std::max(eig_hi, ev(1));
        hess.push_back({{"point", point_json(x)}, {"eigenvalues", {ev(0), ev(1)}}});
    }
    b["hessian"] = hess;
    b["hessian_eigen_min"] = hess.empty() ? 0.0 : eig_lo;
    b["hessian_eigen_max"] = eig_hi;

    std::vector<double> heights;
    for (int k = 1; k <= pc.k_max; ++k) heights.push_back(std::pow(pc.h0, k));
    const ShapeLadder ladder = good_shape(u, bpts.front(), heights, pc.eps);
    Json ratios = Json::array();
    for (double r : ladder.ratios) ratios.push_back(std::isfinite(r) ? Json(r) : Json(nullptr));
    b["good_shape"] = {{"point", point_json(bpts.front())}, {"heights", ladder.heights}, {"ratios", ratios},
                       {"unbounded", ladder.unbounded}};

    Json traces = Json::array();
    for (std::size_t k = 0; k < bpts.size(); ++k) {
        const IterationTrace t = iterate_sections(u, bpts[k], pc.h0, pc.K, pc.k_max);
        traces.push_back(to_json(t));
        rep.artifacts["trace_" + std::to_string(k) + ".csv"] = t.to_csv();
    }
    b["traces"] = traces;

    const double spacing = std::sqrt(area(src) / static_cast<double>(u.size()));
    const double grid_h = pc.grid_h > 0.0 ? pc.grid_h : 4.0 * spacing;
    try {
        b["w2p"] = to_json(w2p_probe(u, grid_h, pc.p));
    } catch (const Error& e) {
        b["w2p"] = {{"error", e.what()}};
    }

    rep.artifacts["cells.csv"] = cells_to_csv(s.result.diagram);
    if (!s.labels.empty()) {
        const FreeBoundary fb = free_boundary(s.result.diagram, u, s.labels);
        b["free_boundary"] = to_json(fb);
        rep.artifacts["free_boundary.csv"] = fb.to_csv();
    }
    return rep;
}

Domain make_target(const ScenarioConfig& cfg) {
    ShapeSpec t = cfg.target;
    return make_domain(t);
}

std::vector<Vec2> mirrored(const std::vector<Vec2>& pts, double axis_x) {
    std::vector<Vec2> out;
    for (const auto& p : pts) out.push_back({2.0 * axis_x - p.x, p.y});
    return out;
}

void require_sorted(const std::vector<double>& v, const char* what) {
    if (v.empty()) fail(ErrorKind::parameter, std::string(what) + " sweep list is empty");
    if (!std::is_sorted(v.begin(), v.end())) fail(ErrorKind::parameter, std::string(what) + " sweep list must be sorted");
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k] / n;
        my += y[k] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    return sxy / sxx;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::convex_baseline: return "convex_baseline";
        case ScenarioKind::delta_sweep: return "delta_sweep";
        case ScenarioKind::two_component: return "two_component";
        case ScenarioKind::partial_transport: return "partial_transport";
        case ScenarioKind::minimal_lagrangian: return "minimal_lagrangian";
        case ScenarioKind::barrier: return "barrier";
    }
    return "";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
    for (ScenarioKind k : {ScenarioKind::convex_baseline, ScenarioKind::delta_sweep, ScenarioKind::two_component,
                           ScenarioKind::partial_transport, ScenarioKind::minimal_lagrangian, ScenarioKind::barrier})
        if (to_string(k) == s) return k;
    fail(ErrorKind::config, "unknown scenario kind \"" + s + "\"");
}

Domain scenario_source(const ScenarioConfig& cfg) {
    const Domain base = make_domain(cfg.source);
    if (!cfg.source_perturbation || cfg.source_perturbation->amplitude == 0.0) return base;
    return perturb_domain(base, *cfg.source_perturbation);
}

double pushforward_error(const std::vector<Vec2>& sites, const std::vector<double>& target_masses,
                         const std::vector<double>& cell_masses, int count, std::uint64_t seed) {
    Rng rng(seed);
    const BoundingBox bb = bounding_box(sites);
    double total = 0.0;
    for (double m : target_masses) total += m;
    double worst = 0.0;
    for (int k = 0; k < count; ++k) {
        const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Vec2 n{std::cos(th), std::sin(th)};
        const Vec2 q{rng.uniform(bb.lo.x, bb.hi.x), rng.uniform(bb.lo.y, bb.hi.y)};
        double nu = 0.0, mu = 0.0;
        for (std::size_t i = 0; i < sites.size(); ++i)
            if (dot(sites[i] - q, n) >= 0.0) {
                nu += target_masses[i];
                mu += cell_masses[i];
            }
        worst = std::max(worst, std::abs(nu - mu) / total);
    }
    return worst;
}

double monotonicity_violations(const BrenierPotential& u, int pairs, std::uint64_t seed) {
    Rng rng(seed);
    const Polygon& src = u.source().boundary;
    const BoundingBox bb = bounding_box(src);
    auto sample = [&] {
        for (;;) {
            const Vec2 x{rng.uniform(bb.lo.x, bb.hi.x), rng.uniform(bb.lo.y, bb.hi.y)};
            if (contains(src, x)) return x;
        }
    };
    int bad = 0;
    for (int k = 0; k < pairs; ++k) {
        const Vec2 a = sample(), b = sample();
        if (dot(u.map(a) - u.map(b), a - b) < 0.0) ++bad;
    }
    return static_cast<double>(bad) / pairs;
}

PartialSolve solve_partial(const Domain& source, const DensityField& f, const DiscreteMeasure& target, double m,
                           const SolveOptions& options) {
    const double total = integrate(f, source.boundary);
    if (!(m > 0.0) || m > total * (1.0 + 1e-12)) fail(ErrorKind::parameter, "transported mass must lie in (0, source mass]");
    if (std::abs(target.total() - m) > 1e-9 * m) fail(ErrorKind::parameter, "target masses must sum to the transported mass");
    PartialSolve out;
    DiscreteMeasure ext = target;
    if (total - m > 1e-12 * total) {
        for (const auto& y : target.sites)
            if (y == Vec2{0.0, 0.0}) fail(ErrorKind::parameter, "a real target site sits at the reservoir site (0, 0)");
        ext.sites.push_back({0.0, 0.0});
        ext.masses.push_back(total - m);
        out.has_virtual = true;
    }
    out.result = damped_newton_solve(source, f, ext, options);
    out.labels.assign(ext.size(), 0);
    if (out.has_virtual) out.labels.back() = 1;
    return out;
}

RegularityReport run_solve(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const DiscreteMeasure target = target_measure(cfg, make_target(cfg), integrate(cfg.source_density, src.boundary), cfg.seed, cfg.n);
    const Solved s = solve_plain(cfg, src, target);
    RegularityReport rep;
    Json& b = rep.body;
    const double mass = integrate(s.f, src.boundary);
    double sum = 0.0;
    for (double m : s.result.masses) sum += m;
    b["solve"] = {{"n", s.result.potential.size()},
                  {"iterations", s.result.report.iterations},
                  {"final_residual", s.result.report.final_residual},
                  {"damping_events", s.result.report.damping_events},
                  {"rescaled_start", s.result.report.rescaled_start},
                  {"history", s.result.report.history},
                  {"source_mass", mass},
                  {"max_relative_mass_error", relative_residual(s.result.masses, s.target.masses)},
                  {"mass_sum_relative_error", std::abs(sum - mass) / mass}};
    b["audit"] = {{"pushforward_error", pushforward_error(s.result.potential.sites(), s.target.masses, s.result.masses, 10, cfg.seed + 1)},
                  {"monotonicity_violations", monotonicity_violations(s.result.potential, 1000, cfg.seed + 2)}};
    rep.artifacts["potential.json"] = to_json(s.result.potential).dump(2) + "\n";
    rep.artifacts["target.csv"] = measure_to_csv(s.target);
    rep.artifacts["cells.csv"] = cells_to_csv(s.result.diagram);
    rep.wall_time = seconds_since(t0);
    return rep;
}

RegularityReport run_probe(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const DiscreteMeasure target = target_measure(cfg, make_target(cfg), integrate(cfg.source_density, src.boundary), cfg.seed, cfg.n);
    RegularityReport rep = probe_report(cfg, solve_plain(cfg, src, target));
    rep.wall_time = seconds_since(t0);
    return rep;
}

RegularityReport run_convex_baseline(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const Domain tgt = make_target(cfg);
    if (!is_convex(src.boundary) || !is_convex(tgt.boundary)) fail(ErrorKind::parameter, "the baseline needs convex domains");
    const DiscreteMeasure target = target_measure(cfg, tgt, integrate(cfg.source_density, src.boundary), cfg.seed, cfg.n);
    RegularityReport rep = probe_report(cfg, solve_plain(cfg, src, target));
    rep.wall_time = seconds_since(t0);
    return rep;
}

std::vector<RegularityReport> run_delta_sweep(const ScenarioConfig& cfg, RegularityReport* summary) {
    require_sorted(cfg.deltas, "delta");
    const auto t0 = std::chrono::steady_clock::now();
    const Domain base = make_domain(cfg.source);
    const Domain tgt = make_target(cfg);
    PerturbationSpec spec = cfg.source_perturbation.value_or(PerturbationSpec{});
    const Polygon inner = scale_about(base.boundary, centroid(base.boundary), 0.8);

    std::vector<RegularityReport> reps;
    std::optional<BrenierPotential> u0;
    std::vector<std::vector<double>> rows;
    Json entries = Json::array();
    for (double amp : cfg.deltas) {
        const auto t1 = std::chrono::steady_clock::now();
        ScenarioConfig c = cfg;
        spec.amplitude = amp;
        c.source_perturbation = spec;
        const Domain src = scenario_source(c);
        const DiscreteMeasure target = target_measure(cfg, tgt, integrate(cfg.source_density, src.boundary), cfg.seed, cfg.n);
        const Solved s = solve_plain(c, src, target);
        RegularityReport rep = probe_report(c, s);
        if (!u0) u0 = s.result.potential;
        const BrenierPotential& u = s.result.potential;
        const double gap = comparison_gap([&u](const Vec2& x) { return u.value(x); },
                                          [&](const Vec2& x) { return u0->value(x); }, inner, 4000, cfg.seed + 3);
        std::vector<double> betas;
        for (const auto& h : rep.body["holder"]) betas.push_back(h["beta_hat"].is_null() ? std::nan("") : h["beta_hat"].get<double>());
        entries.push_back({{"amplitude", amp}, {"delta", src.delta}, {"comparison_gap", gap}, {"beta_hat", betas},
                           {"beta_min", rep.body["beta_min"]}, {"hessian_eigen_max", rep.body["hessian_eigen_max"]}});
        rows.push_back({amp, src.delta, gap, rep.body["beta_min"].is_null() ? std::nan("") : rep.body["beta_min"].get<double>(),
                        rep.body["hessian_eigen_max"].get<double>()});
        rep.wall_time = seconds_since(t1);
        reps.push_back(std::move(rep));
    }
    if (summary) {
        summary->body = {{"scenario", "delta_sweep"}, {"entries", entries}};
        summary->artifacts["sweep.csv"] = rows_to_csv({"amplitude", "delta", "comparison_gap", "beta_min", "hessian_eigen_max"}, rows);
        summary->wall_time = seconds_since(t0);
    }
    return reps;
}

std::vector<RegularityReport> run_two_component_target(const ScenarioConfig& cfg, RegularityReport* summary) {
    require_sorted(cfg.separations, "separation");
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const double mass = integrate(cfg.source_density, src.boundary);
    std::vector<RegularityReport> reps;
    std::vector<std::vector<double>> rows;
    Json entries = Json::array();
    for (double L : cfg.separations) {
        const auto t1 = std::chrono::steady_clock::now();
        ShapeSpec ts = cfg.target;
        ts.kind = ShapeKind::two_disks;
        ts.separation = L;
        const std::vector<Domain> comps = make_domain_set(ts);
        const std::size_t nl = cfg.n / 2;
        DiscreteMeasure left = target_measure(cfg, comps[0], 0.5 * mass, cfg.seed, nl);
        DiscreteMeasure right;
        if (cfg.symmetric) {
            right.sites = mirrored(left.sites, ts.center.x);
            right.masses = left.masses;
        } else {
            right = target_measure(cfg, comps[1], 0.5 * mass, cfg.seed + 7, cfg.n - nl);
        }
        const double dispersion =
            std::max(covering_radius(comps[0].boundary, left.sites), covering_radius(comps[1].boundary, right.sites));
        DiscreteMeasure target = left;
        target.sites.insert(target.sites.end(), right.sites.begin(), right.sites.end());
        target.masses.insert(target.masses.end(), right.masses.begin(), right.masses.end());
        Solved s = solve_plain(cfg, src, target);
        s.labels.assign(target.size(), 1);
        std::fill(s.labels.begin(), s.labels.begin() + static_cast<std::ptrdiff_t>(left.size()), 0);
        RegularityReport rep = probe_report(cfg, s);
        const Json& fb = rep.body["free_boundary"];
        const double bound = L - 2.0 * ts.radius - 2.0 * dispersion;
        double axis_dev = 0.0;
        for (const auto& adj : s.result.diagram.adjacency)
            if (s.labels[static_cast<std::size_t>(adj.i)] != s.labels[static_cast<std::size_t>(adj.j)])
                for (const auto& [a, b2] : adj.pieces) axis_dev = std::max({axis_dev, std::abs(a.x - ts.center.x), std::abs(b2.x - ts.center.x)});
        rep.body["separation"] = L;
        rep.body["dispersion"] = dispersion;
        rep.body["gradient_jump_bound"] = bound;
        rep.body["axis_deviation"] = axis_dev;
        entries.push_back({{"separation", L}, {"flatness", fb["flatness"]}, {"normal_deviation", fb["normal_deviation"]},
                           {"gradient_jump", fb["gradient_jump"]}, {"gradient_jump_bound", bound}, {"length", fb["length"]},
                           {"axis_deviation", axis_dev}});
        rows.push_back({L, fb["flatness"].get<double>(), fb["normal_deviation"].get<double>(), fb["gradient_jump"].get<double>(), bound,
                        axis_dev});
        rep.wall_time = seconds_since(t1);
        reps.push_back(std::move(rep));
    }
    if (summary) {
        summary->body = {{"scenario", "two_component"}, {"entries", entries}};
        summary->artifacts["sweep.csv"] = rows_to_csv(
            {"separation", "flatness", "normal_deviation", "gradient_jump", "gradient_jump_bound", "axis_deviation"}, rows);
        summary->wall_time = seconds_since(t0);
    }
    return reps;
}

std::vector<RegularityReport> run_partial_transport(const ScenarioConfig& cfg, RegularityReport* summary) {
    require_sorted(cfg.separations, "separation");
    if (!(cfg.mass_fraction > 0.0 && cfg.mass_fraction <= 1.0)) fail(ErrorKind::parameter, "mass_fraction must lie in (0, 1]");
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const double total = integrate(cfg.source_density, src.boundary);
    const double m = cfg.mass_fraction * total;
    const BoundingBox sb = bounding_box(src.boundary);
    const Vec2 sc = centroid(src.boundary);
    std::vector<RegularityReport> reps;
    std::vector<std::vector<double>> rows;
    Json entries = Json::array();
    for (double L : cfg.separations) {
        const auto t1 = std::chrono::steady_clock::now();
        Domain tgt = make_target(cfg);
        const BoundingBox tb = bounding_box(tgt.boundary);
        const Vec2 shift{sb.hi.x + L - tb.lo.x, sc.y - 0.5 * (tb.lo.y + tb.hi.y)};
        tgt.boundary = translate(tgt.boundary, shift);
        if (!tgt.convex_base.empty()) tgt.convex_base = translate(tgt.convex_base, shift);
        const DiscreteMeasure target = target_measure(cfg, tgt, m, cfg.seed, cfg.n);
        const PartialSolve ps = solve_partial(src, cfg.source_density, target, m, solve_options(cfg));
        DiscreteMeasure ext = target;
        if (ps.has_virtual) {
            ext.sites.push_back({0.0, 0.0});
            ext.masses.push_back(total - m);
        }
        const Solved s{src, cfg.source_density, ext, ps.result, ps.labels};
        RegularityReport rep = probe_report(cfg, s);
        double active = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) active += ps.result.masses[i];
        const Json& fb = rep.body["free_boundary"];
        rep.body["separation"] = L;
        rep.body["transported_mass"] = m;
        rep.body["active_mass"] = active;
        rep.body["virtual_site"] = ps.has_virtual;
        entries.push_back({{"separation", L}, {"flatness", fb["flatness"]}, {"normal_deviation", fb["normal_deviation"]},
                           {"length", fb["length"]}, {"empty", fb["empty"]}});
        rows.push_back({L, fb["flatness"].get<double>(), fb["normal_deviation"].get<double>(), fb["length"].get<double>()});
        rep.wall_time = seconds_since(t1);
        reps.push_back(std::move(rep));
    }
    if (summary) {
        summary->body = {{"scenario", "partial_transport"}, {"entries", entries}};
        summary->artifacts["sweep.csv"] = rows_to_csv({"separation", "flatness", "normal_deviation", "length"}, rows);
        summary->wall_time = seconds_since(t0);
    }
    return reps;
}

RegularityReport run_minimal_lagrangian(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Domain d1 = scenario_source(cfg);
    Domain d2 = make_target(cfg);
    if (cfg.scale_target_to_source_area) {
        const double s = std::sqrt(area(d1.boundary) / area(d2.boundary));
        const Vec2 c = centroid(d2.boundary);
        d2.boundary = scale_about(d2.boundary, c, s);
        if (!d2.convex_base.empty()) d2.convex_base = scale_about(d2.convex_base, c, s);
    }
    const double a1 = area(d1.boundary), a2 = area(d2.boundary);
    if (std::abs(a1 - a2) > 1e-6 * a1) fail(ErrorKind::parameter, "minimal Lagrangian needs equal areas");
    ScenarioConfig c = cfg;
    c.source_density = DensityField::constant(1.0);
    c.target_density = DensityField::constant(1.0);
    const DiscreteMeasure target = target_measure(c, d2, a1, cfg.seed, cfg.n);
    const Solved s = solve_plain(c, d1, target);
    RegularityReport rep = probe_report(c, s);

    double jac = 0.0, boundary_dist = 0.0;
    std::size_t empty = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        jac = std::max(jac, std::abs(s.result.masses[i] / target.masses[i] - 1.0));
        const Cell& cell = s.result.diagram.cells[i];
        if (cell.polygon.empty()) ++empty;
        if (cell.touches_boundary) boundary_dist = std::max(boundary_dist, distance_to_boundary(d2.boundary, target.sites[i]));
    }
    std::vector<Vec2> sorted = target.sites;
    std::sort(sorted.begin(), sorted.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    const double dispersion = covering_radius(d2.boundary, target.sites);
    rep.body["diffeomorphism"] = {{"distinct_sites", distinct},
                                  {"empty_cells", empty},
                                  {"jacobian_error", jac},
                                  {"boundary_distance", boundary_dist},
                                  {"dispersion", dispersion},
                                  {"boundary_distance_bound", 2.0 * dispersion},
                                  {"source_delta", d1.delta},
                                  {"target_delta", d2.delta},
                                  {"source_area", a1},
                                  {"target_area", a2}};
    rep.wall_time = seconds_since(t0);
    return rep;
}

RegularityReport run_barrier_check(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const Domain src = scenario_source(cfg);
    const Domain tgt = make_target(cfg);
    if (!is_convex(src.boundary) || !is_convex(tgt.boundary)) fail(ErrorKind::parameter, "the barrier check needs convex domains");
    ScenarioConfig c = cfg;
    c.source_density = DensityField::constant(1.0);
    c.target_density = DensityField::constant(1.0);
    const DiscreteMeasure target = target_measure(c, tgt, area(src.boundary), cfg.seed, cfg.n);
    const Solved s = solve_plain(c, src, target);
    const BrenierPotential& u = s.result.potential;
    RegularityReport rep;
    Json& b = rep.body;
    b["solve"] = {{"n", u.size()}, {"iterations", s.result.report.iterations}, {"final_residual", s.result.report.final_residual}};

    const Vec2 x0 = boundary_probe_points(src.boundary, 1).front();
    BoundaryFrame fr = boundary_frame(src.boundary, x0);
    fr.origin = x0;
    const auto [u0, i0] = u.eval(x0);
    const Vec2 p = u.sites()[static_cast<std::size_t>(i0)];
    const ScalarField ex = [&, u0 = u0](const Vec2& z) {
        const Vec2 x = fr.to_global(z);
        return u.value(x) - u0 - dot(p, x - x0);
    };

    Json ladder = Json::array();
    std::vector<double> lx, ly;
    std::vector<std::vector<double>> rows;
    bool truncated = false;
    for (double h : cfg.barrier_heights) {
        Json e = {{"h", h}};
        const Section sec = section(u, x0, h);
        if (sec.whole_source || h >= 1.0) {
            e["flag"] = "whole_source";
            ladder.push_back(e);
            continue;
        }
        const auto doubled = doubled_section(sec, fr, cfg.probe.eps);
        const double t = std::pow(h, 1.0 - 3.0 * cfg.probe.eps);
        const double spacing = std::sqrt(area(src.boundary) / static_cast<double>(u.size()));
        if (!doubled || std::sqrt(2.0 * h) < 4.0 * spacing) {
            e["flag"] = "under_resolved";
            truncated = true;
            ladder.push_back(e);
            continue;
        }
        const Polygon region = drop_close_vertices(convex_hull(doubled->vertices), 1e-12);
        const BoundaryData hval = [h](const Vec2&) { return h; };
        const MaSolution w = op_solve(region, hval, cfg.barrier_mesh * std::sqrt(2.0 * h));
        const NodalConvexFunction wf = w.w;
        double gap = 0.0;
        std::vector<Vec2> probes;
        for (const auto& z : wf.nodes())
            if (z.y >= t) probes.push_back(z);
        const BoundingBox bb = bounding_box(region);
        for (int i = 0; i <= 40; ++i)
            for (int j = 0; j <= 40; ++j) {
                const Vec2 z{bb.lo.x + bb.width() * i / 40.0, bb.lo.y + bb.height() * j / 40.0};
                if (z.y >= t && contains(region, z)) probes.push_back(z);
            }
        BarrierParams bp;
        bp.h = h;
        bp.tau = cfg.probe.tau;
        bp.eps = cfg.probe.eps;
        const auto [hat, check] = barrier_pair([&wf](const Vec2& z) { return wf(z); }, bp);
        int order_violations = 0;
        for (const auto& z : probes) {
            const double uz = ex(z);
            gap = std::max(gap, std::abs(uz - wf(z)));
            if (uz > hat(z) + 1e-12 || uz < check(z) - 1e-12) ++order_violations;
        }
        e["gap"] = gap;
        e["probes"] = probes.size();
        e["cut"] = t;
        e["mesh"] = cfg.barrier_mesh * std::sqrt(2.0 * h);
        e["barrier_order_violations"] = order_violations;
        ladder.push_back(e);
        lx.push_back(std::log(h));
        ly.push_back(std::log(gap));
        rows.push_back({h, gap, static_cast<double>(probes.size())});
    }
    b["base_point"] = point_json(x0);
    b["ladder"] = ladder;
    b["truncated"] = truncated;
    b["tau"] = cfg.probe.tau;
    b["slope"] = lx.size() >= 2 ? Json(fitted_slope(lx, ly)) : Json(nullptr);
    b["slope_required"] = 1.0 + cfg.probe.tau - 0.15;
    rep.artifacts["barrier.csv"] = rows_to_csv({"h", "gap", "probes"}, rows);
    rep.artifacts["cells.csv"] = cells_to_csv(s.result.diagram);
    rep.wall_time = seconds_since(t0);
    return rep;
}

std::vector<RegularityReport> run_scenario(const ScenarioConfig& cfg) {
    std::vector<RegularityReport> out;
    RegularityReport summary;
    switch (cfg.kind) {
        case ScenarioKind::convex_baseline: out.push_back(run_convex_baseline(cfg)); return out;
        case ScenarioKind::minimal_lagrangian: out.push_back(run_minimal_lagrangian(cfg)); return out;
        case ScenarioKind::barrier: out.push_back(run_barrier_check(cfg)); return out;
        case ScenarioKind::delta_sweep: out = run_delta_sweep(cfg, &summary); break;
        case ScenarioKind::two_component: out = run_two_component_target(cfg, &summary); break;
        case ScenarioKind::partial_transport: out = run_partial_transport(cfg, &summary); break;
    }
    out.push_back(std::move(summary));
    return out;
}

}  // namespace sdot
