// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "sdot/cli_io.hpp"
#include "sdot/density.hpp"
#include "sdot/domain.hpp"
#include "sdot/error.hpp"
#include "sdot/ma_dirichlet.hpp"
#include "sdot/regularity.hpp"
#include "sdot/scenarios.hpp"
#include "sdot/semidiscrete.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#ifndef SDOT_CONFIG_DIR
#define SDOT_CONFIG_DIR "configs"
#endif

using namespace sdot;
using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!pass) ++failures;
}

// Runs one criterion; an exception is a failure with its message.
void criterion(const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
    std::ostringstream detail;
    detail.precision(4);
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail << " exception: " << e.what();
    }
    report(name, pass, detail.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScenarioConfig load(const std::string& file) { return parse_config(fs::path(SDOT_CONFIG_DIR) / file); }

Polygon unit_square() { return Polygon{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}}; }

Domain unit_square_domain() {
    ShapeSpec s;
    s.kind = ShapeKind::square;
    s.side = 1.0;
    s.center = {0.5, 0.5};
    return make_domain(s);
}

// Cell centers of the k x k grid on the unit square, shifted by t.
DiscreteMeasure grid_measure(int k, Vec2 t) {
    DiscreteMeasure m;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            m.sites.push_back({(i + 0.5) / k + t.x, (j + 0.5) / k + t.y});
            m.masses.push_back(1.0 / (k * k));
        }
    return m;
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

// Area of {x in [0,1]^2 : x . n >= c} by polygon clipping.
double square_cap_area(Vec2 n, double c) {
    std::vector<Vec2> in{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, out;
    for (std::size_t k = 0; k < 4; ++k) {
        const Vec2 a = in[k], b = in[(k + 1) % 4];
        const double fa = a.x * n.x + a.y * n.y - c, fb = b.x * n.x + b.y * n.y - c;
        if (fa >= 0.0) out.push_back(a);
        if ((fa >= 0.0) != (fb >= 0.0)) {
            const double s = fa / (fa - fb);
            out.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
        }
    }
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) s += out[k].x * out[(k + 1) % out.size()].y - out[k].y * out[(k + 1) % out.size()].x;
    return 0.5 * std::abs(s);
}

std::vector<RegularityReport> solves;   // every probe report, for conservation, monotonicity, W2p

void collect(const std::vector<RegularityReport>& reps) {
    for (const auto& r : reps)
        if (r.body.contains("solve") && r.body.contains("audit")) solves.push_back(r);
}

}  // namespace

int main() {
    const auto t_all = std::chrono::steady_clock::now();

    criterion("solver exactness (grid identity N=256, translation)", [](std::ostringstream& d) {
        const auto t0 = std::chrono::steady_clock::now();
        const Domain src = unit_square_domain();
        const DensityField f = DensityField::constant(1.0);
        SolveOptions opt;
        opt.tol = 1e-12;
        const DiscreteMeasure id = grid_measure(16, {0.0, 0.0});
        const SolveResult a = damped_newton_solve(src, f, id, opt);
        std::vector<double> r;
        for (std::size_t i = 0; i < id.size(); ++i) r.push_back(a.potential.weights()[i] - 0.5 * norm2(id.sites[i]));
        const double s_id = spread(r);
        const Vec2 t{2.0, 1.0};
        const DiscreteMeasure tr = grid_measure(16, t);
        const SolveResult b = damped_newton_solve(src, f, tr, opt);
        r.clear();
        double map_err = 0.0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            r.push_back(b.potential.weights()[i] - 0.5 * norm2(tr.sites[i] - t));
            const Vec2 x = tr.sites[i] - t;
            map_err = std::max(map_err, norm(b.potential.map(x) - (x + t)));
        }
        const double s_tr = spread(r);
        const double secs = seconds_since(t0);
        d << "identity weight spread " << s_id << ", translation weight spread " << s_tr << ", map error " << map_err << ", "
          << secs << " s";
        return s_id <= 1e-8 && s_tr <= 1e-8 && map_err <= 1e-8 && secs < 10.0;
    });

    RegularityReport baseline;
    criterion("baseline regularity (disk to disk, N=1e4)", [&](std::ostringstream& d) {
        const ScenarioConfig cfg = load("baseline.json");
        baseline = run_scenario(cfg).front();
        collect({baseline});
        const Json& b = baseline.body;
        double beta_min = std::numeric_limits<double>::infinity();
        int points = 0;
        for (const auto& h : b["holder"]) {
            ++points;
            beta_min = std::min(beta_min, h["beta_hat"].is_null() ? -1.0 : h["beta_hat"].get<double>());
        }
        const double lo = b["hessian_eigen_min"], hi = b["hessian_eigen_max"];
        d << points << " boundary points, beta_hat min " << beta_min << ", Hessian eigenvalues [" << lo << ", " << hi << "], "
          << baseline.wall_time << " s";
        return points >= 8 && beta_min >= 0.9 && lo >= 0.5 && hi <= 2.0 && !b["hessian"].empty() && baseline.wall_time < 300.0;
    });

    criterion("delta sweep (wavy disk, N=1e4)", [&](std::ostringstream& d) {
        const ScenarioConfig cfg = load("delta_sweep.json");
        const auto t0 = std::chrono::steady_clock::now();
        const auto reps = run_scenario(cfg);
        const double secs = seconds_since(t0);
        collect({reps.begin(), reps.end() - 1});
        const Json& entries = reps.back().body["entries"];
        bool nondecreasing = true;
        for (std::size_t k = 1; k < entries.size(); ++k)
            nondecreasing = nondecreasing && entries[k]["comparison_gap"].get<double>() >= entries[k - 1]["comparison_gap"].get<double>();
        const double b0 = entries[0]["beta_min"];
        double worst = 0.0;
        for (std::size_t k = 0; k < entries.size(); ++k)
            if (cfg.deltas[k] <= 0.01) worst = std::max(worst, std::abs(entries[k]["beta_min"].get<double>() - b0));
        const bool identical = canonical_json(reps.front().body) == canonical_json(baseline.body);
        d << "comparison_gap";
        for (const auto& e : entries) d << " " << e["comparison_gap"].get<double>();
        d << ", max |beta_min(delta) - beta_min(0)| for delta <= 0.01 = " << worst << ", delta=0 entry byte-identical "
          << (identical ? "yes" : "no") << ", " << secs << " s";
        return entries.size() == 5 && nondecreasing && worst <= 0.05 && identical && secs < 1800.0;
    });

    criterion("iteration machinery (identity disk, h0=0.1, K=10, k=1..3)", [](std::ostringstream& d) {
        const ScenarioConfig cfg = load("iteration.json");
        const RegularityReport rep = run_scenario(cfg).front();
        collect({rep});
        int steps = 0;
        bool inclusions = true, complete = true;
        double det_err = 0.0, a_err = 0.0;
        for (const auto& t : rep.body["traces"]) {
            complete = complete && !t["truncated"].get<bool>() && t["steps"].size() == 3;
            for (const auto& s : t["steps"]) {
                ++steps;
                inclusions = inclusions && s["inner_pass"].get<bool>() && s["outer_pass"].get<bool>() && s["ho1_inner_pass"].get<bool>() &&
                             s["ho1_outer_pass"].get<bool>();
                det_err = std::max(det_err, std::abs(s["det_M"].get<double>() - 1.0));
                a_err = std::max(a_err, s["norm_A_minus_I"].get<double>());
            }
        }
        d << rep.body["traces"].size() << " base points, " << steps << " steps, inclusions " << (inclusions ? "all pass" : "some fail")
          << ", max |det M - 1| " << det_err << ", max ||A - I|| " << a_err << ", " << rep.wall_time << " s";
        return complete && steps > 0 && inclusions && det_err <= 1e-8 && a_err <= 0.1;
    });

    criterion("Dirichlet solver (det = 1, quadratic data; one-node closed form)", [](std::ostringstream& d) {
        const Polygon sq{{{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}};
        const BoundaryData q = [](const Vec2& x) { return 0.5 * norm2(x); };
        std::vector<double> errs;
        for (double h : {0.2, 0.1, 0.05}) {
            const MaSolution s = op_solve(sq, q, h);
            double e = 0.0;
            for (std::size_t k = 0; k < s.w.interior(); ++k) e = std::max(e, std::abs(s.w.values()[k] - q(s.w.nodes()[k])));
            errs.push_back(e);
        }
        const double r1 = errs[0] / errs[1], r2 = errs[1] / errs[2];
        // Zero data on the unit square corners, one center node with unit
        // measure: the subgradient is the diamond of area 8 d^2, so d = 1/sqrt(8).
        NodeSet ns;
        ns.nodes = {{0.5, 0.5}, {0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
        ns.interior = 1;
        const MaSolution one = op_solve(unit_square(), ns, [](const Vec2&) { return 0.0; }, {1.0});
        const double one_err = std::abs(one.w.values()[0] + 1.0 / std::sqrt(8.0));
        d << "sup errors " << errs[0] << " " << errs[1] << " " << errs[2] << ", ratios " << r1 << " " << r2 << ", one-node error "
          << one_err;
        return r1 >= 1.8 && r2 >= 1.8 && one_err <= 1e-10;
    });

    criterion("barrier scaling (identity disk, tau=0.25, N=4e4)", [](std::ostringstream& d) {
        const ScenarioConfig cfg = load("barrier.json");
        const RegularityReport rep = run_scenario(cfg).front();
        const Json& b = rep.body;
        d << "gaps";
        int used = 0;
        for (const auto& e : b["ladder"]) {
            if (e.contains("gap")) {
                d << " " << e["gap"].get<double>();
                ++used;
            } else {
                d << " [" << e["flag"].get<std::string>() << "]";
            }
        }
        const bool has_slope = !b["slope"].is_null();
        const double slope = has_slope ? b["slope"].get<double>() : std::nan("");
        d << ", slope " << slope << " (required " << b["slope_required"].get<double>() << "), " << rep.wall_time << " s";
        return used == 3 && has_slope && slope >= 1.1 && rep.wall_time < 1200.0;
    });

    criterion("two-component singularity model (L in {2, 5, 10, 20}; symmetric axis)", [](std::ostringstream& d) {
        const auto reps = run_scenario(load("two_component.json"));
        collect({reps.begin(), reps.end() - 1});
        const Json& entries = reps.back().body["entries"];
        bool improving = true, jump_ok = true;
        for (std::size_t k = 0; k < entries.size(); ++k) {
            if (k > 0) improving = improving && entries[k]["flatness"].get<double>() < entries[k - 1]["flatness"].get<double>();
            jump_ok = jump_ok && entries[k]["gradient_jump"].get<double>() >= entries[k]["gradient_jump_bound"].get<double>();
        }
        const auto sym = run_scenario(load("two_component_symmetric.json"));
        collect({sym.begin(), sym.end() - 1});
        const double axis = sym.front().body["axis_deviation"];
        d << "flatness";
        for (const auto& e : entries) d << " " << e["flatness"].get<double>();
        d << ", jump >= bound " << (jump_ok ? "everywhere" : "violated") << ", symmetric axis deviation " << axis;
        return entries.size() == 4 && improving && jump_ok && axis <= 1e-6;
    });

    criterion("partial transport (one-site halfplane; m = total; zero virtual mass)", [](std::ostringstream& d) {
        const Domain src = unit_square_domain();
        const DensityField f = DensityField::constant(1.0);
        SolveOptions opt;
        opt.tol = 1e-12;
        const Vec2 y{10.0, 3.0};
        const Vec2 yh = y * (1.0 / norm(y));
        DiscreteMeasure one;
        one.sites = {y};
        one.masses = {0.5};
        const PartialSolve ps = solve_partial(src, f, one, 0.5, opt);
        // Oracle threshold by bisection on the clipped area.
        double lo = -5.0, hi = 5.0;
        for (int k = 0; k < 200; ++k) {
            const double c = 0.5 * (lo + hi);
            (square_cap_area(yh, c) > 0.5 ? lo : hi) = c;
        }
        const double c_oracle = 0.5 * (lo + hi);
        const double c_solved = (ps.result.potential.weights()[0] - ps.result.potential.weights()[1]) / norm(y);
        const FreeBoundary fb = free_boundary(ps.result.diagram, ps.result.potential, ps.labels);
        double line_err = 0.0, perp_err = 0.0;
        for (const auto& curve : fb.curves)
            for (const Vec2& p : curve) line_err = std::max(line_err, std::abs(dot(p, yh) - c_oracle));
        if (!fb.curves.empty() && fb.curves[0].size() >= 2) {
            const Vec2 tangent = fb.curves[0].back() - fb.curves[0].front();
            perp_err = std::abs(dot(tangent, yh)) / norm(tangent);
        }

        ShapeSpec far;
        far.radius = 0.4;
        far.center = {3.0, 0.5};
        const DiscreteMeasure many = quantize(f, make_domain(far), 200, 11, 5, 1.0);
        const PartialSolve full = solve_partial(src, f, many, 1.0, opt);
        const FreeBoundary full_fb = free_boundary(full.result.diagram, full.result.potential, full.labels);
        const SolveResult plain = damped_newton_solve(src, f, many, opt);
        double w_diff = 0.0;
        for (std::size_t i = 0; i < many.size(); ++i)
            w_diff = std::max(w_diff, std::abs((full.result.potential.weights()[i] - full.result.potential.weights()[0]) -
                                               (plain.potential.weights()[i] - plain.potential.weights()[0])));
        d << "threshold error " << std::abs(c_solved - c_oracle) << ", boundary-to-line " << line_err << ", perpendicularity "
          << perp_err << ", m = total: virtual site " << (full.has_virtual ? "present" : "absent") << " and free boundary "
          << (full_fb.empty ? "empty" : "nonempty") << ", weight difference to plain solve " << w_diff;
        return std::abs(c_solved - c_oracle) <= 1e-6 && line_err <= 1e-6 && perp_err <= 1e-6 && !fb.empty && !full.has_virtual &&
               full_fb.empty && w_diff <= 1e-8;
    });

    criterion("conservation (every converged scenario solve)", [](std::ostringstream& d) {
        double mass_err = 0.0, sum_err = 0.0, push = 0.0;
        for (const auto& r : solves) {
            const Json& s = r.body["solve"];
            mass_err = std::max(mass_err, s["max_relative_mass_error"].get<double>());
            sum_err = std::max(sum_err, s["mass_sum_relative_error"].get<double>());
            push = std::max(push, r.body["audit"]["pushforward_error"].get<double>());
        }
        d << solves.size() << " solves, max relative cell-mass error " << mass_err << ", mass sum error " << sum_err
          << ", max halfplane push-forward error " << push << " (10 halfplanes each)";
        // Every scenario config solves to tol 1e-8; a halfplane sums at most
        // tol-relative cell errors, so tol bounds the push-forward error too.
        return !solves.empty() && mass_err <= 1e-8 && sum_err <= 1e-9 && push <= 1e-8;
    });

    criterion("monotonicity of the map (1e3 random pairs per solve)", [](std::ostringstream& d) {
        double worst = 0.0;
        for (const auto& r : solves) worst = std::max(worst, r.body["audit"]["monotonicity_violations"].get<double>());
        d << solves.size() << " solves, worst violation fraction " << worst;
        return solves.size() >= 5 && worst == 0.0;
    });

    criterion("W2p probe (Jensen monotone on every run; identity p-independent)", [&](std::ostringstream& d) {
        int runs = 0, monotone = 0;
        for (const auto& r : solves) {
            ++runs;
            if (r.body["w2p"].contains("jensen_monotone") && r.body["w2p"]["jensen_monotone"].get<bool>()) ++monotone;
        }
        const std::vector<double> norms = baseline.body["w2p"]["norms"].get<std::vector<double>>();
        const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
        const double rel = (*hi - *lo) / *lo;
        d << monotone << "/" << runs << " runs Jensen monotone, identity norms";
        for (double v : norms) d << " " << v;
        d << " (relative spread " << rel << ")";
        return runs > 0 && monotone == runs && norms.size() == 3 && rel <= 0.05;
    });

    criterion("reproducibility (report.json byte-identical on rerun)", [&](std::ostringstream& d) {
        const ScenarioConfig cfg = load("baseline.json");
        const fs::path root = fs::temp_directory_path() / "sdot_acceptance_repro";
        fs::remove_all(root);
        write_outputs({baseline}, cfg, root / "a", false);
        write_outputs(run_scenario(cfg), cfg, root / "b", false);
        bool same = read_file(root / "a" / "report.json") == read_file(root / "b" / "report.json");
        int files = 0;
        for (const auto& e : fs::directory_iterator(root / "a")) {
            const std::string name = e.path().filename().string();
            if (name == "run_manifest.json") continue;
            ++files;
            same = same && read_file(e.path()) == read_file(root / "b" / name);
        }
        fs::remove_all(root);
        d << files << " output files compared, " << (same ? "all byte-identical" : "differences found");
        return same && files > 1;
    });

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " in " << seconds_since(t_all) << " s"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
