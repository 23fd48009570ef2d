#pragma once

#include "sdot/density.hpp"
#include "sdot/domain.hpp"
#include "sdot/regularity.hpp"
#include "sdot/semidiscrete.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sdot {

enum class ScenarioKind { convex_baseline, delta_sweep, two_component, partial_transport, minimal_lagrangian, barrier };

struct ProbeConfig {
    double h0 = 0.1;
    double K = 10.0;
    double tau = 0.25;
    double eps = 0.05;
    std::vector<double> radii{0.1, 0.2, 0.4, 0.8};
    int boundary_points = 8;
    int k_max = 3;
    std::vector<double> p{1.0, 2.0, 4.0};
    double grid_h = 0.0;        // 0: four mean site spacings
    double hessian_h = 0.1;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ScenarioKind kind = ScenarioKind::convex_baseline;
    ShapeSpec source;
    ShapeSpec target;
    std::optional<PerturbationSpec> source_perturbation;
    DensityField source_density = DensityField::constant(1.0);
    DensityField target_density = DensityField::constant(1.0);
    std::size_t n = 10000;
    std::uint64_t seed = 1;
    int lloyd_steps = 10;
    double tol = 1e-8;
    std::vector<double> deltas;        // perturbation amplitudes (delta_sweep)
    std::vector<double> separations;   // center distance of the two target disks, or source-target gap (partial)
    double mass_fraction = 0.5;        // transported mass over source mass (partial)
    bool symmetric = false;            // two_component: mirror the target sites across the axis
    bool scale_target_to_source_area = false;
    std::vector<double> barrier_heights{0.25, 0.0625, 0.015625};
    double barrier_mesh = 1.0 / 16.0;  // Dirichlet mesh over the section radius sqrt(2 h)
    ProbeConfig probe;
    std::string output_dir = "out";
};

// Report body plus named text artifacts (CSV). The body never holds
// timestamps, so equal configs give equal bytes.
struct RegularityReport {
    nlohmann::json body = nlohmann::json::object();
    std::map<std::string, std::string> artifacts;
    double wall_time = 0.0;
};

// Solve and audits only, with the potential and target as artifacts.
RegularityReport run_solve(const ScenarioConfig& cfg);
// Solve plus the regularity probes shared by every scenario, for any source.
RegularityReport run_probe(const ScenarioConfig& cfg);
// run_probe restricted to convex source and target.
RegularityReport run_convex_baseline(const ScenarioConfig& cfg);
std::vector<RegularityReport> run_delta_sweep(const ScenarioConfig& cfg, RegularityReport* summary = nullptr);
std::vector<RegularityReport> run_two_component_target(const ScenarioConfig& cfg, RegularityReport* summary = nullptr);
std::vector<RegularityReport> run_partial_transport(const ScenarioConfig& cfg, RegularityReport* summary = nullptr);
RegularityReport run_minimal_lagrangian(const ScenarioConfig& cfg);
RegularityReport run_barrier_check(const ScenarioConfig& cfg);

// Dispatch on cfg.kind; sweeps return one report per entry plus the summary
// as the last element.
std::vector<RegularityReport> run_scenario(const ScenarioConfig& cfg);

// Source with its optional perturbation applied.
Domain scenario_source(const ScenarioConfig& cfg);

// Halfplane push-forward audit: max over `count` random halfplanes H of
// |sum of target masses in H - source mass of the cells of sites in H|,
// relative to the total mass.
double pushforward_error(const std::vector<Vec2>& sites, const std::vector<double>& target_masses,
                         const std::vector<double>& cell_masses, int count, std::uint64_t seed);

// Fraction of `pairs` random source pairs with (T x - T x') . (x - x') < 0.
double monotonicity_violations(const BrenierPotential& u, int pairs, std::uint64_t seed);

// Partial transport with one real target site: the active region is the
// halfplane {x . y >= c}; c from the solved weights.
struct PartialSolve {
    SolveResult result;
    std::vector<int> labels;   // 0 real, 1 virtual
    bool has_virtual = false;
};
PartialSolve solve_partial(const Domain& source, const DensityField& f, const DiscreteMeasure& target, double m,
                           const SolveOptions& options);

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

}  // namespace sdot
