#pragma once

#include "sdot/geometry.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sdot {

enum class PerturbationMode { radial_wave, boundary_bump };

struct PerturbationSpec {
    PerturbationMode mode = PerturbationMode::radial_wave;
    double amplitude = 0.0;
    int frequency = 1;
    double phase = 0.0;
};

struct Domain {
    Polygon boundary;
    Polygon convex_base;
    double delta = 0.0;
    std::optional<PerturbationSpec> perturbation;

    double area() const { return sdot::area(boundary); }
};

enum class ShapeKind { disk, square, rect, dumbbell, two_disks };

struct ShapeSpec {
    ShapeKind kind = ShapeKind::disk;
    double radius = 1.0;       // disk, dumbbell lobes, two_disks
    int n_vertices = 256;      // disk, dumbbell, two_disks (per component)
    double side = 1.0;         // square
    double a = 1.0, b = 1.0;   // rect width, height
    double separation = 0.0;   // dumbbell / two_disks: distance between lobe centers
    double neck_width = 0.0;   // dumbbell
    Vec2 center{0.0, 0.0};
};

// Single-component domain. two_disks is rejected (use make_domain_set).
Domain make_domain(const ShapeSpec& shape);
// All components; two_disks gives two domains (left first), others one.
std::vector<Domain> make_domain_set(const ShapeSpec& shape);

// Applies a perturbation to a delta = 0 base. Sets `delta` to the measured
// C^{1,1} surrogate distance. Areas are not renormalized here.
Domain perturb_domain(const Domain& base, const PerturbationSpec& spec);

// Sup over boundary samples of |rho - eta| + |D(rho - eta)| + |D^2(rho - eta)|
// in local graph coordinates along the outward normals of the convex base.
double delta_distance(const Domain& domain);

// Local graph samples used by delta_distance: per base sample, arclength s and
// normal offset d of the perturbed boundary.
struct GraphSamples {
    std::vector<double> s;
    std::vector<double> d;
    double step = 0.0;
};
GraphSamples boundary_graph(const Domain& domain);

// Regular polygon radius whose area equals `target_area`.
double regular_polygon_radius_for_area(int n_vertices, double target_area);

nlohmann::json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Domain& domain);
Domain domain_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ShapeSpec& shape);
ShapeSpec shape_from_json(const nlohmann::json& j);

}  // namespace sdot
