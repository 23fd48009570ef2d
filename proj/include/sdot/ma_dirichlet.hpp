#pragma once

#include "sdot/geometry.hpp"
#include "sdot/power_diagram.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace sdot {

// Discrete convex function on a node set: the lower convex envelope of the
// graph points (x_k, v_k). Interior nodes come first, boundary nodes after.
// The subgradient of the envelope at x_k is the Laguerre cell of k in the
// diagram with sites x_j and weights v_j, read in gradient space.
class NodalConvexFunction {
public:
    NodalConvexFunction() = default;
    NodalConvexFunction(Polygon region, std::vector<Vec2> nodes, std::vector<double> values, std::size_t interior);

    // Envelope value at x (convex extension outside the region).
    double operator()(const Vec2& x) const;

    // max_k |envelope(x_k) - v_k|; zero when every node is on its envelope.
    double convex_position_error() const;

    const Polygon& region() const { return region_; }
    const std::vector<Vec2>& nodes() const { return nodes_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t interior() const { return interior_; }
    std::size_t size() const { return nodes_.size(); }

    // Node export: "x,y,value".
    std::string to_csv() const;

private:
    Polygon region_;
    std::vector<Vec2> nodes_;
    std::vector<double> values_;
    std::size_t interior_ = 0;
    std::shared_ptr<const AffineMax> facets_;
};

struct NodeSet {
    std::vector<Vec2> nodes;   // interior first
    std::size_t interior = 0;
};

// Lattice points of spacing h_mesh (anchored at origin) at distance at least
// h_mesh / 4 from the boundary, followed by the region vertices and edge
// samples at spacing at most h_mesh.
NodeSet lattice_nodes(const Polygon& region, double h_mesh, const Vec2& origin = {0.0, 0.0});

// Lebesgue weight of each interior node: area of its Voronoi cell among the
// interior nodes, clipped to the region. Sums to the region area.
std::vector<double> lebesgue_targets(const NodeSet& nodes, const Polygon& region);

// Areas of the subgradient images at the interior nodes, with the diagram
// clipped to the box [-half, half]^2 in gradient space. `half` grows until no
// interior cell reaches the box.
std::vector<double> subgradient_areas(const std::vector<Vec2>& nodes, const std::vector<double>& values, std::size_t interior,
                                      double& half, PowerDiagram* diagram = nullptr);

enum class MaMethod { newton, sweeps };

struct MaOptions {
    double tol = 1e-9;     // max relative measure error
    int max_iter = 200;    // Newton steps or sweeps
    MaMethod method = MaMethod::newton;
};

struct MaReport {
    int iterations = 0;
    int damping_events = 0;
    double final_residual = 0.0;
    std::vector<double> history;
};

struct MaSolution {
    NodalConvexFunction w;
    std::vector<double> targets;
    std::vector<double> measures;
    MaReport report;
};

using BoundaryData = std::function<double(const Vec2&)>;

// Solves for interior values whose subgradient areas match the targets, with
// boundary nodes fixed to g. Region must be convex and g convex along every
// edge (data error otherwise).
MaSolution op_solve(const Polygon& region, const NodeSet& nodes, const BoundaryData& g, const std::vector<double>& targets,
                    const MaOptions& options = {});

// det D^2 w = 1 on the lattice of spacing h_mesh.
MaSolution op_solve(const Polygon& region, const BoundaryData& g, double h_mesh, const MaOptions& options = {});

struct BarrierParams {
    double h = 0.25;
    double tau = 0.25;
    double c1 = 1.0;
    double eps = 0.05;
    double c = 2.0;   // constant in the offset x_2 - c h^(1/2 - eps)
};

using Evaluator = std::function<double(const Vec2&)>;

// Upper and lower barriers built from w:
//   hat   = (1 - h^tau)^(1/2) w - (1 - h^tau)^(1/2) h + h
//   check = (1 + h^tau)^(1/2) w - (1 + h^tau)^(1/2) h + h + c1 (x_2 - c h^(1/2-eps)) h^(1-4 eps)
std::pair<Evaluator, Evaluator> barrier_pair(const Evaluator& w, const BarrierParams& p);

}  // namespace sdot
