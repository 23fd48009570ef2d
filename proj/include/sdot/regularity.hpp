#pragma once

#include "sdot/density.hpp"
#include "sdot/geometry.hpp"
#include "sdot/power_diagram.hpp"
#include "sdot/semidiscrete.hpp"

#include <Eigen/Dense>

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sdot {

using ScalarField = std::function<double(const Vec2&)>;

// Local frame at a boundary point: origin on the boundary, unit tangent t and
// inward normal n (e2 of the local coordinates), z = (t . (x - o), n . (x - o)).
struct BoundaryFrame {
    Vec2 origin;
    Vec2 t{1.0, 0.0};
    Vec2 n{0.0, 1.0};

    Vec2 to_local(const Vec2& x) const { return {dot(x - origin, t), dot(x - origin, n)}; }
    Vec2 to_global(const Vec2& z) const { return origin + t * z.x + n * z.y; }
    Eigen::Matrix2d rotation() const;   // columns t, n
};

BoundaryFrame boundary_frame(const Polygon& source, const Vec2& x0);

struct Section {
    Vec2 base_point;
    double h = 0.0;
    Polygon polygon;
    Vec2 subgradient;
    int site = -1;               // active site giving the subgradient
    bool whole_source = false;   // the section is the whole source (unbounded section)
    bool far_boundary = false;   // reaches the source boundary farther than half its diameter from x0
};

// {x in source : u(x) - u(x0) - p . (x - x0) < h} with p the active site at x0.
Section section(const BrenierPotential& u, const Vec2& x0, double h);

struct Rescaling {
    Vec2 x0;
    double eps0 = 1.0;
    BrenierPotential potential;   // u'(z) = (u - l)(x0 + eps0 z) / eps0^2
    double flatness = 0.0;        // eps0 * sup |rho''| over |x'| <= eps0 / 2
    double density_oscillation = 0.0;   // sup |f - f(x0)| over source within eps0 of x0
    Vec2 map(const Vec2& x) const { return (x - x0) / eps0; }
};

Rescaling localize_rescale(const Section& s, const BrenierPotential& u, double eps0,
                           const DensityField& f = DensityField::constant(1.0));

struct HessianEstimate {
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
    Vec2 gradient;
};

// Centered 9-point differences, symmetrized. The stencil must stay inside
// the region at distance > 2 h (geometry error otherwise).
HessianEstimate hessian_estimate(const ScalarField& u, const Polygon& region, const Vec2& x0, double stencil_h);

// Symmetric, det 1, with align_axis an eigenvector; from H^(-1/2).
Eigen::Matrix2d normalization_matrix(const Eigen::Matrix2d& H, const Vec2& align_axis = {0.0, 1.0});

struct NormalizationStep {
    int k = 0;
    double h = 0.0;
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d M = Eigen::Matrix2d::Identity();   // A_k ... A_1
    double K_bound = 0.0;
    bool inner_pass = false;
    bool outer_pass = false;
    bool ho1_inner_pass = false;
    bool ho1_outer_pass = false;
    double r_inner = 0.0;            // (sqrt(h0) / (sqrt(3) K))^k
    double r_outer = 0.0;            // (sqrt(3) K sqrt(h0))^k
    double measured_inner = 0.0;     // distance from x0 to the section's interior boundary
    double measured_outer = 0.0;     // max distance from x0 to the section
    std::string mode;
};

struct IterationTrace {
    Vec2 base_point;
    double h0 = 0.0;
    double K = 0.0;
    std::vector<NormalizationStep> steps;
    bool unbounded = false;
    bool truncated = false;

    // "k,h,a11,a12,a22,det_Mk,norm_Mk,inner_pass,outer_pass"
    std::string to_csv() const;
};

enum class NormalizationMode { mvee, comparison };

IterationTrace iterate_sections(const BrenierPotential& u, const Vec2& x0, double h0, double K, int k_max,
                                NormalizationMode mode = NormalizationMode::mvee);

struct HolderFit {
    double beta_hat = 0.0;
    double residual = 0.0;   // rms of the log-log fit
    std::vector<double> radii;
    std::vector<double> sups;
};

// Slope of log sup_{B_r and region} |u - l| against log r, minus 1. The sup
// runs over `extra_points` in each ball, boundary samples of the ball inside
// the region, and region boundary samples inside the ball.
HolderFit holder_fit(const ScalarField& u, const Vec2& subgradient, const Vec2& x0, const Polygon& region,
                     const std::vector<double>& radii, const std::vector<Vec2>& extra_points = {}, int samples = 1000);
HolderFit holder_fit(const BrenierPotential& u, const Vec2& x0, const std::vector<double>& radii, int samples = 1000);

struct ShapeLadder {
    std::vector<double> heights;
    std::vector<double> ratios;   // MVEE axis ratio of each doubled D_h
    bool unbounded = false;
};

// D_h+ = S_h intersected with {x_n >= h^(1 - 3 eps)} in the boundary frame at
// x0, doubled across that line.
ShapeLadder good_shape(const BrenierPotential& u, const Vec2& x0, const std::vector<double>& heights, double eps);

// Doubled D_h for one height; empty when the cut misses the section.
std::optional<Polygon> doubled_section(const Section& s, const BoundaryFrame& frame, double eps);

// sup |(u - u(c)) - (v - v(c))| over region vertices, extra points and a
// jittered grid of about `budget` points, c the region centroid.
double comparison_gap(const ScalarField& u, const ScalarField& v, const Polygon& region, int budget, std::uint64_t seed,
                      const std::vector<Vec2>& extra_points = {});

struct FreeBoundary {
    std::vector<std::vector<Vec2>> curves;
    double length = 0.0;
    double flatness = 0.0;
    double normal_deviation = 0.0;   // radians
    double gradient_jump = 0.0;
    bool empty = true;

    // "curve_id,vertex_index,x,y"
    std::string to_csv() const;
};

FreeBoundary free_boundary(const PowerDiagram& diagram, const BrenierPotential& u, const std::vector<int>& labels);

struct W2pProbe {
    double grid_h = 0.0;
    std::vector<double> p;
    std::vector<double> norms;              // normalized measure
    std::vector<double> unnormalized_norms;
    bool jensen_monotone = true;
    int points = 0;
};

W2pProbe w2p_probe(const BrenierPotential& u, double grid_h, const std::vector<double>& p);

nlohmann::json to_json(const IterationTrace& t);
nlohmann::json to_json(const HolderFit& f);
nlohmann::json to_json(const W2pProbe& w);
nlohmann::json to_json(const FreeBoundary& fb);

}  // namespace sdot
