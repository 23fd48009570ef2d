#pragma once

#include "sdot/density.hpp"
#include "sdot/domain.hpp"
#include "sdot/power_diagram.hpp"

#include <Eigen/Sparse>

#include "json.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace sdot {

// u(x) = max_i (x . y_i - w_i) over the source domain.
class BrenierPotential {
public:
    BrenierPotential() = default;
    BrenierPotential(std::vector<Vec2> sites, std::vector<double> weights, Domain source);

    // Value and active site (smallest index on ties).
    std::pair<double, int> eval(const Vec2& x) const { return index_->eval(x); }
    double value(const Vec2& x) const { return eval(x).first; }
    // Transport map: the active site.
    Vec2 map(const Vec2& x) const { return sites_[static_cast<std::size_t>(eval(x).second)]; }

    // Shifts weights so that min_i w_i = 0; u changes by a constant.
    BrenierPotential normalized() const;

    const std::vector<Vec2>& sites() const { return sites_; }
    const std::vector<double>& weights() const { return weights_; }
    const Domain& source() const { return source_; }
    std::size_t size() const { return sites_.size(); }

private:
    std::vector<Vec2> sites_;
    std::vector<double> weights_;
    Domain source_;
    std::shared_ptr<const AffineMax> index_;
};

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;
    int damping_events = 0;
    double wall_time = 0.0;
    std::vector<double> history;
    bool rescaled_start = false;
};

struct SolveOptions {
    double tol = 1e-8;
    int max_iter = 100;
    std::optional<std::vector<double>> initial_weights;
};

struct SolveResult {
    BrenierPotential potential;
    PowerDiagram diagram;
    std::vector<double> masses;
    SolveReport report;
};

std::vector<double> cell_masses(const PowerDiagram& diagram, const DensityField& f);

struct KantorovichSystem {
    PowerDiagram diagram;
    std::vector<double> masses;
    Eigen::VectorXd residual;                // m_i - nu_i
    Eigen::SparseMatrix<double> hessian;     // dm_i / dw_j
};

KantorovichSystem kantorovich_system(const std::vector<Vec2>& sites, const std::vector<double>& weights, const Polygon& source,
                                     const DensityField& f, const std::vector<double>& target_masses);

// Max relative cell-mass error.
double relative_residual(const std::vector<double>& masses, const std::vector<double>& target);

// Damped Newton on the Laguerre cell masses. Throws a parameter error when the
// masses are unbalanced, ConvergenceError past max_iter, and a degeneracy
// error when the step is damped below 2^-30.
SolveResult damped_newton_solve(const Domain& source, const DensityField& f, const DiscreteMeasure& target,
                                const SolveOptions& options = {});

// Weights whose Voronoi-type start keeps every cell nonempty.
std::vector<double> initial_weights(const Polygon& source, const std::vector<Vec2>& sites, bool* rescaled = nullptr);

// Dual potential u*(y) = sup_{x in source} (x . y - u(x)), exact as a max over
// the cell vertices.
class LegendreTransform {
public:
    LegendreTransform(const BrenierPotential& u, const PowerDiagram& diagram);

    double operator()(const Vec2& y) const { return index_.eval(y).first; }
    // u**(x) = max_i (x . y_i - u*(y_i)).
    double biconjugate(const Vec2& x) const { return dual_sites_.eval(x).first; }

private:
    AffineMax index_;
    AffineMax dual_sites_;
};

// Requires every cell nonempty (state error otherwise).
LegendreTransform legendre(const BrenierPotential& u, const PowerDiagram& diagram);
LegendreTransform legendre(const BrenierPotential& u);

nlohmann::json to_json(const BrenierPotential& u);
BrenierPotential potential_from_json(const nlohmann::json& j, const Domain& source);

}  // namespace sdot
