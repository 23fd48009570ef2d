#include "sdot/semidiscrete.hpp"

#include "sdot/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace sdot {

BrenierPotential::BrenierPotential(std::vector<Vec2> sites, std::vector<double> weights, Domain source)
    : sites_(std::move(sites)), weights_(std::move(weights)), source_(std::move(source)) {
    if (sites_.empty()) fail(ErrorKind::parameter, "potential needs at least one site");
    if (sites_.size() != weights_.size()) fail(ErrorKind::parameter, "sites and weights differ in length");
    index_ = std::make_shared<const AffineMax>(sites_, weights_);
}

BrenierPotential BrenierPotential::normalized() const {
    const double m = *std::min_element(weights_.begin(), weights_.end());
    std::vector<double> w = weights_;
    for (double& v : w) v -= m;
    return BrenierPotential(sites_, std::move(w), source_);
}

std::vector<double> cell_masses(const PowerDiagram& diagram, const DensityField& f) {
    std::vector<double> m(diagram.size());
    for (std::size_t i = 0; i < diagram.size(); ++i) m[i] = integrate(f, diagram.cells[i].polygon);
    return m;
}

KantorovichSystem kantorovich_system(const std::vector<Vec2>& sites, const std::vector<double>& weights, const Polygon& source,
                                     const DensityField& f, const std::vector<double>& target_masses) {
    const std::size_t n = sites.size();
    if (target_masses.size() != n) fail(ErrorKind::parameter, "target masses and sites differ in length");
    KantorovichSystem sys;
    sys.diagram = power_diagram(sites, weights, source);
    sys.masses = cell_masses(sys.diagram, f);
    sys.residual.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) sys.residual(static_cast<Eigen::Index>(i)) = sys.masses[i] - target_masses[i];
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> diag(n, 0.0);
    trip.reserve(2 * sys.diagram.adjacency.size() + n);
    for (const auto& adj : sys.diagram.adjacency) {
        double flux = 0.0;
        for (const auto& [a, b] : adj.pieces) flux += integrate_segment(f, a, b);
        const double h = flux / norm(sites[static_cast<std::size_t>(adj.i)] - sites[static_cast<std::size_t>(adj.j)]);
        trip.emplace_back(adj.i, adj.j, h);
        trip.emplace_back(adj.j, adj.i, h);
        diag[static_cast<std::size_t>(adj.i)] -= h;
        diag[static_cast<std::size_t>(adj.j)] -= h;
    }
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
    sys.hessian.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.hessian.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

double relative_residual(const std::vector<double>& masses, const std::vector<double>& target) {
    double r = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) r = std::max(r, std::abs(masses[i] - target[i]) / target[i]);
    return r;
}

std::vector<double> initial_weights(const Polygon& source, const std::vector<Vec2>& sites, bool* rescaled) {
    std::vector<double> w(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) w[i] = 0.5 * norm2(sites[i]);
    if (rescaled) *rescaled = false;
    if (power_diagram(sites, w, source).empty_cells() == 0) return w;
    // Voronoi diagram of the sites mapped affinely into a disk inside the
    // source: every site then owns a nonempty cell.
    Vec2 c = centroid(source);
    if (!contains(source, c, 0.0)) c = centroid(Polygon{{source[0], source[1], source[2]}});
    const double rho = distance_to_boundary(source, c);
    const BoundingBox tb = bounding_box(sites);
    const double half = 0.5 * std::max({tb.width(), tb.height(), 1e-300});
    const double s = 0.9 * rho / (std::sqrt(2.0) * half);
    const Vec2 tc = (tb.lo + tb.hi) * 0.5;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const Vec2 z = c + (sites[i] - tc) * s;
        w[i] = norm2(z) / (2.0 * s);
    }
    if (rescaled) *rescaled = true;
    return w;
}

SolveResult damped_newton_solve(const Domain& source, const DensityField& f, const DiscreteMeasure& target,
                                const SolveOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t n = target.size();
    if (n == 0) fail(ErrorKind::parameter, "empty target measure");
    if (!(options.tol > 0.0)) fail(ErrorKind::parameter, "tolerance must be positive");
    for (double m : target.masses)
        if (!(m > 0.0)) fail(ErrorKind::parameter, "target masses must be positive");
    const Polygon& poly = source.boundary;
    const double source_mass = integrate(f, poly);
    const double target_mass = target.total();
    if (std::abs(source_mass - target_mass) > 1e-9 * source_mass)
        fail(ErrorKind::parameter, "source and target masses are unbalanced (relative gap " +
                                       std::to_string(std::abs(source_mass - target_mass) / source_mass) + ")");

    SolveReport report;
    std::vector<double> w;
    if (options.initial_weights) {
        w = *options.initial_weights;
        if (w.size() != n) fail(ErrorKind::parameter, "initial weights have the wrong length");
    } else {
        w = initial_weights(poly, target.sites, &report.rescaled_start);
    }
    KantorovichSystem sys = kantorovich_system(target.sites, w, poly, f, target.masses);
    const double min_nu = *std::min_element(target.masses.begin(), target.masses.end());
    const double min_m0 = *std::min_element(sys.masses.begin(), sys.masses.end());
    if (!(min_m0 > 0.0)) fail(ErrorKind::degeneracy, "initial weights leave an empty cell");
    const double eps0 = 0.5 * std::min(min_nu, min_m0);
    double res = relative_residual(sys.masses, target.masses);
    report.history.push_back(res);

    constexpr double kMinStep = 0x1.0p-30;
    while (res > options.tol && n > 1) {
        if (report.iterations >= options.max_iter)
            throw ConvergenceError("damped Newton reached max_iter = " + std::to_string(options.max_iter) +
                                       " with residual " + std::to_string(res),
                                   report.history);
        // Solve (-H) d = r on the indices 1..n-1 with d_0 = 0.
        const Eigen::Index m = static_cast<Eigen::Index>(n) - 1;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(sys.hessian.nonZeros()));
        for (Eigen::Index k = 0; k < sys.hessian.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(sys.hessian, k); it; ++it)
                if (it.row() > 0 && it.col() > 0) trip.emplace_back(it.row() - 1, it.col() - 1, -it.value());
        Eigen::SparseMatrix<double> a(m, m);
        a.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
        if (solver.info() != Eigen::Success) fail(ErrorKind::degeneracy, "Newton system is singular");
        const Eigen::VectorXd d_red = solver.solve(sys.residual.tail(m));
        if (solver.info() != Eigen::Success || !d_red.allFinite()) fail(ErrorKind::degeneracy, "Newton solve failed");

        double alpha = 1.0;
        for (;;) {
            std::vector<double> trial = w;
            for (Eigen::Index k = 0; k < m; ++k) trial[static_cast<std::size_t>(k + 1)] += alpha * d_red(k);
            KantorovichSystem next = kantorovich_system(target.sites, trial, poly, f, target.masses);
            const double next_min = *std::min_element(next.masses.begin(), next.masses.end());
            const double next_res = relative_residual(next.masses, target.masses);
            if (next_min >= eps0 && next_res <= (1.0 - 0.5 * alpha) * res) {
                w = std::move(trial);
                sys = std::move(next);
                res = next_res;
                break;
            }
            alpha *= 0.5;
            ++report.damping_events;
            if (alpha < kMinStep) fail(ErrorKind::degeneracy, "Newton step damped below 2^-30 (empty-cell lock)");
        }
        ++report.iterations;
        report.history.push_back(res);
    }
    report.final_residual = res;

    SolveResult result;
    result.potential = BrenierPotential(target.sites, w, source).normalized();
    result.masses = std::move(sys.masses);
    result.diagram = std::move(sys.diagram);
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.report = std::move(report);
    return result;
}

LegendreTransform::LegendreTransform(const BrenierPotential& u, const PowerDiagram& diagram) {
    if (diagram.size() != u.size()) fail(ErrorKind::state, "diagram does not belong to the potential");
    std::vector<std::pair<Vec2, double>> verts;
    for (std::size_t i = 0; i < diagram.size(); ++i) {
        const auto& poly = diagram.cells[i].polygon;
        if (poly.empty()) fail(ErrorKind::state, "Legendre transform needs every cell nonempty");
        for (const auto& v : poly.vertices) verts.push_back({v, dot(v, u.sites()[i]) - u.weights()[i]});
    }
    std::sort(verts.begin(), verts.end(), [](const auto& a, const auto& b) {
        return a.first.x < b.first.x || (a.first.x == b.first.x && (a.first.y < b.first.y || (a.first.y == b.first.y && a.second > b.second)));
    });
    std::vector<Vec2> slopes;
    std::vector<double> offsets;
    for (const auto& [v, val] : verts) {
        if (!slopes.empty() && slopes.back() == v) continue;
        slopes.push_back(v);
        offsets.push_back(val);
    }
    index_ = AffineMax(std::move(slopes), std::move(offsets));
    std::vector<double> dual(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) dual[i] = index_.eval(u.sites()[i]).first;
    dual_sites_ = AffineMax(u.sites(), std::move(dual));
}

LegendreTransform legendre(const BrenierPotential& u, const PowerDiagram& diagram) { return LegendreTransform(u, diagram); }

LegendreTransform legendre(const BrenierPotential& u) {
    return LegendreTransform(u, power_diagram(u.sites(), u.weights(), u.source().boundary));
}

nlohmann::json to_json(const BrenierPotential& u) {
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& y : u.sites()) sites.push_back({y.x, y.y});
    return {{"sites", sites}, {"weights", u.weights()}, {"normalization", "min-zero"}};
}

BrenierPotential potential_from_json(const nlohmann::json& j, const Domain& source) {
    try {
        std::vector<Vec2> sites;
        for (const auto& s : j.at("sites")) sites.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
        auto w = j.at("weights").get<std::vector<double>>();
        return BrenierPotential(std::move(sites), std::move(w), source);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("potential: ") + e.what());
    }
}

}  // namespace sdot
