#include "sdot/ma_dirichlet.hpp"

#include "sdot/density.hpp"
#include "sdot/error.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sdot {

namespace {

Polygon centered_box(double half) { return Polygon{{{-half, -half}, {half, -half}, {half, half}, {-half, half}}}; }

double value_range(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

// Smallest gap between consecutive boundary nodes, which bounds the slopes of
// facets spanned by boundary nodes alone.
double min_boundary_gap(const std::vector<Vec2>& nodes, std::size_t interior) {
    double gap = std::numeric_limits<double>::infinity();
    const std::size_t m = nodes.size() - interior;
    for (std::size_t k = 0; k < m; ++k)
        gap = std::min(gap, norm(nodes[interior + (k + 1) % m] - nodes[interior + k]));
    return gap;
}

double initial_half(const std::vector<Vec2>& nodes, const std::vector<double>& values, std::size_t interior) {
    return 1.0 + 4.0 * value_range(values) / min_boundary_gap(nodes, interior);
}

// Subgradient area of node k alone, by clipping against every other node.
double single_area(const std::vector<Vec2>& nodes, const std::vector<double>& values, std::size_t k, double& half) {
    for (;;) {
        const Polygon box = centered_box(half);
        std::vector<Vec2> v = box.vertices;
        std::vector<int> labels(4, -1);
        for (std::size_t j = 0; j < nodes.size() && !v.empty(); ++j)
            if (j != k) clip_labeled(v, labels, make_halfplane(nodes[j] - nodes[k], values[j] - values[k]), static_cast<int>(j));
        if (v.empty()) return 0.0;
        if (std::find(labels.begin(), labels.end(), -1) == labels.end()) return area(Polygon{v});
        half *= 2.0;
    }
}

void check_boundary_data(const Polygon& region, const std::vector<Vec2>& nodes, const std::vector<double>& values,
                         std::size_t interior) {
    // Boundary nodes run around the region; split them into edges at the
    // region vertices and check discrete convexity along each edge.
    const double scale = 1.0 + std::abs(*std::max_element(values.begin() + static_cast<std::ptrdiff_t>(interior), values.end(),
                                                          [](double a, double b) { return std::abs(a) < std::abs(b); }));
    const std::size_t m = nodes.size() - interior;
    std::vector<std::size_t> corner;
    for (std::size_t k = 0; k < m; ++k)
        if (std::find(region.vertices.begin(), region.vertices.end(), nodes[interior + k]) != region.vertices.end())
            corner.push_back(k);
    for (std::size_t c = 0; c < corner.size(); ++c) {
        const std::size_t a = corner[c];
        const std::size_t b = c + 1 < corner.size() ? corner[c + 1] : corner[0] + m;
        for (std::size_t k = a + 1; k < b; ++k) {
            const auto at = [&](std::size_t q) { return interior + q % m; };
            const Vec2 p0 = nodes[at(k - 1)], p1 = nodes[at(k)], p2 = nodes[at(k + 1)];
            const double d0 = (values[at(k)] - values[at(k - 1)]) / norm(p1 - p0);
            const double d1 = (values[at(k + 1)] - values[at(k)]) / norm(p2 - p1);
            if (d1 - d0 < -1e-10 * scale / std::min(norm(p1 - p0), norm(p2 - p1)))
                fail(ErrorKind::data, "boundary data is not convex along a region edge");
        }
    }
}

}  // namespace

NodalConvexFunction::NodalConvexFunction(Polygon region, std::vector<Vec2> nodes, std::vector<double> values, std::size_t interior)
    : region_(std::move(region)), nodes_(std::move(nodes)), values_(std::move(values)), interior_(interior) {
    if (nodes_.size() != values_.size()) fail(ErrorKind::parameter, "nodes and values differ in length");
    if (nodes_.size() - interior_ < 3) fail(ErrorKind::parameter, "need at least three boundary nodes");
    double half = initial_half(nodes_, values_, interior_);
    subgradient_areas(nodes_, values_, interior_, half);
    // A much larger box keeps the facets spanned by boundary nodes alone.
    const double big = 1e3 * half;
    const PowerDiagram pd = power_diagram(nodes_, values_, centered_box(big));
    std::vector<Vec2> slopes;
    std::vector<double> offsets;
    for (std::size_t k = 0; k < pd.size(); ++k)
        for (const Vec2& p : pd.cells[k].polygon.vertices) {
            slopes.push_back(p);
            offsets.push_back(dot(p, nodes_[k]) - values_[k]);
        }
    facets_ = std::make_shared<const AffineMax>(std::move(slopes), std::move(offsets));
}

double NodalConvexFunction::operator()(const Vec2& x) const {
    if (!facets_) fail(ErrorKind::state, "nodal function is empty");
    return facets_->eval(x).first;
}

double NodalConvexFunction::convex_position_error() const {
    double err = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) err = std::max(err, std::abs((*this)(nodes_[k]) - values_[k]));
    return err;
}

std::string NodalConvexFunction::to_csv() const {
    std::string out = "x,y,value\n";
    char buf[96];
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", nodes_[k].x, nodes_[k].y, values_[k]);
        out += buf;
    }
    return out;
}

NodeSet lattice_nodes(const Polygon& region, double h_mesh, const Vec2& origin) {
    if (!(h_mesh > 0.0) || !std::isfinite(h_mesh)) fail(ErrorKind::parameter, "mesh spacing must be positive");
    validate_polygon(region);
    if (!is_convex(region)) fail(ErrorKind::geometry, "Dirichlet region must be convex");
    NodeSet out;
    const BoundingBox b = bounding_box(region);
    const long i0 = static_cast<long>(std::ceil((b.lo.x - origin.x) / h_mesh));
    const long i1 = static_cast<long>(std::floor((b.hi.x - origin.x) / h_mesh));
    const long j0 = static_cast<long>(std::ceil((b.lo.y - origin.y) / h_mesh));
    const long j1 = static_cast<long>(std::floor((b.hi.y - origin.y) / h_mesh));
    for (long i = i0; i <= i1; ++i)
        for (long j = j0; j <= j1; ++j) {
            const Vec2 p{origin.x + static_cast<double>(i) * h_mesh, origin.y + static_cast<double>(j) * h_mesh};
            if (contains(region, p, 0.0) && distance_to_boundary(region, p) >= 0.25 * h_mesh) out.nodes.push_back(p);
        }
    out.interior = out.nodes.size();
    const std::size_t n = region.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 a = region[k], e = region[(k + 1) % n] - a;
        const int pieces = std::max(1, static_cast<int>(std::ceil(norm(e) / h_mesh - 1e-9)));
        for (int q = 0; q < pieces; ++q) out.nodes.push_back(a + e * (static_cast<double>(q) / pieces));
    }
    return out;
}

std::vector<double> lebesgue_targets(const NodeSet& nodes, const Polygon& region) {
    if (nodes.interior == 0) return {};
    const std::vector<Vec2> inner(nodes.nodes.begin(), nodes.nodes.begin() + static_cast<std::ptrdiff_t>(nodes.interior));
    return voronoi_masses(DensityField::constant(1.0), region, inner);
}

std::vector<double> subgradient_areas(const std::vector<Vec2>& nodes, const std::vector<double>& values, std::size_t interior,
                                      double& half, PowerDiagram* diagram) {
    for (int attempt = 0;; ++attempt) {
        PowerDiagram pd = power_diagram(nodes, values, centered_box(half));
        bool inside = true;
        for (std::size_t k = 0; k < interior && inside; ++k) inside = !pd.cells[k].touches_boundary;
        if (inside) {
            std::vector<double> a(interior, 0.0);
            for (std::size_t k = 0; k < interior; ++k)
                if (!pd.cells[k].polygon.empty()) a[k] = area(pd.cells[k].polygon);
            if (diagram) *diagram = std::move(pd);
            return a;
        }
        if (attempt > 60) fail(ErrorKind::degeneracy, "interior subgradient is unbounded");
        half *= 2.0;
    }
}

MaSolution op_solve(const Polygon& region, const NodeSet& nodes, const BoundaryData& g, const std::vector<double>& targets,
                    const MaOptions& options) {
    validate_polygon(region);
    if (!is_convex(region)) fail(ErrorKind::geometry, "Dirichlet region must be convex");
    const std::size_t n = nodes.nodes.size(), ni = nodes.interior;
    if (targets.size() != ni) fail(ErrorKind::parameter, "one target per interior node is required");
    for (double t : targets)
        if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::parameter, "targets must be positive");
    if (!(options.tol > 0.0)) fail(ErrorKind::parameter, "tolerance must be positive");
    std::vector<double> v(n, 0.0);
    for (std::size_t k = ni; k < n; ++k) v[k] = g(nodes.nodes[k]);
    check_boundary_data(region, nodes.nodes, v, ni);

    MaSolution sol;
    sol.targets = targets;
    auto residual = [&](const std::vector<double>& a) {
        double r = 0.0;
        for (std::size_t k = 0; k < ni; ++k) r = std::max(r, std::abs(a[k] - targets[k]) / targets[k]);
        return r;
    };

    if (ni > 0 && options.method == MaMethod::newton) {
        // Strictly convex start below the boundary data: every interior node
        // lies on the envelope with a cell of positive area.
        double total = 0.0;
        for (double t : targets) total += t;
        const double s = std::sqrt(total / area(region));
        const Vec2 c = centroid(region);
        double a0 = std::numeric_limits<double>::infinity();
        for (std::size_t k = ni; k < n; ++k) a0 = std::min(a0, v[k] - 0.5 * s * norm2(nodes.nodes[k] - c));
        for (std::size_t k = 0; k < ni; ++k) v[k] = a0 + 0.5 * s * norm2(nodes.nodes[k] - c);

        double half = initial_half(nodes.nodes, v, ni);
        PowerDiagram pd;
        std::vector<double> a = subgradient_areas(nodes.nodes, v, ni, half, &pd);
        const double eps0 = 0.5 * std::min(*std::min_element(targets.begin(), targets.end()), *std::min_element(a.begin(), a.end()));
        if (!(eps0 > 0.0)) fail(ErrorKind::degeneracy, "initial envelope leaves an interior node without subgradient");
        double res = residual(a);
        sol.report.history.push_back(res);
        while (res > options.tol) {
            if (sol.report.iterations >= options.max_iter)
                throw ConvergenceError("Dirichlet solve reached max_iter = " + std::to_string(options.max_iter), sol.report.history);
            // (-H) d = a - t on the interior block; H_kj = length / |x_k - x_j|.
            std::vector<Eigen::Triplet<double>> trip;
            std::vector<double> diag(ni, 0.0);
            for (const auto& adj : pd.adjacency) {
                const std::size_t i = static_cast<std::size_t>(adj.i), j = static_cast<std::size_t>(adj.j);
                const double w = adj.length / norm(nodes.nodes[i] - nodes.nodes[j]);
                if (i < ni) diag[i] += w;
                if (j < ni) diag[j] += w;
                if (i < ni && j < ni) {
                    trip.emplace_back(static_cast<int>(i), static_cast<int>(j), -w);
                    trip.emplace_back(static_cast<int>(j), static_cast<int>(i), -w);
                }
            }
            for (std::size_t k = 0; k < ni; ++k) trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k]);
            Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(ni));
            m.setFromTriplets(trip.begin(), trip.end());
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(ni));
            for (std::size_t k = 0; k < ni; ++k) rhs(static_cast<Eigen::Index>(k)) = a[k] - targets[k];
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(m);
            if (solver.info() != Eigen::Success) fail(ErrorKind::degeneracy, "Dirichlet Newton system is singular");
            const Eigen::VectorXd d = solver.solve(rhs);
            if (solver.info() != Eigen::Success || !d.allFinite()) fail(ErrorKind::degeneracy, "Dirichlet Newton solve failed");
            double alpha = 1.0;
            for (;;) {
                std::vector<double> trial = v;
                for (std::size_t k = 0; k < ni; ++k) trial[k] += alpha * d(static_cast<Eigen::Index>(k));
                PowerDiagram next_pd;
                std::vector<double> next = subgradient_areas(nodes.nodes, trial, ni, half, &next_pd);
                const double next_res = residual(next);
                if (*std::min_element(next.begin(), next.end()) >= eps0 && next_res <= (1.0 - 0.5 * alpha) * res) {
                    v = std::move(trial);
                    a = std::move(next);
                    pd = std::move(next_pd);
                    res = next_res;
                    break;
                }
                alpha *= 0.5;
                ++sol.report.damping_events;
                if (alpha < 0x1.0p-30) fail(ErrorKind::degeneracy, "Dirichlet Newton step damped below 2^-30");
            }
            ++sol.report.iterations;
            sol.report.history.push_back(res);
        }
        sol.measures = std::move(a);
        sol.report.final_residual = res;
    } else if (ni > 0) {
        // Monotone sweeps from the envelope of the boundary data: each node is
        // lowered until its measure meets its target.
        const std::vector<Vec2> bnodes(nodes.nodes.begin() + static_cast<std::ptrdiff_t>(ni), nodes.nodes.end());
        const std::vector<double> bvals(v.begin() + static_cast<std::ptrdiff_t>(ni), v.end());
        const NodalConvexFunction envelope(region, bnodes, bvals, 0);
        for (std::size_t k = 0; k < ni; ++k) v[k] = envelope(nodes.nodes[k]);
        double half = initial_half(nodes.nodes, v, ni);
        const double step0 = std::max(1e-3 * (value_range(v) + 1.0) * std::sqrt(area(region)), 1e-12);
        std::vector<double> a = subgradient_areas(nodes.nodes, v, ni, half);
        double res = residual(a);
        sol.report.history.push_back(res);
        while (res > options.tol) {
            if (sol.report.iterations >= options.max_iter)
                throw ConvergenceError("Dirichlet sweeps reached max_iter = " + std::to_string(options.max_iter), sol.report.history);
            for (std::size_t k = 0; k < ni; ++k) {
                auto measure = [&](double value) {
                    const double keep = v[k];
                    v[k] = value;
                    const double m = single_area(nodes.nodes, v, k, half);
                    v[k] = keep;
                    return m;
                };
                double hi = v[k];
                if (measure(hi) >= targets[k]) continue;
                double step = step0, lo = hi - step;
                while (measure(lo) < targets[k]) {
                    hi = lo;
                    step *= 2.0;
                    lo = hi - step;
                }
                while (hi - lo > 1e-12 * std::max(1.0, std::abs(hi))) {
                    const double mid = 0.5 * (lo + hi);
                    (measure(mid) < targets[k] ? hi : lo) = mid;
                }
                v[k] = 0.5 * (lo + hi);
            }
            a = subgradient_areas(nodes.nodes, v, ni, half);
            res = residual(a);
            ++sol.report.iterations;
            sol.report.history.push_back(res);
        }
        sol.measures = std::move(a);
        sol.report.final_residual = res;
    }
    sol.w = NodalConvexFunction(region, nodes.nodes, std::move(v), ni);
    return sol;
}

MaSolution op_solve(const Polygon& region, const BoundaryData& g, double h_mesh, const MaOptions& options) {
    const NodeSet nodes = lattice_nodes(region, h_mesh);
    return op_solve(region, nodes, g, lebesgue_targets(nodes, region), options);
}

std::pair<Evaluator, Evaluator> barrier_pair(const Evaluator& w, const BarrierParams& p) {
    if (!(p.tau > 0.0 && p.tau < 0.5)) fail(ErrorKind::parameter, "tau must lie in (0, 1/2)");
    if (!(p.h > 0.0 && p.h < 1.0)) fail(ErrorKind::parameter, "h must lie in (0, 1)");
    if (!(p.eps > 0.0 && p.eps < 0.25)) fail(ErrorKind::parameter, "eps must lie in (0, 1/4)");
    if (!std::isfinite(p.c1) || !std::isfinite(p.c)) fail(ErrorKind::parameter, "barrier constants must be finite");
    const double ht = std::pow(p.h, p.tau);
    const double lo = std::sqrt(1.0 - ht), hi = std::sqrt(1.0 + ht);
    const double shift = p.c * std::pow(p.h, 0.5 - p.eps);
    const double tilt = p.c1 * std::pow(p.h, 1.0 - 4.0 * p.eps);
    const double h = p.h;
    Evaluator hat = [w, lo, h](const Vec2& x) { return lo * w(x) - lo * h + h; };
    Evaluator check = [w, hi, h, shift, tilt](const Vec2& x) { return hi * w(x) - hi * h + h + (x.y - shift) * tilt; };
    return {hat, check};
}

}  // namespace sdot
