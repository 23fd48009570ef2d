#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdot/density.hpp"
#include "sdot/error.hpp"
#include "sdot/ma_dirichlet.hpp"

#include <cmath>
#include <numbers>

using namespace sdot;

namespace {

Polygon square(double lo, double hi) { return Polygon{{{lo, lo}, {hi, lo}, {hi, hi}, {lo, hi}}}; }

double half_norm2(const Vec2& x) { return 0.5 * norm2(x); }

double max_node_error(const MaSolution& s, const BoundaryData& exact) {
    double e = 0.0;
    for (std::size_t k = 0; k < s.w.interior(); ++k) e = std::max(e, std::abs(s.w.values()[k] - exact(s.w.nodes()[k])));
    return e;
}

// Subgradient area at node k straight from its defining inequalities
// v_j >= v_k + p . (x_j - x_k), one halfplane per other node.
double brute_subgradient_area(const std::vector<Vec2>& x, const std::vector<double>& v, std::size_t k) {
    std::vector<Vec2> poly{{-1e3, -1e3}, {1e3, -1e3}, {1e3, 1e3}, {-1e3, 1e3}};
    std::vector<int> l(4, -1);
    for (std::size_t j = 0; j < x.size() && !poly.empty(); ++j)
        if (j != k) clip_labeled(poly, l, make_halfplane(x[j] - x[k], v[j] - v[k]), static_cast<int>(j));
    return poly.empty() ? 0.0 : area(Polygon{poly});
}

}  // namespace

TEST_CASE("lattice nodes and Lebesgue targets") {
    const Polygon sq = square(-1, 1);
    const NodeSet ns = lattice_nodes(sq, 0.5);
    CHECK(ns.interior == 9);
    CHECK(ns.nodes.size() == 9 + 16);
    const auto t = lebesgue_targets(ns, sq);
    double total = 0.0;
    for (double a : t) total += a;
    CHECK(total == doctest::Approx(4.0).epsilon(1e-12));
    // Corner node of the 3x3 block owns [-1,-0.25]^2.
    CHECK(t[0] == doctest::Approx(0.5625).epsilon(1e-12));
}

TEST_CASE("subgradient areas match the defining inequalities") {
    Rng rng(2);
    const NodeSet ns = lattice_nodes(square(-1, 1), 0.4);
    std::vector<double> v;
    for (std::size_t k = 0; k < ns.nodes.size(); ++k) {
        const Vec2 x = ns.nodes[k];
        v.push_back(0.5 * norm2(x) + 0.3 * std::pow(x.x, 4) + (k < ns.interior ? rng.uniform(-0.01, 0.0) : 0.0));
    }
    double half = 1.0;
    const auto a = subgradient_areas(ns.nodes, v, ns.interior, half);
    for (std::size_t k = 0; k < ns.interior; ++k) CHECK(a[k] == doctest::Approx(brute_subgradient_area(ns.nodes, v, k)).epsilon(1e-10));
}

TEST_CASE("one interior node: the pyramid closed form") {
    // Corners of the unit square at 0, node at the center at depth d: the
    // subgradient is the diamond |p1| + |p2| <= 2d of area 8 d^2.
    const Polygon sq = square(0, 1);
    NodeSet ns;
    ns.nodes = {{0.5, 0.5}, {0, 0}, {1, 0}, {1, 1}, {0, 1}};
    ns.interior = 1;
    const double target = 0.02;
    const double d = std::sqrt(target / 8.0);
    const BoundaryData zero = [](const Vec2&) { return 0.0; };
    for (MaMethod m : {MaMethod::newton, MaMethod::sweeps}) {
        MaOptions opt;
        opt.method = m;
        opt.tol = 1e-10;
        const MaSolution s = op_solve(sq, ns, zero, {target}, opt);
        CHECK(s.w.values()[0] == doctest::Approx(-d).epsilon(1e-9));
        // Envelope of the pyramid at a quarter point on the diagonal.
        CHECK(s.w({0.25, 0.25}) == doctest::Approx(-0.5 * d).epsilon(1e-9));
    }
}

TEST_CASE("quadratic data: node error shrinks under mesh halving") {
    const Polygon sq = square(-1, 1);
    double prev = 0.0;
    for (double h : {0.2, 0.1, 0.05}) {
        const MaSolution s = op_solve(sq, half_norm2, h);
        CHECK(s.report.final_residual <= 1e-9);
        CHECK(s.w.convex_position_error() <= 1e-9);
        const double e = max_node_error(s, half_norm2);
        MESSAGE("h = " << h << " max node error = " << e);
        if (prev > 0.0) CHECK(prev / e >= 1.8);
        prev = e;
    }
}

TEST_CASE("affine data with vanishing measure reproduces the affine function") {
    const Polygon sq = square(-1, 1);
    const BoundaryData lin = [](const Vec2& x) { return 0.3 + 0.5 * x.x - 0.2 * x.y; };
    const NodeSet ns = lattice_nodes(sq, 0.25);
    auto t = lebesgue_targets(ns, sq);
    for (double& a : t) a *= 1e-10;
    const MaSolution s = op_solve(sq, ns, lin, t);
    CHECK(max_node_error(s, lin) <= 1e-5);
    CHECK(s.w({0.37, -0.61}) == doctest::Approx(lin({0.37, -0.61})).epsilon(1e-5));
}

TEST_CASE("raising boundary data never lowers the solution") {
    const Polygon sq = square(-1, 1);
    const BoundaryData raised = [](const Vec2& x) { return half_norm2(x) + 0.1 * (1.0 + x.x); };
    const MaSolution a = op_solve(sq, half_norm2, 0.2);
    const MaSolution b = op_solve(sq, raised, 0.2);
    for (std::size_t k = 0; k < a.w.size(); ++k) CHECK(b.w.values()[k] >= a.w.values()[k] - 1e-12);
}

TEST_CASE("Newton and monotone sweeps reach the same fixed point") {
    const Polygon sq = square(-1, 1);
    const NodeSet ns = lattice_nodes(sq, 0.5);
    const auto t = lebesgue_targets(ns, sq);
    MaOptions sweeps;
    sweeps.method = MaMethod::sweeps;
    sweeps.tol = 1e-8;
    sweeps.max_iter = 5000;
    const MaSolution a = op_solve(sq, ns, half_norm2, t);
    const MaSolution b = op_solve(sq, ns, half_norm2, t, sweeps);
    for (std::size_t k = 0; k < ns.interior; ++k) CHECK(a.w.values()[k] == doctest::Approx(b.w.values()[k]).epsilon(1e-6));
}

TEST_CASE("convex-position check detects a node above its envelope") {
    const Polygon sq = square(-1, 1);
    const MaSolution s = op_solve(sq, half_norm2, 0.25);
    std::vector<double> v = s.w.values();
    v[0] += 0.5;
    const NodalConvexFunction bad(sq, s.w.nodes(), v, s.w.interior());
    CHECK(bad.convex_position_error() > 0.1);
}

TEST_CASE("errors") {
    const Polygon sq = square(-1, 1);
    const BoundaryData concave = [](const Vec2& x) { return -norm2(x); };
    CHECK_THROWS_AS(op_solve(sq, concave, 0.25), Error);
    const Polygon notch{{{0, 0}, {2, 0}, {2, 2}, {1, 0.5}, {0, 2}}};
    CHECK_THROWS_AS(op_solve(notch, half_norm2, 0.25), Error);
    MaOptions tight;
    tight.max_iter = 1;
    tight.tol = 1e-14;
    CHECK_THROWS_AS(op_solve(sq, half_norm2, 0.1, tight), ConvergenceError);
    const Evaluator w = [](const Vec2&) { return 0.0; };
    BarrierParams p;
    p.tau = 0.5;
    CHECK_THROWS_AS(barrier_pair(w, p), Error);
    p.tau = 0.25;
    p.h = 1.0;
    CHECK_THROWS_AS(barrier_pair(w, p), Error);
}

TEST_CASE("barriers equal h on the boundary and are ordered on the upper half") {
    BarrierParams p;
    p.h = 0.25;
    p.tau = 0.25;
    const Evaluator flat = [&](const Vec2&) { return p.h; };
    const auto [hat, check] = barrier_pair(flat, p);
    CHECK(hat({0.3, 0.1}) == p.h);

    // Lens: the section of |x|^2/2 at height h above the line x2 = t, doubled.
    p.h = 1.0 / 16;
    p.eps = 0.05;
    const double r = std::sqrt(2 * p.h), t = std::pow(p.h, 1 - 3 * p.eps);
    const double th = std::asin(t / r);
    std::vector<Vec2> arc;
    for (int k = 0; k <= 64; ++k) {
        const double a = th + (std::numbers::pi - 2 * th) * k / 64;
        arc.push_back({r * std::cos(a), r * std::sin(a)});
    }
    const Polygon lens = reflect_double(Polygon{arc}, t);
    const BoundaryData hval = [&](const Vec2&) { return p.h; };
    const MaSolution s = op_solve(lens, hval, r / 8);
    const NodalConvexFunction w = s.w;
    const auto [hat2, check2] = barrier_pair([w](const Vec2& x) { return w(x); }, p);
    int probed = 0;
    for (const auto& x : w.nodes())
        if (x.y >= t) {
            CHECK(hat2(x) >= check2(x));
            ++probed;
        }
    CHECK(probed > 10);
}
