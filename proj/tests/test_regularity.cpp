#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdot/domain.hpp"
#include "sdot/error.hpp"
#include "sdot/regularity.hpp"

#include <cmath>
#include <numbers>

using namespace sdot;

namespace {

Domain square_domain() {
    ShapeSpec s;
    s.kind = ShapeKind::square;
    s.side = 2.0;
    return make_domain(s);
}

// u(x) = max_j (x . y_j - |y_j|^2 / 2) over a lattice of spacing `step`:
// |x|^2/2 minus half the squared distance to the lattice.
BrenierPotential lattice_identity(const Domain& d, double step, const Eigen::Matrix2d& stretch = Eigen::Matrix2d::Identity()) {
    std::vector<Vec2> y;
    std::vector<double> w;
    const int m = static_cast<int>(std::round(1.0 / step));
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j) {
            const Vec2 q{i * step, j * step};
            y.push_back(from_eigen(stretch.inverse() * to_eigen(q)));
            w.push_back(0.5 * norm2(q));
        }
    Domain s = d;
    s.boundary = transform(d.boundary, stretch);
    return BrenierPotential(std::move(y), std::move(w), std::move(s));
}

double frob(const Eigen::Matrix2d& m) { return m.norm(); }

}  // namespace

TEST_CASE("section of the identity potential is a disk cap") {
    const BrenierPotential u = lattice_identity(square_domain(), 0.02);
    const double h = 0.02, r = std::sqrt(2 * h);
    const Section interior = section(u, {0.0, 0.0}, h);
    CHECK_FALSE(interior.whole_source);
    CHECK(area(interior.polygon) == doctest::Approx(std::numbers::pi * r * r).epsilon(0.05));
    const Section edge = section(u, {0.0, -1.0}, h);
    CHECK(area(edge.polygon) == doctest::Approx(0.5 * std::numbers::pi * r * r).epsilon(0.05));
    CHECK_FALSE(edge.far_boundary);
    const Section all = section(u, {0.0, 0.0}, 10.0);
    CHECK(all.whole_source);
}

TEST_CASE("boundary frame on a square edge") {
    const Polygon sq = square_domain().boundary;
    const BoundaryFrame f = boundary_frame(sq, {0.3, -1.0});
    CHECK(f.n.x == doctest::Approx(0.0));
    CHECK(f.n.y == doctest::Approx(1.0));
    const Vec2 z = f.to_local({0.5, -0.8});
    CHECK(std::abs(z.x) == doctest::Approx(0.2));
    CHECK(z.y == doctest::Approx(0.2));
}

TEST_CASE("normalization matrix") {
    const Eigen::Matrix2d i = normalization_matrix(Eigen::Matrix2d::Identity());
    CHECK(frob(i - Eigen::Matrix2d::Identity()) <= 1e-14);
    Eigen::Matrix2d h;
    h << 4, 0, 0, 1;
    Eigen::Matrix2d expect;
    expect << std::sqrt(0.5), 0, 0, std::sqrt(2.0);
    const Eigen::Matrix2d a = normalization_matrix(h);
    CHECK(frob(a - expect) <= 1e-12);
    CHECK(a.determinant() == doctest::Approx(1.0));
    h << 1, 0.01, 0.01, 1;
    CHECK(frob(normalization_matrix(h) - Eigen::Matrix2d::Identity()) <= 0.02);
    h << 1, 0, 0, -1;
    CHECK_THROWS_AS(normalization_matrix(h), Error);
}

TEST_CASE("Hessian estimate is exact on quadratics") {
    const Polygon sq = square_domain().boundary;
    const ScalarField q = [](const Vec2& x) { return 1.5 * x.x * x.x + 0.4 * x.x * x.y + 0.8 * x.y * x.y - x.x + 2.0; };
    const HessianEstimate e = hessian_estimate(q, sq, {0.1, -0.2}, 0.1);
    Eigen::Matrix2d expect;
    expect << 3.0, 0.4, 0.4, 1.6;
    CHECK(frob(e.hessian - expect) <= 1e-9);
    const ScalarField lin = [](const Vec2& x) { return 2.0 * x.x - x.y; };
    CHECK(frob(hessian_estimate(lin, sq, {0, 0}, 0.1).hessian) <= 1e-9);
    CHECK_THROWS_AS(hessian_estimate(q, sq, {0.95, 0.0}, 0.1), Error);
}

TEST_CASE("Hölder fit recovers known exponents") {
    const Polygon sq = square_domain().boundary;
    const std::vector<double> radii{0.05, 0.1, 0.2, 0.4};
    const ScalarField quad = [](const Vec2& x) { return 0.5 * norm2(x); };
    const HolderFit a = holder_fit(quad, {0, 0}, {0, 0}, sq, radii);
    CHECK(a.beta_hat == doctest::Approx(1.0).epsilon(0.01));
    const ScalarField pow15 = [](const Vec2& x) { return std::pow(norm(x), 1.5); };
    CHECK(holder_fit(pow15, {0, 0}, {0, 0}, sq, radii).beta_hat == doctest::Approx(0.5).epsilon(0.02));
    // Adding an affine function and shifting the subgradient changes nothing.
    const ScalarField tilted = [](const Vec2& x) { return std::pow(norm(x), 1.5) + 0.3 * x.x - 0.7 * x.y + 1.0; };
    CHECK(holder_fit(tilted, {0.3, -0.7}, {0, 0}, sq, radii).beta_hat == doctest::Approx(0.5).epsilon(0.02));
    const ScalarField lin = [](const Vec2& x) { return x.x; };
    CHECK_THROWS_AS(holder_fit(lin, {1, 0}, {0, 0}, sq, radii), Error);
}

TEST_CASE("Hölder fit of a discrete identity potential at a boundary point") {
    const BrenierPotential u = lattice_identity(square_domain(), 0.02);
    const HolderFit f = holder_fit(u, {0.01, -1.0}, {0.1, 0.2, 0.4});
    CHECK(f.beta_hat == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("flatness of a rescaled disk boundary") {
    ShapeSpec s;
    s.kind = ShapeKind::disk;
    s.n_vertices = 4096;
    const Domain disk = make_domain(s);
    std::vector<Vec2> y{{0, 0}, {0.5, 0}};
    const BrenierPotential u(y, {0.0, 0.2}, disk);
    const Vec2 x0 = disk.boundary[0];
    const Section sec = section(u, x0, 0.01);
    const Rescaling r1 = localize_rescale(sec, u, 0.1);
    CHECK(r1.flatness == doctest::Approx(0.1).epsilon(0.02));
    const Rescaling r2 = localize_rescale(sec, u, 0.05);
    CHECK(r2.flatness == doctest::Approx(0.5 * r1.flatness).epsilon(0.02));
    CHECK(r1.density_oscillation == 0.0);
    // The rescaled potential is (u - l)(x0 + eps0 z) / eps0^2.
    const Vec2 z{0.3, -0.4};
    const Vec2 x = x0 + z * 0.1;
    const double l = u.value(x0) + dot(sec.subgradient, x - x0);
    CHECK(r1.potential.value(z) == doctest::Approx((u.value(x) - l) / 0.01).epsilon(1e-9));
}

TEST_CASE("identity potential: iterated sections stay near the identity") {
    const BrenierPotential u = lattice_identity(square_domain(), 0.01);
    const IterationTrace t = iterate_sections(u, {0.0, -1.0}, 0.1, 10.0, 2);
    REQUIRE(t.steps.size() == 2);
    for (const auto& s : t.steps) {
        CHECK(frob(s.A - Eigen::Matrix2d::Identity()) <= 0.1);
        CHECK(s.M.determinant() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(s.inner_pass);
        CHECK(s.outer_pass);
        CHECK(s.ho1_inner_pass);
        CHECK(s.ho1_outer_pass);
    }
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("k,h,a11,a12,a22,det_Mk,norm_Mk,inner_pass,outer_pass\n", 0) == 0);
}

TEST_CASE("section iteration under an anisotropic stretch") {
    // u_S(x) = u(S^-1 x) with det S = 1: sections are stretched by S and
    // the first normalization is S.
    Eigen::Matrix2d s;
    s << std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    const BrenierPotential u = lattice_identity(square_domain(), 0.01, s);
    const IterationTrace t = iterate_sections(u, {0.0, -1.0 / std::sqrt(2.0)}, 0.1, 10.0, 1);
    REQUIRE(t.steps.size() == 1);
    CHECK(frob(t.steps[0].A - s) <= 0.1);
    CHECK(t.steps[0].inner_pass);
    CHECK(t.steps[0].outer_pass);
}

TEST_CASE("comparison mode agrees with the ellipse fit on the identity") {
    const BrenierPotential u = lattice_identity(square_domain(), 0.01);
    const IterationTrace t = iterate_sections(u, {0.0, -1.0}, 0.1, 10.0, 1, NormalizationMode::comparison);
    REQUIRE(t.steps.size() == 1);
    CHECK(t.steps[0].mode == "comparison");
    CHECK(frob(t.steps[0].A - Eigen::Matrix2d::Identity()) <= 0.1);
}

TEST_CASE("good shape ratios scale with an anisotropic stretch") {
    const std::vector<double> hs{0.02, 0.005};
    const ShapeLadder a = good_shape(lattice_identity(square_domain(), 0.01), {0.0, -1.0}, hs, 0.05);
    Eigen::Matrix2d s;
    s << 4.0, 0.0, 0.0, 1.0;
    const ShapeLadder b = good_shape(lattice_identity(square_domain(), 0.01, s), {0.0, -1.0}, hs, 0.05);
    for (std::size_t k = 0; k < hs.size(); ++k) {
        REQUIRE(std::isfinite(a.ratios[k]));
        CHECK(a.ratios[k] > 1.0);
        CHECK(b.ratios[k] == doctest::Approx(4.0 * a.ratios[k]).epsilon(0.01));
    }
}

TEST_CASE("free boundary between two sites is a straight segment") {
    const Polygon sq = square_domain().boundary;
    std::vector<Vec2> y{{-1, 0.2}, {1, -0.1}};
    std::vector<double> w{0.0, 0.1};
    const BrenierPotential u(y, w, square_domain());
    const PowerDiagram pd = power_diagram(y, w, sq);
    const FreeBoundary fb = free_boundary(pd, u, {0, 1});
    REQUIRE_FALSE(fb.empty);
    CHECK(fb.curves.size() == 1);
    CHECK(fb.flatness <= 1e-12);
    CHECK(fb.gradient_jump == doctest::Approx(norm(y[1] - y[0])));
    CHECK(free_boundary(pd, u, {0, 0}).empty);
    CHECK(fb.to_csv().rfind("curve_id,vertex_index,x,y\n", 0) == 0);
}

TEST_CASE("comparison gap ignores constants") {
    const Polygon sq = square_domain().boundary;
    const ScalarField a = [](const Vec2& x) { return norm2(x); };
    const ScalarField b = [](const Vec2& x) { return norm2(x) + 3.0; };
    const ScalarField c = [](const Vec2& x) { return norm2(x) + 0.1 * x.x; };
    CHECK(comparison_gap(a, a, sq, 400, 1) == 0.0);
    CHECK(comparison_gap(a, b, sq, 400, 1) <= 1e-14);
    CHECK(comparison_gap(a, c, sq, 400, 1) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("W2p probe of the identity") {
    const BrenierPotential u = lattice_identity(square_domain(), 0.02);
    const W2pProbe w = w2p_probe(u, 0.1, {1.0, 2.0, 4.0});
    CHECK(w.jensen_monotone);
    CHECK(w.points > 100);
    for (double n : w.norms) CHECK(n == doctest::Approx(1.0).epsilon(0.05));
    CHECK(w.norms.back() - w.norms.front() <= 0.05);
    CHECK_THROWS_AS(w2p_probe(u, 0.01, {2.0}), Error);
}
