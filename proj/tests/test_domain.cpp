#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdot/domain.hpp"
#include "sdot/error.hpp"

#include <cmath>
#include <functional>

using namespace sdot;

namespace {

ShapeSpec disk_spec(double r = 1.0, int n = 256) {
    ShapeSpec s;
    s.kind = ShapeKind::disk;
    s.radius = r;
    s.n_vertices = n;
    return s;
}

ShapeSpec square_spec(double side) {
    ShapeSpec s;
    s.kind = ShapeKind::square;
    s.side = side;
    return s;
}

// Sup of |g| + |g'| + |g''| on a fine grid of [a, b] by centered differences.
double fine_grid_c11(const std::function<double(double)>& g, double a, double b) {
    const int n = 200000;
    const double h = (b - a) / n;
    double best = 0.0;
    for (int k = 1; k < n; ++k) {
        const double x = a + k * h;
        const double d1 = (g(x + h) - g(x - h)) / (2 * h);
        const double d2 = (g(x + h) - 2 * g(x) + g(x - h)) / (h * h);
        best = std::max(best, std::abs(g(x)) + std::abs(d1) + std::abs(d2));
    }
    return best;
}

}  // namespace

TEST_CASE("disk domain approximates the circle") {
    const Domain d = make_domain(disk_spec());
    CHECK(d.boundary.size() == 256);
    CHECK(std::abs(d.area() - M_PI) / M_PI < 1e-3);
    CHECK(d.delta == 0.0);
    CHECK(is_convex(d.convex_base));
    CHECK_NOTHROW(validate_polygon(d.boundary));
}

TEST_CASE("square domain has exact area") {
    const Domain d = make_domain(square_spec(2.0));
    CHECK(d.boundary.size() == 4);
    CHECK(d.area() == 4.0);
}

TEST_CASE("shape parameter errors") {
    CHECK_THROWS_AS(make_domain(disk_spec(-1.0)), Error);
    CHECK_THROWS_AS(make_domain(square_spec(0.0)), Error);
    ShapeSpec db;
    db.kind = ShapeKind::dumbbell;
    db.radius = 0.5;
    db.separation = 2.0;
    db.neck_width = 0.0;
    CHECK_THROWS_AS(make_domain(db), Error);
    db.neck_width = 0.3;
    const Domain d = make_domain(db);
    CHECK_NOTHROW(validate_polygon(d.boundary));
    CHECK_FALSE(is_convex(d.boundary));
    CHECK(is_convex(d.convex_base));
}

TEST_CASE("two disks is a two-component set only") {
    ShapeSpec s;
    s.kind = ShapeKind::two_disks;
    s.radius = 0.5;
    s.separation = 10.0;
    CHECK_THROWS_AS(make_domain(s), Error);
    const auto set = make_domain_set(s);
    REQUIRE(set.size() == 2);
    CHECK(centroid(set[0].boundary).x == doctest::Approx(-5.0));
    CHECK(centroid(set[1].boundary).x == doctest::Approx(5.0));
}

TEST_CASE("zero amplitude perturbation is the identity") {
    const Domain base = make_domain(disk_spec());
    PerturbationSpec p;
    p.amplitude = 0.0;
    p.frequency = 6;
    const Domain d = perturb_domain(base, p);
    CHECK(d.delta == 0.0);
    CHECK(d.boundary.vertices == base.boundary.vertices);
    CHECK(delta_distance(base) <= 1e-9);
}

TEST_CASE("radial wave delta matches the fine-grid oracle") {
    const Domain base = make_domain(disk_spec());
    PerturbationSpec p;
    p.amplitude = 0.02;
    p.frequency = 4;
    const Domain d = perturb_domain(base, p);
    const double oracle = fine_grid_c11([](double t) { return 0.02 * std::sin(4 * t); }, 0.0, 2 * M_PI);
    CHECK(d.delta > 0.0);
    CHECK(d.delta <= 0.02 * 16 * 1.2);
    CHECK(std::abs(d.delta - oracle) / oracle < 0.05);
    CHECK(delta_distance(d) == doctest::Approx(d.delta));
}

TEST_CASE("radial wave loses convexity above the curvature threshold") {
    const Domain base = make_domain(disk_spec());
    PerturbationSpec p;
    p.frequency = 6;
    p.amplitude = 0.04;
    CHECK_FALSE(is_convex(perturb_domain(base, p).boundary));
    p.amplitude = 0.02;
    CHECK(is_convex(perturb_domain(base, p).boundary));
}

TEST_CASE("delta is monotone in amplitude") {
    const Domain base = make_domain(disk_spec());
    double last = 0.0;
    for (double a : {0.0, 0.005, 0.01, 0.02, 0.04}) {
        PerturbationSpec p;
        p.amplitude = a;
        p.frequency = 6;
        const double delta = perturb_domain(base, p).delta;
        CHECK(delta >= last);
        last = delta;
    }
}

TEST_CASE("boundary bump dents one side of the square") {
    const Domain base = make_domain(square_spec(2.0));
    PerturbationSpec p;
    p.mode = PerturbationMode::boundary_bump;
    p.amplitude = 0.05;
    const Domain d = perturb_domain(base, p);
    double max_y_on_bottom = -1.0;
    for (const auto& v : d.boundary.vertices)
        if (std::abs(v.x) < 0.01 && v.y < 0.0) max_y_on_bottom = std::max(max_y_on_bottom, v.y);
    CHECK(max_y_on_bottom == doctest::Approx(-0.95).epsilon(1e-9));
    CHECK(d.area() < 4.0);
    // Edge length 2, half-width 0.5: profile amp (1 - t^2)^3 over arclength.
    const double oracle = fine_grid_c11(
        [](double s) {
            const double t = s / 0.5;
            return std::abs(t) < 1 ? 0.05 * std::pow(1 - t * t, 3) : 0.0;
        },
        -1.0, 1.0);
    CHECK(std::abs(d.delta - oracle) / oracle < 0.05);
}

TEST_CASE("large wave breaks simplicity") {
    const Domain base = make_domain(disk_spec());
    PerturbationSpec p;
    p.amplitude = 1.5;
    p.frequency = 3;
    CHECK_THROWS_AS(perturb_domain(base, p), Error);
}

TEST_CASE("fold-over boundary is a geometry error") {
    Domain d = make_domain(disk_spec());
    d.boundary = make_domain(disk_spec(0.3, 64)).boundary;
    for (auto& v : d.boundary.vertices) v.x += 0.6;
    try {
        delta_distance(d);
        FAIL("expected a geometry error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::geometry);
    }
}

TEST_CASE("equal-area regular polygon radius") {
    const double r = regular_polygon_radius_for_area(256, 4.0);
    ShapeSpec s = disk_spec(r);
    CHECK(make_domain(s).area() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("domain and shape JSON round trip") {
    const Domain base = make_domain(disk_spec(1.0, 64));
    PerturbationSpec p;
    p.amplitude = 0.01;
    p.frequency = 6;
    const Domain d = perturb_domain(base, p);
    const Domain e = domain_from_json(to_json(d));
    CHECK(e.boundary.vertices == d.boundary.vertices);
    CHECK(e.delta == d.delta);
    REQUIRE(e.perturbation.has_value());
    CHECK(e.perturbation->frequency == 6);
    const ShapeSpec s = shape_from_json(to_json(square_spec(3.0)));
    CHECK(s.kind == ShapeKind::square);
    CHECK(s.side == 3.0);
    nlohmann::json bad = to_json(square_spec(1.0));
    bad["foo"] = 1;
    CHECK_THROWS_WITH_AS(shape_from_json(bad), doctest::Contains("foo"), Error);
}
