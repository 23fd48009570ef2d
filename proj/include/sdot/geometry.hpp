#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sdot {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    bool operator==(const Vec2& o) const = default;
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double norm2(const Vec2& a) { return a.x * a.x + a.y * a.y; }
inline Vec2 perp(const Vec2& a) { return {-a.y, a.x}; }
inline Vec2 normalized(const Vec2& a) { return a / norm(a); }
inline Eigen::Vector2d to_eigen(const Vec2& v) { return {v.x, v.y}; }
inline Vec2 from_eigen(const Eigen::Vector2d& v) { return {v(0), v(1)}; }

// Ordered vertex loop, counterclockwise for valid domain boundaries. Cells
// produced by clipping a non-convex polygon may be weakly simple (zero-width
// bridges along a clip line); area and integrals remain exact for those.
struct Polygon {
    std::vector<Vec2> vertices;

    std::size_t size() const { return vertices.size(); }
    bool empty() const { return vertices.empty(); }
    const Vec2& operator[](std::size_t i) const { return vertices[i]; }
};

// Keeps {x : dot(normal, x) <= offset}.
struct HalfPlane {
    Vec2 normal;
    double offset = 0.0;
};

struct BoundingBox {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{0.0, 0.0};

    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
    double diagonal() const { return std::hypot(width(), height()); }
};

// Unit-ball image: {center + L z : |z| <= 1} with axes = L L^T, stored as the
// symmetric positive definite matrix `axes` whose eigenvalues are the squared
// semi-axes.
struct Ellipse {
    Vec2 center;
    Eigen::Matrix2d axes = Eigen::Matrix2d::Identity();

    Eigen::Vector2d semi_axes() const;  // ascending
    double eccentricity() const;        // largest / smallest semi-axis
    bool contains(const Vec2& p, double dilation = 0.0) const;
};

double signed_area(const Polygon& poly);
double area(const Polygon& poly);
Vec2 centroid(const Polygon& poly);
double perimeter(const Polygon& poly);
BoundingBox bounding_box(const Polygon& poly);
BoundingBox bounding_box(const std::vector<Vec2>& pts);
double diameter(const Polygon& poly);

// Throws a geometry error when the invariants of a domain boundary polygon fail:
// >= 3 vertices, CCW with positive area, edges longer than 1e-12, simple.
void validate_polygon(const Polygon& poly);
bool is_simple(const Polygon& poly);
bool is_convex(const Polygon& poly, double rel_tol = 1e-10);

Polygon convex_hull(std::vector<Vec2> pts);
// Drops consecutive vertices closer than tol (clipping leaves such slivers).
Polygon drop_close_vertices(const Polygon& poly, double tol);

// Even-odd test; points on an edge count as inside.
bool contains(const Polygon& poly, const Vec2& p, double eps = 1e-12);
double distance_to_boundary(const Polygon& poly, const Vec2& p);
Vec2 closest_boundary_point(const Polygon& poly, const Vec2& p, std::size_t* edge = nullptr);

// Length of the part of segment [a, b] inside the polygon, and the inside
// sub-intervals as parameter pairs in [0, 1].
std::vector<std::pair<double, double>> segment_inside_intervals(const Polygon& poly, const Vec2& a,
                                                                const Vec2& b);

// Sutherland-Hodgman clip. Vertices on the line are retained. Returns nullopt
// when the result is empty or has area below degenerate_rel times the input.
std::optional<Polygon> clip(const Polygon& poly, const HalfPlane& hp, double degenerate_rel = 1e-14);

// Same clip without the degeneracy filter; also carries per-edge labels,
// label[k] belonging to edge (v[k], v[k+1]). New edges on the clip line get
// clip_label.
void clip_labeled(std::vector<Vec2>& verts, std::vector<int>& labels, const HalfPlane& hp,
                  int clip_label);

HalfPlane make_halfplane(const Vec2& normal, double offset);

// Minimum-volume enclosing ellipse of the vertices (Khachiyan iteration).
// Throws a parameter error for tol <= 0 and a convergence error if the
// iteration cap is reached.
Ellipse john_ellipsoid(const std::vector<Vec2>& pts, double tol = 1e-7, int max_iter = 100000);
Ellipse john_ellipsoid(const Polygon& poly, double tol = 1e-7, int max_iter = 100000);

// Union of `upper` and its mirror image across {y = offset}. `upper` must lie
// in {y >= offset} and touch the line.
Polygon reflect_double(const Polygon& upper, double offset);

Polygon translate(const Polygon& poly, const Vec2& t);
Polygon scale_about(const Polygon& poly, const Vec2& center, double s);
Polygon transform(const Polygon& poly, const Eigen::Matrix2d& m, const Vec2& t = {});

// Polygon CSV: header "x,y", one vertex per row.
std::string polygon_to_csv(const Polygon& poly);
Polygon polygon_from_csv(const std::string& text);

}  // namespace sdot
