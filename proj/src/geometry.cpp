#include "sdot/geometry.hpp"

#include "sdot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace sdot {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::geometry: return "geometry";
        case ErrorKind::perturbation: return "perturbation";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::degeneracy: return "degeneracy";
        case ErrorKind::data: return "data";
        case ErrorKind::state: return "state";
        case ErrorKind::sampling: return "sampling";
        case ErrorKind::resolution: return "resolution";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::convergence:
        case ErrorKind::degeneracy:
            return 3;
        case ErrorKind::geometry:
        case ErrorKind::perturbation:
            return 4;
        case ErrorKind::io:
            return 1;
        default:
            return 2;
    }
}

Eigen::Vector2d Ellipse::semi_axes() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(axes);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
}

double Ellipse::eccentricity() const {
    const Eigen::Vector2d ax = semi_axes();
    return ax(1) / ax(0);
}

bool Ellipse::contains(const Vec2& p, double dilation) const {
    const Eigen::Vector2d d = to_eigen(p - center);
    const double q = d.dot(axes.ldlt().solve(d));
    return q <= (1.0 + dilation) * (1.0 + dilation);
}

double signed_area(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return 0.0;
    // Shoelace relative to the first vertex keeps cancellation small for
    // polygons far from the origin.
    double a = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) a += cross(v[i] - v[0], v[i + 1] - v[0]);
    return 0.5 * a;
}

double area(const Polygon& poly) { return std::abs(signed_area(poly)); }

Vec2 centroid(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n == 0) return {};
    double a = 0.0;
    Vec2 c{0.0, 0.0};
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double t = cross(v[i] - v[0], v[i + 1] - v[0]);
        a += t;
        c += (v[i] + v[i + 1] - 2.0 * v[0]) * t;
    }
    if (std::abs(a) <= 0.0) {
        Vec2 m{0.0, 0.0};
        for (const auto& p : v) m += p;
        return m / static_cast<double>(n);
    }
    return v[0] + c / (3.0 * a);
}

double perimeter(const Polygon& poly) {
    double p = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) p += norm(poly[(i + 1) % n] - poly[i]);
    return p;
}

BoundingBox bounding_box(const std::vector<Vec2>& pts) {
    BoundingBox b;
    if (pts.empty()) return b;
    b.lo = b.hi = pts.front();
    for (const auto& p : pts) {
        b.lo.x = std::min(b.lo.x, p.x);
        b.lo.y = std::min(b.lo.y, p.y);
        b.hi.x = std::max(b.hi.x, p.x);
        b.hi.y = std::max(b.hi.y, p.y);
    }
    return b;
}

BoundingBox bounding_box(const Polygon& poly) { return bounding_box(poly.vertices); }

double diameter(const Polygon& poly) {
    const Polygon hull = convex_hull(poly.vertices);
    double d = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j) d = std::max(d, norm(hull[i] - hull[j]));
    return d;
}

namespace {

int orientation(const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
    const double v = cross(b - a, c - a);
    if (v > eps) return 1;
    if (v < -eps) return -1;
    return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
    return std::min(a.x, b.x) - eps <= p.x && p.x <= std::max(a.x, b.x) + eps &&
           std::min(a.y, b.y) - eps <= p.y && p.y <= std::max(a.y, b.y) + eps;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps) {
    const int o1 = orientation(a, b, c, eps);
    const int o2 = orientation(a, b, d, eps);
    const int o3 = orientation(c, d, a, eps);
    const int o4 = orientation(c, d, b, eps);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c, eps)) return true;
    if (o2 == 0 && on_segment(a, b, d, eps)) return true;
    if (o3 == 0 && on_segment(c, d, a, eps)) return true;
    if (o4 == 0 && on_segment(c, d, b, eps)) return true;
    return false;
}

}  // namespace

bool is_simple(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return false;
    const double scale = std::max(bounding_box(poly).diagonal(), 1e-300);
    const double eps = 1e-14 * scale * scale;
    // Sweep over edges sorted by min x to prune the quadratic pair loop.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto lo_x = [&](std::size_t i) { return std::min(v[i].x, v[(i + 1) % n].x); };
    auto hi_x = [&](std::size_t i) { return std::max(v[i].x, v[(i + 1) % n].x); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lo_x(a) < lo_x(b); });
    for (std::size_t oi = 0; oi < n; ++oi) {
        const std::size_t i = order[oi];
        for (std::size_t oj = oi + 1; oj < n; ++oj) {
            const std::size_t j = order[oj];
            if (lo_x(j) > hi_x(i)) break;
            if (j == i || (i + 1) % n == j || (j + 1) % n == i) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n], eps)) return false;
        }
    }
    return true;
}

void validate_polygon(const Polygon& poly) {
    const std::size_t n = poly.size();
    if (n < 3) fail(ErrorKind::geometry, "polygon needs at least 3 vertices");
    for (std::size_t i = 0; i < n; ++i) {
        if (norm(poly[(i + 1) % n] - poly[i]) <= 1e-12)
            fail(ErrorKind::geometry, "polygon has a duplicate consecutive vertex at index " + std::to_string(i));
    }
    if (!(signed_area(poly) > 0.0)) fail(ErrorKind::geometry, "polygon is not counterclockwise with positive area");
    if (!is_simple(poly)) fail(ErrorKind::geometry, "polygon is not simple");
}

bool is_convex(const Polygon& poly, double rel_tol) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    const double scale = bounding_box(poly).diagonal();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const Vec2& c = poly[(i + 2) % n];
        if (cross(b - a, c - b) < -rel_tol * scale * scale) return false;
    }
    return true;
}

Polygon drop_close_vertices(const Polygon& poly, double tol) {
    std::vector<Vec2> out;
    for (const auto& q : poly.vertices)
        if (out.empty() || norm(q - out.back()) > tol) out.push_back(q);
    while (out.size() > 1 && norm(out.back() - out.front()) <= tol) out.pop_back();
    return Polygon{std::move(out)};
}

Polygon convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return Polygon{pts};
    std::vector<Vec2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 1] - h[k - 2], p - h[k - 2]) <= 0.0) --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        const Vec2& p = pts[i];
        while (k >= t && cross(h[k - 1] - h[k - 2], p - h[k - 2]) <= 0.0) --k;
        h[k++] = p;
    }
    h.resize(k - 1);
    return Polygon{h};
}

bool contains(const Polygon& poly, const Vec2& p, double eps) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = v[j];
        const Vec2& b = v[i];
        const Vec2 ab = b - a;
        const double len2 = norm2(ab);
        if (len2 > 0.0) {
            const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
            if (norm(a + ab * t - p) <= eps) return true;
        }
        if ((b.y > p.y) != (a.y > p.y)) {
            const double xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

Vec2 closest_boundary_point(const Polygon& poly, const Vec2& p, std::size_t* edge) {
    const std::size_t n = poly.size();
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_pt = p;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2 ab = poly[(i + 1) % n] - a;
        const double len2 = norm2(ab);
        const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
        const Vec2 q = a + ab * t;
        const double d = norm(q - p);
        if (d < best) {
            best = d;
            best_pt = q;
            if (edge) *edge = i;
        }
    }
    return best_pt;
}

double distance_to_boundary(const Polygon& poly, const Vec2& p) { return norm(closest_boundary_point(poly, p) - p); }

std::vector<std::pair<double, double>> segment_inside_intervals(const Polygon& poly, const Vec2& a, const Vec2& b) {
    std::vector<double> ts{0.0, 1.0};
    const Vec2 d = b - a;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2 e = poly[(i + 1) % n] - p;
        const double den = cross(d, e);
        if (den == 0.0) continue;
        const double t = cross(p - a, e) / den;
        const double s = cross(p - a, d) / den;
        if (t > 0.0 && t < 1.0 && s >= 0.0 && s <= 1.0) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    std::vector<std::pair<double, double>> out;
    const double scale = std::max(bounding_box(poly).diagonal(), 1e-300);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double t0 = ts[k], t1 = ts[k + 1];
        if (t1 - t0 <= 0.0) continue;
        const Vec2 mid = a + d * (0.5 * (t0 + t1));
        if (!contains(poly, mid, 1e-13 * scale)) continue;
        if (!out.empty() && out.back().second == t0)
            out.back().second = t1;
        else
            out.emplace_back(t0, t1);
    }
    return out;
}

HalfPlane make_halfplane(const Vec2& normal, double offset) {
    const double len = norm(normal);
    return HalfPlane{normal / len, offset / len};
}

void clip_labeled(std::vector<Vec2>& verts, std::vector<int>& labels, const HalfPlane& hp, int clip_label) {
    const std::size_t n = verts.size();
    if (n == 0) return;
    bool any_out = false;
    for (std::size_t i = 0; i < n && !any_out; ++i) any_out = dot(hp.normal, verts[i]) - hp.offset > 0.0;
    if (!any_out) return;
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = dot(hp.normal, verts[i]) - hp.offset;
    std::vector<Vec2> out;
    std::vector<int> out_labels;
    out.reserve(n + 2);
    out_labels.reserve(n + 2);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const bool in_i = dist[i] <= 0.0;
        const bool in_j = dist[j] <= 0.0;
        if (in_i) {
            out.push_back(verts[i]);
            out_labels.push_back(in_j ? labels[i] : (dist[i] == 0.0 ? clip_label : labels[i]));
            if (!in_j && dist[i] < 0.0) {
                const double t = dist[i] / (dist[i] - dist[j]);
                out.push_back(verts[i] + (verts[j] - verts[i]) * t);
                out_labels.push_back(clip_label);
            }
        } else if (in_j && dist[j] < 0.0) {
            const double t = dist[i] / (dist[i] - dist[j]);
            out.push_back(verts[i] + (verts[j] - verts[i]) * t);
            out_labels.push_back(labels[i]);
        }
    }
    // Drop exact consecutive duplicates; their zero-length edges carry no information.
    std::vector<Vec2> v2;
    std::vector<int> l2;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!v2.empty() && v2.back() == out[i]) {
            l2.back() = out_labels[i];
            continue;
        }
        v2.push_back(out[i]);
        l2.push_back(out_labels[i]);
    }
    while (v2.size() > 1 && v2.back() == v2.front()) {
        v2.pop_back();
        l2.pop_back();
    }
    if (v2.size() < 3) {
        v2.clear();
        l2.clear();
    }
    verts = std::move(v2);
    labels = std::move(l2);
}

std::optional<Polygon> clip(const Polygon& poly, const HalfPlane& hp, double degenerate_rel) {
    std::vector<Vec2> v = poly.vertices;
    std::vector<int> labels(v.size(), -1);
    clip_labeled(v, labels, hp, -1);
    Polygon out{std::move(v)};
    if (out.size() < 3) return std::nullopt;
    if (area(out) <= degenerate_rel * area(poly)) return std::nullopt;
    return out;
}

Ellipse john_ellipsoid(const std::vector<Vec2>& pts, double tol, int max_iter) {
    if (!(tol > 0.0)) fail(ErrorKind::parameter, "MVEE tolerance must be positive");
    const Polygon hull = convex_hull(pts);
    const std::size_t n = hull.size();
    if (n < 3 || area(hull) <= 0.0) fail(ErrorKind::geometry, "MVEE of a degenerate point set");
    // Work on the hull vertices, centered and scaled for conditioning.
    const Vec2 c0 = centroid(hull);
    double scale = 0.0;
    for (const auto& p : hull.vertices) scale = std::max(scale, norm(p - c0));
    std::vector<Vec2> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (hull[i] - c0) / scale;

    // Ellipse {|A x + b| <= 1}, theta = (a11, a12, a22, b1, b2). Barrier
    // method: minimize -t log det A - sum log(1 - |A x_i + b|^2), t growing
    // until the duality gap n / t drops below tol.
    using V5 = Eigen::Matrix<double, 5, 1>;
    using M5 = Eigen::Matrix<double, 5, 5>;
    V5 th;
    th << 1.0 / 1.05, 0.0, 1.0 / 1.05, 0.0, 0.0;
    auto objective = [&](const V5& v, double t) {
        const double det = v(0) * v(2) - v(1) * v(1);
        if (!(v(0) > 0.0 && det > 0.0)) return std::numeric_limits<double>::infinity();
        double f = -t * std::log(det);
        for (const auto& p : x) {
            const double z1 = v(0) * p.x + v(1) * p.y + v(3), z2 = v(1) * p.x + v(2) * p.y + v(4);
            const double sl = 1.0 - z1 * z1 - z2 * z2;
            if (!(sl > 0.0)) return std::numeric_limits<double>::infinity();
            f -= std::log(sl);
        }
        return f;
    };
    int iter = 0;
    for (double t = 1.0;; t *= 8.0) {
        for (;;) {
            if (++iter > max_iter) fail(ErrorKind::convergence, "MVEE iteration cap reached");
            const double det = th(0) * th(2) - th(1) * th(1);
            const Eigen::Vector3d g3(th(2), -2.0 * th(1), th(0));
            V5 grad = V5::Zero();
            M5 hess = M5::Zero();
            grad.head<3>() = -t * g3 / det;
            Eigen::Matrix3d dg;
            dg << 0, 0, 1, 0, -2, 0, 1, 0, 0;
            hess.topLeftCorner<3, 3>() = t * (g3 * g3.transpose() / (det * det) - dg / det);
            for (const auto& p : x) {
                Eigen::Matrix<double, 2, 5> j;
                j << p.x, p.y, 0.0, 1.0, 0.0, 0.0, p.x, p.y, 0.0, 1.0;
                const Eigen::Vector2d z = j * th;
                const double sl = 1.0 - z.squaredNorm();
                const Eigen::Matrix<double, 5, 1> jz = j.transpose() * z;
                grad += 2.0 * jz / sl;
                hess += 2.0 * j.transpose() * j / sl + 4.0 * jz * jz.transpose() / (sl * sl);
            }
            const V5 step = -hess.ldlt().solve(grad);
            const double decrement = -grad.dot(step);
            // Centering error below 1e-9 in barrier units is far below tol.
            if (decrement <= 1e-9) break;
            const double f0 = objective(th, t);
            double a = 1.0;
            // Strict decrease: near the rounding floor the Armijo bound equals f0.
            double f1 = objective(th + step, t);
            while (!(f1 <= f0 - 0.25 * a * decrement && f1 < f0)) {
                a *= 0.5;
                if (a < 1e-20) break;
                f1 = objective(th + a * step, t);
            }
            if (a < 1e-20) break;
            th += a * step;
        }
        if (static_cast<double>(n) / t <= tol) break;
    }
    Eigen::Matrix2d a;
    a << th(0), th(1), th(1), th(2);
    const Eigen::Vector2d c = -a.inverse() * Eigen::Vector2d(th(3), th(4));
    // {(x - c)^T (A^2)^{-1}... } : |A (x - c)| <= 1, axes = A^{-2}; dilate to
    // cover every vertex against rounding.
    const Eigen::Matrix2d axes = (a * a).inverse();
    const Eigen::Matrix2d ai = a * a;
    double worst = 0.0;
    for (const auto& p : x) {
        const Eigen::Vector2d r = to_eigen(p) - c;
        worst = std::max(worst, r.dot(ai * r));
    }
    Ellipse e;
    e.center = c0 + from_eigen(c) * scale;
    e.axes = axes * (scale * scale) * std::max(1.0, worst);
    e.axes = 0.5 * (e.axes + e.axes.transpose());
    return e;
}

Ellipse john_ellipsoid(const Polygon& poly, double tol, int max_iter) { return john_ellipsoid(poly.vertices, tol, max_iter); }

Polygon reflect_double(const Polygon& upper, double offset) {
    const auto& v = upper.vertices;
    const std::size_t n = v.size();
    if (n < 3) fail(ErrorKind::geometry, "reflect_double needs a polygon");
    const double scale = std::max(bounding_box(upper).diagonal(), 1e-300);
    const double tol = 1e-10 * std::max(1.0, scale);
    std::vector<bool> on(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i].y < offset - tol) fail(ErrorKind::geometry, "polygon crosses the reflection line");
        on[i] = v[i].y <= offset + tol;
    }
    // The contact set must be one contiguous run of the vertex cycle.
    std::size_t runs = 0, start = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (on[i] && !on[(i + n - 1) % n]) {
            ++runs;
            start = i;
        }
    }
    if (std::all_of(on.begin(), on.end(), [](bool b) { return b; })) fail(ErrorKind::geometry, "polygon lies on the reflection line");
    if (runs == 0) fail(ErrorKind::geometry, "polygon does not touch the reflection line");
    if (runs > 1) fail(ErrorKind::geometry, "polygon touches the reflection line in several places");
    std::size_t end = start;
    while (on[(end + 1) % n]) end = (end + 1) % n;
    // Upper path from the run's last vertex around the top to its first vertex.
    std::vector<Vec2> path;
    for (std::size_t k = end;; k = (k + 1) % n) {
        Vec2 p = v[k];
        if (on[k]) p.y = offset;
        path.push_back(p);
        if (k == start && path.size() > 1) break;
    }
    auto mirror = [offset](const Vec2& p) { return Vec2{p.x, 2.0 * offset - p.y}; };
    // With a single contact vertex the path starts and ends there, so the
    // halves meet at one repeated vertex.
    Polygon out{path};
    for (std::size_t k = path.size() - 1; k-- > 1;) out.vertices.push_back(mirror(path[k]));
    return out;
}

Polygon translate(const Polygon& poly, const Vec2& t) {
    Polygon out = poly;
    for (auto& p : out.vertices) p += t;
    return out;
}

Polygon scale_about(const Polygon& poly, const Vec2& center, double s) {
    Polygon out = poly;
    for (auto& p : out.vertices) p = center + (p - center) * s;
    return out;
}

Polygon transform(const Polygon& poly, const Eigen::Matrix2d& m, const Vec2& t) {
    Polygon out = poly;
    for (auto& p : out.vertices) p = from_eigen(m * to_eigen(p)) + t;
    if (m.determinant() < 0.0) std::reverse(out.vertices.begin(), out.vertices.end());
    return out;
}

std::string polygon_to_csv(const Polygon& poly) {
    std::ostringstream os;
    os.precision(17);
    os << "x,y\n";
    for (const auto& p : poly.vertices) os << p.x << ',' << p.y << '\n';
    return os.str();
}

Polygon polygon_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) fail(ErrorKind::data, "empty polygon CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y") fail(ErrorKind::data, "polygon CSV header must be \"x,y\"");
    Polygon poly;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail(ErrorKind::data, "polygon CSV row " + std::to_string(row) + " lacks a comma");
        try {
            poly.vertices.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            fail(ErrorKind::data, "polygon CSV row " + std::to_string(row) + " is not numeric");
        }
    }
    return poly;
}

}  // namespace sdot
