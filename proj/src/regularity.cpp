#include "sdot/regularity.hpp"

#include "sdot/error.hpp"
#include "sdot/ma_dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

namespace sdot {

namespace {

Eigen::Vector2d ev(const Vec2& v) { return to_eigen(v); }

Vec2 apply(const Eigen::Matrix2d& m, const Vec2& v) { return from_eigen(m * ev(v)); }

// Value of u - l at x for the support plane l(x) = u(x0) + p . (x - x0).
double excess(const ScalarField& u, double u0, const Vec2& p, const Vec2& x0, const Vec2& x) {
    return u(x) - u0 - dot(p, x - x0);
}

// Points of the region boundary inside the closed ball B(c, r): vertices and
// samples along each edge chord that crosses the ball.
std::vector<Vec2> boundary_points_in_ball(const Polygon& region, const Vec2& c, double r, int samples) {
    std::vector<Vec2> out;
    const std::size_t n = region.size();
    const double spacing = 2.0 * std::numbers::pi * r / std::max(samples, 8);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 a = region[k], b = region[(k + 1) % n];
        const Vec2 d = b - a;
        const double dd = norm2(d);
        if (dd == 0.0) continue;
        // |a + s d - c|^2 = r^2 in s.
        const Vec2 f = a - c;
        const double bq = dot(f, d), cq = norm2(f) - r * r;
        const double disc = bq * bq - dd * cq;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        const double s0 = std::max(0.0, (-bq - sq) / dd), s1 = std::min(1.0, (-bq + sq) / dd);
        if (s1 < s0) continue;
        const double len = (s1 - s0) * std::sqrt(dd);
        const int m = std::min(4096, 1 + static_cast<int>(std::ceil(len / spacing)));
        for (int q = 0; q <= m; ++q) out.push_back(a + d * (s0 + (s1 - s0) * q / m));
    }
    return out;
}

std::vector<Vec2> diagram_vertices(const PowerDiagram& pd) {
    std::vector<Vec2> out;
    for (const auto& c : pd.cells) out.insert(out.end(), c.polygon.vertices.begin(), c.polygon.vertices.end());
    return out;
}

double rms_fit(const std::vector<double>& x, const std::vector<double>& y, double& slope) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - my - slope * (x[i] - mx);
        ss += r * r;
    }
    return std::sqrt(ss / n);
}

}  // namespace

Eigen::Matrix2d BoundaryFrame::rotation() const {
    Eigen::Matrix2d r;
    r << t.x, n.x, t.y, n.y;
    return r;
}

BoundaryFrame boundary_frame(const Polygon& source, const Vec2& x0) {
    std::size_t edge = 0;
    BoundaryFrame f;
    f.origin = closest_boundary_point(source, x0, &edge);
    const std::size_t n = source.size();
    const double tol = 1e-9 * std::max(1.0, diameter(source));
    auto inward = [&](std::size_t k) { return normalized(perp(source[(k + 1) % n] - source[k])); };
    Vec2 nv = inward(edge);
    if (norm(f.origin - source[edge]) <= tol) nv = normalized(nv + inward((edge + n - 1) % n));
    else if (norm(f.origin - source[(edge + 1) % n]) <= tol) nv = normalized(nv + inward((edge + 1) % n));
    f.n = nv;
    f.t = {nv.y, -nv.x};
    return f;
}

Section section(const BrenierPotential& u, const Vec2& x0, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::parameter, "section height must be positive");
    const Polygon& src = u.source().boundary;
    if (distance_to_boundary(src, x0) > 1e-9 * std::max(1.0, diameter(src)) && !contains(src, x0))
        fail(ErrorKind::parameter, "section base point lies outside the source");
    Section s;
    s.base_point = x0;
    s.h = h;
    const auto [u0, i0] = u.eval(x0);
    s.site = i0;
    s.subgradient = u.sites()[static_cast<std::size_t>(i0)];
    const Vec2 p = s.subgradient;
    const double c0 = u0 - dot(p, x0);
    std::vector<Vec2> v = src.vertices;
    std::vector<int> labels(v.size(), -1);
    bool cut = false;
    for (std::size_t j = 0; j < u.size() && !v.empty(); ++j) {
        if (static_cast<int>(j) == i0) continue;
        const Vec2 d = u.sites()[j] - p;
        const double c = h + u.weights()[j] + c0;
        bool cuts = false;
        for (const auto& q : v) cuts = cuts || dot(q, d) > c;
        if (!cuts) continue;
        clip_labeled(v, labels, make_halfplane(d, c), static_cast<int>(j));
        cut = true;
    }
    s.polygon = drop_close_vertices(Polygon{std::move(v)}, 1e-12 * std::max(1.0, diameter(src)));
    s.whole_source = !cut;
    if (!cut) return s;
    const double diam = diameter(src);
    for (const auto& q : s.polygon.vertices)
        if (distance_to_boundary(src, q) <= 1e-9 * std::max(1.0, diam) && norm(q - x0) > 0.5 * diam) s.far_boundary = true;
    return s;
}

Rescaling localize_rescale(const Section& s, const BrenierPotential& u, double eps0, const DensityField& f) {
    if (!(eps0 > 0.0) || !std::isfinite(eps0)) fail(ErrorKind::parameter, "eps0 must be positive");
    Rescaling r;
    r.x0 = s.base_point;
    r.eps0 = eps0;
    const Vec2 x0 = s.base_point, p = s.subgradient;
    const double u0 = u.value(x0);
    std::vector<Vec2> y;
    std::vector<double> w;
    for (std::size_t j = 0; j < u.size(); ++j) {
        y.push_back((u.sites()[j] - p) / eps0);
        w.push_back((u.weights()[j] + u0 - dot(u.sites()[j], x0)) / (eps0 * eps0));
    }
    Domain d = u.source();
    const Eigen::Matrix2d m = Eigen::Matrix2d::Identity() / eps0;
    d.boundary = transform(d.boundary, m, -x0 / eps0);
    if (!d.convex_base.empty()) d.convex_base = transform(d.convex_base, m, -x0 / eps0);
    r.potential = BrenierPotential(std::move(y), std::move(w), std::move(d));

    // Boundary graph over the tangent line at x0, second differences.
    const Polygon& src = u.source().boundary;
    const BoundaryFrame fr = boundary_frame(src, x0);
    std::vector<Vec2> local;
    for (const auto& v : src.vertices) {
        const Vec2 z = fr.to_local(v);
        if (std::abs(z.x) <= 0.5 * eps0 && std::abs(z.y) <= eps0) local.push_back(z);
    }
    std::sort(local.begin(), local.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x; });
    double curv = 0.0;
    for (std::size_t k = 1; k + 1 < local.size(); ++k) {
        const double h0 = local[k].x - local[k - 1].x, h1 = local[k + 1].x - local[k].x;
        if (h0 <= 0.0 || h1 <= 0.0) continue;
        const double d2 = 2.0 * ((local[k + 1].y - local[k].y) / h1 - (local[k].y - local[k - 1].y) / h0) / (h0 + h1);
        curv = std::max(curv, std::abs(d2));
    }
    r.flatness = eps0 * curv;

    const double f0 = f(x0);
    for (int i = 1; i <= 16; ++i)
        for (int j = 0; j < 32; ++j) {
            const double rad = eps0 * i / 16.0, th = 2.0 * std::numbers::pi * j / 32.0;
            const Vec2 q = x0 + Vec2{std::cos(th), std::sin(th)} * rad;
            if (contains(src, q)) r.density_oscillation = std::max(r.density_oscillation, std::abs(f(q) - f0));
        }
    return r;
}

HessianEstimate hessian_estimate(const ScalarField& u, const Polygon& region, const Vec2& x0, double h) {
    if (!(h > 0.0)) fail(ErrorKind::parameter, "stencil spacing must be positive");
    if (!contains(region, x0) || distance_to_boundary(region, x0) <= 2.0 * h)
        fail(ErrorKind::geometry, "Hessian stencil leaves the region");
    double f[3][3];
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) f[i + 1][j + 1] = u(x0 + Vec2{i * h, j * h});
    HessianEstimate e;
    const double a = (f[2][1] - 2.0 * f[1][1] + f[0][1]) / (h * h);
    const double c = (f[1][2] - 2.0 * f[1][1] + f[1][0]) / (h * h);
    const double b = (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * h * h);
    e.hessian << a, b, b, c;
    e.gradient = {(f[2][1] - f[0][1]) / (2.0 * h), (f[1][2] - f[1][0]) / (2.0 * h)};
    return e;
}

Eigen::Matrix2d normalization_matrix(const Eigen::Matrix2d& H, const Vec2& align_axis) {
    if (!H.allFinite()) fail(ErrorKind::degeneracy, "Hessian is not finite");
    const Eigen::Matrix2d sym = 0.5 * (H + H.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
    if (es.eigenvalues().minCoeff() <= 1e-12) fail(ErrorKind::degeneracy, "Hessian is not positive definite");
    const Eigen::Matrix2d root_inv =
        es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const Vec2 a = normalized(align_axis);
    Eigen::Matrix2d r;
    r << a.y, a.x, -a.x, a.y;   // columns: a rotated clockwise, a
    Eigen::Matrix2d b = r.transpose() * root_inv * r;
    b(0, 1) = b(1, 0) = 0.0;
    b /= std::sqrt(b(0, 0) * b(1, 1));
    return r * b * r.transpose();
}

namespace {

Eigen::Matrix2d ellipse_hessian(const Ellipse& e, double h) {
    // {z : (z - c)^T axes^-1 (z - c) <= 1} = {1/2 z^T H z <= h} with H = 2 h axes^-1.
    return 2.0 * h * e.axes.inverse();
}

// u - l in local coordinates z at level k: x = x0 + R s M z with s = h0^((k-1)/2).
struct LocalMap {
    Vec2 x0;
    Eigen::Matrix2d rot;
    Eigen::Matrix2d m;
    double s = 1.0;
    Vec2 to_global(const Vec2& z) const { return x0 + from_eigen(rot * (s * (m * ev(z)))); }
    Vec2 to_local(const Vec2& x) const { return from_eigen(m.inverse() * (rot.transpose() * ev(x - x0)) / s); }
};

// Inner inclusion: E and region inside {u - l <= h}, E = ellipse given by
// points z on its boundary in local coordinates; plus region boundary points
// inside E.
bool inner_inclusion(const ScalarField& ex, const Polygon& src, const LocalMap& lm, const Eigen::Matrix2d& a, double radius, double h) {
    const Eigen::Matrix2d ainv = a.inverse();
    for (int q = 0; q < 512; ++q) {
        const double th = 2.0 * std::numbers::pi * q / 512.0;
        const Vec2 z = apply(a, Vec2{std::cos(th), std::sin(th)} * radius);
        const Vec2 x = lm.to_global(z);
        if (contains(src, x) && ex(x) > h * (1.0 + 1e-12)) return false;
    }
    // Region boundary inside the ellipse: sample every edge finely.
    const std::size_t n = src.size();
    for (std::size_t k = 0; k < n; ++k)
        for (int q = 0; q < 32; ++q) {
            const Vec2 x = src[k] + (src[(k + 1) % n] - src[k]) * (q / 32.0);
            const Vec2 z = lm.to_local(x);
            if (norm(apply(ainv, z)) <= radius && ex(x) > h * (1.0 + 1e-12)) return false;
        }
    return true;
}

}  // namespace

IterationTrace iterate_sections(const BrenierPotential& u, const Vec2& x0, double h0, double K, int k_max, NormalizationMode mode) {
    if (!(h0 > 0.0 && h0 <= 0.25)) fail(ErrorKind::parameter, "h0 must lie in (0, 0.25]");
    if (!(K >= 1.0)) fail(ErrorKind::parameter, "K must be at least 1");
    if (k_max < 1) fail(ErrorKind::parameter, "k_max must be positive");
    IterationTrace tr;
    tr.base_point = x0;
    tr.h0 = h0;
    tr.K = K;
    const Polygon& src = u.source().boundary;
    BoundaryFrame fr = boundary_frame(src, x0);
    LocalMap lm;
    lm.x0 = x0;
    lm.rot = fr.rotation();
    lm.m = Eigen::Matrix2d::Identity();
    const auto [u0, i0] = u.eval(x0);
    const Vec2 p = u.sites()[static_cast<std::size_t>(i0)];
    const ScalarField ex = [&, u0 = u0](const Vec2& x) { return u.value(x) - u0 - dot(p, x - x0); };
    const double diam = diameter(src);

    for (int k = 1; k <= k_max; ++k) {
        const double h = std::pow(h0, k);
        const Section s = section(u, x0, h);
        if (s.whole_source) {
            tr.unbounded = true;
            break;
        }
        if (s.polygon.empty() || area(s.polygon) < 1e-12) {
            tr.truncated = true;
            break;
        }
        lm.s = std::pow(h0, 0.5 * (k - 1));
        Polygon z;
        for (const auto& v : s.polygon.vertices) z.vertices.push_back(lm.to_local(v));
        double ymin = 0.0;
        for (const auto& q : z.vertices) ymin = std::min(ymin, q.y);
        NormalizationStep st;
        st.k = k;
        st.h = h;
        st.K_bound = K;
        Eigen::Matrix2d hess;
        try {
            const Polygon doubled = reflect_double(z, ymin);
            if (mode == NormalizationMode::mvee) {
                st.mode = "mvee";
                hess = ellipse_hessian(john_ellipsoid(doubled), h0);
            } else {
                st.mode = "comparison";
                const Polygon d = drop_close_vertices(convex_hull(doubled.vertices), 1e-12);
                const Vec2 c{0.0, ymin};
                const double r = distance_to_boundary(d, c);
                const BoundaryData flat = [h0](const Vec2&) { return h0; };
                const MaSolution w = op_solve(d, flat, r / 8.0);
                const NodalConvexFunction wf = w.w;
                hess = hessian_estimate([&wf](const Vec2& q) { return wf(q); }, d, c, r / 4.0).hessian;
            }
            st.A = normalization_matrix(hess, {0.0, 1.0});
        } catch (const Error&) {
            tr.truncated = true;
            break;
        }
        const Eigen::Matrix2d ainv = st.A.inverse();
        st.outer_pass = true;
        for (const auto& q : z.vertices) st.outer_pass = st.outer_pass && norm(apply(ainv, q)) <= std::sqrt(3.0 * h0) * (1.0 + 1e-12);
        st.inner_pass = inner_inclusion(ex, src, lm, st.A, std::sqrt(h0 / 3.0), h);
        lm.m = lm.m * st.A;
        st.M = lm.m;

        st.r_inner = std::pow(std::sqrt(h0) / (std::sqrt(3.0) * K), k);
        st.r_outer = std::pow(std::sqrt(3.0) * K * std::sqrt(h0), k);
        st.measured_outer = 0.0;
        for (const auto& v : s.polygon.vertices) st.measured_outer = std::max(st.measured_outer, norm(v - x0));
        st.measured_inner = std::numeric_limits<double>::infinity();
        const std::size_t n = s.polygon.size();
        for (std::size_t e = 0; e < n; ++e) {
            const Vec2 a = s.polygon[e], b = s.polygon[(e + 1) % n];
            if (distance_to_boundary(src, (a + b) * 0.5) <= 1e-9 * std::max(1.0, diam)) continue;
            const Vec2 d = b - a;
            const double t = std::clamp(dot(x0 - a, d) / std::max(norm2(d), 1e-300), 0.0, 1.0);
            st.measured_inner = std::min(st.measured_inner, norm(a + d * t - x0));
        }
        st.ho1_outer_pass = st.measured_outer <= st.r_outer;
        LocalMap plain = lm;
        plain.m = Eigen::Matrix2d::Identity();
        plain.s = 1.0;
        st.ho1_inner_pass = inner_inclusion(ex, src, plain, Eigen::Matrix2d::Identity(), st.r_inner, h);
        tr.steps.push_back(st);
    }
    return tr;
}

std::string IterationTrace::to_csv() const {
    std::string out = "k,h,a11,a12,a22,det_Mk,norm_Mk,inner_pass,outer_pass\n";
    char buf[512];
    for (const auto& s : steps) {
        const double nm = Eigen::JacobiSVD<Eigen::Matrix2d>(s.M).singularValues()(0);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", s.k, s.h, s.A(0, 0), s.A(0, 1), s.A(1, 1),
                      s.M.determinant(), nm, s.inner_pass ? 1 : 0, s.outer_pass ? 1 : 0);
        out += buf;
    }
    return out;
}

HolderFit holder_fit(const ScalarField& u, const Vec2& p, const Vec2& x0, const Polygon& region, const std::vector<double>& radii,
                     const std::vector<Vec2>& extra, int samples) {
    HolderFit fit;
    const double u0 = u(x0);
    std::vector<double> lx, ly;
    for (double r : radii) {
        if (!(r > 0.0)) fail(ErrorKind::parameter, "radii must be positive");
        double sup = 0.0;
        auto take = [&](const Vec2& x) { sup = std::max(sup, std::abs(excess(u, u0, p, x0, x))); };
        for (const auto& x : extra)
            if (norm(x - x0) <= r && contains(region, x, 1e-12)) take(x);
        for (int q = 0; q < samples; ++q) {
            const double th = 2.0 * std::numbers::pi * q / samples;
            const Vec2 x = x0 + Vec2{std::cos(th), std::sin(th)} * r;
            if (contains(region, x)) take(x);
        }
        for (const auto& x : boundary_points_in_ball(region, x0, r, samples)) take(x);
        fit.radii.push_back(r);
        fit.sups.push_back(sup);
        if (sup > 0.0 && std::isfinite(sup)) {
            lx.push_back(std::log(r));
            ly.push_back(std::log(sup));
        }
    }
    if (lx.size() < 3) fail(ErrorKind::data, "Hölder fit needs at least three radii with positive sup");
    double slope = 0.0;
    fit.residual = rms_fit(lx, ly, slope);
    fit.beta_hat = slope - 1.0;
    return fit;
}

HolderFit holder_fit(const BrenierPotential& u, const Vec2& x0, const std::vector<double>& radii, int samples) {
    const PowerDiagram pd = power_diagram(u.sites(), u.weights(), u.source().boundary);
    const Vec2 p = u.map(x0);
    return holder_fit([&u](const Vec2& x) { return u.value(x); }, p, x0, u.source().boundary, radii, diagram_vertices(pd), samples);
}

std::optional<Polygon> doubled_section(const Section& s, const BoundaryFrame& frame, double eps) {
    const double t = std::pow(s.h, 1.0 - 3.0 * eps);
    Polygon z;
    for (const auto& v : s.polygon.vertices) z.vertices.push_back(frame.to_local(v));
    std::vector<int> labels(z.size(), 0);
    clip_labeled(z.vertices, labels, make_halfplane({0.0, -1.0}, -t), -1);
    if (z.vertices.size() < 3 || area(z) <= 0.0) return std::nullopt;
    if (std::none_of(labels.begin(), labels.end(), [](int l) { return l == -1; })) return std::nullopt;
    return reflect_double(z, t);
}

ShapeLadder good_shape(const BrenierPotential& u, const Vec2& x0, const std::vector<double>& heights, double eps) {
    if (!(eps > 0.0 && eps < 1.0 / 3.0)) fail(ErrorKind::parameter, "eps must lie in (0, 1/3)");
    ShapeLadder out;
    BoundaryFrame fr = boundary_frame(u.source().boundary, x0);
    fr.origin = x0;
    for (double h : heights) {
        const Section s = section(u, x0, h);
        out.heights.push_back(h);
        if (s.whole_source) {
            out.unbounded = true;
            out.ratios.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const auto d = doubled_section(s, fr, eps);
        out.ratios.push_back(d ? john_ellipsoid(*d).eccentricity() : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

double comparison_gap(const ScalarField& u, const ScalarField& v, const Polygon& region, int budget, std::uint64_t seed,
                      const std::vector<Vec2>& extra) {
    const Vec2 c = centroid(region);
    const double uc = u(c), vc = v(c);
    double gap = 0.0;
    auto take = [&](const Vec2& x) { gap = std::max(gap, std::abs((u(x) - uc) - (v(x) - vc))); };
    for (const auto& x : region.vertices) take(x);
    for (const auto& x : extra)
        if (contains(region, x)) take(x);
    const int m = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(budget, 1))))));
    const BoundingBox b = bounding_box(region);
    Rng rng(seed);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const Vec2 x{b.lo.x + b.width() * (i + rng.uniform()) / m, b.lo.y + b.height() * (j + rng.uniform()) / m};
            if (contains(region, x)) take(x);
        }
    return gap;
}

std::string FreeBoundary::to_csv() const {
    std::string out = "curve_id,vertex_index,x,y\n";
    char buf[128];
    for (std::size_t c = 0; c < curves.size(); ++c)
        for (std::size_t k = 0; k < curves[c].size(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", c, k, curves[c][k].x, curves[c][k].y);
            out += buf;
        }
    return out;
}

FreeBoundary free_boundary(const PowerDiagram& diagram, const BrenierPotential& u, const std::vector<int>& labels) {
    if (labels.size() != u.size() || diagram.size() != u.size()) fail(ErrorKind::parameter, "one label per site is required");
    struct Seg {
        Vec2 a, b;
        int i, j;
    };
    std::vector<Seg> segs;
    for (const auto& adj : diagram.adjacency) {
        if (labels[static_cast<std::size_t>(adj.i)] == labels[static_cast<std::size_t>(adj.j)]) continue;
        for (const auto& [a, b] : adj.pieces)
            if (norm(b - a) >= kMinEdgeLength) segs.push_back({a, b, adj.i, adj.j});
    }
    FreeBoundary fb;
    if (segs.empty()) return fb;
    fb.empty = false;

    // Chain segments through shared endpoints (union of nearby endpoints).
    const double tol = 1e-9 * std::max(1.0, diameter(u.source().boundary));
    std::vector<Vec2> pts;
    for (const auto& s : segs) {
        pts.push_back(s.a);
        pts.push_back(s.b);
    }
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pts[a].x < pts[b].x; });
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size() && pts[idx[b]].x - pts[idx[a]].x <= tol; ++b)
            if (norm(pts[idx[a]] - pts[idx[b]]) <= tol) parent[find(idx[a])] = find(idx[b]);
    std::map<std::size_t, std::vector<std::size_t>> incident;   // node -> segments
    for (std::size_t k = 0; k < segs.size(); ++k) {
        incident[find(2 * k)].push_back(k);
        incident[find(2 * k + 1)].push_back(k);
    }
    std::vector<bool> used(segs.size(), false);
    auto walk = [&](std::size_t node) {
        std::vector<Vec2> curve{pts[node]};
        for (;;) {
            std::size_t next = segs.size();
            for (std::size_t k : incident[node])
                if (!used[k]) {
                    next = k;
                    break;
                }
            if (next == segs.size()) break;
            used[next] = true;
            const std::size_t a = find(2 * next), b = find(2 * next + 1);
            node = a == node ? b : a;
            curve.push_back(node == find(2 * next) ? segs[next].a : segs[next].b);
        }
        fb.curves.push_back(std::move(curve));
    };
    for (const auto& [node, ks] : incident)
        if (ks.size() % 2 == 1 && std::any_of(ks.begin(), ks.end(), [&](std::size_t k) { return !used[k]; })) walk(node);
    for (std::size_t k = 0; k < segs.size(); ++k)
        if (!used[k]) walk(find(2 * k));

    // Length-weighted line fit through the segments.
    double len = 0.0;
    Vec2 mean{0.0, 0.0};
    for (const auto& s : segs) {
        const double l = norm(s.b - s.a);
        len += l;
        mean += (s.a + s.b) * (0.5 * l);
    }
    mean = mean / len;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& s : segs) {
        const double l = norm(s.b - s.a);
        const Eigen::Vector2d a = ev(s.a - mean), b = ev(s.b - mean);
        cov += l / 6.0 * (2.0 * a * a.transpose() + 2.0 * b * b.transpose() + a * b.transpose() + b * a.transpose());
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Vec2 normal = from_eigen(es.eigenvectors().col(0));
    fb.length = len;
    double dev = 0.0;
    for (const auto& q : pts) dev = std::max(dev, std::abs(dot(q - mean, normal)));
    fb.flatness = dev / len;

    fb.gradient_jump = std::numeric_limits<double>::infinity();
    for (const auto& s : segs) {
        const Vec2 yi = u.sites()[static_cast<std::size_t>(s.i)], yj = u.sites()[static_cast<std::size_t>(s.j)];
        fb.gradient_jump = std::min(fb.gradient_jump, norm(yi - yj));
        // Du from the side with the smaller label.
        const Vec2 du = labels[static_cast<std::size_t>(s.i)] <= labels[static_cast<std::size_t>(s.j)] ? yi : yj;
        const Vec2 mid = (s.a + s.b) * 0.5;
        const Vec2 nu = du - mid;
        if (norm(nu) == 0.0) continue;
        const Vec2 ne = normalized(perp(s.b - s.a));
        const double c = std::min(1.0, std::abs(dot(ne, normalized(nu))));
        fb.normal_deviation = std::max(fb.normal_deviation, std::acos(c));
    }
    return fb;
}

W2pProbe w2p_probe(const BrenierPotential& u, double grid_h, const std::vector<double>& ps) {
    const Polygon& src = u.source().boundary;
    const double spacing = std::sqrt(area(src) / static_cast<double>(u.size()));
    if (!(grid_h >= 2.0 * spacing)) fail(ErrorKind::resolution, "w2p grid is finer than twice the mean site spacing");
    for (double p : ps)
        if (!(p >= 1.0)) fail(ErrorKind::parameter, "p must be at least 1");
    W2pProbe out;
    out.grid_h = grid_h;
    out.p = ps;
    const double q = grid_h / 4.0;
    const BoundingBox b = bounding_box(src);
    const double pad = grid_h + 2.0 * q;
    const int nx = static_cast<int>(std::ceil((b.width() + 2.0 * pad) / q)) + 1;
    const int ny = static_cast<int>(std::ceil((b.height() + 2.0 * pad) / q)) + 1;
    const Vec2 lo{b.lo.x - pad, b.lo.y - pad};
    auto at = [nx](int i, int j) { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i); };
    std::vector<Vec2> du(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) du[at(i, j)] = u.map(lo + Vec2{i * q, j * q});
    // Separable tent of half-width grid_h = 4 q.
    const double wts[7] = {0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25};
    std::vector<Vec2> tmp(du.size()), g(du.size());
    for (int j = 0; j < ny; ++j)
        for (int i = 3; i < nx - 3; ++i) {
            Vec2 s{0.0, 0.0};
            for (int m = -3; m <= 3; ++m) s += du[at(i + m, j)] * wts[m + 3];
            tmp[at(i, j)] = s / 4.0;
        }
    for (int j = 3; j < ny - 3; ++j)
        for (int i = 0; i < nx; ++i) {
            Vec2 s{0.0, 0.0};
            for (int m = -3; m <= 3; ++m) s += tmp[at(i, j + m)] * wts[m + 3];
            g[at(i, j)] = s / 4.0;
        }
    std::vector<double> mags;
    for (int j = 4; j < ny - 4; ++j)
        for (int i = 4; i < nx - 4; ++i) {
            const Vec2 x = lo + Vec2{i * q, j * q};
            if (!contains(src, x) || distance_to_boundary(src, x) < grid_h + q) continue;
            const Vec2 gx = (g[at(i + 1, j)] - g[at(i - 1, j)]) / (2.0 * q);
            const Vec2 gy = (g[at(i, j + 1)] - g[at(i, j - 1)]) / (2.0 * q);
            Eigen::Matrix2d hm;
            hm << gx.x, 0.5 * (gy.x + gx.y), 0.5 * (gy.x + gx.y), gy.y;
            mags.push_back(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hm).eigenvalues().cwiseAbs().maxCoeff());
        }
    if (mags.empty()) fail(ErrorKind::resolution, "no probe points at distance grid_h from the boundary");
    out.points = static_cast<int>(mags.size());
    for (double p : ps) {
        double s = 0.0;
        for (double m : mags) s += std::pow(m, p);
        out.norms.push_back(std::pow(s / static_cast<double>(mags.size()), 1.0 / p));
        out.unnormalized_norms.push_back(std::pow(s * q * q, 1.0 / p));
    }
    std::vector<std::size_t> order(ps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ps[a] < ps[b]; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (out.norms[order[k]] < out.norms[order[k - 1]] * (1.0 - 1e-12)) out.jensen_monotone = false;
    return out;
}

nlohmann::json to_json(const IterationTrace& t) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : t.steps) {
        const double nm = Eigen::JacobiSVD<Eigen::Matrix2d>(s.M).singularValues()(0);
        const double nminv = 1.0 / Eigen::JacobiSVD<Eigen::Matrix2d>(s.M).singularValues()(1);
        steps.push_back({{"k", s.k},
                         {"h", s.h},
                         {"A", {{s.A(0, 0), s.A(0, 1)}, {s.A(1, 0), s.A(1, 1)}}},
                         {"M", {{s.M(0, 0), s.M(0, 1)}, {s.M(1, 0), s.M(1, 1)}}},
                         {"det_M", s.M.determinant()},
                         {"norm_M", nm},
                         {"norm_M_inv", nminv},
                         {"norm_A_minus_I", Eigen::JacobiSVD<Eigen::Matrix2d>(s.A - Eigen::Matrix2d::Identity()).singularValues()(0)},
                         {"inner_pass", s.inner_pass},
                         {"outer_pass", s.outer_pass},
                         {"ho1_inner_pass", s.ho1_inner_pass},
                         {"ho1_outer_pass", s.ho1_outer_pass},
                         {"r_inner", s.r_inner},
                         {"r_outer", s.r_outer},
                         {"measured_inner", s.measured_inner},
                         {"measured_outer", s.measured_outer},
                         {"mode", s.mode}});
    }
    return {{"base_point", {t.base_point.x, t.base_point.y}}, {"h0", t.h0}, {"K", t.K},
            {"steps", steps}, {"unbounded", t.unbounded}, {"truncated", t.truncated}};
}

nlohmann::json to_json(const HolderFit& f) {
    return {{"beta_hat", f.beta_hat}, {"residual", f.residual}, {"radii", f.radii}, {"sups", f.sups}};
}

nlohmann::json to_json(const W2pProbe& w) {
    return {{"grid_h", w.grid_h}, {"p", w.p}, {"norms", w.norms}, {"unnormalized_norms", w.unnormalized_norms},
            {"jensen_monotone", w.jensen_monotone}, {"points", w.points}};
}

nlohmann::json to_json(const FreeBoundary& fb) {
    return {{"empty", fb.empty}, {"curves", fb.curves.size()}, {"length", fb.length}, {"flatness", fb.flatness},
            {"normal_deviation", fb.normal_deviation}, {"gradient_jump", fb.empty ? 0.0 : fb.gradient_jump}};
}

}  // namespace sdot
