#include "sdot/domain.hpp"

#include "sdot/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace sdot {

namespace {

constexpr double kPi = std::numbers::pi;

Polygon disk_polygon(const Vec2& c, double r, int n) {
    Polygon p;
    p.vertices.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t = 2.0 * kPi * k / n;
        p.vertices.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
    }
    return p;
}

Polygon rect_polygon(const Vec2& c, double a, double b) {
    return Polygon{{{c.x - a / 2, c.y - b / 2}, {c.x + a / 2, c.y - b / 2}, {c.x + a / 2, c.y + b / 2}, {c.x - a / 2, c.y + b / 2}}};
}

Polygon dumbbell_polygon(const ShapeSpec& s) {
    const double r = s.radius;
    const double hw = s.neck_width / 2;
    const double th = std::asin(hw / r);
    const int per_lobe = std::max(8, s.n_vertices / 2);
    const Vec2 cr{s.center.x + s.separation / 2, s.center.y};
    const Vec2 cl{s.center.x - s.separation / 2, s.center.y};
    Polygon p;
    // Right lobe from its lower neck junction CCW to its upper junction, then
    // the left lobe likewise; the straight neck edges close the loop.
    for (int k = 0; k <= per_lobe; ++k) {
        const double t = kPi + th + (2.0 * kPi - 2.0 * th) * k / per_lobe;
        p.vertices.push_back({cr.x + r * std::cos(t), cr.y + r * std::sin(t)});
    }
    for (int k = 0; k <= per_lobe; ++k) {
        const double t = th + (2.0 * kPi - 2.0 * th) * k / per_lobe;
        p.vertices.push_back({cl.x + r * std::cos(t), cl.y + r * std::sin(t)});
    }
    return p;
}

void check_shape(const ShapeSpec& s) {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::parameter, std::string(what) + " must be positive");
    };
    switch (s.kind) {
        case ShapeKind::disk:
            positive(s.radius, "radius");
            if (s.n_vertices < 3) fail(ErrorKind::parameter, "n_vertices must be at least 3");
            break;
        case ShapeKind::square:
            positive(s.side, "side");
            break;
        case ShapeKind::rect:
            positive(s.a, "rect width a");
            positive(s.b, "rect height b");
            break;
        case ShapeKind::dumbbell:
            positive(s.radius, "radius");
            positive(s.neck_width, "neck width");
            if (s.neck_width >= 2.0 * s.radius) fail(ErrorKind::parameter, "neck width must be below the lobe diameter");
            if (!(s.separation > 2.0 * s.radius)) fail(ErrorKind::parameter, "dumbbell lobes must not overlap");
            if (s.n_vertices < 16) fail(ErrorKind::parameter, "n_vertices must be at least 16 for a dumbbell");
            break;
        case ShapeKind::two_disks:
            positive(s.radius, "radius");
            if (s.n_vertices < 3) fail(ErrorKind::parameter, "n_vertices must be at least 3");
            if (!(s.separation > 2.0 * s.radius)) fail(ErrorKind::parameter, "two_disks components must be disjoint");
            break;
    }
}

Domain convex_domain(Polygon p) {
    Domain d;
    d.boundary = p;
    d.convex_base = std::move(p);
    return d;
}

// Samples of the convex base used both to build perturbations and to measure
// them: the base vertices when dense enough, otherwise a uniform arclength
// resampling.
std::vector<Vec2> base_samples(const Polygon& base) {
    constexpr std::size_t kMinVertices = 64;
    constexpr std::size_t kResample = 512;
    if (base.size() >= kMinVertices) return base.vertices;
    const std::size_t n = base.size();
    const double per = perimeter(base);
    std::vector<Vec2> out;
    out.reserve(kResample);
    std::size_t edge = 0;
    double edge_start = 0.0;
    for (std::size_t k = 0; k < kResample; ++k) {
        const double s = per * static_cast<double>(k) / kResample;
        while (edge + 1 < n && edge_start + norm(base[(edge + 1) % n] - base[edge]) <= s) {
            edge_start += norm(base[(edge + 1) % n] - base[edge]);
            ++edge;
        }
        const Vec2& a = base[edge];
        const Vec2& b = base[(edge + 1) % n];
        const double len = norm(b - a);
        out.push_back(a + (b - a) * ((s - edge_start) / len));
    }
    return out;
}

// Outward normals at the samples: the edge normal inside an edge, the average
// of the adjacent edge normals at a corner.
std::vector<Vec2> sample_normals(const std::vector<Vec2>& pts) {
    const std::size_t n = pts.size();
    std::vector<Vec2> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 e0 = normalized(pts[i] - pts[(i + n - 1) % n]);
        const Vec2 e1 = normalized(pts[(i + 1) % n] - pts[i]);
        out[i] = normalized(Vec2{e0.y, -e0.x} + Vec2{e1.y, -e1.x});
    }
    return out;
}

std::string mode_name(PerturbationMode m) { return m == PerturbationMode::radial_wave ? "radial_wave" : "boundary_bump"; }

std::string kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::disk: return "disk";
        case ShapeKind::square: return "square";
        case ShapeKind::rect: return "rect";
        case ShapeKind::dumbbell: return "dumbbell";
        case ShapeKind::two_disks: return "two_disks";
    }
    return "disk";
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::config, where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(ErrorKind::config, "unknown key \"" + it.key() + "\" in " + where);
}

nlohmann::json polygon_json(const Polygon& p) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : p.vertices) a.push_back({v.x, v.y});
    return a;
}

Polygon polygon_of_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) fail(ErrorKind::config, where + " must be an array of [x, y] pairs");
    Polygon p;
    for (const auto& v : j) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(ErrorKind::config, where + " must be an array of [x, y] pairs");
        p.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return p;
}

}  // namespace

Domain make_domain(const ShapeSpec& shape) {
    if (shape.kind == ShapeKind::two_disks)
        fail(ErrorKind::parameter, "two_disks has two components; use make_domain_set");
    return make_domain_set(shape).front();
}

std::vector<Domain> make_domain_set(const ShapeSpec& shape) {
    check_shape(shape);
    switch (shape.kind) {
        case ShapeKind::disk:
            return {convex_domain(disk_polygon(shape.center, shape.radius, shape.n_vertices))};
        case ShapeKind::square:
            return {convex_domain(rect_polygon(shape.center, shape.side, shape.side))};
        case ShapeKind::rect:
            return {convex_domain(rect_polygon(shape.center, shape.a, shape.b))};
        case ShapeKind::dumbbell: {
            Domain d;
            d.boundary = dumbbell_polygon(shape);
            d.convex_base = convex_hull(d.boundary.vertices);
            // Not a small perturbation of its hull: delta is the plain offset.
            for (const auto& v : d.boundary.vertices) d.delta = std::max(d.delta, distance_to_boundary(d.convex_base, v));
            return {d};
        }
        case ShapeKind::two_disks: {
            const Vec2 off{shape.separation / 2, 0.0};
            return {convex_domain(disk_polygon(shape.center - off, shape.radius, shape.n_vertices)),
                    convex_domain(disk_polygon(shape.center + off, shape.radius, shape.n_vertices))};
        }
    }
    fail(ErrorKind::parameter, "unknown shape kind");
}

Domain perturb_domain(const Domain& base, const PerturbationSpec& spec) {
    if (base.delta != 0.0) fail(ErrorKind::parameter, "perturb_domain needs a delta = 0 base");
    if (!(spec.amplitude >= 0.0) || !std::isfinite(spec.amplitude)) fail(ErrorKind::parameter, "amplitude must be nonnegative");
    if (spec.frequency < 1) fail(ErrorKind::parameter, "frequency must be a positive integer");
    Domain out = base;
    out.perturbation = spec;
    if (spec.amplitude == 0.0) return out;

    std::vector<Vec2> pts = base_samples(base.convex_base);
    if (spec.mode == PerturbationMode::radial_wave) {
        const Vec2 c = centroid(base.convex_base);
        for (auto& p : pts) {
            const Vec2 r = p - c;
            const double factor = 1.0 + spec.amplitude * std::sin(spec.frequency * std::atan2(r.y, r.x) + spec.phase);
            if (!(factor > 0.0)) fail(ErrorKind::perturbation, "radial wave collapses the boundary");
            p = c + r * factor;
        }
    } else {
        // Single inward dent on edge 0 of the base.
        const Vec2 a = base.convex_base[0];
        const Vec2 b = base.convex_base[1 % base.convex_base.size()];
        const double len = norm(b - a);
        const Vec2 t = (b - a) / len;
        const Vec2 inward = perp(t);
        const double center = len / 2 + spec.phase * len / 2;
        const double half_width = len / (4.0 * spec.frequency);
        for (auto& p : pts) {
            const Vec2 q = p - a;
            if (std::abs(cross(t, q)) > 1e-12 * len) continue;
            const double s = (dot(q, t) - center) / half_width;
            if (std::abs(s) >= 1.0) continue;
            const double g = 1.0 - s * s;
            p += inward * (spec.amplitude * g * g * g);
        }
    }
    out.boundary = Polygon{std::move(pts)};
    if (!(signed_area(out.boundary) > 0.0) || !is_simple(out.boundary))
        fail(ErrorKind::perturbation, "perturbed boundary is not simple");
    try {
        out.delta = delta_distance(out);
    } catch (const Error& e) {
        fail(ErrorKind::perturbation, std::string("perturbed boundary is not a graph over its base: ") + e.what());
    }
    return out;
}

GraphSamples boundary_graph(const Domain& domain) {
    const std::vector<Vec2> pts = base_samples(domain.convex_base);
    const std::vector<Vec2> nrm = sample_normals(pts);
    const Polygon& bd = domain.boundary;
    const std::size_t m = bd.size();
    const std::size_t n = pts.size();
    const double per = perimeter(bd);
    const double scale = bounding_box(domain.convex_base).diagonal();

    std::vector<double> edge_start(m, 0.0);
    for (std::size_t i = 1; i < m; ++i) edge_start[i] = edge_start[i - 1] + norm(bd[i] - bd[i - 1]);

    GraphSamples g;
    g.s.resize(n);
    g.d.resize(n);
    std::vector<double> sigma(n);
    double s_acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) s_acc += norm(pts[k] - pts[k - 1]);
        g.s[k] = s_acc;
        // Nearest crossing of the normal line through the sample.
        double best = std::numeric_limits<double>::infinity();
        double best_sigma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const Vec2& a = bd[i];
            const Vec2 e = bd[(i + 1) % m] - a;
            const double den = cross(nrm[k], e);
            if (std::abs(den) <= 1e-15 * norm(e)) continue;
            const double t = cross(a - pts[k], e) / den;
            const double u = cross(a - pts[k], nrm[k]) / den;
            if (u < -1e-12 || u > 1.0 + 1e-12) continue;
            if (std::abs(t) < std::abs(best)) {
                best = t;
                best_sigma = edge_start[i] + std::clamp(u, 0.0, 1.0) * norm(e);
            }
        }
        if (!std::isfinite(best)) fail(ErrorKind::geometry, "boundary has no crossing along a base normal");
        g.d[k] = best;
        sigma[k] = best_sigma;
    }
    // Fold-over: the crossings must advance monotonically around the boundary.
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double ds = sigma[(k + 1) % n] - sigma[k];
        if (ds < 0.0) ds += per;
        if (ds >= per / 2) fail(ErrorKind::geometry, "boundary folds over its convex base");
        total += ds;
    }
    if (std::abs(total - per) > 1e-9 * per) fail(ErrorKind::geometry, "boundary folds over its convex base");
    for (auto& d : g.d)
        if (std::abs(d) <= 1e-13 * scale) d = 0.0;
    g.step = (s_acc + norm(pts.front() - pts.back())) / static_cast<double>(n);
    return g;
}

double delta_distance(const Domain& domain) {
    const GraphSamples g = boundary_graph(domain);
    const std::size_t n = g.s.size();
    const double closing = g.step * static_cast<double>(n) - g.s.back();
    double delta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t km = (k + n - 1) % n;
        const std::size_t kp = (k + 1) % n;
        const double h1 = k == 0 ? closing : g.s[k] - g.s[km];
        const double h2 = kp == 0 ? closing : g.s[kp] - g.s[k];
        const double d0 = g.d[km], d1 = g.d[k], d2 = g.d[kp];
        const double den = h1 * h2 * (h1 + h2);
        const double first = (h1 * h1 * d2 + (h2 * h2 - h1 * h1) * d1 - h2 * h2 * d0) / den;
        const double second = 2.0 * (h1 * d2 - (h1 + h2) * d1 + h2 * d0) / den;
        delta = std::max(delta, std::abs(d1) + std::abs(first) + std::abs(second));
    }
    return delta;
}

double regular_polygon_radius_for_area(int n_vertices, double target_area) {
    if (n_vertices < 3 || !(target_area > 0.0)) fail(ErrorKind::parameter, "regular polygon needs n >= 3 and positive area");
    const double n = n_vertices;
    return std::sqrt(2.0 * target_area / (n * std::sin(2.0 * kPi / n)));
}

nlohmann::json to_json(const PerturbationSpec& spec) {
    return {{"mode", mode_name(spec.mode)}, {"amplitude", spec.amplitude}, {"frequency", spec.frequency}, {"phase", spec.phase}};
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"mode", "amplitude", "frequency", "phase"}, "perturbation");
    PerturbationSpec s;
    try {
        const std::string mode = j.value("mode", std::string("radial_wave"));
        if (mode == "radial_wave")
            s.mode = PerturbationMode::radial_wave;
        else if (mode == "boundary_bump")
            s.mode = PerturbationMode::boundary_bump;
        else
            fail(ErrorKind::config, "perturbation.mode must be radial_wave or boundary_bump");
        s.amplitude = j.value("amplitude", 0.0);
        s.frequency = j.value("frequency", 1);
        s.phase = j.value("phase", 0.0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("perturbation: ") + e.what());
    }
    return s;
}

nlohmann::json to_json(const Domain& domain) {
    nlohmann::json j;
    j["boundary"] = polygon_json(domain.boundary);
    j["convex_base"] = polygon_json(domain.convex_base);
    j["delta"] = domain.delta;
    j["perturbation"] = domain.perturbation ? to_json(*domain.perturbation) : nlohmann::json(nullptr);
    return j;
}

Domain domain_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"boundary", "convex_base", "delta", "perturbation"}, "domain");
    if (!j.contains("boundary")) fail(ErrorKind::config, "domain.boundary is required");
    Domain d;
    d.boundary = polygon_of_json(j["boundary"], "domain.boundary");
    d.convex_base = j.contains("convex_base") ? polygon_of_json(j["convex_base"], "domain.convex_base") : d.boundary;
    if (j.contains("delta")) {
        if (!j["delta"].is_number()) fail(ErrorKind::config, "domain.delta must be a number");
        d.delta = j["delta"].get<double>();
    }
    if (j.contains("perturbation") && !j["perturbation"].is_null()) d.perturbation = perturbation_from_json(j["perturbation"]);
    validate_polygon(d.boundary);
    validate_polygon(d.convex_base);
    if (!is_convex(d.convex_base)) fail(ErrorKind::geometry, "domain.convex_base is not convex");
    if (d.delta < 0.0) fail(ErrorKind::config, "domain.delta must be nonnegative");
    return d;
}

nlohmann::json to_json(const ShapeSpec& s) {
    nlohmann::json j{{"kind", kind_name(s.kind)}, {"center", {s.center.x, s.center.y}}};
    switch (s.kind) {
        case ShapeKind::disk:
            j["radius"] = s.radius;
            j["n_vertices"] = s.n_vertices;
            break;
        case ShapeKind::square:
            j["side"] = s.side;
            break;
        case ShapeKind::rect:
            j["a"] = s.a;
            j["b"] = s.b;
            break;
        case ShapeKind::dumbbell:
            j["radius"] = s.radius;
            j["n_vertices"] = s.n_vertices;
            j["separation"] = s.separation;
            j["neck_width"] = s.neck_width;
            break;
        case ShapeKind::two_disks:
            j["radius"] = s.radius;
            j["n_vertices"] = s.n_vertices;
            j["separation"] = s.separation;
            break;
    }
    return j;
}

ShapeSpec shape_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"kind", "radius", "n_vertices", "side", "a", "b", "separation", "neck_width", "center"}, "shape");
    ShapeSpec s;
    try {
        const std::string kind = j.value("kind", std::string("disk"));
        if (kind == "disk")
            s.kind = ShapeKind::disk;
        else if (kind == "square")
            s.kind = ShapeKind::square;
        else if (kind == "rect")
            s.kind = ShapeKind::rect;
        else if (kind == "dumbbell")
            s.kind = ShapeKind::dumbbell;
        else if (kind == "two_disks")
            s.kind = ShapeKind::two_disks;
        else
            fail(ErrorKind::config, "shape.kind \"" + kind + "\" is not recognized");
        s.radius = j.value("radius", s.radius);
        s.n_vertices = j.value("n_vertices", s.n_vertices);
        s.side = j.value("side", s.side);
        s.a = j.value("a", s.a);
        s.b = j.value("b", s.b);
        s.separation = j.value("separation", s.separation);
        s.neck_width = j.value("neck_width", s.neck_width);
        if (j.contains("center")) {
            const auto& c = j["center"];
            if (!c.is_array() || c.size() != 2) fail(ErrorKind::config, "shape.center must be [x, y]");
            s.center = {c[0].get<double>(), c[1].get<double>()};
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("shape: ") + e.what());
    }
    return s;
}

}  // namespace sdot
