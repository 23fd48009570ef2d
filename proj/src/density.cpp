#include "sdot/density.hpp"

#include "sdot/error.hpp"
#include "sdot/power_diagram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sdot {

namespace {

// Seven-point degree-5 triangle rule: barycentric orbits and weights.
struct TriRule {
    std::array<std::array<double, 3>, 7> bary;
    std::array<double, 7> weight;
};

const TriRule& tri_rule() {
    static const TriRule rule = [] {
        const double s = std::sqrt(15.0);
        const double a = (6.0 - s) / 21.0, wa = (155.0 - s) / 1200.0;
        const double b = (6.0 + s) / 21.0, wb = (155.0 + s) / 1200.0;
        TriRule r;
        r.bary = {{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                   {a, a, 1 - 2 * a},
                   {a, 1 - 2 * a, a},
                   {1 - 2 * a, a, a},
                   {b, b, 1 - 2 * b},
                   {b, 1 - 2 * b, b},
                   {1 - 2 * b, b, b}}};
        r.weight = {0.225, wa, wa, wa, wb, wb, wb};
        return r;
    }();
    return rule;
}

// Signed-fan quadrature of g over the polygon; g returns up to 3 components.
template <class G>
std::array<double, 3> fan_integral(const Polygon& poly, G&& g) {
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    const auto& v = poly.vertices;
    if (v.size() < 3) return acc;
    const TriRule& rule = tri_rule();
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const Vec2 p0 = v[0], p1 = v[i], p2 = v[i + 1];
        const double a = 0.5 * cross(p1 - p0, p2 - p0);
        if (a == 0.0) continue;
        std::array<double, 3> t{0.0, 0.0, 0.0};
        for (std::size_t q = 0; q < 7; ++q) {
            const auto& l = rule.bary[q];
            const Vec2 x = p0 * l[0] + p1 * l[1] + p2 * l[2];
            const auto val = g(x);
            for (int c = 0; c < 3; ++c) t[c] += rule.weight[q] * val[c];
        }
        for (int c = 0; c < 3; ++c) acc[c] += a * t[c];
    }
    return acc;
}

}  // namespace

DensityField DensityField::constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorKind::parameter, "constant density must be positive");
    DensityField f;
    f.kind = DensityKind::constant;
    f.value = c;
    f.c0 = f.c1 = c;
    return f;
}

DensityField DensityField::polynomial(const std::array<double, 6>& coefficients, double c0, double c1) {
    if (!(c0 > 0.0) || !(c1 >= c0)) fail(ErrorKind::parameter, "density bounds need 0 < c0 <= c1");
    DensityField f;
    f.kind = DensityKind::polynomial;
    f.coefficients = coefficients;
    f.c0 = c0;
    f.c1 = c1;
    return f;
}

DensityField DensityField::grid(const BoundingBox& box, int nx, int ny, std::vector<double> values, double c0, double c1) {
    if (nx < 2 || ny < 2) fail(ErrorKind::parameter, "grid density needs at least 2x2 values");
    if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
        fail(ErrorKind::parameter, "grid density value count must be nx*ny");
    if (!(box.width() > 0.0) || !(box.height() > 0.0)) fail(ErrorKind::parameter, "grid density box is degenerate");
    if (!(c0 > 0.0) || !(c1 >= c0)) fail(ErrorKind::parameter, "density bounds need 0 < c0 <= c1");
    DensityField f;
    f.kind = DensityKind::grid;
    f.box = box;
    f.nx = nx;
    f.ny = ny;
    f.values = std::move(values);
    f.c0 = c0;
    f.c1 = c1;
    return f;
}

double DensityField::operator()(const Vec2& x) const {
    switch (kind) {
        case DensityKind::constant:
            return value;
        case DensityKind::polynomial: {
            const auto& c = coefficients;
            return c[0] + c[1] * x.x + c[2] * x.y + c[3] * x.x * x.x + c[4] * x.x * x.y + c[5] * x.y * x.y;
        }
        case DensityKind::grid: {
            const double gx = std::clamp((x.x - box.lo.x) / box.width() * (nx - 1), 0.0, static_cast<double>(nx - 1));
            const double gy = std::clamp((x.y - box.lo.y) / box.height() * (ny - 1), 0.0, static_cast<double>(ny - 1));
            const int i = std::min(static_cast<int>(gx), nx - 2);
            const int j = std::min(static_cast<int>(gy), ny - 2);
            const double tx = gx - i, ty = gy - j;
            auto at = [this](int a, int b) { return values[static_cast<std::size_t>(b) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(a)]; };
            return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) + (1 - tx) * ty * at(i, j + 1) + tx * ty * at(i + 1, j + 1);
        }
    }
    return value;
}

void check_bounds(const DensityField& f, const Polygon& region) {
    if (!(f.c0 > 0.0) || !(f.c1 >= f.c0)) fail(ErrorKind::data, "density bounds need 0 < c0 <= c1");
    if (f.is_constant()) return;
    const double tol = 1e-12 * f.c1;
    auto check = [&](const Vec2& p) {
        const double v = f(p);
        if (!(v >= f.c0 - tol) || !(v <= f.c1 + tol)) {
            std::ostringstream os;
            os << "density value " << v << " at (" << p.x << ", " << p.y << ") leaves [" << f.c0 << ", " << f.c1 << "]";
            fail(ErrorKind::data, os.str());
        }
    };
    for (const auto& v : region.vertices) check(v);
    const BoundingBox b = bounding_box(region);
    constexpr int kSamples = 64;
    for (int i = 0; i <= kSamples; ++i)
        for (int j = 0; j <= kSamples; ++j) {
            const Vec2 p{b.lo.x + b.width() * i / kSamples, b.lo.y + b.height() * j / kSamples};
            if (contains(region, p)) check(p);
        }
}

double integrate(const DensityField& f, const Polygon& poly) {
    if (f.is_constant()) return f.value * signed_area(poly);
    return fan_integral(poly, [&f](const Vec2& x) { return std::array<double, 3>{f(x), 0.0, 0.0}; })[0];
}

std::array<double, 3> integrate_moments(const DensityField& f, const Polygon& poly) {
    if (f.is_constant()) {
        const double a = signed_area(poly);
        const Vec2 c = centroid(poly);
        return {f.value * a, f.value * a * c.x, f.value * a * c.y};
    }
    return fan_integral(poly, [&f](const Vec2& x) {
        const double v = f(x);
        return std::array<double, 3>{v, v * x.x, v * x.y};
    });
}

double integrate_segment(const DensityField& f, const Vec2& a, const Vec2& b) {
    const double len = norm(b - a);
    if (f.is_constant()) return f.value * len;
    // Five-point Gauss-Legendre on [0, 1].
    static const std::array<double, 5> nodes = {0.5 - 0.5 * 0.9061798459386640, 0.5 - 0.5 * 0.5384693101056831, 0.5,
                                                0.5 + 0.5 * 0.5384693101056831, 0.5 + 0.5 * 0.9061798459386640};
    static const std::array<double, 5> weights = {0.5 * 0.2369268850561891, 0.5 * 0.4786286704993665, 0.5 * 0.5688888888888889,
                                                  0.5 * 0.4786286704993665, 0.5 * 0.2369268850561891};
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) s += weights[k] * f(a + (b - a) * nodes[k]);
    return s * len;
}

double DiscreteMeasure::total() const {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
}

std::vector<double> voronoi_masses(const DensityField& f, const Polygon& domain, const std::vector<Vec2>& sites) {
    std::vector<double> w(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) w[i] = 0.5 * norm2(sites[i]);
    const PowerDiagram pd = power_diagram(sites, w, domain);
    std::vector<double> m(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) m[i] = integrate(f, pd.cells[i].polygon);
    return m;
}

double covering_radius(const Polygon& domain, const std::vector<Vec2>& sites) {
    std::vector<double> w(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) w[i] = 0.5 * norm2(sites[i]);
    const PowerDiagram pd = power_diagram(sites, w, domain);
    double r = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (const auto& v : pd.cells[i].polygon.vertices) r = std::max(r, norm(v - sites[i]));
    return r;
}

DiscreteMeasure quantize(const DensityField& f, const Domain& domain, std::size_t n, std::uint64_t seed, int lloyd_steps,
                         double source_mass) {
    if (n == 0) fail(ErrorKind::parameter, "quantize needs N >= 1");
    if (lloyd_steps < 0) fail(ErrorKind::parameter, "lloyd_steps must be nonnegative");
    const Polygon& poly = domain.boundary;
    const BoundingBox box = bounding_box(poly);
    Rng rng(seed);
    DiscreteMeasure m;
    m.sites.reserve(n);
    const std::size_t max_attempts = 1000 * n + 1000000;
    std::size_t attempts = 0;
    while (m.sites.size() < n) {
        if (++attempts > max_attempts) fail(ErrorKind::sampling, "rejection sampling exhausted its attempt budget");
        const Vec2 p{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
        const double u = rng.uniform();
        if (!contains(poly, p, 0.0)) continue;
        if (!f.is_constant() && u * f.c1 > f(p)) continue;
        m.sites.push_back(p);
    }
    std::vector<double> w(n);
    for (int step = 0; step < lloyd_steps; ++step) {
        for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 * norm2(m.sites[i]);
        const PowerDiagram pd = power_diagram(m.sites, w, poly);
        for (std::size_t i = 0; i < n; ++i) {
            const auto mom = integrate_moments(f, pd.cells[i].polygon);
            if (!(mom[0] > 0.0)) continue;
            const Vec2 c{mom[1] / mom[0], mom[2] / mom[0]};
            if (contains(poly, c, 0.0)) m.sites[i] = c;
        }
    }
    m.masses = voronoi_masses(f, poly, m.sites);
    for (double mass : m.masses)
        if (!(mass > 0.0)) fail(ErrorKind::sampling, "quantized site has an empty Voronoi cell");
    const double raw = m.total();
    const double target = source_mass > 0.0 ? source_mass : integrate(f, poly);
    m.lambda_correction = target / raw;
    for (double& mass : m.masses) mass *= m.lambda_correction;
    return m;
}

nlohmann::json to_json(const DensityField& f) {
    nlohmann::json j;
    switch (f.kind) {
        case DensityKind::constant:
            j["kind"] = "constant";
            j["params"] = {{"value", f.value}};
            break;
        case DensityKind::polynomial:
            j["kind"] = "polynomial";
            j["params"] = {{"coefficients", f.coefficients}};
            break;
        case DensityKind::grid:
            j["kind"] = "grid";
            j["params"] = {{"box", {{f.box.lo.x, f.box.lo.y}, {f.box.hi.x, f.box.hi.y}}}, {"nx", f.nx}, {"ny", f.ny}, {"values", f.values}};
            break;
    }
    j["bounds"] = {f.c0, f.c1};
    return j;
}

DensityField density_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::config, "density must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "kind" && it.key() != "params" && it.key() != "bounds")
            fail(ErrorKind::config, "unknown key \"" + it.key() + "\" in density");
    try {
        const std::string kind = j.value("kind", std::string("constant"));
        const nlohmann::json params = j.value("params", nlohmann::json::object());
        auto bounds = [&]() -> std::pair<double, double> {
            if (!j.contains("bounds")) fail(ErrorKind::config, "density.bounds is required for kind " + kind);
            const auto& b = j["bounds"];
            if (!b.is_array() || b.size() != 2) fail(ErrorKind::config, "density.bounds must be [c0, c1]");
            return {b[0].get<double>(), b[1].get<double>()};
        };
        if (kind == "constant") {
            DensityField f = DensityField::constant(params.value("value", 1.0));
            if (j.contains("bounds")) {
                const auto [c0, c1] = bounds();
                f.c0 = c0;
                f.c1 = c1;
            }
            return f;
        }
        if (kind == "polynomial") {
            const auto c = params.at("coefficients").get<std::vector<double>>();
            if (c.size() != 6) fail(ErrorKind::config, "density.params.coefficients needs 6 entries (1, x, y, x^2, xy, y^2)");
            std::array<double, 6> a{};
            std::copy(c.begin(), c.end(), a.begin());
            const auto [c0, c1] = bounds();
            return DensityField::polynomial(a, c0, c1);
        }
        if (kind == "grid") {
            const auto& b = params.at("box");
            BoundingBox box{{b.at(0).at(0).get<double>(), b.at(0).at(1).get<double>()}, {b.at(1).at(0).get<double>(), b.at(1).at(1).get<double>()}};
            const auto [c0, c1] = bounds();
            return DensityField::grid(box, params.at("nx").get<int>(), params.at("ny").get<int>(), params.at("values").get<std::vector<double>>(), c0, c1);
        }
        fail(ErrorKind::config, "density.kind \"" + kind + "\" is not recognized");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("density: ") + e.what());
    }
}

std::string measure_to_csv(const DiscreteMeasure& m) {
    std::string out = "x,y,mass\n";
    char buf[96];
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", m.sites[i].x, m.sites[i].y, m.masses[i]);
        out += buf;
    }
    return out;
}

DiscreteMeasure measure_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) fail(ErrorKind::data, "empty measure CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y,mass") fail(ErrorKind::data, "measure CSV header must be \"x,y,mass\"");
    DiscreteMeasure m;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        double x = 0, y = 0, w = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &w) != 3)
            fail(ErrorKind::data, "measure CSV row " + std::to_string(row) + " is malformed");
        if (!(w > 0.0)) fail(ErrorKind::data, "measure CSV row " + std::to_string(row) + " has a non-positive mass");
        m.sites.push_back({x, y});
        m.masses.push_back(w);
    }
    if (m.sites.empty()) fail(ErrorKind::data, "measure CSV has no rows");
    return m;
}

}  // namespace sdot
