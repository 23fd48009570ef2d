#pragma once

#include "sdot/domain.hpp"
#include "sdot/geometry.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sdot {

enum class DensityKind { constant, polynomial, grid };

// Positive density with declared bounds c0 <= f <= c1.
// polynomial: coefficients of 1, x, y, x^2, xy, y^2.
// grid: values on an nx-by-ny lattice (row-major in y, x fastest) spanning
// `box`, bilinear in between and clamped outside.
struct DensityField {
    DensityKind kind = DensityKind::constant;
    double value = 1.0;
    std::array<double, 6> coefficients{};
    BoundingBox box;
    int nx = 0, ny = 0;
    std::vector<double> values;
    double c0 = 1.0, c1 = 1.0;

    static DensityField constant(double c);
    static DensityField polynomial(const std::array<double, 6>& coefficients, double c0, double c1);
    static DensityField grid(const BoundingBox& box, int nx, int ny, std::vector<double> values, double c0, double c1);

    double operator()(const Vec2& x) const;
    bool is_constant() const { return kind == DensityKind::constant; }
};

// Throws a data error when the field leaves [c0, c1] at sampled points of the
// polygon, or the bounds themselves are invalid.
void check_bounds(const DensityField& f, const Polygon& region);

// Integral over a polygon (possibly weakly simple; empty gives 0). Exact for
// constant and polynomial fields.
double integrate(const DensityField& f, const Polygon& poly);
// Mass and first moments (int f, int x f, int y f).
std::array<double, 3> integrate_moments(const DensityField& f, const Polygon& poly);
// Line integral over a segment.
double integrate_segment(const DensityField& f, const Vec2& a, const Vec2& b);

// Uniform doubles in [0, 1) from std::mt19937_64, using the 53 high bits of
// each draw so the stream is identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
};

struct DiscreteMeasure {
    std::vector<Vec2> sites;
    std::vector<double> masses;
    double lambda_correction = 1.0;

    std::size_t size() const { return sites.size(); }
    double total() const;
};

// N sites by seeded rejection sampling, lloyd_steps field-weighted Lloyd
// steps, masses from the final Voronoi cells scaled by lambda so that they sum
// to source_mass (the field mass of the domain when source_mass <= 0).
DiscreteMeasure quantize(const DensityField& f, const Domain& domain, std::size_t n, std::uint64_t seed, int lloyd_steps,
                         double source_mass = 0.0);

// Voronoi masses of given sites in the domain (no sampling, no Lloyd).
std::vector<double> voronoi_masses(const DensityField& f, const Polygon& domain, const std::vector<Vec2>& sites);

// Largest distance from a domain point to its nearest site, estimated on the
// Voronoi cell vertices (exact for the clipped Voronoi diagram).
double covering_radius(const Polygon& domain, const std::vector<Vec2>& sites);

nlohmann::json to_json(const DensityField& f);
DensityField density_from_json(const nlohmann::json& j);

// "x,y,mass" CSV.
std::string measure_to_csv(const DiscreteMeasure& m);
DiscreteMeasure measure_from_csv(const std::string& text);

}  // namespace sdot
