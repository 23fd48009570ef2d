#pragma once

#include "sdot/geometry.hpp"

#include <utility>
#include <vector>

namespace sdot {

// Max of affine functions f(x) = max_j (x . s_j - c_j) backed by a kd-tree on
// the slopes. Each node bounds its pieces from above in two ways: through the
// slope bounding box and minimum offset, and through the lifted form
// c_j = |s_j|^2/2 + g . s_j + r_j with a per-node fitted drift g, which gives
// x . s_j - c_j <= |x-g|^2/2 - dist(x-g, box)^2/2 - min r.
class AffineMax {
public:
    struct Node {
        Vec2 lo, hi;
        double min_offset = 0.0;
        Vec2 drift;
        double min_residual = 0.0;
        int left = -1, right = -1;   // children, -1 for a leaf
        int begin = 0, end = 0;      // leaf range in order()
    };

    AffineMax() = default;
    AffineMax(std::vector<Vec2> slopes, std::vector<double> offsets);

    // Value and argmax; ties go to the smallest index.
    std::pair<double, int> eval(const Vec2& x) const;

    // Upper bound of max_{j in node} (v . s_j - c_j) at v.
    double node_bound(int node, const Vec2& v) const;

    std::size_t size() const { return slopes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& order() const { return order_; }
    const std::vector<Vec2>& slopes() const { return slopes_; }
    const std::vector<double>& offsets() const { return offsets_; }

private:
    int build(int begin, int end);

    std::vector<Vec2> slopes_;
    std::vector<double> offsets_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// One Laguerre cell. `convex` is the power cell clipped to the convex hull of
// the source, with labels[k] the neighbor across edge (convex[k], convex[k+1])
// or -1 on the hull. `polygon` is the cell intersected with the source itself
// (equal to `convex` for convex sources); it may be weakly simple.
struct Cell {
    Polygon polygon;
    std::vector<Vec2> convex;
    std::vector<int> labels;
    bool touches_boundary = false;
};

// Shared boundary of cells i < j inside the source, possibly in pieces.
struct Adjacency {
    int i = 0, j = 0;
    std::vector<std::pair<Vec2, Vec2>> pieces;
    double length = 0.0;
};

struct PowerDiagram {
    std::vector<Cell> cells;   // indexed by site
    std::vector<Adjacency> adjacency;
    bool source_convex = true;

    std::size_t size() const { return cells.size(); }
    std::size_t empty_cells() const;
};

// Laguerre cells of u(x) = max_i (x . y_i - w_i) restricted to the source.
// Duplicate sites raise a parameter error.
PowerDiagram power_diagram(const std::vector<Vec2>& sites, const std::vector<double>& weights, const Polygon& source);

// Edges shorter than this are not adjacencies.
inline constexpr double kMinEdgeLength = 1e-12;

// Cell export: "cell_id,vertex_index,x,y".
std::string cells_to_csv(const PowerDiagram& diagram);

}  // namespace sdot
