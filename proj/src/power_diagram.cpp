#include "sdot/power_diagram.hpp"

#include "sdot/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <unordered_set>

namespace sdot {

namespace {

constexpr int kLeafSize = 8;

// Uniform bucket grid over the edges of a polygon, for fast "does this convex
// region meet the boundary" queries.
class EdgeGrid {
public:
    explicit EdgeGrid(const Polygon& poly) : poly_(poly) {
        box_ = bounding_box(poly);
        const std::size_t n = poly.size();
        res_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
        buckets_.assign(static_cast<std::size_t>(res_ * res_), {});
        for (std::size_t e = 0; e < n; ++e) {
            const BoundingBox b = bounding_box(std::vector<Vec2>{poly[e], poly[(e + 1) % n]});
            const auto [x0, y0] = cell_of(b.lo);
            const auto [x1, y1] = cell_of(b.hi);
            for (int x = x0; x <= x1; ++x)
                for (int y = y0; y <= y1; ++y) buckets_[static_cast<std::size_t>(x * res_ + y)].push_back(static_cast<int>(e));
        }
    }

    // True when some polygon edge meets the convex region with CCW vertices `c`.
    bool meets(const std::vector<Vec2>& c) const {
        const BoundingBox b = bounding_box(c);
        const auto [x0, y0] = cell_of(b.lo);
        const auto [x1, y1] = cell_of(b.hi);
        const std::size_t n = poly_.size();
        for (int x = x0; x <= x1; ++x)
            for (int y = y0; y <= y1; ++y)
                for (int e : buckets_[static_cast<std::size_t>(x * res_ + y)])
                    if (segment_meets_convex(poly_[static_cast<std::size_t>(e)], poly_[(static_cast<std::size_t>(e) + 1) % n], c)) return true;
        return false;
    }

private:
    std::pair<int, int> cell_of(const Vec2& p) const {
        auto idx = [this](double v, double lo, double w) {
            if (w <= 0.0) return 0;
            return std::clamp(static_cast<int>((v - lo) / w * res_), 0, res_ - 1);
        };
        return {idx(p.x, box_.lo.x, box_.width()), idx(p.y, box_.lo.y, box_.height())};
    }

    // Cyrus-Beck parameter clipping of the segment against the region.
    static bool segment_meets_convex(const Vec2& a, const Vec2& b, const std::vector<Vec2>& c) {
        double t0 = 0.0, t1 = 1.0;
        const Vec2 d = b - a;
        const std::size_t n = c.size();
        for (std::size_t k = 0; k < n; ++k) {
            const Vec2 e = c[(k + 1) % n] - c[k];
            const double num = cross(e, a - c[k]);
            const double den = cross(e, d);
            if (den == 0.0) {
                if (num < 0.0) return false;
                continue;
            }
            const double t = -num / den;
            if (den > 0.0)
                t0 = std::max(t0, t);
            else
                t1 = std::min(t1, t);
            if (t0 > t1) return false;
        }
        return true;
    }

    const Polygon& poly_;
    BoundingBox box_;
    int res_ = 1;
    std::vector<std::vector<int>> buckets_;
};

void check_distinct(const std::vector<Vec2>& sites) {
    std::vector<Vec2> s = sites;
    std::sort(s.begin(), s.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    for (std::size_t k = 1; k < s.size(); ++k)
        if (s[k] == s[k - 1]) fail(ErrorKind::parameter, "duplicate sites in power diagram");
}

}  // namespace

AffineMax::AffineMax(std::vector<Vec2> slopes, std::vector<double> offsets)
    : slopes_(std::move(slopes)), offsets_(std::move(offsets)) {
    if (slopes_.size() != offsets_.size()) fail(ErrorKind::parameter, "slopes and offsets differ in length");
    order_.resize(slopes_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!slopes_.empty()) {
        nodes_.reserve(2 * slopes_.size() / kLeafSize + 2);
        build(0, static_cast<int>(slopes_.size()));
    }
}

int AffineMax::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = node.hi = slopes_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
    node.min_offset = std::numeric_limits<double>::infinity();
    for (int k = begin; k < end; ++k) {
        const int j = order_[static_cast<std::size_t>(k)];
        const Vec2& s = slopes_[static_cast<std::size_t>(j)];
        node.lo = {std::min(node.lo.x, s.x), std::min(node.lo.y, s.y)};
        node.hi = {std::max(node.hi.x, s.x), std::max(node.hi.y, s.y)};
        node.min_offset = std::min(node.min_offset, offsets_[static_cast<std::size_t>(j)]);
    }
    // Least-squares drift of c_j - |s_j|^2/2 over the node's slopes.
    const double cnt = end - begin;
    Vec2 mean{0.0, 0.0};
    double rmean = 0.0;
    for (int k = begin; k < end; ++k) {
        const int j = order_[static_cast<std::size_t>(k)];
        mean += slopes_[static_cast<std::size_t>(j)];
        rmean += offsets_[static_cast<std::size_t>(j)] - 0.5 * norm2(slopes_[static_cast<std::size_t>(j)]);
    }
    mean = mean / cnt;
    rmean /= cnt;
    double sxx = 0.0, sxy = 0.0, syy = 0.0, sxr = 0.0, syr = 0.0;
    for (int k = begin; k < end; ++k) {
        const int j = order_[static_cast<std::size_t>(k)];
        const Vec2 d = slopes_[static_cast<std::size_t>(j)] - mean;
        const double r = offsets_[static_cast<std::size_t>(j)] - 0.5 * norm2(slopes_[static_cast<std::size_t>(j)]) - rmean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        sxr += d.x * r;
        syr += d.y * r;
    }
    const double det = sxx * syy - sxy * sxy;
    node.drift = {0.0, 0.0};
    if (det > 1e-12 * (sxx + syy) * (sxx + syy) && det > 0.0)
        node.drift = {(syy * sxr - sxy * syr) / det, (sxx * syr - sxy * sxr) / det};
    node.min_residual = std::numeric_limits<double>::infinity();
    for (int k = begin; k < end; ++k) {
        const int j = order_[static_cast<std::size_t>(k)];
        const Vec2& s = slopes_[static_cast<std::size_t>(j)];
        node.min_residual = std::min(node.min_residual, offsets_[static_cast<std::size_t>(j)] - 0.5 * norm2(s) - dot(node.drift, s));
    }
    if (end - begin > kLeafSize) {
        const bool split_x = (node.hi.x - node.lo.x) >= (node.hi.y - node.lo.y);
        const int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
            const Vec2& sa = slopes_[static_cast<std::size_t>(a)];
            const Vec2& sb = slopes_[static_cast<std::size_t>(b)];
            return split_x ? (sa.x < sb.x || (sa.x == sb.x && a < b)) : (sa.y < sb.y || (sa.y == sb.y && a < b));
        });
        node.left = build(begin, mid);
        node.right = build(mid, end);
    }
    nodes_[static_cast<std::size_t>(id)] = node;
    return id;
}

double AffineMax::node_bound(int node, const Vec2& v) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const double affine = std::max(v.x * n.lo.x, v.x * n.hi.x) + std::max(v.y * n.lo.y, v.y * n.hi.y) - n.min_offset;
    const Vec2 q = v - n.drift;
    const double dx = std::max({n.lo.x - q.x, 0.0, q.x - n.hi.x});
    const double dy = std::max({n.lo.y - q.y, 0.0, q.y - n.hi.y});
    const double half_q2 = 0.5 * norm2(q);
    // Margin covers rounding in the lifted form, which cancels large terms.
    const double lifted = half_q2 - 0.5 * (dx * dx + dy * dy) - n.min_residual +
                          1e-12 * (1.0 + half_q2 + std::abs(n.min_residual) + std::abs(affine));
    return std::min(affine, lifted);
}

std::pair<double, int> AffineMax::eval(const Vec2& x) const {
    double best = -std::numeric_limits<double>::infinity();
    int best_j = -1;
    if (nodes_.empty()) return {best, best_j};
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        if (node_bound(id, x) < best) continue;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.left < 0) {
            for (int k = n.begin; k < n.end; ++k) {
                const int j = order_[static_cast<std::size_t>(k)];
                const double v = dot(x, slopes_[static_cast<std::size_t>(j)]) - offsets_[static_cast<std::size_t>(j)];
                if (v > best || (v == best && j < best_j)) {
                    best = v;
                    best_j = j;
                }
            }
            continue;
        }
        // Visit the more promising child first.
        const double bl = node_bound(n.left, x);
        const double br = node_bound(n.right, x);
        if (bl >= br) {
            stack.push_back(n.right);
            stack.push_back(n.left);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return {best, best_j};
}

std::size_t PowerDiagram::empty_cells() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const Cell& c) { return c.polygon.empty(); }));
}

PowerDiagram power_diagram(const std::vector<Vec2>& sites, const std::vector<double>& weights, const Polygon& source) {
    const std::size_t n = sites.size();
    if (weights.size() != n) fail(ErrorKind::parameter, "sites and weights differ in length");
    if (n == 0) fail(ErrorKind::parameter, "power diagram needs at least one site");
    for (double w : weights)
        if (!std::isfinite(w)) fail(ErrorKind::parameter, "non-finite weight");
    check_distinct(sites);

    PowerDiagram diagram;
    diagram.cells.resize(n);
    const Polygon hull = convex_hull(source.vertices);
    diagram.source_convex = is_convex(source) && hull.size() == source.size();
    std::vector<HalfPlane> hull_planes;
    for (std::size_t k = 0; k < hull.size(); ++k) {
        const Vec2 e = hull[(k + 1) % hull.size()] - hull[k];
        hull_planes.push_back(make_halfplane({e.y, -e.x}, dot(Vec2{e.y, -e.x}, hull[k])));
    }
    // Disk inside the hull; cells within it skip the hull clip.
    const Vec2 hull_center = centroid(hull);
    double inradius = std::numeric_limits<double>::infinity();
    for (const auto& hp : hull_planes) inradius = std::min(inradius, hp.offset - dot(hp.normal, hull_center));
    inradius *= 1.0 - 1e-9;
    const BoundingBox box = bounding_box(hull);
    const double pad = 1e-9 * std::max(box.diagonal(), 1.0);
    const std::vector<Vec2> start{{box.lo.x - pad, box.lo.y - pad}, {box.hi.x + pad, box.lo.y - pad},
                                  {box.hi.x + pad, box.hi.y + pad}, {box.lo.x - pad, box.hi.y + pad}};

    const AffineMax amax(sites, weights);
    const auto& nodes = amax.nodes();
    const auto& order = amax.order();
    std::optional<EdgeGrid> grid;
    if (!diagram.source_convex) grid.emplace(source);

    // Leaf and parent links, used to seed each cell with nearby sites before
    // the best-first search so the search starts from a small polygon.
    std::vector<int> leaf_of(n, 0), parent(nodes.size(), -1);
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const auto& node = nodes[id];
        if (node.left >= 0) {
            parent[static_cast<std::size_t>(node.left)] = static_cast<int>(id);
            parent[static_cast<std::size_t>(node.right)] = static_cast<int>(id);
        } else {
            for (int k = node.begin; k < node.end; ++k) leaf_of[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = static_cast<int>(id);
        }
    }
    auto range_of = [&](int id) {
        int lo = id, hi = id;
        while (nodes[static_cast<std::size_t>(lo)].left >= 0) lo = nodes[static_cast<std::size_t>(lo)].left;
        while (nodes[static_cast<std::size_t>(hi)].left >= 0) hi = nodes[static_cast<std::size_t>(hi)].right;
        return std::pair{nodes[static_cast<std::size_t>(lo)].begin, nodes[static_cast<std::size_t>(hi)].end};
    };
    constexpr int kSeedSites = 48;

    using Entry = std::pair<double, int>;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 yi = sites[i];
        const double wi = weights[i];
        std::vector<Vec2> v = start;
        std::vector<int> labels(4, -1);
        auto gain = [&](int node) {
            double g = -std::numeric_limits<double>::infinity();
            for (const auto& p : v) g = std::max(g, amax.node_bound(node, p) - (dot(p, yi) - wi));
            return g;
        };
        auto clip_site = [&](int j) {
            if (static_cast<std::size_t>(j) == i || v.empty()) return;
            const Vec2 d = sites[static_cast<std::size_t>(j)] - yi;
            const double c = weights[static_cast<std::size_t>(j)] - wi;
            bool cuts = false;
            for (const auto& p : v) cuts = cuts || dot(p, d) > c;
            if (cuts) clip_labeled(v, labels, make_halfplane(d, c), j);
        };
        int seed = leaf_of[i];
        while (parent[static_cast<std::size_t>(seed)] >= 0) {
            const auto [b, e] = range_of(seed);
            if (e - b >= kSeedSites) break;
            seed = parent[static_cast<std::size_t>(seed)];
        }
        const auto [seed_begin, seed_end] = range_of(seed);
        for (int k = seed_begin; k < seed_end; ++k) clip_site(order[static_cast<std::size_t>(k)]);
        std::priority_queue<Entry> pq;
        pq.push({gain(0), 0});
        while (!pq.empty() && !v.empty()) {
            const auto [stale, id] = pq.top();
            pq.pop();
            if (stale <= 0.0) break;
            if (gain(id) <= 0.0) continue;
            const auto& node = nodes[static_cast<std::size_t>(id)];
            if (node.left >= 0) {
                pq.push({gain(node.left), node.left});
                pq.push({gain(node.right), node.right});
                continue;
            }
            if (node.begin >= seed_begin && node.end <= seed_end) continue;
            for (int k = node.begin; k < node.end && !v.empty(); ++k) clip_site(order[static_cast<std::size_t>(k)]);
        }
        bool interior = true;
        for (const auto& p : v) interior = interior && norm2(p - hull_center) < inradius * inradius;
        for (std::size_t k = 0; k < hull_planes.size() && !interior && !v.empty(); ++k)
            clip_labeled(v, labels, hull_planes[k], -1);
        Cell& cell = diagram.cells[i];
        cell.convex = v;
        cell.labels = labels;
        if (v.empty()) continue;
        if (diagram.source_convex) {
            cell.polygon = Polygon{v};
            cell.touches_boundary = std::find(labels.begin(), labels.end(), -1) != labels.end();
            continue;
        }
        if (!grid->meets(v)) {
            if (contains(source, centroid(Polygon{v}), 0.0)) cell.polygon = Polygon{v};
            continue;
        }
        cell.touches_boundary = true;
        std::vector<Vec2> s = source.vertices;
        std::vector<int> sl(s.size(), -1);
        for (std::size_t k = 0; k < v.size() && !s.empty(); ++k) {
            if (labels[k] < 0) continue;
            const std::size_t j = static_cast<std::size_t>(labels[k]);
            clip_labeled(s, sl, make_halfplane(sites[j] - yi, weights[j] - wi), labels[k]);
        }
        if (!s.empty() && area(Polygon{s}) > 0.0) cell.polygon = Polygon{std::move(s)};
    }

    // Shared edges, taken from the lower-index cell when it has them. A cell
    // may carry several edges with the same neighbor; their pieces are merged.
    std::unordered_set<std::uint64_t> seen;
    auto key = [n](std::size_t a, std::size_t b) { return static_cast<std::uint64_t>(a) * n + b; };
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            const Cell& cell = diagram.cells[i];
            const std::size_t m = cell.convex.size();
            std::map<std::size_t, Adjacency> local;
            for (std::size_t k = 0; k < m; ++k) {
                if (cell.labels[k] < 0) continue;
                const std::size_t j = static_cast<std::size_t>(cell.labels[k]);
                if ((pass == 0) != (i < j)) continue;
                const std::size_t a = std::min(i, j), b = std::max(i, j);
                if (seen.count(key(a, b))) continue;
                const Vec2 p = cell.convex[k];
                const Vec2 q = cell.convex[(k + 1) % m];
                if (norm(q - p) < kMinEdgeLength) continue;
                Adjacency& adj = local[j];
                adj.i = static_cast<int>(a);
                adj.j = static_cast<int>(b);
                const bool partial = !diagram.source_convex && (diagram.cells[a].touches_boundary || diagram.cells[b].touches_boundary);
                if (partial) {
                    for (const auto& [t0, t1] : segment_inside_intervals(source, p, q))
                        adj.pieces.push_back({p + (q - p) * t0, p + (q - p) * t1});
                } else {
                    adj.pieces.push_back({p, q});
                }
            }
            for (auto& [j, adj] : local) {
                adj.length = 0.0;
                for (const auto& [s, t] : adj.pieces) adj.length += norm(t - s);
                if (adj.length < kMinEdgeLength) continue;
                seen.insert(key(static_cast<std::size_t>(adj.i), static_cast<std::size_t>(adj.j)));
                diagram.adjacency.push_back(std::move(adj));
            }
        }
    }
    std::sort(diagram.adjacency.begin(), diagram.adjacency.end(),
              [](const Adjacency& x, const Adjacency& y) { return x.i < y.i || (x.i == y.i && x.j < y.j); });
    return diagram;
}

std::string cells_to_csv(const PowerDiagram& diagram) {
    std::string out = "cell_id,vertex_index,x,y\n";
    char buf[128];
    for (std::size_t i = 0; i < diagram.cells.size(); ++i) {
        const auto& poly = diagram.cells[i].polygon;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", i, k, poly[k].x, poly[k].y);
            out += buf;
        }
    }
    return out;
}

}  // namespace sdot
