#pragma once

#include "steklov/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace steklov {

using Index = std::int32_t;
using Point = std::array<double, 3>;
/// Vertex indices of a simplex; only the first `dim + 1` slots are used.
using Cell = std::array<Index, 4>;

inline constexpr double duplicate_vertex_tolerance = 1e-12;

/// Analytic boundary that refinement projects new boundary midpoints onto.
struct BoundaryShape {
    enum class Kind { none, circle, annulus, star, sphere };

    Kind kind = Kind::none;
    double radius = 1.0; // circle / sphere radius, star scale factor
    double r_in = 0.0;
    double r_out = 0.0;
    std::vector<double> radius_samples;
    /// Every vertex of the mesh lies on the shape (closed boundary meshes).
    bool whole_mesh = false;
};

struct SimplicialMesh {
    int dim = 2;         // topological dimension of the cells
    int ambient_dim = 2; // length of the coordinate tuples
    std::vector<Point> vertices;
    std::vector<Cell> cells;
    std::vector<Cell> boundary_facets; // induced (outward) orientation
    std::vector<Index> boundary_vertices;
    std::vector<std::pair<Index, Index>> periodic_pairs;
    std::optional<int> genus;
    BoundaryShape shape;

    int cell_size() const { return dim + 1; }
    int facet_size() const { return dim; }
    Index vertex_count() const { return static_cast<Index>(vertices.size()); }
    Index cell_count() const { return static_cast<Index>(cells.size()); }
    bool closed() const { return boundary_facets.empty(); }
};

struct MetricField {
    enum class Kind { euclidean, spherical_stereographic, hyperbolic_poincare, custom };

    Kind kind = Kind::euclidean;
    std::vector<double> values; // per vertex, custom only
    double curvature_scale = 1.0;

    static MetricField euclidean() { return {}; }
    static MetricField spherical(double scale = 1.0) { return {Kind::spherical_stereographic, {}, scale}; }
    static MetricField hyperbolic(double scale = 1.0) { return {Kind::hyperbolic_poincare, {}, scale}; }
    static MetricField custom(std::vector<double> rho) { return {Kind::custom, std::move(rho), 1.0}; }
};

/// Density on the boundary, indexed like `SimplicialMesh::boundary_vertices`.
struct BoundaryDensity {
    std::vector<double> values;
};

inline std::string_view to_string(MetricField::Kind kind)
{
    switch (kind) {
    case MetricField::Kind::euclidean: return "euclidean";
    case MetricField::Kind::spherical_stereographic: return "spherical_stereographic";
    case MetricField::Kind::hyperbolic_poincare: return "hyperbolic_poincare";
    case MetricField::Kind::custom: return "custom";
    }
    return "custom";
}

// Domain families ------------------------------------------------------------

struct UnitDiskSpec {
    int refinement = 3;
};
struct StarShapedSpec {
    std::vector<double> radius_samples; // r(2 pi j / N), j = 0..N-1
    int refinement = 3;
};
struct AnnulusSpec {
    double r_in = 0.5;
    double r_out = 1.0;
    int refinement = 3;
};
struct FlatCylinderSpec {
    double circumference = 2.0 * std::numbers::pi;
    double length = 2.0; // total length 2L
    int refinement = 3;
};
struct UnitBallSpec {
    int refinement = 2;
};

using DomainSpec = std::variant<UnitDiskSpec, StarShapedSpec, AnnulusSpec, FlatCylinderSpec, UnitBallSpec>;

// Small geometry helpers -----------------------------------------------------

namespace detail {

inline Point sub(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Point scale(const Point& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Point midpoint(const Point& a, const Point& b)
{
    return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}
inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i)
        f *= i;
    return f;
}

/// Signed volume of a full-dimensional simplex (dim == ambient_dim).
inline double signed_volume(const std::vector<Point>& vertices, const Cell& c, int dim)
{
    const Point& p0 = vertices[c[0]];
    if (dim == 1)
        return vertices[c[1]][0] - p0[0];
    if (dim == 2) {
        Point e1 = sub(vertices[c[1]], p0), e2 = sub(vertices[c[2]], p0);
        return 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]);
    }
    Point a = sub(vertices[c[1]], p0), b = sub(vertices[c[2]], p0), d = sub(vertices[c[3]], p0);
    double det = a[0] * (b[1] * d[2] - b[2] * d[1]) - a[1] * (b[0] * d[2] - b[2] * d[0]) + a[2] * (b[0] * d[1] - b[1] * d[0]);
    return det / 6.0;
}

/// Unsigned k-dimensional measure of the simplex spanned by `count` points.
inline double simplex_measure(const std::vector<Point>& vertices, const Index* ids, int count)
{
    int k = count - 1;
    if (k == 0)
        return 1.0;
    std::array<Point, 3> e{};
    for (int i = 0; i < k; ++i)
        e[i] = sub(vertices[ids[i + 1]], vertices[ids[0]]);
    if (k == 1)
        return norm(e[0]);
    if (k == 2) {
        Point c{e[0][1] * e[1][2] - e[0][2] * e[1][1], e[0][2] * e[1][0] - e[0][0] * e[1][2],
                e[0][0] * e[1][1] - e[0][1] * e[1][0]};
        return 0.5 * norm(c);
    }
    double det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                 + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
    return std::abs(det) / 6.0;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), Index{0}); }

    Index find(Index i)
    {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    // The smaller index always becomes the root so representatives are canonical.
    void unite(Index a, Index b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return;
        if (b < a)
            std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<Index> parent_;
};

/// Parity of the permutation that sorts `v` (first n entries); sorts in place.
inline int sort_with_parity(Index* v, int n)
{
    int parity = 1;
    for (int i = 1; i < n; ++i)
        for (int j = i; j > 0 && v[j - 1] > v[j]; --j) {
            std::swap(v[j - 1], v[j]);
            parity = -parity;
        }
    return parity;
}

/// Facet of `c` opposite local vertex `i`, with the induced boundary sign (-1)^i.
inline std::pair<Cell, int> facet_opposite(const Cell& c, int cell_size, int i)
{
    Cell f{-1, -1, -1, -1};
    int n = 0;
    for (int j = 0; j < cell_size; ++j)
        if (j != i)
            f[n++] = c[j];
    return {f, (i % 2 == 0) ? 1 : -1};
}

/// Trigonometric interpolant of equispaced samples r(2 pi j / N).
class TrigInterpolant {
public:
    explicit TrigInterpolant(const std::vector<double>& samples) : n_(static_cast<int>(samples.size()))
    {
        int modes = n_ / 2;
        a_.assign(modes + 1, 0.0);
        b_.assign(modes + 1, 0.0);
        for (int m = 0; m <= modes; ++m) {
            for (int j = 0; j < n_; ++j) {
                double t = 2.0 * std::numbers::pi * m * j / n_;
                a_[m] += samples[j] * std::cos(t);
                b_[m] += samples[j] * std::sin(t);
            }
            a_[m] *= 2.0 / n_;
            b_[m] *= 2.0 / n_;
        }
    }

    double operator()(double theta) const
    {
        double r = 0.5 * a_[0];
        int modes = static_cast<int>(a_.size()) - 1;
        for (int m = 1; m <= modes; ++m) {
            double w = (n_ % 2 == 0 && m == modes) ? 0.5 : 1.0;
            r += w * (a_[m] * std::cos(m * theta) + b_[m] * std::sin(m * theta));
        }
        return r;
    }

private:
    int n_;
    std::vector<double> a_, b_;
};

inline Point project_to_shape(const BoundaryShape& shape, const Point& p)
{
    using K = BoundaryShape::Kind;
    double r = norm(p);
    switch (shape.kind) {
    case K::none: return p;
    case K::circle:
    case K::sphere: return r > 0 ? scale(p, shape.radius / r) : p;
    case K::annulus: {
        if (r == 0)
            return p;
        double target = (std::abs(r - shape.r_in) < std::abs(r - shape.r_out)) ? shape.r_in : shape.r_out;
        return scale(p, target / r);
    }
    case K::star: {
        double theta = std::atan2(p[1], p[0]);
        double rad = shape.radius * TrigInterpolant(shape.radius_samples)(theta);
        return {rad * std::cos(theta), rad * std::sin(theta), 0.0};
    }
    }
    return p;
}

} // namespace detail

// Topology -------------------------------------------------------------------

/// Canonical representative of each vertex after periodic identification.
inline std::vector<Index> vertex_representatives(const SimplicialMesh& mesh)
{
    detail::UnionFind uf(mesh.vertices.size());
    for (auto [a, b] : mesh.periodic_pairs)
        uf.unite(a, b);
    std::vector<Index> rep(mesh.vertices.size());
    for (Index i = 0; i < mesh.vertex_count(); ++i)
        rep[i] = uf.find(i);
    return rep;
}

/// V - E + F - T counted on identified vertices.
inline long euler_characteristic(const SimplicialMesh& mesh)
{
    auto rep = vertex_representatives(mesh);
    std::array<std::set<std::array<Index, 4>>, 4> faces;
    int n = mesh.cell_size();
    for (const Cell& c : mesh.cells) {
        for (int mask = 1; mask < (1 << n); ++mask) {
            std::array<Index, 4> f{-1, -1, -1, -1};
            int k = 0;
            for (int j = 0; j < n; ++j)
                if (mask & (1 << j))
                    f[k++] = rep[c[j]];
            std::sort(f.begin(), f.begin() + k);
            faces[k - 1].insert(f);
        }
    }
    long chi = 0;
    for (int k = 0; k < n; ++k)
        chi += (k % 2 == 0 ? 1 : -1) * static_cast<long>(faces[k].size());
    return chi;
}

/// Number of connected components of the boundary (after identification).
inline int boundary_component_count(const SimplicialMesh& mesh)
{
    if (mesh.boundary_facets.empty())
        return 0;
    auto rep = vertex_representatives(mesh);
    detail::UnionFind uf(mesh.vertices.size());
    std::set<Index> used;
    for (const Cell& f : mesh.boundary_facets) {
        for (int j = 0; j < mesh.facet_size(); ++j) {
            used.insert(rep[f[j]]);
            uf.unite(rep[f[0]], rep[f[j]]);
        }
    }
    std::set<Index> roots;
    for (Index v : used)
        roots.insert(uf.find(v));
    return static_cast<int>(roots.size());
}

/// Connected components of the cell graph, as a component id per vertex (-1 if unused).
inline std::vector<Index> vertex_components(const SimplicialMesh& mesh, int* count = nullptr)
{
    auto rep = vertex_representatives(mesh);
    detail::UnionFind uf(mesh.vertices.size());
    for (const Cell& c : mesh.cells)
        for (int j = 1; j < mesh.cell_size(); ++j)
            uf.unite(rep[c[0]], rep[c[j]]);
    std::vector<Index> comp(mesh.vertices.size(), -1);
    std::map<Index, Index> ids;
    for (const Cell& c : mesh.cells)
        for (int j = 0; j < mesh.cell_size(); ++j) {
            Index root = uf.find(rep[c[j]]);
            auto [it, inserted] = ids.emplace(root, static_cast<Index>(ids.size()));
            comp[c[j]] = it->second;
        }
    if (count)
        *count = static_cast<int>(ids.size());
    return comp;
}

/// Recomputes the boundary of `mesh` and checks every structural invariant.
/// Meshes with `allow_disconnected` may have several cell components (used
/// for closed boundary manifolds with several pieces).
inline void finalize(SimplicialMesh& mesh, bool allow_disconnected = false)
{
    const int n = mesh.cell_size();
    if (mesh.dim < 1 || mesh.dim > 3 || mesh.ambient_dim < mesh.dim || mesh.ambient_dim > 3)
        throw Error(ErrorCode::invalid_input, "unsupported dimensions");
    if (mesh.cells.empty())
        throw Error(ErrorCode::degenerate_mesh, "mesh has no cells");
    for (const Cell& c : mesh.cells)
        for (int j = 0; j < n; ++j)
            if (c[j] < 0 || c[j] >= mesh.vertex_count())
                throw Error(ErrorCode::invalid_input, "cell references a missing vertex");
    for (auto [a, b] : mesh.periodic_pairs)
        if (a < 0 || b < 0 || a >= mesh.vertex_count() || b >= mesh.vertex_count() || a == b)
            throw Error(ErrorCode::invalid_input, "bad periodic pair");

    const auto rep = vertex_representatives(mesh);

    for (Index ci = 0; ci < mesh.cell_count(); ++ci) {
        const Cell& c = mesh.cells[ci];
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rep[c[i]] == rep[c[j]])
                    throw Error(ErrorCode::degenerate_mesh, "cell " + std::to_string(ci) + " repeats a vertex");
        if (mesh.dim == mesh.ambient_dim) {
            double vol = detail::signed_volume(mesh.vertices, c, mesh.dim);
            if (vol < 0)
                throw Error(ErrorCode::orientation, "cell " + std::to_string(ci) + " has negative orientation");
            if (vol == 0)
                throw Error(ErrorCode::degenerate_mesh, "cell " + std::to_string(ci) + " has zero volume");
        } else if (detail::simplex_measure(mesh.vertices, c.data(), n) == 0) {
            throw Error(ErrorCode::degenerate_mesh, "cell " + std::to_string(ci) + " has zero measure");
        }
    }

    struct Incidence {
        Cell facet;
        int sign;     // induced sign in original numbering
        int relative; // induced sign relative to the sorted key
    };
    std::map<std::array<Index, 3>, std::vector<Incidence>> facets;
    for (const Cell& c : mesh.cells) {
        for (int i = 0; i < n; ++i) {
            auto [f, sign] = detail::facet_opposite(c, n, i);
            Cell key_cell{-1, -1, -1, -1};
            for (int j = 0; j < mesh.dim; ++j)
                key_cell[j] = rep[f[j]];
            int parity = detail::sort_with_parity(key_cell.data(), mesh.dim);
            std::array<Index, 3> key{key_cell[0], key_cell[1], key_cell[2]};
            facets[key].push_back({f, sign, sign * parity});
        }
    }

    mesh.boundary_facets.clear();
    for (const auto& [key, inc] : facets) {
        if (inc.size() > 2)
            throw Error(ErrorCode::non_manifold, "facet shared by " + std::to_string(inc.size()) + " cells");
        if (inc.size() == 1) {
            Cell f = inc[0].facet;
            // store facets with the induced orientation
            if (inc[0].sign < 0 && mesh.dim >= 2)
                std::swap(f[0], f[1]);
            mesh.boundary_facets.push_back(f);
        } else if (inc[0].relative == inc[1].relative) {
            throw Error(ErrorCode::orientation, "neighbouring cells induce the same orientation on a shared facet");
        }
    }

    std::set<Index> bverts;
    for (const Cell& f : mesh.boundary_facets)
        for (int j = 0; j < mesh.facet_size(); ++j)
            bverts.insert(f[j]);
    mesh.boundary_vertices.assign(bverts.begin(), bverts.end());

    int components = 0;
    vertex_components(mesh, &components);
    if (components != 1 && !allow_disconnected)
        throw Error(ErrorCode::disconnected, "mesh has " + std::to_string(components) + " components");

    // duplicate vertices: sweep over x-sorted order
    std::vector<Index> order(mesh.vertices.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return mesh.vertices[a] < mesh.vertices[b]; });
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const Point& a = mesh.vertices[order[i]];
            const Point& b = mesh.vertices[order[j]];
            if (b[0] - a[0] > duplicate_vertex_tolerance)
                break;
            if (detail::norm(detail::sub(a, b)) <= duplicate_vertex_tolerance)
                throw Error(ErrorCode::duplicate_vertex, "vertices " + std::to_string(order[i]) + " and "
                                                             + std::to_string(order[j]) + " coincide");
        }

    if (!mesh.boundary_facets.empty()) {
        detail::UnionFind uf(mesh.vertices.size());
        for (const Cell& f : mesh.boundary_facets)
            for (int j = 1; j < mesh.facet_size(); ++j)
                uf.unite(rep[f[0]], rep[f[j]]);
        std::map<Index, std::set<Index>> per_component;
        for (Index v : mesh.boundary_vertices)
            per_component[uf.find(rep[v])].insert(rep[v]);
        for (const auto& [root, verts] : per_component)
            if (verts.size() < 3)
                throw Error(ErrorCode::degenerate_mesh, "boundary component with fewer than 3 vertices");
    }

    if (mesh.dim == 2 && !mesh.genus) {
        long chi = euler_characteristic(mesh);
        long b = boundary_component_count(mesh);
        int pieces = 0;
        vertex_components(mesh, &pieces);
        mesh.genus = static_cast<int>((2 * pieces - chi - b) / 2);
    }
}

// Generators -----------------------------------------------------------------

namespace detail {

/// Midpoint subdivision without projection or validation; used both on
/// reference configurations and by `refine`.
struct Subdivision {
    std::vector<Point> vertices;
    std::vector<Cell> cells;
    std::map<std::pair<Index, Index>, Index> midpoints;
};

inline Subdivision subdivide(int dim, const std::vector<Point>& vertices, const std::vector<Cell>& cells)
{
    Subdivision out;
    out.vertices = vertices;
    const int n = dim + 1;
    auto mid = [&](Index a, Index b) {
        std::pair<Index, Index> key{std::min(a, b), std::max(a, b)};
        auto it = out.midpoints.find(key);
        if (it != out.midpoints.end())
            return it->second;
        Index id = static_cast<Index>(out.vertices.size());
        out.vertices.push_back(midpoint(vertices[a], vertices[b]));
        out.midpoints.emplace(key, id);
        return id;
    };
    // midpoints are created in cell order so numbering is deterministic
    for (const Cell& c : cells)
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                mid(c[i], c[j]);

    for (const Cell& c : cells) {
        if (dim == 1) {
            Index m = mid(c[0], c[1]);
            out.cells.push_back({c[0], m, -1, -1});
            out.cells.push_back({m, c[1], -1, -1});
        } else if (dim == 2) {
            Index m01 = mid(c[0], c[1]), m12 = mid(c[1], c[2]), m20 = mid(c[2], c[0]);
            out.cells.push_back({c[0], m01, m20, -1});
            out.cells.push_back({m01, c[1], m12, -1});
            out.cells.push_back({m20, m12, c[2], -1});
            out.cells.push_back({m01, m12, m20, -1});
        } else {
            Index m01 = mid(c[0], c[1]), m02 = mid(c[0], c[2]), m03 = mid(c[0], c[3]);
            Index m12 = mid(c[1], c[2]), m13 = mid(c[1], c[3]), m23 = mid(c[2], c[3]);
            out.cells.push_back({c[0], m01, m02, m03});
            out.cells.push_back({m01, c[1], m12, m13});
            out.cells.push_back({m02, m12, c[2], m23});
            out.cells.push_back({m03, m13, m23, c[3]});
            // inner octahedron: split along its shortest diagonal
            struct Split {
                Index a, b;
                std::array<Index, 4> ring;
            };
            std::array<Split, 3> splits{Split{m02, m13, {m01, m12, m23, m03}}, Split{m01, m23, {m02, m03, m13, m12}},
                                        Split{m03, m12, {m01, m02, m23, m13}}};
            std::size_t best = 0;
            double best_len = norm(sub(out.vertices[splits[0].a], out.vertices[splits[0].b]));
            for (std::size_t s = 1; s < splits.size(); ++s) {
                double len = norm(sub(out.vertices[splits[s].a], out.vertices[splits[s].b]));
                if (len < best_len - 1e-14 * best_len) {
                    best = s;
                    best_len = len;
                }
            }
            const Split& s = splits[best];
            for (int i = 0; i < 4; ++i) {
                Cell t{s.a, s.b, s.ring[i], s.ring[(i + 1) % 4]};
                out.cells.push_back(t);
            }
        }
    }
    if (dim == 3) {
        for (Cell& t : out.cells)
            if (signed_volume(out.vertices, t, 3) < 0)
                std::swap(t[2], t[3]);
    }
    return out;
}

inline void check_refinement(int refinement, int max_level)
{
    if (refinement < 0 || refinement > max_level)
        throw Error(ErrorCode::invalid_spec, "refinement level must lie in [0, " + std::to_string(max_level) + "]");
}

/// Hexagon fan refined in reference coordinates, then mapped radially onto
/// the unit disk (rings of the hexagonal lattice become circles).
inline SimplicialMesh unit_disk_mesh(int refinement)
{
    check_refinement(refinement, 10);
    std::vector<Point> v{{0.0, 0.0, 0.0}};
    std::vector<Cell> cells;
    for (int k = 0; k < 6; ++k) {
        double t = k * std::numbers::pi / 3.0;
        v.push_back({std::cos(t), std::sin(t), 0.0});
    }
    for (Index k = 0; k < 6; ++k)
        cells.push_back({0, 1 + k, 1 + (k + 1) % 6, -1});
    for (int r = 0; r < refinement; ++r) {
        auto s = subdivide(2, v, cells);
        v = std::move(s.vertices);
        cells = std::move(s.cells);
    }
    const double apothem = std::cos(std::numbers::pi / 6.0);
    for (Point& p : v) {
        double len = norm(p);
        if (len == 0)
            continue;
        double gauge = 0.0;
        for (int k = 0; k < 6; ++k) {
            double t = std::numbers::pi / 6.0 + k * std::numbers::pi / 3.0;
            gauge = std::max(gauge, (p[0] * std::cos(t) + p[1] * std::sin(t)) / apothem);
        }
        // snap lattice rings so boundary vertices sit on the circle
        gauge = std::round(gauge * (1 << refinement)) / (1 << refinement);
        p = scale(p, gauge / len);
    }
    SimplicialMesh mesh;
    mesh.dim = mesh.ambient_dim = 2;
    mesh.vertices = std::move(v);
    mesh.cells = std::move(cells);
    mesh.shape.kind = BoundaryShape::Kind::circle;
    mesh.shape.radius = 1.0;
    finalize(mesh);
    return mesh;
}

inline SimplicialMesh star_shaped_mesh(const StarShapedSpec& spec)
{
    if (spec.radius_samples.empty())
        throw Error(ErrorCode::invalid_spec, "star-shaped domain needs radius samples");
    for (double r : spec.radius_samples)
        if (!(r > 0))
            throw Error(ErrorCode::invalid_spec, "radius samples must be positive");
    check_refinement(spec.refinement, 10);
    SimplicialMesh mesh = unit_disk_mesh(spec.refinement);
    TrigInterpolant radius(spec.radius_samples);
    for (Point& p : mesh.vertices) {
        double len = norm(p);
        if (len == 0)
            continue;
        double theta = std::atan2(p[1], p[0]);
        double r = radius(theta);
        if (!(r > 0))
            throw Error(ErrorCode::invalid_spec, "interpolated radius is not positive");
        p = {len * r * std::cos(theta), len * r * std::sin(theta), 0.0};
    }
    mesh.shape.kind = BoundaryShape::Kind::star;
    mesh.shape.radius = 1.0;
    mesh.shape.radius_samples = spec.radius_samples;
    mesh.genus.reset();
    finalize(mesh);
    return mesh;
}

/// Structured (radius, angle) or (angle, height) grid with alternating diagonals.
inline std::vector<Cell> grid_cells(int rows, int cols, auto&& id)
{
    std::vector<Cell> cells;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            Index a = id(i, j), b = id(i, j + 1), c = id(i + 1, j + 1), d = id(i + 1, j);
            if ((i + j) % 2 == 0) {
                cells.push_back({a, b, c, -1});
                cells.push_back({a, c, d, -1});
            } else {
                cells.push_back({a, b, d, -1});
                cells.push_back({b, c, d, -1});
            }
        }
    return cells;
}

inline SimplicialMesh annulus_mesh(const AnnulusSpec& spec)
{
    if (!(spec.r_in > 0) || !(spec.r_out > 0))
        throw Error(ErrorCode::invalid_spec, "annulus radii must be positive");
    if (!(spec.r_in < spec.r_out))
        throw Error(ErrorCode::invalid_spec, "annulus needs r_in < r_out");
    check_refinement(spec.refinement, 10);
    const int n_theta = 1 << (spec.refinement + 1);
    if (n_theta < 3)
        throw Error(ErrorCode::degenerate_mesh, "refinement too coarse for an annulus boundary");
    const double mean_r = 0.5 * (spec.r_in + spec.r_out);
    const int n_r = std::max(1, static_cast<int>(std::lround(n_theta * (spec.r_out - spec.r_in)
                                                             / (2.0 * std::numbers::pi * mean_r))));
    SimplicialMesh mesh;
    mesh.dim = mesh.ambient_dim = 2;
    for (int i = 0; i <= n_r; ++i) {
        double r = spec.r_in + (spec.r_out - spec.r_in) * i / n_r;
        for (int j = 0; j < n_theta; ++j) {
            double t = 2.0 * std::numbers::pi * j / n_theta;
            mesh.vertices.push_back({r * std::cos(t), r * std::sin(t), 0.0});
        }
    }
    // rows run over the angle so that (radius, angle) cells come out counterclockwise
    mesh.cells = grid_cells(n_theta, n_r, [&](int j, int i) { return static_cast<Index>(i * n_theta + j % n_theta); });
    mesh.shape.kind = BoundaryShape::Kind::annulus;
    mesh.shape.r_in = spec.r_in;
    mesh.shape.r_out = spec.r_out;
    finalize(mesh);
    return mesh;
}

/// [0, circumference] x [-L, L] with the two vertical sides glued.
inline SimplicialMesh flat_cylinder_mesh(const FlatCylinderSpec& spec)
{
    if (!(spec.circumference > 0) || !(spec.length > 0))
        throw Error(ErrorCode::invalid_spec, "cylinder dimensions must be positive");
    check_refinement(spec.refinement, 10);
    const int n_theta = 1 << (spec.refinement + 1);
    if (n_theta < 3)
        throw Error(ErrorCode::degenerate_mesh, "refinement too coarse for a cylinder boundary");
    const int n_t = std::max(1, static_cast<int>(std::lround(n_theta * spec.length / spec.circumference)));
    const double half = 0.5 * spec.length;
    SimplicialMesh mesh;
    mesh.dim = mesh.ambient_dim = 2;
    for (int i = 0; i <= n_t; ++i) {
        double t = -half + spec.length * i / n_t;
        for (int j = 0; j <= n_theta; ++j)
            mesh.vertices.push_back({spec.circumference * j / n_theta, t, 0.0});
    }
    auto id = [&](int i, int j) { return static_cast<Index>(i * (n_theta + 1) + j); };
    mesh.cells = grid_cells(n_t, n_theta, id);
    for (int i = 0; i <= n_t; ++i)
        mesh.periodic_pairs.emplace_back(id(i, 0), id(i, n_theta));
    finalize(mesh);
    return mesh;
}

/// Octahedron of eight tetrahedra refined in reference coordinates, then
/// mapped onto the ball by x -> x |x|_1 / |x|_2.
inline SimplicialMesh unit_ball_mesh(int refinement)
{
    check_refinement(refinement, 6);
    std::vector<Point> v{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<Cell> cells;
    for (Index sx : {1, 2})
        for (Index sy : {3, 4})
            for (Index sz : {5, 6}) {
                Cell t{0, sx, sy, sz};
                if (signed_volume(v, t, 3) < 0)
                    std::swap(t[2], t[3]);
                cells.push_back(t);
            }
    for (int r = 0; r < refinement; ++r) {
        auto s = subdivide(3, v, cells);
        v = std::move(s.vertices);
        cells = std::move(s.cells);
    }
    const double levels = static_cast<double>(1 << refinement);
    for (Point& p : v) {
        double l2 = norm(p);
        if (l2 == 0)
            continue;
        double l1 = std::round((std::abs(p[0]) + std::abs(p[1]) + std::abs(p[2])) * levels) / levels;
        p = scale(p, l1 / l2);
    }
    SimplicialMesh mesh;
    mesh.dim = mesh.ambient_dim = 3;
    mesh.vertices = std::move(v);
    mesh.cells = std::move(cells);
    mesh.shape.kind = BoundaryShape::Kind::sphere;
    mesh.shape.radius = 1.0;
    finalize(mesh);
    return mesh;
}

} // namespace detail

using detail::unit_disk_mesh;
using detail::star_shaped_mesh;
using detail::annulus_mesh;
using detail::flat_cylinder_mesh;
using detail::unit_ball_mesh;

inline SimplicialMesh make_domain(const DomainSpec& spec)
{
    return std::visit(
        [](const auto& s) -> SimplicialMesh {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, UnitDiskSpec>)
                return unit_disk_mesh(s.refinement);
            else if constexpr (std::is_same_v<T, StarShapedSpec>)
                return star_shaped_mesh(s);
            else if constexpr (std::is_same_v<T, AnnulusSpec>)
                return annulus_mesh(s);
            else if constexpr (std::is_same_v<T, FlatCylinderSpec>)
                return flat_cylinder_mesh(s);
            else
                return unit_ball_mesh(s.refinement);
        },
        spec);
}

// Transformations --------------------------------------------------------------

/// Uniform midpoint refinement. Midpoints of boundary edges are projected onto
/// the analytic boundary when the mesh carries one.
inline SimplicialMesh refine(const SimplicialMesh& mesh)
{
    auto sub = detail::subdivide(mesh.dim, mesh.vertices, mesh.cells);

    if (mesh.shape.kind != BoundaryShape::Kind::none) {
        std::set<std::pair<Index, Index>> boundary_edges;
        for (const Cell& f : mesh.boundary_facets)
            for (int i = 0; i < mesh.facet_size(); ++i)
                for (int j = i + 1; j < mesh.facet_size(); ++j)
                    boundary_edges.insert({std::min(f[i], f[j]), std::max(f[i], f[j])});
        for (const auto& [edge, id] : sub.midpoints)
            if (mesh.shape.whole_mesh || boundary_edges.contains(edge))
                sub.vertices[id] = detail::project_to_shape(mesh.shape, sub.vertices[id]);
        if (mesh.dim == 3 && mesh.ambient_dim == 3)
            for (Cell& t : sub.cells)
                if (detail::signed_volume(sub.vertices, t, 3) < 0)
                    throw Error(ErrorCode::degenerate_mesh, "boundary projection inverted a cell");
    }

    SimplicialMesh out;
    out.dim = mesh.dim;
    out.ambient_dim = mesh.ambient_dim;
    out.vertices = std::move(sub.vertices);
    out.cells = std::move(sub.cells);
    out.shape = mesh.shape;
    out.genus = mesh.genus;

    out.periodic_pairs = mesh.periodic_pairs;
    if (!mesh.periodic_pairs.empty()) {
        std::map<Index, std::vector<Index>> partners;
        for (auto [a, b] : mesh.periodic_pairs) {
            partners[a].push_back(b);
            partners[b].push_back(a);
        }
        for (const auto& [edge, id] : sub.midpoints) {
            auto pa = partners.find(edge.first);
            auto pb = partners.find(edge.second);
            if (pa == partners.end() || pb == partners.end())
                continue;
            for (Index a2 : pa->second)
                for (Index b2 : pb->second) {
                    auto other = sub.midpoints.find({std::min(a2, b2), std::max(a2, b2)});
                    if (other != sub.midpoints.end() && id < other->second)
                        out.periodic_pairs.emplace_back(id, other->second);
                }
        }
    }
    int pieces = 0;
    vertex_components(mesh, &pieces);
    finalize(out, pieces > 1);
    return out;
}

/// Closed (dim-1)-mesh formed by the boundary facets, vertices renumbered
/// in increasing order of their original index.
inline SimplicialMesh boundary_of(const SimplicialMesh& mesh)
{
    if (mesh.boundary_facets.empty())
        throw Error(ErrorCode::invalid_input, "mesh has no boundary");
    if (mesh.dim < 2)
        throw Error(ErrorCode::invalid_input, "boundary of a curve is a point set");
    std::map<Index, Index> renumber;
    for (Index v : mesh.boundary_vertices)
        renumber.emplace(v, static_cast<Index>(renumber.size()));

    SimplicialMesh out;
    out.dim = mesh.dim - 1;
    out.ambient_dim = mesh.ambient_dim;
    for (Index v : mesh.boundary_vertices)
        out.vertices.push_back(mesh.vertices[v]);
    for (const Cell& f : mesh.boundary_facets) {
        Cell c{-1, -1, -1, -1};
        for (int j = 0; j < mesh.facet_size(); ++j)
            c[j] = renumber.at(f[j]);
        out.cells.push_back(c);
    }
    for (auto [a, b] : mesh.periodic_pairs) {
        auto ia = renumber.find(a), ib = renumber.find(b);
        if (ia != renumber.end() && ib != renumber.end())
            out.periodic_pairs.emplace_back(ia->second, ib->second);
    }
    out.shape = mesh.shape;
    out.shape.whole_mesh = true;
    finalize(out, /*allow_disconnected=*/true);
    if (!out.boundary_facets.empty())
        throw Error(ErrorCode::invalid_input, "extracted boundary is not closed");
    return out;
}

/// Scales every coordinate (and the analytic boundary) by t > 0.
inline SimplicialMesh scaled(const SimplicialMesh& mesh, double t)
{
    if (!(t > 0))
        throw Error(ErrorCode::invalid_input, "scale factor must be positive");
    SimplicialMesh out = mesh;
    for (Point& p : out.vertices)
        p = detail::scale(p, t);
    out.shape.radius *= t;
    out.shape.r_in *= t;
    out.shape.r_out *= t;
    return out;
}

/// Boundary density constant on every boundary vertex.
inline BoundaryDensity uniform_density(const SimplicialMesh& mesh, double value = 1.0)
{
    return {std::vector<double>(mesh.boundary_vertices.size(), value)};
}

/// Boundary density sampled from a function of position.
template <typename F>
BoundaryDensity density_from(const SimplicialMesh& mesh, F&& f)
{
    BoundaryDensity d;
    d.values.reserve(mesh.boundary_vertices.size());
    for (Index v : mesh.boundary_vertices)
        d.values.push_back(f(mesh.vertices[v]));
    return d;
}

} // namespace steklov
