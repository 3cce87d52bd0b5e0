#pragma once

#include "steklov/error.hpp"
#include "steklov/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <algorithm>
#include <ostream>
#include <span>
#include <vector>

namespace steklov {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// P1 operators of one mesh under a conformal metric. Rows and columns are
/// degrees of freedom: vertices after periodic identification.
struct OperatorBundle {
    SparseMatrix K;       // conformally weighted stiffness
    SparseMatrix M_bnd;   // density-weighted boundary mass
    SparseMatrix M_sigma; // boundary mass with unit density
    SparseMatrix M_vol;   // volume mass under g
    double sigma_area = 0.0;
    double omega_volume = 0.0;
    std::vector<Index> boundary_index; // sorted dof ids
    int n_bdim = 1;
    std::vector<Index> vertex_to_dof;
    Index dof_count = 0;

    /// mu(N) = integral of the density over the boundary.
    double boundary_measure() const { return M_bnd.sum(); }
    double mean_density() const { return boundary_measure() / sigma_area; }

    /// Restricts a per-vertex function to dofs (first vertex of each class wins).
    Eigen::VectorXd to_dofs(std::span<const double> per_vertex) const
    {
        if (per_vertex.size() != vertex_to_dof.size())
            throw Error(ErrorCode::invalid_input, "per-vertex vector has the wrong length");
        Eigen::VectorXd out(dof_count);
        std::vector<bool> seen(dof_count, false);
        for (std::size_t v = 0; v < vertex_to_dof.size(); ++v) {
            Index d = vertex_to_dof[v];
            if (!seen[d]) {
                out[d] = per_vertex[v];
                seen[d] = true;
            }
        }
        return out;
    }

    std::vector<double> to_vertices(const Eigen::VectorXd& dofs) const
    {
        std::vector<double> out(vertex_to_dof.size());
        for (std::size_t v = 0; v < vertex_to_dof.size(); ++v)
            out[v] = dofs[vertex_to_dof[v]];
        return out;
    }
};

namespace detail {

struct QuadraturePoint {
    std::array<double, 4> bary;
    double weight; // weights of a rule sum to one
};

/// Cell rules: 3-point for triangles, 4-point for tetrahedra (degree 2).
/// Facet rules must integrate the cubic density * phi_i * phi_j exactly.
inline std::vector<QuadraturePoint> simplex_rule(int dim, bool facet)
{
    if (dim == 0)
        return {{{1.0, 0, 0, 0}, 1.0}};
    if (dim == 1) {
        const double g = 0.5 * std::sqrt(3.0 / 5.0);
        return {{{0.5 + g, 0.5 - g, 0, 0}, 5.0 / 18.0},
                {{0.5, 0.5, 0, 0}, 8.0 / 18.0},
                {{0.5 - g, 0.5 + g, 0, 0}, 5.0 / 18.0}};
    }
    if (dim == 2 && !facet) {
        const double a = 2.0 / 3.0, b = 1.0 / 6.0;
        return {{{a, b, b, 0}, 1.0 / 3.0}, {{b, a, b, 0}, 1.0 / 3.0}, {{b, b, a, 0}, 1.0 / 3.0}};
    }
    if (dim == 2) {
        // Dunavant degree 4
        const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
        const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
        return {{{b1, a1, a1, 0}, w1}, {{a1, b1, a1, 0}, w1}, {{a1, a1, b1, 0}, w1},
                {{b2, a2, a2, 0}, w2}, {{a2, b2, a2, 0}, w2}, {{a2, a2, b2, 0}, w2}};
    }
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    return {{{a, b, b, b}, 0.25}, {{b, a, b, b}, 0.25}, {{b, b, a, b}, 0.25}, {{b, b, b, a}, 0.25}};
}

/// Inverse Gram matrix of the edge vectors and the simplex measure.
struct SimplexGeometry {
    double measure;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3> gram_inverse;
};

inline SimplexGeometry simplex_geometry(const std::vector<Point>& vertices, const Index* ids, int k)
{
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3> gram(k, k);
    std::array<Point, 3> e{};
    for (int i = 0; i < k; ++i)
        e[i] = sub(vertices[ids[i + 1]], vertices[ids[0]]);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            gram(i, j) = dot(e[i], e[j]);
    SimplexGeometry g;
    g.measure = std::sqrt(gram.determinant()) / factorial(k);
    g.gram_inverse = gram.inverse();
    return g;
}

/// Local P1 stiffness (gradient inner products times measure), i <= j filled
/// and mirrored so the local matrix is exactly symmetric.
inline Eigen::Matrix4d local_stiffness(const SimplexGeometry& g, int k)
{
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    const auto& gi = g.gram_inverse;
    for (int i = 1; i <= k; ++i)
        for (int j = i; j <= k; ++j)
            s(i, j) = gi(i - 1, j - 1);
    for (int j = 1; j <= k; ++j) {
        double col = 0.0;
        for (int i = 1; i <= k; ++i)
            col += gi(i - 1, j - 1);
        s(0, j) = -col;
    }
    double total = 0.0;
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= k; ++j)
            total += gi(i - 1, j - 1);
    s(0, 0) = total;
    for (int i = 0; i <= k; ++i)
        for (int j = i; j <= k; ++j) {
            s(i, j) *= g.measure;
            s(j, i) = s(i, j);
        }
    return s;
}

inline double conformal_power(double rho, double exponent)
{
    if (exponent == 0.0)
        return 1.0;
    if (exponent == 1.0)
        return rho;
    return std::pow(rho, exponent);
}

struct Accumulator {
    std::vector<Eigen::Triplet<double>> triplets;

    void add_local(const Eigen::Matrix4d& local, const Index* dofs, int n)
    {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                triplets.emplace_back(dofs[i], dofs[j], local(i, j));
    }

    SparseMatrix build(Index n) const
    {
        SparseMatrix m(n, n);
        m.setFromTriplets(triplets.begin(), triplets.end());
        m.makeCompressed();
        return m;
    }
};

inline std::vector<Index> dof_numbering(const SimplicialMesh& mesh, Index& count)
{
    auto rep = vertex_representatives(mesh);
    std::map<Index, Index> ids;
    for (Index r : rep)
        ids.emplace(r, 0);
    count = 0;
    for (auto& [r, id] : ids)
        id = count++;
    std::vector<Index> out(rep.size());
    for (std::size_t v = 0; v < rep.size(); ++v)
        out[v] = ids.at(rep[v]);
    return out;
}

/// Stiffness and volume mass over the cells of `mesh`.
inline void assemble_cells(const SimplicialMesh& mesh, const std::vector<double>& rho, OperatorBundle& ops)
{
    const int k = mesh.dim;
    const double stiff_exp = (k - 2) / 2.0;
    const double vol_exp = k / 2.0;
    const auto rule = simplex_rule(k, false);
    Accumulator stiffness, mass;
    stiffness.triplets.reserve(mesh.cells.size() * (k + 1) * (k + 1));
    mass.triplets.reserve(mesh.cells.size() * (k + 1) * (k + 1));
    double volume = 0.0;

    for (const Cell& c : mesh.cells) {
        auto geo = simplex_geometry(mesh.vertices, c.data(), k);
        std::array<Index, 4> dofs{};
        for (int i = 0; i <= k; ++i)
            dofs[i] = ops.vertex_to_dof[c[i]];

        double stiff_weight = 0.0;
        Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
        double cell_volume = 0.0;
        for (const auto& q : rule) {
            double rho_q = 0.0;
            for (int i = 0; i <= k; ++i)
                rho_q += q.bary[i] * rho[c[i]];
            double w_vol = q.weight * conformal_power(rho_q, vol_exp);
            stiff_weight += q.weight * conformal_power(rho_q, stiff_exp);
            cell_volume += w_vol;
            for (int i = 0; i <= k; ++i)
                for (int j = i; j <= k; ++j)
                    m(i, j) += w_vol * q.bary[i] * q.bary[j];
        }
        // in dimension two the Dirichlet energy carries no metric weight
        if (stiff_exp == 0.0)
            stiff_weight = 1.0;
        Eigen::Matrix4d s = local_stiffness(geo, k);
        for (int i = 0; i <= k; ++i)
            for (int j = i; j <= k; ++j) {
                s(i, j) *= stiff_weight;
                s(j, i) = s(i, j);
                m(i, j) *= geo.measure;
                m(j, i) = m(i, j);
            }
        stiffness.add_local(s, dofs.data(), k + 1);
        mass.add_local(m, dofs.data(), k + 1);
        volume += geo.measure * cell_volume;
    }
    ops.K = stiffness.build(ops.dof_count);
    ops.M_vol = mass.build(ops.dof_count);
    ops.omega_volume = volume;
}

} // namespace detail

/// Per-vertex conformal factor rho of g = rho * g_euclid.
inline std::vector<double> vertex_metric(const SimplicialMesh& mesh, const MetricField& metric)
{
    using K = MetricField::Kind;
    std::vector<double> rho(mesh.vertices.size(), 1.0);
    const double c = metric.curvature_scale;
    if (metric.kind != K::custom && metric.kind != K::euclidean && !(c > 0))
        throw Error(ErrorCode::invalid_metric, "curvature scale must be positive");
    for (std::size_t v = 0; v < rho.size(); ++v) {
        double r2 = detail::dot(mesh.vertices[v], mesh.vertices[v]);
        switch (metric.kind) {
        case K::euclidean: break;
        case K::spherical_stereographic: {
            double d = 1.0 + c * r2;
            rho[v] = 4.0 / (d * d);
            break;
        }
        case K::hyperbolic_poincare: {
            double d = 1.0 - c * r2;
            if (!(d > 0))
                throw Error(ErrorCode::invalid_metric, "vertex outside the Poincare ball");
            rho[v] = 4.0 / (d * d);
            break;
        }
        case K::custom:
            if (metric.values.size() != rho.size())
                throw Error(ErrorCode::invalid_metric, "custom metric needs one value per vertex");
            rho[v] = metric.values[v];
            break;
        }
        if (!(rho[v] > 0) || !std::isfinite(rho[v]))
            throw Error(ErrorCode::invalid_metric, "conformal factor must be positive at vertex " + std::to_string(v));
    }
    return rho;
}

/// Stiffness, boundary mass and volume mass of the weighted Steklov problem.
inline OperatorBundle assemble(const SimplicialMesh& mesh, const MetricField& metric, const BoundaryDensity& density)
{
    if (mesh.boundary_facets.empty())
        throw Error(ErrorCode::invalid_input, "Steklov assembly needs a mesh with boundary");
    if (density.values.size() != mesh.boundary_vertices.size())
        throw Error(ErrorCode::invalid_density, "density needs one value per boundary vertex");
    bool any_positive = false;
    for (double d : density.values) {
        if (!(d >= 0) || !std::isfinite(d))
            throw Error(ErrorCode::invalid_density, "density must be finite and non-negative");
        any_positive = any_positive || d > 0;
    }
    if (!any_positive)
        throw Error(ErrorCode::invalid_density, "density is identically zero");

    const auto rho = vertex_metric(mesh, metric);
    OperatorBundle ops;
    ops.vertex_to_dof = detail::dof_numbering(mesh, ops.dof_count);
    ops.n_bdim = mesh.dim - 1;
    detail::assemble_cells(mesh, rho, ops);

    std::vector<double> delta(mesh.vertices.size(), 0.0);
    for (std::size_t i = 0; i < mesh.boundary_vertices.size(); ++i)
        delta[mesh.boundary_vertices[i]] = density.values[i];

    const int k = mesh.dim - 1;
    const double exp = k / 2.0;
    const auto rule = detail::simplex_rule(k, true);
    detail::Accumulator weighted, unit;
    double area = 0.0;
    for (const Cell& f : mesh.boundary_facets) {
        double measure = detail::simplex_measure(mesh.vertices, f.data(), k + 1);
        std::array<Index, 4> dofs{};
        for (int i = 0; i <= k; ++i)
            dofs[i] = ops.vertex_to_dof[f[i]];
        Eigen::Matrix4d mw = Eigen::Matrix4d::Zero(), mu = Eigen::Matrix4d::Zero();
        double facet_area = 0.0;
        for (const auto& q : rule) {
            double rho_q = 0.0, delta_q = 0.0;
            for (int i = 0; i <= k; ++i) {
                rho_q += q.bary[i] * rho[f[i]];
                delta_q += q.bary[i] * delta[f[i]];
            }
            double w = q.weight * detail::conformal_power(rho_q, exp);
            facet_area += w;
            for (int i = 0; i <= k; ++i)
                for (int j = i; j <= k; ++j) {
                    mu(i, j) += w * q.bary[i] * q.bary[j];
                    mw(i, j) += w * delta_q * q.bary[i] * q.bary[j];
                }
        }
        for (int i = 0; i <= k; ++i)
            for (int j = i; j <= k; ++j) {
                mu(i, j) *= measure;
                mu(j, i) = mu(i, j);
                mw(i, j) *= measure;
                mw(j, i) = mw(i, j);
            }
        weighted.add_local(mw, dofs.data(), k + 1);
        unit.add_local(mu, dofs.data(), k + 1);
        area += measure * facet_area;
    }
    ops.M_bnd = weighted.build(ops.dof_count);
    ops.M_sigma = unit.build(ops.dof_count);
    ops.sigma_area = area;

    std::set<Index> bdofs;
    for (Index v : mesh.boundary_vertices)
        bdofs.insert(ops.vertex_to_dof[v]);
    ops.boundary_index.assign(bdofs.begin(), bdofs.end());
    return ops;
}

/// Laplace-Beltrami stiffness and mass on a closed manifold mesh.
inline OperatorBundle lb_operators(const SimplicialMesh& closed_mesh, const MetricField& metric)
{
    if (!closed_mesh.boundary_facets.empty())
        throw Error(ErrorCode::invalid_input, "Laplace-Beltrami operators need a closed mesh");
    const auto rho = vertex_metric(closed_mesh, metric);
    OperatorBundle ops;
    ops.vertex_to_dof = detail::dof_numbering(closed_mesh, ops.dof_count);
    ops.n_bdim = closed_mesh.dim;
    detail::assemble_cells(closed_mesh, rho, ops);
    ops.M_bnd = SparseMatrix(ops.dof_count, ops.dof_count);
    ops.M_sigma = ops.M_vol;
    ops.sigma_area = ops.omega_volume;
    ops.boundary_index.resize(ops.dof_count);
    std::iota(ops.boundary_index.begin(), ops.boundary_index.end(), Index{0});
    return ops;
}

/// Writes "row col value" lines sorted by (row, col), zero-based.
inline void write_triplets(std::ostream& os, const SparseMatrix& m)
{
    std::vector<std::tuple<Index, Index, double>> entries;
    for (int col = 0; col < m.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(m, col); it; ++it)
            entries.emplace_back(static_cast<Index>(it.row()), static_cast<Index>(it.col()), it.value());
    std::sort(entries.begin(), entries.end());
    char buf[64];
    for (const auto& [r, c, v] : entries) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << r << ' ' << c << ' ' << buf << '\n';
    }
}

} // namespace steklov
