#pragma once

#include "steklov/assembly.hpp"
#include "steklov/error.hpp"
#include "steklov/mesh.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace steklov {

enum class SpectrumKind { steklov, laplace };
enum class InteriorSolver { cholesky, conjugate_gradient };

inline std::string_view to_string(SpectrumKind kind) { return kind == SpectrumKind::steklov ? "steklov" : "laplace"; }

struct SpectrumGeometry {
    double sigma_area = 0.0;
    double omega_volume = 0.0;
    int n_bdim = 1;
    double mean_density = 1.0;
};

struct SolverInfo {
    std::string method;
    std::vector<double> residual_norms;
    double dedup_tolerance = 0.0;
    int deflated = 0;
    bool truncated = false;
};

/// Eigenvalues are 1-indexed in the usual convention, so raw[0] holds
/// sigma_1 = 0 (or lambda_1 = 0).
struct SpectrumResult {
    SpectrumKind kind = SpectrumKind::steklov;
    std::vector<double> raw;
    std::vector<double> normalized;
    int k_count = 0;
    SpectrumGeometry geometry;
    SolverInfo solver_info;
    std::vector<int> multiplicities;
    Eigen::MatrixXd vectors; // dofs x k_count, B-orthonormal
};

struct SolveOptions {
    InteriorSolver interior = InteriorSolver::cholesky;
    /// Accept densities that vanish on whole boundary facets; the affected
    /// directions are eliminated rather than reported as infinite eigenvalues.
    bool allow_deflation = false;
};

struct Eigenpairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    std::vector<double> residuals; // relative to ||A|| + |sigma| ||B||
    int deflated = 0;
    bool truncated = false;
    std::string method;
};

/// Dense symmetric generalized eigenproblem A x = sigma B x with B >= 0.
/// Directions where B is (numerically) zero are eliminated by a Schur
/// complement of A, which is the variational limit of the pencil there.
inline Eigenpairs generalized_sym_eig(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int k)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != n || n == 0)
        throw Error(ErrorCode::invalid_input, "matrix dimensions do not match");
    if (k < 1)
        throw Error(ErrorCode::invalid_input, "k must be positive");
    const double trace = B.trace();
    if (!(trace > 0) || B.norm() == 0)
        throw Error(ErrorCode::invalid_input, "B is numerically zero");
    const double tol_b = 1e-12 * trace / static_cast<double>(n);

    std::vector<Eigen::Index> kept, dropped;
    for (Eigen::Index i = 0; i < n; ++i)
        (B.row(i).cwiseAbs().maxCoeff() == 0.0 ? dropped : kept).push_back(i);

    Eigen::MatrixXd b_kept(kept.size(), kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = 0; j < kept.size(); ++j)
            b_kept(i, j) = B(kept[i], kept[j]);

    // Either T is a permutation (exact zero rows only) or a dense rotation
    // into the eigenbasis of B.
    Eigenpairs out;
    Eigen::MatrixXd At, Bt, T;
    std::vector<Eigen::Index> perm;
    Eigen::Index r = static_cast<Eigen::Index>(kept.size());
    bool rotated = false;

    Eigen::LLT<Eigen::MatrixXd> probe(b_kept);
    bool b_definite = probe.info() == Eigen::Success;
    if (b_definite) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(b_kept, Eigen::EigenvaluesOnly);
        b_definite = check.eigenvalues().minCoeff() > tol_b;
    }
    if (b_definite) {
        perm = kept;
        perm.insert(perm.end(), dropped.begin(), dropped.end());
        At.resize(n, n);
        Bt.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                At(i, j) = A(perm[i], perm[j]);
                Bt(i, j) = B(perm[i], perm[j]);
            }
    } else {
        rotated = true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(B);
        const auto& d = eb.eigenvalues();
        std::vector<Eigen::Index> big, small;
        for (Eigen::Index i = 0; i < n; ++i)
            (d[i] > tol_b ? big : small).push_back(i);
        if (big.empty())
            throw Error(ErrorCode::invalid_input, "B is numerically zero");
        r = static_cast<Eigen::Index>(big.size());
        T.resize(n, n);
        Eigen::Index col = 0;
        for (auto i : big)
            T.col(col++) = eb.eigenvectors().col(i);
        for (auto i : small)
            T.col(col++) = eb.eigenvectors().col(i);
        At = T.transpose() * A * T;
        Bt = T.transpose() * B * T;
        At = 0.5 * (At + At.transpose()).eval();
        Bt = 0.5 * (Bt + Bt.transpose()).eval();
        // exact zeros in the null block keep the elimination clean
        Bt.rightCols(n - r).setZero();
        Bt.bottomRows(n - r).setZero();
    }
    out.deflated = static_cast<int>(n - r);

    Eigen::MatrixXd C = At.topLeftCorner(r, r);
    Eigen::MatrixXd coupling; // A_zz^{-1} A_zq
    if (r < n) {
        Eigen::LLT<Eigen::MatrixXd> zz(At.bottomRightCorner(n - r, n - r));
        if (zz.info() != Eigen::Success)
            throw Error(ErrorCode::solver_failure, "A is not definite on the null space of B");
        coupling = zz.solve(At.bottomLeftCorner(n - r, r));
        C -= At.topRightCorner(r, n - r) * coupling;
        C = 0.5 * (C + C.transpose()).eval();
    }

    Eigen::LLT<Eigen::MatrixXd> chol(Bt.topLeftCorner(r, r));
    if (chol.info() != Eigen::Success)
        throw Error(ErrorCode::solver_failure, "Cholesky factorization of B failed");
    Eigen::MatrixXd Y = chol.matrixL().solve(C);
    Eigen::MatrixXd M = chol.matrixL().solve(Y.transpose());
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::solver_failure, "symmetric eigensolver did not converge");

    const Eigen::Index count = std::min<Eigen::Index>(k, r);
    out.truncated = count < k;
    out.values = es.eigenvalues().head(count);
    Eigen::MatrixXd yq = chol.matrixU().solve(es.eigenvectors().leftCols(count));
    Eigen::MatrixXd xt(n, count);
    xt.topRows(r) = yq;
    if (r < n)
        xt.bottomRows(n - r) = -coupling * yq;
    if (rotated) {
        out.vectors = T * xt;
    } else {
        out.vectors.resize(n, count);
        for (Eigen::Index i = 0; i < n; ++i)
            out.vectors.row(perm[i]) = xt.row(i);
    }

    const double norm_a = A.norm(), norm_b = B.norm();
    for (Eigen::Index j = 0; j < count; ++j) {
        Eigen::VectorXd x = out.vectors.col(j);
        x /= x.norm();
        double sigma = out.values[j];
        double res = (A * x - sigma * (B * x)).norm() / (norm_a + std::abs(sigma) * norm_b);
        out.residuals.push_back(res);
        if (!(res <= 1e-9))
            throw Error(ErrorCode::solver_failure, "eigenpair residual " + std::to_string(res) + " exceeds 1e-9");
    }
    out.method = rotated ? "deflated-rotation+cholesky" : (r < n ? "structural-deflation+cholesky" : "cholesky");
    return out;
}

namespace detail {

inline Eigen::MatrixXd dense_block(const SparseMatrix& m, const std::vector<Index>& rows, const std::vector<Index>& cols)
{
    std::vector<Index> row_pos(m.rows(), -1), col_pos(m.cols(), -1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        row_pos[rows[i]] = static_cast<Index>(i);
    for (std::size_t j = 0; j < cols.size(); ++j)
        col_pos[cols[j]] = static_cast<Index>(j);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows.size(), cols.size());
    for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            if (row_pos[it.row()] >= 0 && col_pos[it.col()] >= 0)
                out(row_pos[it.row()], col_pos[it.col()]) += it.value();
    return out;
}

inline SparseMatrix sparse_block(const SparseMatrix& m, const std::vector<Index>& rows, const std::vector<Index>& cols)
{
    std::vector<Index> row_pos(m.rows(), -1), col_pos(m.cols(), -1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        row_pos[rows[i]] = static_cast<Index>(i);
    for (std::size_t j = 0; j < cols.size(); ++j)
        col_pos[cols[j]] = static_cast<Index>(j);
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            if (row_pos[it.row()] >= 0 && col_pos[it.col()] >= 0)
                t.emplace_back(row_pos[it.row()], col_pos[it.col()], it.value());
    SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

inline std::vector<Index> interior_index(const OperatorBundle& ops)
{
    std::vector<bool> on_boundary(ops.dof_count, false);
    for (Index b : ops.boundary_index)
        on_boundary[b] = true;
    std::vector<Index> out;
    for (Index d = 0; d < ops.dof_count; ++d)
        if (!on_boundary[d])
            out.push_back(d);
    return out;
}

} // namespace detail

/// Boundary Schur complement of the stiffness together with the discrete
/// harmonic extension: interior values = -extension * boundary values.
struct DtnOperator {
    Eigen::MatrixXd S;
    Eigen::MatrixXd extension; // interior x boundary, K_ii^{-1} K_ib
    std::vector<Index> interior;
    double relative_residual = 0.0;
    std::string method;
};

inline DtnOperator dtn_operator(const OperatorBundle& ops, InteriorSolver solver = InteriorSolver::cholesky)
{
    DtnOperator out;
    const auto& b = ops.boundary_index;
    out.interior = detail::interior_index(ops);
    const auto& in = out.interior;
    Eigen::MatrixXd kbb = detail::dense_block(ops.K, b, b);
    if (in.empty()) {
        out.S = kbb;
        out.extension.resize(0, static_cast<Eigen::Index>(b.size()));
        out.method = "empty-interior";
        return out;
    }
    SparseMatrix kii = detail::sparse_block(ops.K, in, in);
    SparseMatrix kib = detail::sparse_block(ops.K, in, b);
    Eigen::MatrixXd rhs = Eigen::MatrixXd(kib);
    const double rhs_norm = rhs.norm();
    Eigen::MatrixXd x;

    if (solver == InteriorSolver::cholesky) {
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(kii);
        if (ldlt.info() != Eigen::Success)
            throw Error(ErrorCode::solver_failure, "sparse factorization of the interior stiffness failed");
        const auto& d = ldlt.vectorD();
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (!(d[i] > 0))
                throw Error(ErrorCode::solver_failure,
                            "interior stiffness is not positive definite (pivot " + std::to_string(i) + ")");
        x = ldlt.solve(rhs);
        for (int step = 0; step < 3 && rhs_norm > 0; ++step) {
            Eigen::MatrixXd residual = rhs - kii * x;
            if (residual.norm() <= 1e-12 * rhs_norm)
                break;
            x += ldlt.solve(residual);
        }
        out.method = "sparse-ldlt";
    } else {
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(1e-13);
        cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * kii.rows()));
        cg.compute(kii);
        x.resize(kii.rows(), rhs.cols());
        for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
            x.col(j) = cg.solve(rhs.col(j));
            if (cg.info() != Eigen::Success)
                throw Error(ErrorCode::solver_failure,
                            "conjugate gradients stalled after " + std::to_string(cg.iterations()) + " iterations");
        }
        out.method = "jacobi-cg";
    }
    out.relative_residual = rhs_norm > 0 ? (rhs - kii * x).norm() / rhs_norm : 0.0;
    if (out.relative_residual > 1e-12)
        throw Error(ErrorCode::solver_failure,
                    "interior solve residual " + std::to_string(out.relative_residual) + " above 1e-12");
    out.S = kbb - Eigen::MatrixXd(kib.transpose()) * x;
    out.S = 0.5 * (out.S + out.S.transpose()).eval();
    out.extension = std::move(x);
    return out;
}

/// Discrete Dirichlet-to-Neumann matrix on `ops.boundary_index`.
inline Eigen::MatrixXd schur_dtn(const OperatorBundle& ops, InteriorSolver solver = InteriorSolver::cholesky)
{
    return dtn_operator(ops, solver).S;
}

namespace detail {

inline std::vector<int> group_multiplicities(const std::vector<double>& values, double tol)
{
    std::vector<int> groups;
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i + 1;
        while (j < values.size() && values[j] - values[i] <= tol)
            ++j;
        groups.push_back(static_cast<int>(j - i));
        i = j;
    }
    return groups;
}

inline void finish_spectrum(SpectrumResult& result, const Eigenpairs& pairs, double power)
{
    result.k_count = static_cast<int>(pairs.values.size());
    result.raw.assign(pairs.values.data(), pairs.values.data() + pairs.values.size());
    const double scale = result.raw.empty() ? 0.0 : std::max(std::abs(result.raw.back()), 1e-300);
    for (double& v : result.raw) {
        if (v < -1e-10 * scale)
            throw Error(ErrorCode::solver_failure, "negative eigenvalue " + std::to_string(v));
        v = std::max(v, 0.0);
    }
    if (!result.raw.empty() && result.raw.front() > 1e-8 * scale)
        throw Error(ErrorCode::solver_failure, "constants are not in the kernel");
    // the constant mode is an exact zero; drop its roundoff
    if (!result.raw.empty())
        result.raw.front() = 0.0;
    const double factor = result.kind == SpectrumKind::steklov
                              ? result.geometry.mean_density * std::pow(result.geometry.sigma_area, power)
                              : std::pow(result.geometry.sigma_area, power);
    result.normalized.clear();
    for (double v : result.raw)
        result.normalized.push_back(v * factor);
    result.solver_info.residual_norms = pairs.residuals;
    result.solver_info.deflated = pairs.deflated;
    result.solver_info.truncated = pairs.truncated;
    result.solver_info.dedup_tolerance = 1e-6 * std::max(1.0, result.raw.empty() ? 1.0 : result.raw.back());
    result.multiplicities = group_multiplicities(result.raw, result.solver_info.dedup_tolerance);
}

} // namespace detail

/// Steklov spectrum of already assembled operators.
inline SpectrumResult steklov_spectrum(const OperatorBundle& ops, int k, const SolveOptions& options = {})
{
    DtnOperator dtn = dtn_operator(ops, options.interior);
    Eigen::MatrixXd mbb = detail::dense_block(ops.M_bnd, ops.boundary_index, ops.boundary_index);
    Eigenpairs pairs = generalized_sym_eig(dtn.S, mbb, k);
    if (pairs.deflated > 0 && !options.allow_deflation)
        throw Error(ErrorCode::invalid_density,
                    "density vanishes on part of the boundary; enable deflation to eliminate those directions");

    SpectrumResult result;
    result.kind = SpectrumKind::steklov;
    result.geometry = {ops.sigma_area, ops.omega_volume, ops.n_bdim, ops.mean_density()};
    result.solver_info.method = "schur(" + dtn.method + ")+" + pairs.method;
    detail::finish_spectrum(result, pairs, 1.0 / ops.n_bdim);

    result.vectors = Eigen::MatrixXd::Zero(ops.dof_count, pairs.vectors.cols());
    for (std::size_t i = 0; i < ops.boundary_index.size(); ++i)
        result.vectors.row(ops.boundary_index[i]) = pairs.vectors.row(static_cast<Eigen::Index>(i));
    if (!dtn.interior.empty()) {
        Eigen::MatrixXd inner = -dtn.extension * pairs.vectors;
        for (std::size_t i = 0; i < dtn.interior.size(); ++i)
            result.vectors.row(dtn.interior[i]) = inner.row(static_cast<Eigen::Index>(i));
    }
    return result;
}

inline SpectrumResult steklov_spectrum(const SimplicialMesh& mesh, const MetricField& metric,
                                       const BoundaryDensity& density, int k, const SolveOptions& options = {})
{
    return steklov_spectrum(assemble(mesh, metric, density), k, options);
}

inline SpectrumResult laplace_spectrum(const OperatorBundle& ops, int k)
{
    Eigen::MatrixXd a(ops.K), b(ops.M_vol);
    Eigenpairs pairs = generalized_sym_eig(a, b, k);
    SpectrumResult result;
    result.kind = SpectrumKind::laplace;
    result.geometry = {ops.sigma_area, ops.omega_volume, ops.n_bdim, 1.0};
    result.solver_info.method = "dense-" + pairs.method;
    detail::finish_spectrum(result, pairs, 2.0 / ops.n_bdim);
    result.vectors = std::move(pairs.vectors);
    return result;
}

inline SpectrumResult laplace_spectrum(const SimplicialMesh& closed_mesh, const MetricField& metric, int k)
{
    return laplace_spectrum(lb_operators(closed_mesh, metric), k);
}

/// Finite eigenvalues of K u = sigma M_bnd u on the full dof space, computed
/// without the boundary reduction: M_bnd v = mu (K + M_bnd) v, sigma = 1/mu - 1.
inline std::vector<double> steklov_full_space(const OperatorBundle& ops, int k)
{
    Eigen::MatrixXd m(ops.M_bnd);
    Eigen::MatrixXd shifted = Eigen::MatrixXd(ops.K) + m;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(m, shifted, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::solver_failure, "full-space generalized eigensolver failed");
    const auto& mu = es.eigenvalues();
    std::vector<double> sigma;
    for (Eigen::Index i = mu.size() - 1; i >= 0 && static_cast<int>(sigma.size()) < k; --i) {
        if (!(mu[i] > 0))
            break;
        sigma.push_back(1.0 / mu[i] - 1.0);
    }
    return sigma;
}

inline double rayleigh_quotient(const OperatorBundle& ops, const Eigen::VectorXd& f_dofs)
{
    double den = f_dofs.dot(ops.M_bnd * f_dofs);
    if (!(den > 0))
        throw Error(ErrorCode::undefined_quotient, "function has zero weighted boundary norm");
    return std::max(0.0, f_dofs.dot(ops.K * f_dofs)) / den;
}

/// R(f) = f'Kf / f'M_bnd f for a per-vertex function.
inline double rayleigh_quotient(const OperatorBundle& ops, std::span<const double> f)
{
    return rayleigh_quotient(ops, ops.to_dofs(f));
}

/// Plateau function of the annulus {r < |x - center| < R}: one on the
/// annulus, decaying linearly to zero across r/2..r and R..2R.
inline std::vector<double> build_plateau(const SimplicialMesh& mesh, const Point& center, double r, double R)
{
    if (!(r >= 0) || !(r < R))
        throw Error(ErrorCode::invalid_annulus, "plateau needs 0 <= r < R");
    std::vector<double> h(mesh.vertices.size(), 0.0);
    for (std::size_t v = 0; v < h.size(); ++v) {
        double d = detail::norm(detail::sub(mesh.vertices[v], center));
        double value = 0.0;
        if (d >= r && d <= R)
            value = 1.0;
        else if (d < r && d > 0.5 * r)
            value = (d - 0.5 * r) / (0.5 * r);
        else if (d > R && d < 2.0 * R)
            value = (2.0 * R - d) / R;
        h[v] = value;
    }
    return h;
}

/// Upper bound for sigma_k from k disjointly supported test functions: the
/// largest Rayleigh quotient over their span.
inline double minmax_upper_bound(const OperatorBundle& ops, const std::vector<std::vector<double>>& family)
{
    if (family.empty())
        throw Error(ErrorCode::invalid_family, "empty test family");
    const Eigen::Index k = static_cast<Eigen::Index>(family.size());
    Eigen::MatrixXd F(ops.dof_count, k);
    for (Eigen::Index j = 0; j < k; ++j)
        F.col(j) = ops.to_dofs(family[j]);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = a + 1; b < k; ++b)
            if (F.col(a).cwiseProduct(F.col(b)).cwiseAbs().maxCoeff() != 0.0)
                throw Error(ErrorCode::invalid_family, "test functions have overlapping supports");
    Eigen::MatrixXd kf = ops.K * F;
    Eigen::MatrixXd mf = ops.M_bnd * F;
    Eigen::MatrixXd a = F.transpose() * kf;
    Eigen::MatrixXd b = F.transpose() * mf;
    for (Eigen::Index j = 0; j < k; ++j)
        if (!(b(j, j) > 0))
            throw Error(ErrorCode::undefined_quotient, "test function " + std::to_string(j) + " misses the boundary");
    a = 0.5 * (a + a.transpose()).eval();
    b = 0.5 * (b + b.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::solver_failure, "span eigenproblem failed");
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

} // namespace steklov
