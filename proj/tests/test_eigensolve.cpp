#include "steklov/eigensolve.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace steklov;

namespace {

double max_rel_error(const std::vector<double>& fem, const std::vector<double>& exact, std::size_t from = 1)
{
    double worst = 0.0;
    for (std::size_t i = from; i < exact.size(); ++i)
        worst = std::max(worst, std::abs(fem[i] - exact[i]) / exact[i]);
    return worst;
}

/// Steklov spectrum of the annulus r_in < |x| < 1 by separation of variables:
/// each angular mode j gives a 2x2 pencil in the coefficients of r^j, r^-j
/// (or 1, log r for j = 0).
std::vector<double> annulus_oracle(double a, int count)
{
    std::vector<double> values;
    for (int j = 0; j < count; ++j) {
        Eigen::Matrix2d flux, trace;
        if (j == 0) {
            flux << 0.0, 1.0, 0.0, -1.0 / a;
            trace << 1.0, 0.0, 1.0, std::log(a);
        } else {
            flux << j, -j, -j * std::pow(a, j - 1), j * std::pow(a, -j - 1);
            trace << 1.0, 1.0, std::pow(a, j), std::pow(a, -j);
        }
        Eigen::EigenSolver<Eigen::Matrix2d> es(trace.inverse() * flux);
        for (int i = 0; i < 2; ++i)
            for (int m = 0; m < (j == 0 ? 1 : 2); ++m)
                values.push_back(es.eigenvalues()[i].real());
    }
    std::sort(values.begin(), values.end());
    return values;
}

} // namespace

TEST(Eigensolve, DiagonalPencil)
{
    Eigen::MatrixXd a = Eigen::Vector3d(6.0, 2.0, 1.0).asDiagonal();
    Eigen::MatrixXd b = Eigen::Vector3d(2.0, 1.0, 1.0).asDiagonal();
    Eigenpairs p = generalized_sym_eig(a, b, 3);
    EXPECT_NEAR(p.values[0], 1.0, 1e-14);
    EXPECT_NEAR(p.values[1], 2.0, 1e-14);
    EXPECT_NEAR(p.values[2], 3.0, 1e-14);
    EXPECT_EQ(p.deflated, 0);
    Eigen::MatrixXd gram = p.vectors.transpose() * b * p.vectors;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Eigensolve, NullDirectionsOfBAreEliminated)
{
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 2.0, 1.0, 1.0, 2.0;
    b << 1.0, 0.0, 0.0, 0.0;
    Eigenpairs p = generalized_sym_eig(a, b, 2);
    ASSERT_EQ(p.values.size(), 1);
    EXPECT_NEAR(p.values[0], 1.5, 1e-14);
    EXPECT_EQ(p.deflated, 1);
    EXPECT_TRUE(p.truncated);

    // same pencil after a rotation: no structurally zero rows
    Eigen::Matrix2d q;
    q << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    Eigenpairs r = generalized_sym_eig(q * a * q.transpose(), q * b * q.transpose(), 1);
    EXPECT_NEAR(r.values[0], 1.5, 1e-12);
}

TEST(Eigensolve, RandomPencilResiduals)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const int n = 30;
    Eigen::MatrixXd x(n, n), y(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            x(i, j) = g(rng);
            y(i, j) = g(rng);
        }
    Eigen::MatrixXd a = x * x.transpose();
    Eigen::MatrixXd b = y * y.transpose() + n * Eigen::MatrixXd::Identity(n, n);
    Eigenpairs p = generalized_sym_eig(a, b, 10);
    for (int i = 0; i < 10; ++i) {
        Eigen::VectorXd v = p.vectors.col(i);
        double res = (a * v - p.values[i] * b * v).norm();
        EXPECT_LT(res, 1e-10 * (a.norm() + std::abs(p.values[i]) * b.norm()));
    }
    EXPECT_TRUE(std::is_sorted(p.values.data(), p.values.data() + p.values.size()));
}

TEST(Eigensolve, DiskMatchesHarmonicPolynomials)
{
    const std::vector<double> exact{0, 1, 1, 2, 2, 3, 3};
    SimplicialMesh m = unit_disk_mesh(4);
    SpectrumResult s = steklov_spectrum(m, MetricField::euclidean(), uniform_density(m), 7);
    EXPECT_EQ(s.k_count, 7);
    EXPECT_EQ(s.raw[0], 0.0);
    EXPECT_LT(max_rel_error(s.raw, exact), 0.01);
    // cos 3t and sin 3t lie in different symmetry classes of the hexagonal mesh and split
    EXPECT_EQ(std::vector<int>(s.multiplicities.begin(), s.multiplicities.begin() + 3), (std::vector<int>{1, 2, 2}));
    EXPECT_NEAR(s.normalized[1], s.raw[1] * s.geometry.sigma_area, 1e-14);
}

TEST(Eigensolve, AnnulusMatchesSeparationOfVariables)
{
    const std::vector<double> exact = annulus_oracle(0.5, 4);
    SimplicialMesh m = annulus_mesh({0.5, 1.0, 6});
    SpectrumResult s = steklov_spectrum(m, MetricField::euclidean(), uniform_density(m), 7);
    std::vector<double> first(exact.begin(), exact.begin() + 7);
    EXPECT_LT(max_rel_error(s.raw, first), 0.01);
}

TEST(Eigensolve, CholeskyAndConjugateGradientAgree)
{
    SimplicialMesh m = unit_disk_mesh(4);
    OperatorBundle ops = assemble(m, MetricField::euclidean(), uniform_density(m));
    SpectrumResult a = steklov_spectrum(ops, 8, {InteriorSolver::cholesky});
    SpectrumResult b = steklov_spectrum(ops, 8, {InteriorSolver::conjugate_gradient});
    for (int i = 1; i < 8; ++i)
        EXPECT_NEAR(a.raw[i], b.raw[i], 1e-10 * a.raw[i]);
    DtnOperator d = dtn_operator(ops);
    EXPECT_LT(d.relative_residual, 1e-12);
    EXPECT_LT((d.S - d.S.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Eigensolve, SchurAndFullSpaceRoutesAgree)
{
    for (const SimplicialMesh& m : {unit_disk_mesh(3), annulus_mesh({0.5, 1.0, 3}),
                                   flat_cylinder_mesh({2.0 * std::numbers::pi, 2.0, 3})}) {
        OperatorBundle ops = assemble(m, MetricField::euclidean(), uniform_density(m));
        SpectrumResult schur = steklov_spectrum(ops, 8);
        std::vector<double> full = steklov_full_space(ops, 8);
        ASSERT_EQ(full.size(), 8u);
        for (int i = 1; i < 8; ++i)
            EXPECT_NEAR(schur.raw[i], full[i], 1e-10 * schur.raw[i]);
        EXPECT_LT(std::abs(full[0]), 1e-10);
    }
}

TEST(Eigensolve, EigenvectorsAreHarmonicExtensions)
{
    SimplicialMesh m = unit_disk_mesh(3);
    OperatorBundle ops = assemble(m, MetricField::euclidean(), uniform_density(m));
    SpectrumResult s = steklov_spectrum(ops, 4);
    for (int i = 1; i < 4; ++i) {
        Eigen::VectorXd v = s.vectors.col(i);
        EXPECT_NEAR(rayleigh_quotient(ops, v), s.raw[i], 1e-10);
        Eigen::VectorXd r = ops.K * v - s.raw[i] * (ops.M_bnd * v);
        EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Eigensolve, CircleLaplaceMatchesFourier)
{
    SimplicialMesh circle = boundary_of(unit_disk_mesh(5));
    SpectrumResult s = laplace_spectrum(circle, MetricField::euclidean(), 7);
    const std::vector<double> exact{0, 1, 1, 4, 4, 9, 9};
    EXPECT_LT(max_rel_error(s.raw, exact), 0.005);
    EXPECT_NEAR(s.normalized[1], s.raw[1] * std::pow(s.geometry.sigma_area, 2.0), 1e-12 * s.normalized[1]);
}

TEST(Eigensolve, SphereLaplaceMatchesSphericalHarmonics)
{
    SimplicialMesh sphere = boundary_of(unit_ball_mesh(3));
    SpectrumResult s = laplace_spectrum(sphere, MetricField::euclidean(), 9);
    const std::vector<double> exact{0, 2, 2, 2, 6, 6, 6, 6, 6};
    EXPECT_LT(max_rel_error(s.raw, exact), 0.05);
}

TEST(Eigensolve, RayleighQuotientEdgeCases)
{
    SimplicialMesh m = unit_disk_mesh(2);
    OperatorBundle ops = assemble(m, MetricField::euclidean(), uniform_density(m));
    std::vector<double> one(m.vertices.size(), 1.0);
    EXPECT_NEAR(rayleigh_quotient(ops, one), 0.0, 1e-14);
    std::vector<double> x(m.vertices.size());
    for (std::size_t v = 0; v < x.size(); ++v)
        x[v] = m.vertices[v][0];
    // x is harmonic and its Steklov quotient on the unit disk is 1
    EXPECT_NEAR(rayleigh_quotient(ops, x), 1.0, 0.02);
    std::vector<double> bump(m.vertices.size(), 0.0);
    bump[0] = 1.0; // the centre
    try {
        rayleigh_quotient(ops, bump);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::undefined_quotient);
    }
}

TEST(Eigensolve, PlateauShape)
{
    SimplicialMesh m = unit_disk_mesh(3);
    const Point c{1.0, 0.0, 0.0};
    std::vector<double> h = build_plateau(m, c, 0.2, 0.4);
    for (std::size_t v = 0; v < h.size(); ++v) {
        double d = detail::norm(detail::sub(m.vertices[v], c));
        if (d >= 0.2 && d <= 0.4)
            EXPECT_EQ(h[v], 1.0);
        if (d >= 0.8 || d <= 0.1)
            EXPECT_EQ(h[v], 0.0);
        EXPECT_GE(h[v], 0.0);
        EXPECT_LE(h[v], 1.0);
    }
    EXPECT_THROW(build_plateau(m, c, 0.5, 0.4), Error);
    EXPECT_THROW(build_plateau(m, c, -0.1, 0.4), Error);
    // r = 0 gives a disc plateau that is one at its centre
    std::vector<double> disc = build_plateau(m, c, 0.0, 0.3);
    for (Index v : m.boundary_vertices)
        if (detail::norm(detail::sub(m.vertices[v], c)) == 0.0)
            EXPECT_EQ(disc[v], 1.0);
}

TEST(Eigensolve, MinmaxBoundDominatesEigenvalue)
{
    SimplicialMesh m = unit_disk_mesh(4);
    OperatorBundle ops = assemble(m, MetricField::euclidean(), uniform_density(m));
    SpectrumResult s = steklov_spectrum(ops, 4);
    std::vector<std::vector<double>> family;
    for (int j = 0; j < 3; ++j) {
        double t = 2.0 * std::numbers::pi * j / 3.0;
        family.push_back(build_plateau(m, {std::cos(t), std::sin(t), 0.0}, 0.0, 0.3));
    }
    double bound = minmax_upper_bound(ops, family);
    EXPECT_GE(bound, s.raw[2]);
    for (const auto& f : family)
        EXPECT_LE(rayleigh_quotient(ops, f), bound + 1e-12);

    family.push_back(family[0]);
    try {
        minmax_upper_bound(ops, family);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_family);
    }
}

TEST(Eigensolve, VanishingDensityNeedsDeflation)
{
    SimplicialMesh m = unit_disk_mesh(3);
    BoundaryDensity half = density_from(m, [](const Point& p) { return p[1] > 0.0 ? 1.0 : 0.0; });
    OperatorBundle ops = assemble(m, MetricField::euclidean(), half);
    try {
        steklov_spectrum(ops, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_density);
    }
    SpectrumResult s = steklov_spectrum(ops, 4, {InteriorSolver::cholesky, true});
    EXPECT_GT(s.solver_info.deflated, 0);
    EXPECT_EQ(s.raw[0], 0.0);
    EXPECT_GT(s.raw[1], 0.0);
}
