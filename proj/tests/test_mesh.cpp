#include "steklov/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace steklov;

namespace {

double total_measure(const SimplicialMesh& m)
{
    double sum = 0.0;
    for (const Cell& c : m.cells)
        sum += detail::simplex_measure(m.vertices, c.data(), m.cell_size());
    return sum;
}

double boundary_measure(const SimplicialMesh& m)
{
    double sum = 0.0;
    for (const Cell& f : m.boundary_facets)
        sum += detail::simplex_measure(m.vertices, f.data(), m.facet_size());
    return sum;
}

SimplicialMesh make_2d(std::vector<Point> v, std::vector<Cell> c)
{
    SimplicialMesh m;
    m.dim = m.ambient_dim = 2;
    m.vertices = std::move(v);
    m.cells = std::move(c);
    return m;
}

ErrorCode finalize_code(SimplicialMesh m)
{
    try {
        finalize(m);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "finalize accepted the mesh";
    return ErrorCode::invalid_input;
}

} // namespace

TEST(Mesh, DiskCountsFollowHexagonalNumbers)
{
    for (int r = 0; r <= 5; ++r) {
        SimplicialMesh m = unit_disk_mesh(r);
        const long n = 1L << r;
        EXPECT_EQ(m.vertex_count(), 1 + 3 * n * (n + 1));
        EXPECT_EQ(m.cell_count(), 6 * n * n);
        EXPECT_EQ(static_cast<long>(m.boundary_vertices.size()), 6 * n);
        EXPECT_EQ(m.genus, 0);
        EXPECT_EQ(boundary_component_count(m), 1);
        EXPECT_EQ(euler_characteristic(m), 1);
    }
}

TEST(Mesh, DiskBoundaryOnCircleAndAreaConverges)
{
    double previous = 1.0;
    for (int r = 2; r <= 5; ++r) {
        SimplicialMesh m = unit_disk_mesh(r);
        for (Index v : m.boundary_vertices)
            EXPECT_NEAR(detail::norm(m.vertices[v]), 1.0, 1e-14);
        double err = std::abs(total_measure(m) - std::numbers::pi);
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 2e-3);
}

TEST(Mesh, RefineMatchesDirectGenerationOnTheCircle)
{
    SimplicialMesh coarse = unit_disk_mesh(2);
    SimplicialMesh fine = refine(coarse);
    EXPECT_EQ(fine.vertex_count(), unit_disk_mesh(3).vertex_count());
    EXPECT_EQ(fine.boundary_vertices.size(), 2 * coarse.boundary_vertices.size());
    for (Index v : fine.boundary_vertices)
        EXPECT_NEAR(detail::norm(fine.vertices[v]), 1.0, 1e-14);
    EXPECT_EQ(fine.genus, 0);
}

TEST(Mesh, StarBoundaryFollowsRadiusSamples)
{
    std::vector<double> samples(32);
    for (int i = 0; i < 32; ++i)
        samples[i] = 1.0 + 0.2 * std::cos(3.0 * 2.0 * std::numbers::pi * i / 32);
    SimplicialMesh m = star_shaped_mesh({samples, 4});
    for (Index v : m.boundary_vertices) {
        const Point& p = m.vertices[v];
        double theta = std::atan2(p[1], p[0]);
        EXPECT_NEAR(detail::norm(p), 1.0 + 0.2 * std::cos(3.0 * theta), 1e-12);
    }
    EXPECT_EQ(boundary_component_count(m), 1);
}

TEST(Mesh, StarRejectsNonPositiveRadius)
{
    std::vector<double> samples(16, 1.0);
    samples[3] = 0.0;
    EXPECT_THROW(star_shaped_mesh({samples, 2}), Error);
}

TEST(Mesh, AnnulusTopologyAndArea)
{
    SimplicialMesh m = annulus_mesh({0.5, 1.0, 4});
    EXPECT_EQ(boundary_component_count(m), 2);
    EXPECT_EQ(euler_characteristic(m), 0);
    EXPECT_EQ(m.genus, 0);
    EXPECT_NEAR(total_measure(m), 0.75 * std::numbers::pi, 0.02);
    for (Index v : m.boundary_vertices) {
        double r = detail::norm(m.vertices[v]);
        EXPECT_TRUE(std::abs(r - 0.5) < 1e-14 || std::abs(r - 1.0) < 1e-14);
    }
    EXPECT_THROW(annulus_mesh({1.0, 0.5, 2}), Error);
}

TEST(Mesh, FlatCylinderIsPeriodic)
{
    SimplicialMesh m = flat_cylinder_mesh({2.0 * std::numbers::pi, 2.0, 3});
    EXPECT_FALSE(m.periodic_pairs.empty());
    EXPECT_EQ(boundary_component_count(m), 2);
    EXPECT_EQ(m.genus, 0);
    EXPECT_NEAR(total_measure(m), 4.0 * std::numbers::pi, 1e-12);
    EXPECT_NEAR(boundary_measure(m), 4.0 * std::numbers::pi, 1e-12);
    try {
        flat_cylinder_mesh({1.0, 1.0, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_mesh);
    }
}

TEST(Mesh, BallCountsAndGeometry)
{
    for (int r = 0; r <= 3; ++r) {
        SimplicialMesh m = unit_ball_mesh(r);
        const long n = 1L << r;
        EXPECT_EQ(static_cast<long>(m.boundary_vertices.size()), 4 * n * n + 2);
        EXPECT_EQ(m.cell_count(), 8 * n * n * n);
        EXPECT_EQ(euler_characteristic(m), 1);
        for (Index v : m.boundary_vertices)
            EXPECT_NEAR(detail::norm(m.vertices[v]), 1.0, 1e-14);
    }
    // inscribed polyhedra: both measure errors shrink by about 4 per level
    double vol_err[2], area_err[2];
    for (int r = 2; r <= 3; ++r) {
        SimplicialMesh m = unit_ball_mesh(r);
        vol_err[r - 2] = 4.0 * std::numbers::pi / 3.0 - total_measure(m);
        area_err[r - 2] = 4.0 * std::numbers::pi - boundary_measure(m);
        EXPECT_GT(vol_err[r - 2], 0.0);
        EXPECT_GT(area_err[r - 2], 0.0);
    }
    EXPECT_GT(vol_err[0] / vol_err[1], 3.5);
    EXPECT_GT(area_err[0] / area_err[1], 3.5);
    EXPECT_LT(vol_err[1], 0.03 * 4.0 * std::numbers::pi / 3.0);
    EXPECT_LT(area_err[1], 0.015 * 4.0 * std::numbers::pi);
}

TEST(Mesh, BoundaryOfIsClosed)
{
    SimplicialMesh disk = unit_disk_mesh(3);
    SimplicialMesh circle = boundary_of(disk);
    EXPECT_EQ(circle.dim, 1);
    EXPECT_TRUE(circle.closed());
    EXPECT_EQ(circle.vertex_count(), static_cast<Index>(disk.boundary_vertices.size()));

    SimplicialMesh sphere = boundary_of(unit_ball_mesh(2));
    EXPECT_EQ(sphere.dim, 2);
    EXPECT_TRUE(sphere.closed());
    EXPECT_EQ(euler_characteristic(sphere), 2);
    EXPECT_EQ(sphere.genus, 0);

    SimplicialMesh rings = boundary_of(flat_cylinder_mesh({2.0 * std::numbers::pi, 2.0, 2}));
    EXPECT_TRUE(rings.closed());
    int pieces = 0;
    vertex_components(rings, &pieces);
    EXPECT_EQ(pieces, 2);
}

TEST(Mesh, ScalingScalesMeasures)
{
    SimplicialMesh m = unit_disk_mesh(3);
    SimplicialMesh s = scaled(m, 3.0);
    EXPECT_NEAR(total_measure(s), 9.0 * total_measure(m), 1e-12);
    EXPECT_NEAR(boundary_measure(s), 3.0 * boundary_measure(m), 1e-12);
    EXPECT_THROW(scaled(m, 0.0), Error);
}

TEST(Mesh, ValidationErrors)
{
    const std::vector<Point> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    EXPECT_EQ(finalize_code(make_2d(square, {{0, 2, 1, -1}, {0, 2, 3, -1}})), ErrorCode::orientation);
    EXPECT_EQ(finalize_code(make_2d(square, {{0, 1, 2, -1}, {0, 1, 9, -1}})), ErrorCode::invalid_input);
    EXPECT_EQ(finalize_code(make_2d({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2, -1}})), ErrorCode::degenerate_mesh);

    // three triangles on the edge 0-1
    std::vector<Point> fan{{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, -1, 0}, {0.5, 2, 0}};
    SimplicialMesh nm = make_2d(fan, {{0, 1, 2, -1}, {1, 0, 3, -1}, {0, 1, 4, -1}});
    EXPECT_EQ(finalize_code(nm), ErrorCode::non_manifold);

    std::vector<Point> two{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 0}, {6, 5, 0}, {5, 6, 0}};
    EXPECT_EQ(finalize_code(make_2d(two, {{0, 1, 2, -1}, {3, 4, 5, -1}})), ErrorCode::disconnected);

    std::vector<Point> dup{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0}};
    EXPECT_EQ(finalize_code(make_2d(dup, {{0, 1, 2, -1}, {3, 4, 2, -1}})), ErrorCode::duplicate_vertex);
}

TEST(Mesh, RefinementLevelsAreBounded)
{
    EXPECT_THROW(unit_disk_mesh(-1), Error);
    EXPECT_THROW(unit_disk_mesh(11), Error);
    EXPECT_THROW(unit_ball_mesh(7), Error);
}

TEST(Mesh, MakeDomainDispatches)
{
    EXPECT_EQ(make_domain(UnitDiskSpec{2}).vertex_count(), unit_disk_mesh(2).vertex_count());
    EXPECT_EQ(make_domain(UnitBallSpec{1}).dim, 3);
    EXPECT_EQ(make_domain(AnnulusSpec{0.3, 1.0, 2}).dim, 2);
}
