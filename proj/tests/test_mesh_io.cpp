#include "steklov/mesh_io.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

using namespace steklov;

namespace {

std::string temp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("steklov_io_" + name)).string();
}

std::string write_file(const std::string& name, const std::string& text)
{
    std::string path = temp_path(name);
    std::ofstream(path) << text;
    return path;
}

std::string to_off(const SimplicialMesh& m)
{
    std::ostringstream os;
    os.precision(17);
    os << "OFF\n# generated\n" << m.vertices.size() << ' ' << m.cells.size() << " 0\n";
    for (const Point& p : m.vertices)
        os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
    for (const Cell& c : m.cells)
        os << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    return os.str();
}

/// Torus grid with one square removed, counted independently of the library.
struct HoledTorus {
    std::vector<Point> vertices;
    std::vector<Cell> cells;
    long euler = 0;
};

HoledTorus holed_torus(int n)
{
    HoledTorus t;
    const double big = 2.0, small = 0.7;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double u = 2.0 * std::numbers::pi * i / n, v = 2.0 * std::numbers::pi * j / n;
            t.vertices.push_back({(big + small * std::cos(v)) * std::cos(u), (big + small * std::cos(v)) * std::sin(u),
                                  small * std::sin(v)});
        }
    auto id = [n](int i, int j) { return static_cast<Index>((i % n) * n + (j % n)); };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == 0 && j == 0)
                continue;
            t.cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
            t.cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
        }
    std::set<std::pair<Index, Index>> edges;
    std::set<Index> used;
    for (const Cell& c : t.cells)
        for (int a = 0; a < 3; ++a) {
            Index x = c[a], y = c[(a + 1) % 3];
            edges.insert({std::min(x, y), std::max(x, y)});
            used.insert(x);
        }
    t.euler = static_cast<long>(used.size()) - static_cast<long>(edges.size()) + static_cast<long>(t.cells.size());
    return t;
}

ErrorCode import_code(const std::string& path, MeshFormat format)
{
    try {
        import_mesh(path, format);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "import accepted " << path;
    return ErrorCode::invalid_input;
}

} // namespace

TEST(MeshIo, PlanarOffAnnulus)
{
    SimplicialMesh annulus = annulus_mesh({0.5, 1.0, 3});
    SimplicialMesh m = import_mesh(write_file("annulus.off", to_off(annulus)), MeshFormat::off);
    EXPECT_EQ(m.ambient_dim, 2);
    EXPECT_EQ(m.dim, 2);
    EXPECT_EQ(m.vertex_count(), annulus.vertex_count());
    EXPECT_EQ(boundary_component_count(m), 2);
    EXPECT_EQ(m.genus, 0);
}

TEST(MeshIo, HoledTorusGenusFromEulerCount)
{
    HoledTorus t = holed_torus(8);
    // one boundary loop: genus = (2 - chi - 1) / 2
    EXPECT_EQ(t.euler, -1);
    SimplicialMesh src;
    src.dim = 2;
    src.ambient_dim = 3;
    src.vertices = t.vertices;
    src.cells = t.cells;
    nlohmann::json doc = mesh_to_json(src);
    doc.erase("genus");
    SimplicialMesh m = mesh_from_json(doc);
    EXPECT_EQ(euler_characteristic(m), t.euler);
    EXPECT_EQ(boundary_component_count(m), 1);
    ASSERT_TRUE(m.genus.has_value());
    EXPECT_EQ(*m.genus, (2 - t.euler - 1) / 2);
    EXPECT_EQ(*m.genus, 1);

    SimplicialMesh off = import_mesh(write_file("torus.off", to_off(src)), MeshFormat::off);
    EXPECT_EQ(off.ambient_dim, 3);
    EXPECT_EQ(off.genus, 1);
}

TEST(MeshIo, GenusMetadataWins)
{
    SimplicialMesh disk = unit_disk_mesh(1);
    nlohmann::json doc = mesh_to_json(disk);
    doc["genus"] = 3;
    EXPECT_EQ(mesh_from_json(doc).genus, 3);
}

TEST(MeshIo, InvertedTriangleIsAnOrientationError)
{
    std::string text = R"({"dim": 2, "vertices": [[0,0],[1,0],[1,1],[0,1]], "cells": [[0,1,2],[0,3,2]]})";
    EXPECT_EQ(import_code(write_file("inverted.json", text), MeshFormat::json), ErrorCode::orientation);
}

TEST(MeshIo, DistinctErrorCodes)
{
    EXPECT_EQ(import_code(write_file("garbage.json", "{not json"), MeshFormat::json), ErrorCode::parse_error);
    EXPECT_EQ(import_code(write_file("missing.json", R"({"dim": 2, "vertices": [[0,0]]})"), MeshFormat::json),
              ErrorCode::parse_error);
    EXPECT_EQ(import_code(write_file("quad.off", "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"), MeshFormat::off),
              ErrorCode::parse_error);
    EXPECT_EQ(import_code(write_file("short.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n"), MeshFormat::off),
              ErrorCode::parse_error);
    std::string nm = R"({"dim": 2, "vertices": [[0,0],[1,0],[0.5,1],[0.5,-1],[0.5,2]],
                         "cells": [[0,1,2],[1,0,3],[0,1,4]]})";
    EXPECT_EQ(import_code(write_file("nonmanifold.json", nm), MeshFormat::json), ErrorCode::non_manifold);
    EXPECT_EQ(import_code(temp_path("does_not_exist.off"), MeshFormat::off), ErrorCode::io_error);
}

TEST(MeshIo, JsonRoundTripIsBitExact)
{
    for (const SimplicialMesh& m : {unit_disk_mesh(3), flat_cylinder_mesh({2.0 * std::numbers::pi, 2.0, 2}),
                                   unit_ball_mesh(2), star_shaped_mesh({{1.0, 1.1, 0.9, 1.05, 0.95}, 3})}) {
        std::string path = temp_path("roundtrip.json");
        export_json(m, path);
        SimplicialMesh back = import_mesh(path, MeshFormat::json);
        ASSERT_EQ(back.vertices.size(), m.vertices.size());
        for (std::size_t i = 0; i < m.vertices.size(); ++i)
            for (int d = 0; d < 3; ++d)
                EXPECT_EQ(std::bit_cast<std::uint64_t>(back.vertices[i][d]), std::bit_cast<std::uint64_t>(m.vertices[i][d]));
        EXPECT_EQ(back.cells, m.cells);
        EXPECT_EQ(back.periodic_pairs, m.periodic_pairs);
        EXPECT_EQ(back.boundary_facets, m.boundary_facets);
        EXPECT_EQ(back.boundary_vertices, m.boundary_vertices);
        EXPECT_EQ(back.genus, m.genus);
        EXPECT_EQ(mesh_to_json(back).dump(), mesh_to_json(m).dump());
    }
}
