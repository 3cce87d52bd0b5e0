#pragma once

#include "steklov/error.hpp"
#include "steklov/mesh.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <sstream>
#include <string>

namespace steklov {

enum class MeshFormat { off, json };

/// JSON mesh document: {"dim", "vertices", "cells", "periodic_pairs"?, "genus"?}.
/// `dim` is the cell dimension; the coordinate length is taken from the vertices.
inline nlohmann::json mesh_to_json(const SimplicialMesh& mesh)
{
    nlohmann::json doc;
    doc["dim"] = mesh.dim;
    auto& verts = doc["vertices"] = nlohmann::json::array();
    for (const Point& p : mesh.vertices) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < mesh.ambient_dim; ++i)
            row.push_back(p[i]);
        verts.push_back(std::move(row));
    }
    auto& cells = doc["cells"] = nlohmann::json::array();
    for (const Cell& c : mesh.cells) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < mesh.cell_size(); ++i)
            row.push_back(c[i]);
        cells.push_back(std::move(row));
    }
    if (!mesh.periodic_pairs.empty()) {
        auto& pairs = doc["periodic_pairs"] = nlohmann::json::array();
        for (auto [a, b] : mesh.periodic_pairs)
            pairs.push_back({a, b});
    }
    if (mesh.genus)
        doc["genus"] = *mesh.genus;
    return doc;
}

inline SimplicialMesh mesh_from_json(const nlohmann::json& doc)
{
    SimplicialMesh mesh;
    try {
        mesh.dim = doc.at("dim").get<int>();
        if (mesh.dim < 1 || mesh.dim > 3)
            throw Error(ErrorCode::parse_error, "dim must be 1, 2 or 3");
        const auto& verts = doc.at("vertices");
        if (!verts.is_array() || verts.empty())
            throw Error(ErrorCode::parse_error, "vertices must be a non-empty array");
        mesh.ambient_dim = static_cast<int>(verts.front().size());
        if (mesh.ambient_dim < mesh.dim || mesh.ambient_dim > 3)
            throw Error(ErrorCode::parse_error, "vertex coordinates must have between dim and 3 entries");
        for (const auto& row : verts) {
            if (!row.is_array() || static_cast<int>(row.size()) != mesh.ambient_dim)
                throw Error(ErrorCode::parse_error, "inconsistent vertex coordinate length");
            Point p{0.0, 0.0, 0.0};
            for (int i = 0; i < mesh.ambient_dim; ++i)
                p[i] = row[i].get<double>();
            mesh.vertices.push_back(p);
        }
        for (const auto& row : doc.at("cells")) {
            if (!row.is_array() || static_cast<int>(row.size()) != mesh.dim + 1)
                throw Error(ErrorCode::parse_error, "cells must have dim + 1 vertex indices");
            Cell c{-1, -1, -1, -1};
            for (int i = 0; i <= mesh.dim; ++i)
                c[i] = row[i].get<Index>();
            mesh.cells.push_back(c);
        }
        if (doc.contains("periodic_pairs"))
            for (const auto& pair : doc["periodic_pairs"]) {
                if (!pair.is_array() || pair.size() != 2)
                    throw Error(ErrorCode::parse_error, "periodic pairs must have two entries");
                mesh.periodic_pairs.emplace_back(pair[0].get<Index>(), pair[1].get<Index>());
            }
        if (doc.contains("genus"))
            mesh.genus = doc["genus"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
    finalize(mesh);
    return mesh;
}

/// OFF triangle meshes. Planar inputs (all z = 0) become 2D domains.
inline SimplicialMesh parse_off(std::istream& in)
{
    std::string line;
    auto next_line = [&]() -> std::string {
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                return line;
        }
        throw Error(ErrorCode::parse_error, "unexpected end of OFF file");
    };

    std::string header = next_line();
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    if (magic != "OFF")
        throw Error(ErrorCode::parse_error, "missing OFF header");
    long nv = -1, nf = -1, ne = 0;
    if (!(hs >> nv)) {
        std::istringstream cs(next_line());
        cs >> nv >> nf >> ne;
    } else {
        hs >> nf >> ne;
    }
    if (nv <= 0 || nf <= 0)
        throw Error(ErrorCode::parse_error, "OFF counts must be positive");

    SimplicialMesh mesh;
    mesh.dim = 2;
    bool planar = true;
    for (long i = 0; i < nv; ++i) {
        std::istringstream vs(next_line());
        Point p{};
        if (!(vs >> p[0] >> p[1] >> p[2]))
            throw Error(ErrorCode::parse_error, "bad vertex line " + std::to_string(i));
        planar = planar && p[2] == 0.0;
        mesh.vertices.push_back(p);
    }
    for (long i = 0; i < nf; ++i) {
        std::istringstream fs(next_line());
        int count = 0;
        Cell c{-1, -1, -1, -1};
        if (!(fs >> count) || count != 3)
            throw Error(ErrorCode::parse_error, "only triangular faces are supported");
        if (!(fs >> c[0] >> c[1] >> c[2]))
            throw Error(ErrorCode::parse_error, "bad face line " + std::to_string(i));
        mesh.cells.push_back(c);
    }
    mesh.ambient_dim = planar ? 2 : 3;
    finalize(mesh);
    return mesh;
}

inline SimplicialMesh import_mesh(const std::string& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot open " + path);
    if (format == MeshFormat::off)
        return parse_off(in);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
    return mesh_from_json(doc);
}

inline void export_json(const SimplicialMesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path);
    out << mesh_to_json(mesh).dump() << '\n';
}

} // namespace steklov
