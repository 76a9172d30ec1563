#pragma once

#include "lgs/core.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace lgs {

// Triangle mesh. Vertices in meters; `normals` and `colors` are optional
// per-vertex attributes (colors in [0,1]).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> normals;  // empty or one per vertex
    std::vector<Vec3> colors;   // empty or one per vertex

    bool has_normals() const { return !normals.empty(); }
    bool has_colors() const { return !colors.empty(); }

    // Unique undirected edges, sorted (i < j within a pair, pairs ascending).
    std::vector<std::array<int, 2>> edges() const {
        std::set<std::array<int, 2>> unique;
        for (const auto& f : faces) {
            for (int k = 0; k < 3; ++k) {
                int a = f[size_t(k)], b = f[size_t((k + 1) % 3)];
                if (a > b) std::swap(a, b);
                unique.insert({a, b});
            }
        }
        return {unique.begin(), unique.end()};
    }

    void validate() const {
        const int n = int(vertices.size());
        for (const auto& f : faces)
            for (int idx : f)
                if (idx < 0 || idx >= n) throw InvalidMesh("face index out of range");
        if (has_normals() && normals.size() != vertices.size())
            throw InvalidMesh("normal count does not match vertex count");
        if (has_colors() && colors.size() != vertices.size())
            throw InvalidMesh("color count does not match vertex count");
    }
};

// OBJ subset: v (optionally with rgb extension), vn, f with triangles only.
// Face elements may be `v`, `v/vt`, `v//vn` or `v/vt/vn`; vt is ignored.
inline TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OBJ file: " + path);
    TriMesh mesh;
    std::vector<Vec3> file_normals;
    std::vector<int> vertex_normal_index;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw IoError(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tok;
        if (!(ss >> tok) || tok.empty() || tok[0] == '#') continue;
        if (tok == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) fail("malformed vertex");
            mesh.vertices.emplace_back(x, y, z);
            double r, g, b;
            if (ss >> r >> g >> b) mesh.colors.emplace_back(r, g, b);
            vertex_normal_index.push_back(-1);
        } else if (tok == "vn") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) fail("malformed normal");
            file_normals.emplace_back(x, y, z);
        } else if (tok == "f") {
            std::array<int, 3> face{};
            int count = 0;
            std::string elem;
            while (ss >> elem) {
                if (count >= 3) fail("only triangle faces are supported");
                int vi = 0, ni = -1;
                const size_t s1 = elem.find('/');
                vi = std::stoi(elem.substr(0, s1));
                if (s1 != std::string::npos) {
                    const size_t s2 = elem.find('/', s1 + 1);
                    if (s2 != std::string::npos && s2 + 1 < elem.size())
                        ni = std::stoi(elem.substr(s2 + 1));
                }
                if (vi < 0) vi = int(mesh.vertices.size()) + 1 + vi;
                if (vi < 1 || vi > int(mesh.vertices.size())) fail("vertex index out of range");
                if (ni > 0) {
                    if (ni > int(file_normals.size())) fail("normal index out of range");
                    vertex_normal_index[size_t(vi - 1)] = ni - 1;
                }
                face[size_t(count++)] = vi - 1;
            }
            if (count != 3) fail("only triangle faces are supported");
            mesh.faces.push_back(face);
        }
    }
    if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size())
        throw IoError(path + ": vertex colors present on some vertices only");
    if (!file_normals.empty()) {
        mesh.normals.assign(mesh.vertices.size(), Vec3::Zero());
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            const int ni = vertex_normal_index[i];
            if (ni >= 0) mesh.normals[i] = file_normals[size_t(ni)];
        }
    }
    return mesh;
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write OBJ file: " + path);
    char buf[256];
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        if (mesh.has_colors()) {
            const Vec3& c = mesh.colors[i];
            std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g %.17g %.17g %.17g\n", v.x(),
                          v.y(), v.z(), c.x(), c.y(), c.z());
        } else {
            std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        }
        out << buf;
    }
    for (const Vec3& n : mesh.normals) {
        std::snprintf(buf, sizeof(buf), "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        if (mesh.has_normals())
            std::snprintf(buf, sizeof(buf), "f %d//%d %d//%d %d//%d\n", f[0] + 1, f[0] + 1,
                          f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1);
        else
            std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out << buf;
    }
    if (!out) throw IoError("failed writing OBJ file: " + path);
}

}  // namespace lgs
