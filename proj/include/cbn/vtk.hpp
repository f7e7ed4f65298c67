#pragma once

#include "cbn/core.hpp"
#include "cbn/mesh.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace cbn {

/// Legacy-VTK structured-points writer: point-data displacement vectors plus
/// named cell-data scalar fields. ASCII with %.17g values, so identical
/// inputs produce identical bytes.
inline void write_vtk(const std::string& path, const MeshHierarchy& mh, const Vec& displacement,
                      const std::map<std::string, Vec>& cell_scalars, const std::string& title) {
    const auto& g = mh.global_fine;
    const int dim = mh.dim;
    if (displacement.size() != mh.global_dofs())
        throw ConfigError("write_vtk: field length does not match the grid");
    for (const auto& [name, v] : cell_scalars)
        if (v.size() != g.cell_count())
            throw ConfigError("write_vtk: cell field '" + name + "' length mismatch");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("write_vtk: cannot open " + path);
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.nodes_along(0) << " " << g.nodes_along(1) << " "
        << g.nodes_along(2) << "\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << format_double(mh.fine_h[0]) << " " << format_double(mh.fine_h[1]) << " "
        << format_double(dim == 3 ? mh.fine_h[2] : 1.0) << "\n";
    out << "POINT_DATA " << g.node_count() << "\n";
    out << "VECTORS displacement double\n";
    for (long n = 0; n < g.node_count(); ++n) {
        out << format_double(displacement[dim * n]) << " " << format_double(displacement[dim * n + 1])
            << " " << format_double(dim == 3 ? displacement[dim * n + 2] : 0.0) << "\n";
    }
    if (!cell_scalars.empty()) {
        out << "CELL_DATA " << g.cell_count() << "\n";
        for (const auto& [name, v] : cell_scalars) {
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (long c = 0; c < g.cell_count(); ++c) out << format_double(v[c]) << "\n";
        }
    }
}

/// Minimal reader for the files this writer produces (round-trip checks).
struct VtkData {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{0, 0, 0};
    Mat vectors;  // points x 3
    std::map<std::string, Vec> cell_scalars;
};

inline VtkData read_vtk(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_vtk: cannot open " + path);
    VtkData d;
    std::string line;
    long npoints = 0, ncells = 0;
    while (std::getline(in, line)) {
        std::istringstream is(line);
        std::string key;
        is >> key;
        if (key == "DIMENSIONS") {
            is >> d.dims[0] >> d.dims[1] >> d.dims[2];
        } else if (key == "SPACING") {
            is >> d.spacing[0] >> d.spacing[1] >> d.spacing[2];
        } else if (key == "POINT_DATA") {
            is >> npoints;
        } else if (key == "CELL_DATA") {
            is >> ncells;
        } else if (key == "VECTORS") {
            d.vectors.resize(npoints, 3);
            for (long n = 0; n < npoints; ++n) {
                in >> d.vectors(n, 0) >> d.vectors(n, 1) >> d.vectors(n, 2);
            }
        } else if (key == "SCALARS") {
            std::string name;
            is >> name;
            std::getline(in, line);  // LOOKUP_TABLE
            Vec v(ncells);
            for (long c = 0; c < ncells; ++c) in >> v[c];
            d.cell_scalars[name] = std::move(v);
        }
    }
    return d;
}

}  // namespace cbn
