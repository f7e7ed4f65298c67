#pragma once

#include "cbn/fem.hpp"

namespace cbn {

// Side ids: 0 xmin, 1 xmax, 2 ymin, 3 ymax, 4 zmin, 5 zmax.
inline int side_axis(int side) { return side / 2; }
inline bool side_high(int side) { return side % 2 == 1; }

struct DirichletRegion {
    enum class Where { Side, Point };
    Where where = Where::Side;
    int side = 0;
    Vec3 at = Vec3::Zero();
    int comp = -1;  // -1 fixes all components
    double value = 0.0;
};

struct LoadSpec {
    enum class Kind { PointForce, SideTraction, SideParabolic, FaceTwist };
    Kind kind = Kind::PointForce;
    int side = 0;
    Vec3 at = Vec3::Zero();
    Vec3 vector = Vec3::Zero();   // force (point) or traction (side)
    double center = 0.0;          // parabolic: tangent coordinate of the peak
    double magnitude = 0.0;       // parabolic peak, twist scale
};

struct ProblemBcs {
    std::vector<DirichletRegion> dirichlet;
    std::vector<LoadSpec> loads;
};

namespace detail {

inline double grid_span(const StructuredGrid& g, const std::array<double, 3>& h, int axis) {
    return g.cells_along(axis) * h[axis];
}

inline bool node_on_side(const StructuredGrid& g, long node, int side) {
    const auto c = g.node_coords(node);
    const int a = side_axis(side);
    return c[a] == (side_high(side) ? g.cells_along(a) : 0);
}

inline long find_node_at(const StructuredGrid& g, const std::array<double, 3>& h, int dim,
                         const Vec3& at) {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
        const double r = at[a] / h[a];
        idx[a] = int(std::lround(r));
        if (idx[a] < 0 || idx[a] > g.cells_along(a) || std::abs(r - idx[a]) > 1e-8)
            throw ConfigError("bcs: point (" + format_double(at[0]) + ", " + format_double(at[1]) +
                              (dim == 3 ? ", " + format_double(at[2]) : "") +
                              ") is not a grid node");
    }
    return g.node_id(idx[0], idx[1], idx[2]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Realization on a structured grid (the global fine mesh, or the coarse mesh
// treated as a one-level grid for the homogenization baseline).

inline std::vector<DirichletDof> grid_dirichlet(const StructuredGrid& g,
                                                const std::array<double, 3>& h, int dim,
                                                const std::vector<DirichletRegion>& regions) {
    std::vector<DirichletDof> out;
    for (const auto& rg : regions) {
        const auto fix = [&](long node) {
            if (rg.comp >= 0) {
                out.push_back({dim * node + rg.comp, rg.value});
            } else {
                for (int a = 0; a < dim; ++a) out.push_back({dim * node + a, rg.value});
            }
        };
        if (rg.where == DirichletRegion::Where::Point) {
            fix(detail::find_node_at(g, h, dim, rg.at));
        } else {
            for (long n = 0; n < g.node_count(); ++n)
                if (detail::node_on_side(g, n, rg.side)) fix(n);
        }
    }
    return out;
}

inline Vec grid_loads(const StructuredGrid& g, const std::array<double, 3>& h, int dim,
                      const std::vector<LoadSpec>& loads) {
    Vec f = Vec::Zero(dim * g.node_count());
    const double gp = 1.0 / std::sqrt(3.0);

    for (const auto& ld : loads) {
        switch (ld.kind) {
            case LoadSpec::Kind::PointForce: {
                const long n = detail::find_node_at(g, h, dim, ld.at);
                for (int a = 0; a < dim; ++a) f[dim * n + a] += ld.vector[a];
                break;
            }
            case LoadSpec::Kind::SideTraction:
            case LoadSpec::Kind::SideParabolic: {
                const int axis = side_axis(ld.side);
                if (dim == 2) {
                    const int t = 1 - axis;  // tangent axis
                    const int fixed = side_high(ld.side) ? g.cells_along(axis) : 0;
                    const double len = h[t];
                    for (int e = 0; e < g.cells_along(t); ++e) {
                        long n0, n1;
                        if (axis == 0) {
                            n0 = g.node_id(fixed, e);
                            n1 = g.node_id(fixed, e + 1);
                        } else {
                            n0 = g.node_id(e, fixed);
                            n1 = g.node_id(e + 1, fixed);
                        }
                        for (const double xi : {-gp, gp}) {
                            const double N0 = 0.5 * (1 - xi), N1 = 0.5 * (1 + xi);
                            const double s = (e + 0.5 * (1 + xi)) * h[t];
                            Vec3 traction = ld.vector;
                            if (ld.kind == LoadSpec::Kind::SideParabolic) {
                                const double d = s - ld.center;
                                traction *= ld.magnitude * std::max(0.0, 1.0 - d * d);
                            }
                            for (int a = 0; a < dim; ++a) {
                                f[dim * n0 + a] += 0.5 * len * N0 * traction[a];
                                f[dim * n1 + a] += 0.5 * len * N1 * traction[a];
                            }
                        }
                    }
                } else {
                    if (ld.kind == LoadSpec::Kind::SideParabolic)
                        throw ConfigError("bcs: parabolic traction is 2D only");
                    const int u = axis == 0 ? 1 : 0;
                    const int v = axis == 2 ? 1 : 2;
                    const int fixed = side_high(ld.side) ? g.cells_along(axis) : 0;
                    const double area = h[u] * h[v];
                    for (int ev = 0; ev < g.cells_along(v); ++ev) {
                        for (int eu = 0; eu < g.cells_along(u); ++eu) {
                            long nodes[4];
                            for (int j = 0; j <= 1; ++j)
                                for (int i = 0; i <= 1; ++i) {
                                    std::array<int, 3> c{};
                                    c[axis] = fixed;
                                    c[u] = eu + i;
                                    c[v] = ev + j;
                                    nodes[j * 2 + i] = g.node_id(c[0], c[1], c[2]);
                                }
                            // constant traction: each corner carries area/4
                            for (int k = 0; k < 4; ++k)
                                for (int a = 0; a < dim; ++a)
                                    f[dim * nodes[k] + a] += 0.25 * area * ld.vector[a];
                        }
                    }
                }
                break;
            }
            case LoadSpec::Kind::FaceTwist: {
                if (dim != 3) throw ConfigError("bcs: face_twist is 3D only");
                const int axis = side_axis(ld.side);
                for (long n = 0; n < g.node_count(); ++n) {
                    if (!detail::node_on_side(g, n, ld.side)) continue;
                    const auto c = g.node_coords(n);
                    const Vec3 x(c[0] * h[0], c[1] * h[1], c[2] * h[2]);
                    Vec3 rel = x - ld.at;
                    rel[axis] = 0.0;
                    Vec3 tangent = Vec3::Zero();
                    const int u = axis == 0 ? 1 : 0;
                    const int v = axis == 2 ? 1 : 2;
                    tangent[u] = -rel[v];
                    tangent[v] = rel[u];
                    for (int a = 0; a < dim; ++a) f[dim * n + a] += ld.magnitude * tangent[a];
                }
                break;
            }
        }
    }
    return f;
}

inline std::vector<DirichletDof> fine_dirichlet(const MeshHierarchy& mh, const ProblemBcs& bcs) {
    return grid_dirichlet(mh.global_fine, mh.fine_h, mh.dim, bcs.dirichlet);
}

inline Vec fine_loads(const MeshHierarchy& mh, const ProblemBcs& bcs) {
    return grid_loads(mh.global_fine, mh.fine_h, mh.dim, bcs.loads);
}

}  // namespace cbn
