#pragma once

#include "cbn/mesh.hpp"

namespace cbn {

/// Cubic Bernstein basis at t: C(3,i) t^i (1-t)^(3-i). Partition of unity by
/// construction.
inline std::array<double, 4> bernstein_cubic(double t) {
    const double s = 1.0 - t;
    return {s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t};
}

/// Piecewise-linear hat weights over the station grid {0, 1/3, 2/3, 1};
/// the "Our-L" baseline uses these in place of the Bernstein basis.
inline std::array<double, 4> linear_station_weights(double t) {
    std::array<double, 4> w{0, 0, 0, 0};
    const double s = 3.0 * t;
    const int j = std::min(int(s), 2);
    w[j] = (j + 1) - s;
    w[j + 1] = s - j;
    return w;
}

// Bezier: cubic Bernstein weights on the four stations (Our-CBN).
// EndpointLinear: straight interpolation between the two bridge nodes of a
//   segment; the interior stations keep their DOFs (same analysis DOF count)
//   but carry no interpolation weight (Our-L).
// StationLinear: piecewise-linear hats through all four stations; a stronger
//   linear variant kept for comparison.
enum class BoundaryInterp { Bezier, EndpointLinear, StationLinear };

/// Map from CBN displacement DOFs to the boundary-node displacements of one
/// coarse element. Rows follow the NodeSets boundary order (d rows per node),
/// columns the element-local CBN order (d per CBN). Every row is supported on
/// a single bridge segment (2D) or face patch (3D) and sums to 1 per
/// component; rows of bridge-node DOFs are exact unit selectors.
struct BezierMap {
    SpMat psi;  // (d*b) x (d*local_cbn_count)
    BoundaryInterp kind = BoundaryInterp::Bezier;
};

inline BezierMap build_psi(const MeshHierarchy& mh, const NodeSets& ns, const CbnLayout& layout,
                           BoundaryInterp kind = BoundaryInterp::Bezier) {
    const int dim = mh.dim;
    BezierMap map;
    map.kind = kind;
    std::vector<Trip> trips;
    const auto weights1d = [&](double t) -> std::array<double, 4> {
        switch (kind) {
            case BoundaryInterp::Bezier: return bernstein_cubic(t);
            case BoundaryInterp::StationLinear: return linear_station_weights(t);
            case BoundaryInterp::EndpointLinear: return {1.0 - t, 0.0, 0.0, t};
        }
        return bernstein_cubic(t);
    };

    if (dim == 2) {
        if (layout.segments.empty()) throw NumericalError("bezier: layout has no segments");
        trips.reserve(std::size_t(ns.b()) * 8);
        for (int row = 0; row < ns.b(); ++row) {
            const int s = layout.node_segment[row];
            const auto& seg = layout.segments[s];
            const double t = double(layout.node_seg_index[row]) / seg.intervals;
            const auto w = weights1d(t);
            for (int m = 0; m < 4; ++m) {
                if (w[m] == 0.0) continue;
                for (int a = 0; a < 2; ++a)
                    trips.emplace_back(2 * row + a, 2 * seg.cbn[m] + a, w[m]);
            }
        }
    } else {
        if (layout.faces.empty()) throw NumericalError("bezier: layout has no faces");
        trips.reserve(std::size_t(ns.b()) * 48);
        for (int row = 0; row < ns.b(); ++row) {
            const auto& face = layout.faces[layout.node_face[row]];
            const auto [pu, pv] = layout.node_patch[row];
            const auto& patch = face.patches[pv * face.patches_u + pu];
            const double tu = double(layout.node_pq[row][0]) / face.intervals_u;
            const double tv = double(layout.node_pq[row][1]) / face.intervals_v;
            const auto wu = weights1d(tu);
            const auto wv = weights1d(tv);
            for (int j = 0; j < 4; ++j) {
                for (int i = 0; i < 4; ++i) {
                    const double w = wu[i] * wv[j];
                    if (w == 0.0) continue;
                    for (int a = 0; a < 3; ++a)
                        trips.emplace_back(3 * row + a, 3 * patch.cbn[j * 4 + i] + a, w);
                }
            }
        }
    }

    map.psi = SpMat(long(dim) * ns.b(), layout.local_dofs());
    map.psi.setFromTriplets(trips.begin(), trips.end());
    return map;
}

}  // namespace cbn
