#pragma once

#include "cbn/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace cbn {

// ---------------------------------------------------------------------------
// Structured grids. Node and cell ids are lexicographic with x fastest,
// i.e. id = (k*ny_nodes + j)*nx_nodes + i, which matches VTK point order.

struct StructuredGrid {
    int dim = 2;
    std::array<int, 3> cells{1, 1, 1};

    int cells_along(int axis) const { return axis < dim ? cells[axis] : 1; }
    int nodes_along(int axis) const { return axis < dim ? cells[axis] + 1 : 1; }

    long node_count() const {
        return long(nodes_along(0)) * nodes_along(1) * nodes_along(2);
    }
    long cell_count() const {
        return long(cells_along(0)) * cells_along(1) * cells_along(2);
    }

    long node_id(int i, int j, int k = 0) const {
        return (long(k) * nodes_along(1) + j) * nodes_along(0) + i;
    }
    std::array<int, 3> node_coords(long id) const {
        const int nx = nodes_along(0), ny = nodes_along(1);
        return {int(id % nx), int((id / nx) % ny), int(id / (long(nx) * ny))};
    }

    long cell_id(int i, int j, int k = 0) const {
        return (long(k) * cells_along(1) + j) * cells_along(0) + i;
    }
    std::array<int, 3> cell_coords(long id) const {
        const int cx = cells_along(0), cy = cells_along(1);
        return {int(id % cx), int((id / cx) % cy), int(id / (long(cx) * cy))};
    }

    /// Corner nodes of a cell, lexicographic local order (x fastest).
    void cell_nodes(long cell, long out[8]) const {
        const auto c = cell_coords(cell);
        int n = 0;
        const int kmax = dim == 3 ? 1 : 0;
        for (int k = 0; k <= kmax; ++k)
            for (int j = 0; j <= 1; ++j)
                for (int i = 0; i <= 1; ++i)
                    out[n++] = node_id(c[0] + i, c[1] + j, c[2] + k);
    }

    int nodes_per_cell() const { return dim == 3 ? 8 : 4; }
};

// ---------------------------------------------------------------------------
// Two-level hierarchy: a coarse grid of identical axis-aligned cells, each
// carrying the same local fine grid. Adjacent coarse elements share the fine
// nodes on their common interface exactly.

struct MeshHierarchy {
    int dim = 2;
    StructuredGrid coarse;       // coarse elements
    StructuredGrid local;        // fine cells inside one coarse element
    StructuredGrid global_fine;  // fine cells of the whole domain
    std::array<double, 3> cell_size{1, 1, 1};  // physical size of a coarse element
    std::array<double, 3> fine_h{1, 1, 1};     // physical size of a fine element

    long coarse_elements() const { return coarse.cell_count(); }
    long local_nodes() const { return local.node_count(); }
    long fine_cells_per_coarse() const { return local.cell_count(); }
    long global_fine_nodes() const { return global_fine.node_count(); }
    long global_fine_cells() const { return global_fine.cell_count(); }
    long global_dofs() const { return dim * global_fine_nodes(); }
    long local_dofs() const { return dim * local_nodes(); }

    std::array<int, 3> element_fine_origin(long e) const {
        const auto c = coarse.cell_coords(e);
        return {c[0] * local.cells_along(0), c[1] * local.cells_along(1),
                c[2] * local.cells_along(2)};
    }

    Vec3 element_origin(long e) const {
        const auto c = coarse.cell_coords(e);
        return Vec3(c[0] * cell_size[0], c[1] * cell_size[1],
                    dim == 3 ? c[2] * cell_size[2] : 0.0);
    }

    /// Position of a local fine node within its element (element frame).
    Vec3 local_node_pos(long local_node) const {
        const auto c = local.node_coords(local_node);
        return Vec3(c[0] * fine_h[0], c[1] * fine_h[1], dim == 3 ? c[2] * fine_h[2] : 0.0);
    }

    Vec3 global_node_pos(long gnode) const {
        const auto c = global_fine.node_coords(gnode);
        return Vec3(c[0] * fine_h[0], c[1] * fine_h[1], dim == 3 ? c[2] * fine_h[2] : 0.0);
    }

    long global_node_of(long e, long local_node) const {
        const auto o = element_fine_origin(e);
        const auto c = local.node_coords(local_node);
        return global_fine.node_id(o[0] + c[0], o[1] + c[1], o[2] + c[2]);
    }

    long global_cell_of(long e, long local_cell) const {
        const auto o = element_fine_origin(e);
        const auto c = local.cell_coords(local_cell);
        return global_fine.cell_id(o[0] + c[0], o[1] + c[1], o[2] + c[2]);
    }

    Vec3 domain_size() const {
        return Vec3(coarse.cells_along(0) * cell_size[0], coarse.cells_along(1) * cell_size[1],
                    dim == 3 ? coarse.cells_along(2) * cell_size[2] : 0.0);
    }
};

inline MeshHierarchy build_hierarchy(int dim, std::array<int, 3> coarse_counts,
                                     std::array<int, 3> fine_counts,
                                     std::array<double, 3> sizes) {
    if (dim != 2 && dim != 3) throw ConfigError("mesh.dim must be 2 or 3");
    for (int a = 0; a < dim; ++a) {
        if (coarse_counts[a] < 1)
            throw ConfigError("mesh.coarse: counts must be >= 1");
        if (fine_counts[a] < 1)
            throw ConfigError("mesh.fine: counts must be >= 1");
        if (!(sizes[a] > 0.0))
            throw ConfigError("mesh.size: element sizes must be > 0");
    }
    MeshHierarchy mh;
    mh.dim = dim;
    mh.coarse = {dim, coarse_counts};
    mh.local = {dim, fine_counts};
    std::array<int, 3> gf{1, 1, 1};
    for (int a = 0; a < dim; ++a) gf[a] = coarse_counts[a] * fine_counts[a];
    mh.global_fine = {dim, gf};
    mh.cell_size = sizes;
    for (int a = 0; a < dim; ++a) mh.fine_h[a] = sizes[a] / fine_counts[a];
    return mh;
}

// ---------------------------------------------------------------------------
// Node classification of the (shared) local fine mesh.

struct NodeSets {
    std::vector<int> corner;    // X_c
    std::vector<int> boundary;  // X_b, ascending local node id, includes corners
    std::vector<int> interior;  // X_i
    std::vector<int> boundary_row;  // local node id -> index in `boundary`, or -1

    int b() const { return int(boundary.size()); }
    int i() const { return int(interior.size()); }
};

inline NodeSets classify_nodes(const MeshHierarchy& mh) {
    NodeSets ns;
    const auto& g = mh.local;
    ns.boundary_row.assign(g.node_count(), -1);
    for (long id = 0; id < g.node_count(); ++id) {
        const auto c = g.node_coords(id);
        bool on_boundary = false, is_corner = true;
        for (int a = 0; a < mh.dim; ++a) {
            const bool lo = c[a] == 0, hi = c[a] == g.cells_along(a);
            on_boundary = on_boundary || lo || hi;
            is_corner = is_corner && (lo || hi);
        }
        if (on_boundary) {
            ns.boundary_row[id] = int(ns.boundary.size());
            ns.boundary.push_back(int(id));
            if (is_corner) ns.corner.push_back(int(id));
        } else {
            ns.interior.push_back(int(id));
        }
    }
    return ns;
}

// ---------------------------------------------------------------------------
// Bridge node selection and CBN placement.
//
// CBN positions are tracked as integer coordinates in thirds of the fine
// grid spacing, which makes station deduplication within an element and
// across element interfaces exact.

enum class BridgePolicy { CornersOnly, PerSide, AllBoundary };

struct BridgeSpec {
    BridgePolicy policy = BridgePolicy::CornersOnly;
    int per_side = 2;  // bridge nodes per side (incl. both corners), PerSide only

    /// Bridge nodes along a side of `n` fine cells.
    int nodes_per_side(int n) const {
        switch (policy) {
            case BridgePolicy::CornersOnly: return 2;
            case BridgePolicy::AllBoundary: return n + 1;
            case BridgePolicy::PerSide: return per_side;
        }
        return 2;
    }
};

struct BridgeSegment {
    std::array<int, 4> cbn;  // local CBN index at t = 0, 1/3, 2/3, 1
    int side = 0;            // 0 bottom, 1 right, 2 top, 3 left
    int intervals = 0;       // fine cells spanned
    std::vector<int> nodes;  // local fine node ids along the segment (loop order)
};

struct FacePatch {
    std::array<int, 16> cbn;  // local CBN index, row-major over (i_u, j_v)
};

struct BridgeFace {
    int face = 0;  // 2*axis + (high ? 1 : 0)
    int patches_u = 1, patches_v = 1;
    int intervals_u = 0, intervals_v = 0;  // fine cells per patch axis
    std::vector<FacePatch> patches;        // row-major (pv*patches_u + pu)
};

struct CbnLayout {
    int dim = 2;
    BridgeSpec spec;

    // Local structure, identical for every coarse element.
    std::vector<BridgeSegment> segments;  // 2D
    std::vector<BridgeFace> faces;        // 3D
    int local_cbn_count = 0;
    std::vector<Vec3> local_cbn_pos;            // element frame
    std::vector<bool> local_cbn_is_bridge;      // segment/patch-corner station
    std::vector<int> local_cbn_fine_node;       // local fine node id, or -1

    // Boundary-node interpolation assignment, indexed by boundary row.
    std::vector<int> node_segment;              // 2D: owning segment
    std::vector<int> node_seg_index;            // 2D: integer index along it
    std::vector<int> node_face;                 // 3D: owning face
    std::vector<std::array<int, 2>> node_patch; // 3D: (pu, pv)
    std::vector<std::array<int, 2>> node_pq;    // 3D: integer offsets in patch

    // Global numbering, conforming across shared interfaces.
    long global_cbn_count = 0;
    std::vector<std::vector<long>> elem_to_global;  // [element][local cbn]
    std::vector<Vec3> global_cbn_pos;
    std::vector<bool> global_cbn_is_bridge;

    int local_dofs() const { return dim * local_cbn_count; }
    long dof_count() const { return long(dim) * global_cbn_count; }

    int min_segment_intervals() const {
        int m = std::numeric_limits<int>::max();
        for (const auto& s : segments) m = std::min(m, s.intervals);
        for (const auto& f : faces) m = std::min({m, f.intervals_u, f.intervals_v});
        return m == std::numeric_limits<int>::max() ? 0 : m;
    }

    std::uint64_t layout_hash(const MeshHierarchy& mh) const {
        std::uint64_t h = hash_u64(std::uint64_t(mh.dim));
        for (int a = 0; a < 3; ++a) {
            h = hash_u64(std::uint64_t(mh.local.cells[a]), h);
            h = hash_double(mh.cell_size[a], h);
        }
        h = hash_u64(std::uint64_t(spec.policy), h);
        h = hash_u64(std::uint64_t(spec.per_side), h);
        return h;
    }
};

namespace detail {

/// Key of a CBN station in thirds of the fine spacing.
struct ThirdsKey {
    long x = 0, y = 0, z = 0;
    bool operator<(const ThirdsKey& o) const {
        return std::tie(z, y, x) < std::tie(o.z, o.y, o.x);
    }
};

inline Vec3 thirds_to_pos(const ThirdsKey& k, const std::array<double, 3>& h, int dim) {
    return Vec3(k.x * h[0] / 3.0, k.y * h[1] / 3.0, dim == 3 ? k.z * h[2] / 3.0 : 0.0);
}

inline bool thirds_on_fine_node(const ThirdsKey& k) {
    return k.x % 3 == 0 && k.y % 3 == 0 && k.z % 3 == 0;
}

struct LocalCbnBuilder {
    std::map<ThirdsKey, int> index;
    std::vector<ThirdsKey> keys;

    int add(const ThirdsKey& k) {
        auto it = index.find(k);
        if (it != index.end()) return it->second;
        const int id = int(keys.size());
        index.emplace(k, id);
        keys.push_back(k);
        return id;
    }
};

/// Boundary loop of the 2D local grid, counterclockwise from (0,0).
inline std::vector<std::array<int, 2>> boundary_loop_2d(int nx, int ny) {
    std::vector<std::array<int, 2>> loop;
    loop.reserve(2 * (nx + ny));
    for (int i = 0; i < nx; ++i) loop.push_back({i, 0});
    for (int j = 0; j < ny; ++j) loop.push_back({nx, j});
    for (int i = nx; i > 0; --i) loop.push_back({i, ny});
    for (int j = ny; j > 0; --j) loop.push_back({0, j});
    return loop;
}

inline void place_cbns_2d(const MeshHierarchy& mh, const NodeSets& ns, const BridgeSpec& spec,
                          CbnLayout& out) {
    const int nx = mh.local.cells_along(0), ny = mh.local.cells_along(1);
    const auto loop = boundary_loop_2d(nx, ny);
    const int L = int(loop.size());

    // Bridge positions along the loop. Sides: 0 bottom, 1 right, 2 top, 3 left.
    const std::array<int, 4> side_cells{nx, ny, nx, ny};
    const std::array<int, 4> side_start{0, nx, nx + ny, 2 * nx + ny};
    std::vector<int> bridge_pos;
    for (int side = 0; side < 4; ++side) {
        const int n = side_cells[side];
        const int k = spec.nodes_per_side(n);
        if (k < 2) throw ConfigError("bridge.per_side must be >= 2");
        if (n % (k - 1) != 0)
            throw ConfigError("bridge.per_side: (fine cells per side) must be divisible by (per_side - 1)");
        const int step = n / (k - 1);
        for (int s = 0; s < n; s += step) bridge_pos.push_back(side_start[side] + s);
    }

    LocalCbnBuilder cbns;
    const int r = int(bridge_pos.size());
    out.segments.reserve(r);
    for (int s = 0; s < r; ++s) {
        const int p0 = bridge_pos[s];
        const int p1 = s + 1 < r ? bridge_pos[s + 1] : L;  // wraps to loop position 0
        BridgeSegment seg;
        seg.side = p0 < side_start[1] ? 0 : p0 < side_start[2] ? 1 : p0 < side_start[3] ? 2 : 3;
        seg.intervals = p1 - p0;
        for (int p = p0; p <= p1; ++p) {
            const auto& c = loop[p % L];
            seg.nodes.push_back(int(mh.local.node_id(c[0], c[1])));
        }
        // Stations at t = m/3 in thirds-of-fine-spacing units; exactly one
        // axis moves along a side, so the keys stay integral.
        const auto& a = loop[p0];
        const auto& b = loop[p1 % L];
        const long sx = long(b[0]) - a[0];
        const long sy = long(b[1]) - a[1];
        for (int m = 0; m < 4; ++m) {
            ThirdsKey key{3L * a[0] + m * sx, 3L * a[1] + m * sy, 0};
            seg.cbn[m] = cbns.add(key);
        }
        out.segments.push_back(std::move(seg));
    }

    // Boundary-node ownership: first (lowest id) segment containing the node.
    out.node_segment.assign(ns.b(), -1);
    out.node_seg_index.assign(ns.b(), -1);
    for (int s = 0; s < r; ++s) {
        const auto& seg = out.segments[s];
        for (int idx = 0; idx < int(seg.nodes.size()); ++idx) {
            const int row = ns.boundary_row[seg.nodes[idx]];
            if (row < 0) throw NumericalError("bridge segment node not on boundary");
            if (out.node_segment[row] < 0) {
                out.node_segment[row] = s;
                out.node_seg_index[row] = idx;
            }
        }
    }
    for (int row = 0; row < ns.b(); ++row)
        if (out.node_segment[row] < 0)
            throw NumericalError("boundary node not covered by any bridge segment");

    out.local_cbn_count = int(cbns.keys.size());
    out.local_cbn_pos.resize(out.local_cbn_count);
    out.local_cbn_is_bridge.resize(out.local_cbn_count);
    out.local_cbn_fine_node.assign(out.local_cbn_count, -1);
    std::vector<char> endpoint(out.local_cbn_count, 0);
    for (const auto& seg : out.segments) endpoint[seg.cbn[0]] = endpoint[seg.cbn[3]] = 1;
    for (int c = 0; c < out.local_cbn_count; ++c) {
        const auto& k = cbns.keys[c];
        out.local_cbn_pos[c] = thirds_to_pos(k, mh.fine_h, 2);
        out.local_cbn_is_bridge[c] = endpoint[c] != 0;
        if (endpoint[c])
            out.local_cbn_fine_node[c] = int(mh.local.node_id(int(k.x / 3), int(k.y / 3)));
    }

    // Global numbering via thirds keys in global fine-grid units.
    std::map<ThirdsKey, long> global_index;
    out.elem_to_global.assign(mh.coarse_elements(), {});
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        const auto o = mh.element_fine_origin(e);
        auto& map = out.elem_to_global[e];
        map.resize(out.local_cbn_count);
        for (int c = 0; c < out.local_cbn_count; ++c) {
            ThirdsKey gk{cbns.keys[c].x + 3L * o[0], cbns.keys[c].y + 3L * o[1], 0};
            auto it = global_index.find(gk);
            if (it == global_index.end()) {
                const long gid = long(out.global_cbn_pos.size());
                global_index.emplace(gk, gid);
                out.global_cbn_pos.push_back(thirds_to_pos(gk, mh.fine_h, 2));
                out.global_cbn_is_bridge.push_back(out.local_cbn_is_bridge[c]);
                map[c] = gid;
            } else {
                map[c] = it->second;
            }
        }
    }
    out.global_cbn_count = long(out.global_cbn_pos.size());
}

inline void place_cbns_3d(const MeshHierarchy& mh, const NodeSets& ns, const BridgeSpec& spec,
                          CbnLayout& out) {
    const std::array<int, 3> n{mh.local.cells_along(0), mh.local.cells_along(1),
                               mh.local.cells_along(2)};
    for (int a = 0; a < 3; ++a) {
        const int k = spec.nodes_per_side(n[a]);
        if (k < 2) throw ConfigError("bridge.per_side must be >= 2");
        if (n[a] % (k - 1) != 0)
            throw ConfigError("bridge.per_side: (fine cells per side) must be divisible by (per_side - 1)");
    }

    LocalCbnBuilder cbns;
    out.faces.reserve(6);
    for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const bool high = face % 2 == 1;
        const int bax = axis == 0 ? 1 : 0;  // first in-plane axis
        const int cax = axis == 2 ? 1 : 2;  // second in-plane axis
        BridgeFace bf;
        bf.face = face;
        bf.patches_u = spec.nodes_per_side(n[bax]) - 1;
        bf.patches_v = spec.nodes_per_side(n[cax]) - 1;
        bf.intervals_u = n[bax] / bf.patches_u;
        bf.intervals_v = n[cax] / bf.patches_v;
        const long fixed3 = high ? 3L * n[axis] : 0;
        for (int pv = 0; pv < bf.patches_v; ++pv) {
            for (int pu = 0; pu < bf.patches_u; ++pu) {
                FacePatch patch;
                for (int j = 0; j < 4; ++j) {
                    for (int i = 0; i < 4; ++i) {
                        long u3 = 3L * pu * bf.intervals_u + i * long(bf.intervals_u);
                        long v3 = 3L * pv * bf.intervals_v + j * long(bf.intervals_v);
                        ThirdsKey key;
                        long* coords[3] = {&key.x, &key.y, &key.z};
                        *coords[axis] = fixed3;
                        *coords[bax] = u3;
                        *coords[cax] = v3;
                        patch.cbn[j * 4 + i] = cbns.add(key);
                    }
                }
                bf.patches.push_back(patch);
            }
        }
        out.faces.push_back(std::move(bf));
    }

    // Owning face per boundary node: first face containing it.
    out.node_face.assign(ns.b(), -1);
    out.node_patch.assign(ns.b(), {0, 0});
    out.node_pq.assign(ns.b(), {0, 0});
    for (int row = 0; row < ns.b(); ++row) {
        const auto c = mh.local.node_coords(ns.boundary[row]);
        for (int face = 0; face < 6 && out.node_face[row] < 0; ++face) {
            const int axis = face / 2;
            const bool high = face % 2 == 1;
            if (c[axis] != (high ? n[axis] : 0)) continue;
            const int bax = axis == 0 ? 1 : 0;
            const int cax = axis == 2 ? 1 : 2;
            const auto& bf = out.faces[face];
            const int p = c[bax], q = c[cax];
            const int pu = std::min(p / bf.intervals_u, bf.patches_u - 1);
            const int pv = std::min(q / bf.intervals_v, bf.patches_v - 1);
            out.node_face[row] = face;
            out.node_patch[row] = {pu, pv};
            out.node_pq[row] = {p - pu * bf.intervals_u, q - pv * bf.intervals_v};
        }
        if (out.node_face[row] < 0)
            throw NumericalError("boundary node not covered by any bridge face");
    }

    out.local_cbn_count = int(cbns.keys.size());
    out.local_cbn_pos.resize(out.local_cbn_count);
    out.local_cbn_is_bridge.assign(out.local_cbn_count, false);
    out.local_cbn_fine_node.assign(out.local_cbn_count, -1);
    for (const auto& bf : out.faces) {
        for (const auto& patch : bf.patches) {
            for (int j = 0; j < 4; j += 3)
                for (int i = 0; i < 4; i += 3)
                    out.local_cbn_is_bridge[patch.cbn[j * 4 + i]] = true;
        }
    }
    for (int c = 0; c < out.local_cbn_count; ++c) {
        const auto& k = cbns.keys[c];
        out.local_cbn_pos[c] = thirds_to_pos(k, mh.fine_h, 3);
        if (out.local_cbn_is_bridge[c])
            out.local_cbn_fine_node[c] =
                int(mh.local.node_id(int(k.x / 3), int(k.y / 3), int(k.z / 3)));
    }

    std::map<ThirdsKey, long> global_index;
    out.elem_to_global.assign(mh.coarse_elements(), {});
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        const auto o = mh.element_fine_origin(e);
        auto& map = out.elem_to_global[e];
        map.resize(out.local_cbn_count);
        for (int c = 0; c < out.local_cbn_count; ++c) {
            ThirdsKey gk{cbns.keys[c].x + 3L * o[0], cbns.keys[c].y + 3L * o[1],
                         cbns.keys[c].z + 3L * o[2]};
            auto it = global_index.find(gk);
            if (it == global_index.end()) {
                const long gid = long(out.global_cbn_pos.size());
                global_index.emplace(gk, gid);
                out.global_cbn_pos.push_back(thirds_to_pos(gk, mh.fine_h, 3));
                out.global_cbn_is_bridge.push_back(out.local_cbn_is_bridge[c]);
                map[c] = gid;
            } else {
                map[c] = it->second;
            }
        }
    }
    out.global_cbn_count = long(out.global_cbn_pos.size());
}

}  // namespace detail

inline CbnLayout place_cbns(const MeshHierarchy& mh, const NodeSets& ns, const BridgeSpec& spec) {
    CbnLayout out;
    out.dim = mh.dim;
    out.spec = spec;
    if (mh.dim == 2)
        detail::place_cbns_2d(mh, ns, spec, out);
    else
        detail::place_cbns_3d(mh, ns, spec, out);
    return out;
}

/// Closed-form CBN DOF count for a 3D element with x bridge nodes per edge
/// on every face; cross-checked against the constructive count in tests.
inline long cbn_dof_formula_3d(int bridge_nodes_total) {
    const double x = 1.0 + std::sqrt(6.0 * bridge_nodes_total - 12.0) / 6.0;
    return long(3.0 * (54.0 * x * x - 108.0 * x + 56.0) + 0.5);
}

}  // namespace cbn
