#pragma once

#include "cbn/bezier.hpp"
#include "cbn/fem.hpp"

#include <filesystem>
#include <fstream>

namespace cbn {

// ---------------------------------------------------------------------------
// Boundary/interior partition of the unconstrained local fine stiffness.

struct PartitionedStiffness {
    SpMat k_b, k_i, k_ib, k_bi;
    std::vector<long> boundary_dofs;  // local dof ids, [boundary; interior] order
    std::vector<long> interior_dofs;
};

inline PartitionedStiffness partition(const SpMat& k_local, const NodeSets& ns, int dim) {
    const long n = k_local.rows();
    if (n != long(dim) * long(ns.boundary.size() + ns.interior.size()))
        throw NumericalError("partition: node sets do not match the stiffness dimension");

    PartitionedStiffness p;
    for (int node : ns.boundary)
        for (int a = 0; a < dim; ++a) p.boundary_dofs.push_back(long(dim) * node + a);
    for (int node : ns.interior)
        for (int a = 0; a < dim; ++a) p.interior_dofs.push_back(long(dim) * node + a);

    const long nb = long(p.boundary_dofs.size()), ni = long(p.interior_dofs.size());
    // local dof -> (block, position): block 0 boundary, 1 interior
    std::vector<long> pos(n);
    std::vector<char> blk(n);
    for (long r = 0; r < nb; ++r) { pos[p.boundary_dofs[r]] = r; blk[p.boundary_dofs[r]] = 0; }
    for (long r = 0; r < ni; ++r) { pos[p.interior_dofs[r]] = r; blk[p.interior_dofs[r]] = 1; }

    std::vector<Trip> tb, ti, tib, tbi;
    for (int k = 0; k < k_local.outerSize(); ++k) {
        for (SpMat::InnerIterator it(k_local, k); it; ++it) {
            const long r = it.row(), c = it.col();
            if (blk[r] == 0 && blk[c] == 0) tb.emplace_back(pos[r], pos[c], it.value());
            else if (blk[r] == 1 && blk[c] == 1) ti.emplace_back(pos[r], pos[c], it.value());
            else if (blk[r] == 1) tib.emplace_back(pos[r], pos[c], it.value());
            else tbi.emplace_back(pos[r], pos[c], it.value());
        }
    }
    p.k_b = SpMat(nb, nb); p.k_b.setFromTriplets(tb.begin(), tb.end());
    p.k_i = SpMat(ni, ni); p.k_i.setFromTriplets(ti.begin(), ti.end());
    p.k_ib = SpMat(ni, nb); p.k_ib.setFromTriplets(tib.begin(), tib.end());
    p.k_bi = SpMat(nb, ni); p.k_bi.setFromTriplets(tbi.begin(), tbi.end());
    return p;
}

// ---------------------------------------------------------------------------
// Condensed basis: Phi solves k_i Phi = -k_ib Psi with one factorization and
// one column per CBN DOF (6r in 2D, q in 3D), never one per boundary DOF.

struct CondensedBasis {
    SpMat psi;        // (d*b) x q
    Mat phi;          // (d*i) x q, dense
    Mat full_local;   // (d*(b+i)) x q in local dof order: the discrete shape functions
    int rhs_columns = 0;
    double residual_rel = 0.0;
};

inline CondensedBasis condense(const PartitionedStiffness& p, const BezierMap& bez) {
    CondensedBasis cb;
    cb.psi = bez.psi;
    const long q = bez.psi.cols();
    const long ni = long(p.interior_dofs.size());
    cb.rhs_columns = int(q);

    if (ni == 0) {
        cb.phi = Mat::Zero(0, q);
    } else {
        const Mat k_phi = -Mat(p.k_ib * bez.psi);
        Eigen::SimplicialLDLT<SpMat> ldlt(p.k_i);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("condense: interior block factorization failed");
        cb.phi = ldlt.solve(k_phi);
        // One step of refinement keeps the basis properties tight at high
        // material contrast.
        cb.phi += ldlt.solve(Mat(k_phi - p.k_i * cb.phi));
        if (!cb.phi.allFinite()) throw NumericalError("condense: non-finite basis");
        const double scale = std::max(k_phi.norm(), 1e-300);
        cb.residual_rel = (p.k_i * cb.phi - k_phi).norm() / scale;
        if (cb.residual_rel > 1e-9)
            throw NumericalError("condense: residual above 1e-9 (" +
                                 format_double(cb.residual_rel) + ")");
    }

    cb.full_local.setZero(long(p.boundary_dofs.size()) + ni, q);
    const Mat psi_dense(bez.psi);
    for (std::size_t r = 0; r < p.boundary_dofs.size(); ++r)
        cb.full_local.row(p.boundary_dofs[r]) = psi_dense.row(long(r));
    for (long r = 0; r < ni; ++r) cb.full_local.row(p.interior_dofs[r]) = cb.phi.row(r);
    return cb;
}

/// Dense boundary-interior map M = -k_i^{-1} k_ib, the full substructuring
/// transform. Column count is d*b, which is exactly the cost the CBN basis
/// avoids; refuse above the cap.
inline Mat full_boundary_map(const PartitionedStiffness& p, long max_columns = 2000) {
    const long nb = long(p.boundary_dofs.size());
    const long ni = long(p.interior_dofs.size());
    if (nb > max_columns)
        throw NumericalError("full_boundary_map: " + std::to_string(nb) +
                             " right-hand sides exceed the cap of " +
                             std::to_string(max_columns) +
                             " (per-element substructuring cost)");
    if (ni == 0) return Mat::Zero(0, nb);
    Eigen::SimplicialLDLT<SpMat> ldlt(p.k_i);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("full_boundary_map: factorization failed");
    Mat M = ldlt.solve(Mat(-p.k_ib));
    M += ldlt.solve(Mat(-p.k_ib) - Mat(p.k_i) * M);
    return M;
}

// ---------------------------------------------------------------------------
// Binary on-disk cache of the condensed basis, keyed by material and layout
// hashes. Header: magic, version, hashes, block sizes.

namespace detail {
constexpr char kPhiMagic[8] = {'C', 'B', 'N', 'P', 'H', 'I', '1', '\0'};
}

inline void save_phi_cache(const std::string& dir, std::uint64_t layout_hash,
                           std::uint64_t material_hash, const CondensedBasis& cb) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string path = dir + "/phi_" + std::to_string(layout_hash) + "_" +
                             std::to_string(material_hash) + ".bin";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("phi cache: cannot write " + path);
    const std::uint32_t version = 1;
    const std::uint64_t rows = std::uint64_t(cb.full_local.rows());
    const std::uint64_t cols = std::uint64_t(cb.full_local.cols());
    const std::uint64_t brows = std::uint64_t(cb.psi.rows());
    out.write(detail::kPhiMagic, 8);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&layout_hash), sizeof layout_hash);
    out.write(reinterpret_cast<const char*>(&material_hash), sizeof material_hash);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(&brows), sizeof brows);
    out.write(reinterpret_cast<const char*>(&cb.residual_rel), sizeof cb.residual_rel);
    // row-major payload
    for (long r = 0; r < cb.full_local.rows(); ++r)
        for (long c = 0; c < cb.full_local.cols(); ++c) {
            const double v = cb.full_local(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
}

inline bool load_phi_cache(const std::string& dir, std::uint64_t layout_hash,
                           std::uint64_t material_hash, const PartitionedStiffness& p,
                           CondensedBasis& cb) {
    const std::string path = dir + "/phi_" + std::to_string(layout_hash) + "_" +
                             std::to_string(material_hash) + ".bin";
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t lh = 0, mh = 0, rows = 0, cols = 0, brows = 0;
    double residual = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&lh), sizeof lh);
    in.read(reinterpret_cast<char*>(&mh), sizeof mh);
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    in.read(reinterpret_cast<char*>(&brows), sizeof brows);
    in.read(reinterpret_cast<char*>(&residual), sizeof residual);
    if (!in || std::memcmp(magic, detail::kPhiMagic, 8) != 0 || version != 1 ||
        lh != layout_hash || mh != material_hash)
        return false;
    Mat full(rows, cols);
    for (std::uint64_t r = 0; r < rows; ++r)
        for (std::uint64_t c = 0; c < cols; ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            if (!in) return false;
            full(long(r), long(c)) = v;
        }
    cb.full_local = std::move(full);
    cb.rhs_columns = int(cols);
    cb.residual_rel = residual;
    // Rebuild the [boundary; interior] views from the stacked matrix.
    std::vector<Trip> trips;
    Mat phi(long(p.interior_dofs.size()), long(cols));
    for (std::size_t r = 0; r < p.boundary_dofs.size(); ++r)
        for (std::uint64_t c = 0; c < cols; ++c) {
            const double v = cb.full_local(p.boundary_dofs[r], long(c));
            if (v != 0.0) trips.emplace_back(long(r), long(c), v);
        }
    for (std::size_t r = 0; r < p.interior_dofs.size(); ++r)
        phi.row(long(r)) = cb.full_local.row(p.interior_dofs[r]);
    cb.psi = SpMat(long(p.boundary_dofs.size()), long(cols));
    cb.psi.setFromTriplets(trips.begin(), trips.end());
    cb.phi = std::move(phi);
    return true;
}

}  // namespace cbn
