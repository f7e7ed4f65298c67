#pragma once

#include "cbn/bcs.hpp"

namespace cbn {

// ---------------------------------------------------------------------------
// Direct fine-mesh analysis; the reference every method is measured against.

struct FineSolution {
    Vec u;  // full fine displacement vector
    double energy = 0.0;
    SolveInfo info;
    long dofs = 0;      // free dofs after constraints
    long nnz = 0;       // nonzeros of the assembled operator
    SpMat K;            // unconstrained operator (for energies of other fields)
};

inline SpMat assemble_fine_stiffness(const MeshHierarchy& mh, const MaterialField& mat) {
    return assemble_stiffness(mh.global_fine, mh.fine_h,
                              [&](long cell) { return mat.tensor(cell); });
}

inline double strain_energy(const SpMat& K, const Vec& u) { return 0.5 * u.dot(K * u); }

inline FineSolution solve_fine(const MeshHierarchy& mh, const MaterialField& mat,
                               const ProblemBcs& bcs, const SolverOptions& opt = {}) {
    FineSolution sol;
    sol.K = assemble_fine_stiffness(mh, mat);
    LinearSystem sys{sol.K, fine_loads(mh, bcs), fine_dirichlet(mh, bcs)};
    ReducedSystem red = reduce_system(sys);
    sol.u = solve_reduced(red, opt, mh.global_fine, mh.dim, mh.fine_h, &sol.info);
    sol.energy = strain_energy(sol.K, sol.u);
    sol.dofs = long(red.free_dofs.size());
    sol.nnz = red.K.nonZeros();
    return sol;
}

// ---------------------------------------------------------------------------
// Strain recovery at the 2^d Gauss points of every cell, plus cell averages.

struct StrainField {
    int vsize = 3;
    int gauss_per_cell = 4;
    Mat gauss;    // cells x (gauss_per_cell * vsize)
    Mat average;  // cells x vsize
};

inline StrainField compute_strains(const StructuredGrid& grid, const std::array<double, 3>& h,
                                   const Vec& u) {
    const int dim = grid.dim;
    const int vs = voigt_size(dim);
    const auto gps = gauss_points(dim);
    StrainField sf;
    sf.vsize = vs;
    sf.gauss_per_cell = int(gps.size());
    sf.gauss.setZero(grid.cell_count(), long(gps.size()) * vs);
    sf.average.setZero(grid.cell_count(), vs);

    std::vector<Mat> B;
    for (const auto& gp : gps) B.push_back(strain_displacement(dim, gp.data(), h));

    long nodes[8];
    const int npc = grid.nodes_per_cell();
    Vec ue(dim * npc);
    for (long c = 0; c < grid.cell_count(); ++c) {
        grid.cell_nodes(c, nodes);
        for (int a = 0; a < npc; ++a)
            for (int d = 0; d < dim; ++d) ue[dim * a + d] = u[dim * nodes[a] + d];
        for (std::size_t g = 0; g < gps.size(); ++g) {
            const Vec eps = B[g] * ue;
            sf.gauss.block(c, long(g) * vs, 1, vs) = eps.transpose();
            sf.average.row(c) += eps.transpose() / double(gps.size());
        }
    }
    return sf;
}

}  // namespace cbn
