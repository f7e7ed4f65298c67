#pragma once

#include "cbn/cbn_solver.hpp"

namespace cbn {

// ---------------------------------------------------------------------------
// Energy-based numerical homogenization with kinematic uniform (linear
// displacement) test boundary conditions: 3 test strains in 2D, 6 in 3D.

/// Effective elasticity tensor of one coarse element.
inline Mat homogenize(const MeshHierarchy& mh, const MaterialField& mat, long e,
                      int* rhs_count = nullptr) {
    const int dim = mh.dim;
    const int vs = voigt_size(dim);
    const NodeSets ns = classify_nodes(mh);
    const SpMat k_local = assemble_local_stiffness(mh, mat, e);
    const PartitionedStiffness p = partition(k_local, ns, dim);
    if (rhs_count) *rhs_count = vs;

    Eigen::SimplicialLDLT<SpMat> ldlt;
    if (p.interior_dofs.size() > 0) {
        ldlt.compute(p.k_i);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("homogenize: interior factorization failed");
    }

    // Displacement of the unit test strain k (engineering shear) at x.
    const auto test_disp = [&](int k, const Vec3& x) {
        Vec3 u = Vec3::Zero();
        if (dim == 2) {
            if (k == 0) u[0] = x[0];
            if (k == 1) u[1] = x[1];
            if (k == 2) { u[0] = 0.5 * x[1]; u[1] = 0.5 * x[0]; }
        } else {
            if (k < 3) u[k] = x[k];
            if (k == 3) { u[0] = 0.5 * x[1]; u[1] = 0.5 * x[0]; }  // gamma_xy
            if (k == 4) { u[1] = 0.5 * x[2]; u[2] = 0.5 * x[1]; }  // gamma_yz
            if (k == 5) { u[0] = 0.5 * x[2]; u[2] = 0.5 * x[0]; }  // gamma_zx
        }
        return u;
    };

    double volume = 1.0;
    for (int a = 0; a < dim; ++a) volume *= mh.cell_size[a];
    double detJ = 1.0;
    for (int a = 0; a < dim; ++a) detJ *= mh.fine_h[a] / 2.0;
    const auto gps = gauss_points(dim);
    std::vector<Mat> B;
    for (const auto& gp : gps) B.push_back(strain_displacement(dim, gp.data(), mh.fine_h));

    Mat D_eff = Mat::Zero(vs, vs);
    const int npc = mh.local.nodes_per_cell();
    long nodes[8];
    for (int k = 0; k < vs; ++k) {
        Vec q_b(p.boundary_dofs.size());
        for (int r = 0; r < ns.b(); ++r) {
            const Vec3 u = test_disp(k, mh.local_node_pos(ns.boundary[r]));
            for (int a = 0; a < dim; ++a) q_b[long(dim) * r + a] = u[a];
        }
        Vec q_i;
        if (p.interior_dofs.size() > 0) q_i = ldlt.solve(Vec(-(p.k_ib * q_b)));

        Vec u_full = Vec::Zero(mh.local_dofs());
        for (std::size_t r = 0; r < p.boundary_dofs.size(); ++r) u_full[p.boundary_dofs[r]] = q_b[long(r)];
        for (std::size_t r = 0; r < p.interior_dofs.size(); ++r) u_full[p.interior_dofs[r]] = q_i[long(r)];

        Vec sigma = Vec::Zero(vs);
        Vec ue(dim * npc);
        for (long c = 0; c < mh.local.cell_count(); ++c) {
            mh.local.cell_nodes(c, nodes);
            for (int a = 0; a < npc; ++a)
                for (int d = 0; d < dim; ++d) ue[dim * a + d] = u_full[long(dim) * nodes[a] + d];
            const Mat D = mat.tensor(mh.global_cell_of(e, c));
            for (const auto& Bg : B) sigma += detJ * (D * (Bg * ue));
        }
        D_eff.col(k) = sigma / volume;
    }
    D_eff = 0.5 * (D_eff + D_eff.transpose());
    return D_eff;
}

struct HomogenizedSolution {
    Vec U;           // coarse nodal displacement (coarse grid dofs)
    Vec fine_field;  // bilinear interpolation onto the global fine nodes
    double energy = 0.0;
    SolveInfo info;
    long dofs = 0;
    long nnz = 0;
    int rhs_cols = 0;
};

/// Standard bilinear/trilinear coarse FEM on the effective tensors
/// (8 or 24 DOFs per element), then interpolation to the fine grid.
inline HomogenizedSolution homogenized_solve(const MeshHierarchy& mh,
                                             const std::vector<Mat>& tensors,
                                             const ProblemBcs& bcs, const SolverOptions& opt = {}) {
    const int dim = mh.dim;
    if (long(tensors.size()) != mh.coarse_elements())
        throw ConfigError("homogenized_solve: one tensor per coarse element required");

    HomogenizedSolution sol;
    sol.rhs_cols = voigt_size(dim);
    const SpMat K = assemble_stiffness(mh.coarse, mh.cell_size,
                                       [&](long cell) { return tensors[cell]; });
    LinearSystem sys{K, grid_loads(mh.coarse, mh.cell_size, dim, bcs.loads),
                     grid_dirichlet(mh.coarse, mh.cell_size, dim, bcs.dirichlet)};
    ReducedSystem red = reduce_system(sys);
    sol.U = solve_reduced(red, opt, mh.coarse, dim, mh.cell_size, &sol.info);
    sol.energy = strain_energy(K, sol.U);
    sol.dofs = long(red.free_dofs.size());
    sol.nnz = red.K.nonZeros();

    // Interpolate per owning coarse element; interface values coincide.
    sol.fine_field = Vec::Zero(mh.global_dofs());
    const int npc = mh.coarse.nodes_per_cell();
    long corners[8];
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        mh.coarse.cell_nodes(e, corners);
        const auto o = mh.element_fine_origin(e);
        for (long ln = 0; ln < mh.local_nodes(); ++ln) {
            const auto c = mh.local.node_coords(ln);
            const long g = mh.global_fine.node_id(o[0] + c[0], o[1] + c[1], o[2] + c[2]);
            double ref[3] = {0, 0, 0};
            for (int a = 0; a < dim; ++a)
                ref[a] = 2.0 * c[a] / mh.local.cells_along(a) - 1.0;
            double N2[4], dN2[4][2], N3[8], dN3[8][3];
            const double* N = nullptr;
            if (dim == 2) {
                bilinear_shape(ref[0], ref[1], N2, dN2);
                N = N2;
            } else {
                trilinear_shape(ref[0], ref[1], ref[2], N3, dN3);
                N = N3;
            }
            for (int i = 0; i < npc; ++i)
                for (int a = 0; a < dim; ++a)
                    sol.fine_field[long(dim) * g + a] += N[i] * sol.U[long(dim) * corners[i] + a];
        }
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Substructuring: exact static condensation onto the skeleton (all fine
// nodes on coarse element boundaries). 2b (or 3b) local solves per element
// and a much denser global system — the small-instance oracle.

struct SubstructureSolution {
    Vec u;  // full fine displacement
    double energy = 0.0;
    SolveInfo info;
    long dofs = 0;      // skeleton free dofs
    long nnz = 0;       // skeleton system nonzeros
    int rhs_cols = 0;   // d*b per element
};

inline SubstructureSolution substructure_solve(const MeshHierarchy& mh, const MaterialField& mat,
                                               const ProblemBcs& bcs, long skeleton_cap = 20000,
                                               long per_element_cap = 2000,
                                               const SolverOptions& opt = {}) {
    const int dim = mh.dim;
    const NodeSets ns = classify_nodes(mh);

    // Skeleton numbering.
    std::vector<long> skel_of(mh.global_fine_nodes(), -1);
    std::vector<long> skel_nodes;
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        for (int row = 0; row < ns.b(); ++row) {
            const long g = mh.global_node_of(e, ns.boundary[row]);
            if (skel_of[g] < 0) {
                skel_of[g] = long(skel_nodes.size());
                skel_nodes.push_back(g);
            }
        }
    }
    const long nskel = long(skel_nodes.size());
    if (dim * nskel > skeleton_cap)
        throw NumericalError("substructure: " + std::to_string(dim * nskel) +
                             " skeleton DOFs exceed the cap of " + std::to_string(skeleton_cap) +
                             "; the dense condensed system would be impractical");

    const Vec f_fine = fine_loads(mh, bcs);

    SubstructureSolution sol;
    sol.rhs_cols = dim * ns.b();
    std::vector<Trip> trips;
    Vec f_skel = Vec::Zero(dim * nskel);
    struct ElemData {
        Mat M;          // interior response to boundary values
        Vec correction; // k_i^{-1} f_i
        PartitionedStiffness part;
    };
    std::vector<ElemData> elems(mh.coarse_elements());

    for (long e = 0; e < mh.coarse_elements(); ++e) {
        auto& ed = elems[e];
        const SpMat k_local = assemble_local_stiffness(mh, mat, e);
        ed.part = partition(k_local, ns, dim);
        ed.M = full_boundary_map(ed.part, per_element_cap);

        // Interior loads fold into the condensed right-hand side.
        Vec f_i = Vec::Zero(ed.part.interior_dofs.size());
        bool has_interior_load = false;
        for (std::size_t r = 0; r < ed.part.interior_dofs.size(); ++r) {
            const long ln = ed.part.interior_dofs[r] / dim;
            const int a = int(ed.part.interior_dofs[r] % dim);
            const double v = f_fine[long(dim) * mh.global_node_of(e, ln) + a];
            if (v != 0.0) has_interior_load = true;
            f_i[long(r)] = v;
        }
        if (has_interior_load && ed.part.interior_dofs.size() > 0) {
            Eigen::SimplicialLDLT<SpMat> ldlt(ed.part.k_i);
            if (ldlt.info() != Eigen::Success)
                throw NumericalError("substructure: interior factorization failed");
            ed.correction = ldlt.solve(f_i);
        } else {
            ed.correction = Vec::Zero(ed.part.interior_dofs.size());
        }

        const Mat S = Mat(ed.part.k_b) + Mat(ed.part.k_bi) * ed.M;
        std::vector<long> gdof(ed.part.boundary_dofs.size());
        for (int row = 0; row < ns.b(); ++row) {
            const long s = skel_of[mh.global_node_of(e, ns.boundary[row])];
            for (int a = 0; a < dim; ++a) gdof[long(dim) * row + a] = long(dim) * s + a;
        }
        for (std::size_t r = 0; r < gdof.size(); ++r)
            for (std::size_t c = 0; c < gdof.size(); ++c)
                if (S(long(r), long(c)) != 0.0)
                    trips.emplace_back(gdof[r], gdof[c], S(long(r), long(c)));
        if (has_interior_load) {
            const Vec g_b = -(Mat(ed.part.k_bi) * ed.correction);
            for (std::size_t r = 0; r < gdof.size(); ++r) f_skel[gdof[r]] += g_b[long(r)];
        }
    }

    // Boundary loads land on skeleton nodes directly; interior loads were
    // folded above. Loads at non-skeleton nodes are covered by the fold.
    for (long s = 0; s < nskel; ++s)
        for (int a = 0; a < dim; ++a) f_skel[long(dim) * s + a] += f_fine[long(dim) * skel_nodes[s] + a];

    SpMat K_skel(dim * nskel, dim * nskel);
    K_skel.setFromTriplets(trips.begin(), trips.end());

    std::vector<DirichletDof> skel_dirichlet;
    for (const auto& d : fine_dirichlet(mh, bcs)) {
        const long node = d.dof / dim;
        const long s = skel_of[node];
        if (s < 0)
            throw ConfigError("substructure: Dirichlet constraint on an interior fine node");
        skel_dirichlet.push_back({long(dim) * s + d.dof % dim, d.value});
    }

    LinearSystem sys{K_skel, f_skel, skel_dirichlet};
    ReducedSystem red = reduce_system(sys);
    sol.dofs = long(red.free_dofs.size());
    sol.nnz = red.K.nonZeros();

    Vec q_skel;
    if (opt.use_cg) {
        CgResult cg = pcg(red.K, red.f, opt.tol, opt.max_iters);
        if (!cg.converged) throw NumericalError("substructure: cg did not converge");
        sol.info = {"cg", cg.iterations, cg.rel_residual};
        q_skel = red.expand(cg.x);
    } else {
        DirectSolver solver;
        solver.factorize(red.K);
        Vec x = solver.solve(red.f);
        sol.info = {"direct", 0, solver.residual(red.f, x)};
        q_skel = red.expand(x);
    }

    // Interior recovery per element.
    sol.u = Vec::Zero(mh.global_dofs());
    for (long s = 0; s < nskel; ++s)
        for (int a = 0; a < dim; ++a)
            sol.u[long(dim) * skel_nodes[s] + a] = q_skel[long(dim) * s + a];
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        const auto& ed = elems[e];
        Vec q_b(ed.part.boundary_dofs.size());
        for (int row = 0; row < ns.b(); ++row) {
            const long s = skel_of[mh.global_node_of(e, ns.boundary[row])];
            for (int a = 0; a < dim; ++a) q_b[long(dim) * row + a] = q_skel[long(dim) * s + a];
        }
        const Vec q_i = ed.M * q_b + ed.correction;
        for (std::size_t r = 0; r < ed.part.interior_dofs.size(); ++r) {
            const long ln = ed.part.interior_dofs[r] / dim;
            const int a = int(ed.part.interior_dofs[r] % dim);
            sol.u[long(dim) * mh.global_node_of(e, ln) + a] = q_i[long(r)];
        }
    }
    return sol;
}

}  // namespace cbn
