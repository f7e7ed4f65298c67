#pragma once

#include "cbn/benchmark.hpp"
#include "cbn/condense.hpp"

#include <memory>
#include <unordered_map>

namespace cbn {

// ---------------------------------------------------------------------------
// Per-element operator: condensed basis plus coarse stiffness K = Phi~^T k Phi~.
// Elements with identical local material share one instance.

struct CoarseOperatorData {
    CondensedBasis basis;
    Mat K;  // q x q, symmetric PSD
    std::uint64_t material_hash = 0;
};

struct CbnModel {
    const MeshHierarchy* mh = nullptr;
    const NodeSets* ns = nullptr;
    const CbnLayout* layout = nullptr;
    const MaterialField* mat = nullptr;
    BoundaryInterp interp = BoundaryInterp::Bezier;
    std::vector<std::shared_ptr<const CoarseOperatorData>> ops;  // per element
    int cache_hits = 0;

    const CoarseOperatorData& op(long e) const { return *ops[e]; }
};

/// Unconstrained stiffness of one element's local fine mesh.
inline SpMat assemble_local_stiffness(const MeshHierarchy& mh, const MaterialField& mat, long e) {
    return assemble_stiffness(mh.local, mh.fine_h, [&](long cell) {
        return mat.tensor(mh.global_cell_of(e, cell));
    });
}

/// Coarse element stiffness by per-fine-element congruence
/// K = sum_e Phi~_e^T k_e Phi~_e; agrees with the one-shot triple product and
/// is kept as the independent route for the equality check.
inline Mat coarse_stiffness_per_fine_element(const MeshHierarchy& mh, const MaterialField& mat,
                                             long e, const CondensedBasis& basis) {
    const int dim = mh.dim;
    const int npc = mh.local.nodes_per_cell();
    const long q = basis.full_local.cols();
    Mat K = Mat::Zero(q, q);
    long nodes[8];
    Mat rows(dim * npc, q);
    for (long c = 0; c < mh.local.cell_count(); ++c) {
        const Mat ke = element_stiffness(dim, mat.tensor(mh.global_cell_of(e, c)), mh.fine_h);
        mh.local.cell_nodes(c, nodes);
        for (int a = 0; a < npc; ++a)
            for (int d = 0; d < dim; ++d)
                rows.row(dim * a + d) = basis.full_local.row(dim * nodes[a] + d);
        K.noalias() += rows.transpose() * ke * rows;
    }
    return 0.5 * (K + K.transpose());
}

struct CbnBuildOptions {
    int threads = 1;
    std::string cache_dir;  // optional on-disk basis cache
};

inline CbnModel build_cbn_model(const MeshHierarchy& mh, const NodeSets& ns,
                                const CbnLayout& layout, const MaterialField& mat,
                                BoundaryInterp interp = BoundaryInterp::Bezier,
                                const CbnBuildOptions& opts = {}, StepTimings* timings = nullptr) {
    CbnModel model;
    model.mh = &mh;
    model.ns = &ns;
    model.layout = &layout;
    model.mat = &mat;
    model.interp = interp;

    Stopwatch sw;
    const BezierMap bez = build_psi(mh, ns, layout, interp);
    if (timings) timings->add("Prepare Bezier interpolation matrix", sw.seconds());

    // Distinct element materials; identical elements share one operator.
    const long M = mh.coarse_elements();
    std::vector<std::uint64_t> hashes(M);
    const std::uint64_t lhash = layout.layout_hash(mh);
    const std::uint64_t interp_salt = hash_u64(std::uint64_t(interp), lhash);
    for (long e = 0; e < M; ++e)
        hashes[e] = hash_u64(mat.element_hash(mh, e), interp_salt);
    std::vector<long> representative;  // first element per distinct hash
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (long e = 0; e < M; ++e) {
        if (index.emplace(hashes[e], representative.size()).second)
            representative.push_back(e);
        else
            ++model.cache_hits;
    }
    const long R = long(representative.size());

    sw.restart();
    std::vector<SpMat> k_locals(R);
    std::vector<PartitionedStiffness> parts(R);
    parallel_for(R, opts.threads, [&](long i) {
        k_locals[i] = assemble_local_stiffness(mh, mat, representative[i]);
        parts[i] = partition(k_locals[i], ns, mh.dim);
    });
    if (timings) timings->add("Prepare boundary-interior partitions", sw.seconds());

    sw.restart();
    std::vector<std::shared_ptr<CoarseOperatorData>> built(R);
    parallel_for(R, opts.threads, [&](long i) {
        auto data = std::make_shared<CoarseOperatorData>();
        data->material_hash = hashes[representative[i]];
        bool from_disk = false;
        if (!opts.cache_dir.empty())
            from_disk = load_phi_cache(opts.cache_dir, lhash, data->material_hash, parts[i],
                                       data->basis);
        if (!from_disk) {
            try {
                data->basis = condense(parts[i], bez);
            } catch (const NumericalError& err) {
                throw NumericalError(std::string(err.what()) + " (coarse element " +
                                     std::to_string(representative[i]) + ")");
            }
            if (!opts.cache_dir.empty())
                save_phi_cache(opts.cache_dir, lhash, data->material_hash, data->basis);
        }
        built[i] = std::move(data);
    });
    if (timings) timings->add("Construct condensed basis", sw.seconds());

    // The discrete shape functions are the basis columns themselves.
    if (timings) timings->add("Construct shape functions", 0.0);

    sw.restart();
    parallel_for(R, opts.threads, [&](long i) {
        auto& data = *built[i];
        const Mat kf = k_locals[i] * data.basis.full_local;
        const Mat K = data.basis.full_local.transpose() * kf;
        data.K = 0.5 * (K + K.transpose());
    });
    if (timings) timings->add("Compute coarse element stiffness", sw.seconds());

    model.ops.resize(M);
    for (long e = 0; e < M; ++e) model.ops[e] = built[index.at(hashes[e])];
    return model;
}

// ---------------------------------------------------------------------------
// Shape function evaluation. x is in the element frame (within [0, cell_size]).

namespace detail {

struct FineCellRef {
    long cell;
    std::array<double, 3> ref;  // reference coordinates in [-1,1]^d
};

inline FineCellRef locate_fine_cell(const MeshHierarchy& mh, const Vec3& x, bool forbid_border) {
    FineCellRef fc{};
    std::array<int, 3> ci{0, 0, 0};
    for (int a = 0; a < mh.dim; ++a) {
        const double h = mh.fine_h[a];
        if (x[a] < -1e-12 * h || x[a] > mh.cell_size[a] + 1e-12 * h)
            throw NumericalError("shape evaluation point outside the coarse element");
        const double t = x[a] / h;
        if (forbid_border) {
            const long line = std::lround(t);
            if (line > 0 && line < mh.local.cells_along(a) && std::abs(t - line) < 1e-12)
                throw NumericalError("gradient requested on a fine-element border; pick a cell");
        }
        int c = int(std::floor(t));
        c = std::max(0, std::min(c, mh.local.cells_along(a) - 1));
        ci[a] = c;
        fc.ref[a] = 2.0 * (x[a] - c * h) / h - 1.0;
    }
    fc.cell = mh.local.cell_id(ci[0], ci[1], ci[2]);
    return fc;
}

/// Gather the basis rows of one fine cell: (d*npc) x q.
inline Mat cell_basis_rows(const MeshHierarchy& mh, const CondensedBasis& basis, long cell) {
    const int dim = mh.dim;
    const int npc = mh.local.nodes_per_cell();
    long nodes[8];
    mh.local.cell_nodes(cell, nodes);
    Mat rows(dim * npc, basis.full_local.cols());
    for (int a = 0; a < npc; ++a)
        for (int d = 0; d < dim; ++d)
            rows.row(dim * a + d) = basis.full_local.row(dim * nodes[a] + d);
    return rows;
}

}  // namespace detail

/// N^alpha(x): d x (d*local_cbn_count) matrix-valued shape functions.
inline Mat shape_eval(const CbnModel& model, long e, const Vec3& x) {
    const auto& mh = *model.mh;
    const int dim = mh.dim;
    const auto fc = detail::locate_fine_cell(mh, x, false);
    const int npc = mh.local.nodes_per_cell();
    Mat Nmat = Mat::Zero(dim, dim * npc);
    if (dim == 2) {
        double N[4], dN[4][2];
        bilinear_shape(fc.ref[0], fc.ref[1], N, dN);
        for (int i = 0; i < 4; ++i)
            for (int d = 0; d < 2; ++d) Nmat(d, 2 * i + d) = N[i];
    } else {
        double N[8], dN[8][3];
        trilinear_shape(fc.ref[0], fc.ref[1], fc.ref[2], N, dN);
        for (int i = 0; i < 8; ++i)
            for (int d = 0; d < 3; ++d) Nmat(d, 3 * i + d) = N[i];
    }
    return Nmat * detail::cell_basis_rows(mh, model.op(e).basis, fc.cell);
}

/// B^alpha(x): strain-displacement rows (Voigt) against the CBN DOFs. x must
/// be strictly inside a fine element.
inline Mat shape_gradient(const CbnModel& model, long e, const Vec3& x) {
    const auto& mh = *model.mh;
    const auto fc = detail::locate_fine_cell(mh, x, true);
    const Mat B = strain_displacement(mh.dim, fc.ref.data(), mh.fine_h);
    return B * detail::cell_basis_rows(mh, model.op(e).basis, fc.cell);
}

// ---------------------------------------------------------------------------
// Global coarse system on CBN DOFs.

struct CoarseSystem {
    SpMat K;  // dof_count x dof_count, unconstrained
    Vec f;
    std::vector<DirichletDof> dirichlet;
};

namespace detail {

/// Owner element (lowest id) of every global fine node; used to split nodal
/// loads between elements for the work-equivalent transfer. Any split gives
/// the same coarse load because reconstructed interface values agree.
inline std::vector<long> node_owner_element(const MeshHierarchy& mh) {
    std::vector<long> owner(mh.global_fine_nodes(), -1);
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        for (long ln = 0; ln < mh.local_nodes(); ++ln) {
            const long g = mh.global_node_of(e, ln);
            if (owner[g] < 0) owner[g] = e;
        }
    }
    return owner;
}

}  // namespace detail

inline std::vector<DirichletDof> coarse_dirichlet(const MeshHierarchy& mh, const CbnLayout& layout,
                                                  const std::vector<DirichletRegion>& regions) {
    std::vector<DirichletDof> out;
    const int dim = mh.dim;
    const Vec3 span = mh.domain_size();
    for (const auto& rg : regions) {
        const auto fix = [&](long cbn) {
            if (rg.comp >= 0) {
                out.push_back({long(dim) * cbn + rg.comp, rg.value});
            } else {
                for (int a = 0; a < dim; ++a) out.push_back({long(dim) * cbn + a, rg.value});
            }
        };
        if (rg.where == DirichletRegion::Where::Point) {
            long found = -1;
            for (long c = 0; c < layout.global_cbn_count; ++c) {
                bool match = true;
                for (int a = 0; a < dim; ++a)
                    match = match && std::abs(layout.global_cbn_pos[c][a] - rg.at[a]) <=
                                         1e-9 * std::max(1.0, span[a]);
                if (match) { found = c; break; }
            }
            if (found < 0)
                throw ConfigError("bcs: point constraint does not coincide with a CBN");
            if (!layout.global_cbn_is_bridge[found])
                throw ConfigError(
                    "bcs: point constraint lies on a synthetic CBN station; only bridge nodes "
                    "can carry point constraints");
            fix(found);
        } else {
            const int a = side_axis(rg.side);
            const double at = side_high(rg.side) ? span[a] : 0.0;
            for (long c = 0; c < layout.global_cbn_count; ++c)
                if (std::abs(layout.global_cbn_pos[c][a] - at) <= 1e-9 * std::max(1.0, span[a]))
                    fix(c);
        }
    }
    return out;
}

inline CoarseSystem assemble_coarse(const CbnModel& model, const ProblemBcs& bcs) {
    const auto& mh = *model.mh;
    const auto& layout = *model.layout;
    const int dim = mh.dim;
    const long ndof = layout.dof_count();

    CoarseSystem sys;
    std::vector<Trip> trips;
    const Vec f_fine = fine_loads(mh, bcs);
    sys.f = Vec::Zero(ndof);
    const auto owner = detail::node_owner_element(mh);

    for (long e = 0; e < mh.coarse_elements(); ++e) {
        const auto& data = model.op(e);
        const auto& map = layout.elem_to_global[e];
        const long q = long(data.K.rows());
        std::vector<long> gdof(q);
        for (int lc = 0; lc < layout.local_cbn_count; ++lc)
            for (int a = 0; a < dim; ++a) gdof[long(dim) * lc + a] = long(dim) * map[lc] + a;
        for (long r = 0; r < q; ++r)
            for (long c = 0; c < q; ++c)
                if (data.K(r, c) != 0.0) trips.emplace_back(gdof[r], gdof[c], data.K(r, c));

        // Work-equivalent load transfer f_c = Phi~^T f_fine, owner-split.
        Vec f_local = Vec::Zero(mh.local_dofs());
        bool any = false;
        for (long ln = 0; ln < mh.local_nodes(); ++ln) {
            const long g = mh.global_node_of(e, ln);
            if (owner[g] != e) continue;
            for (int a = 0; a < dim; ++a) {
                const double v = f_fine[long(dim) * g + a];
                if (v != 0.0) any = true;
                f_local[long(dim) * ln + a] = v;
            }
        }
        if (any) {
            const Vec fe = data.basis.full_local.transpose() * f_local;
            for (long r = 0; r < q; ++r) sys.f[gdof[r]] += fe[r];
        }
    }
    sys.K = SpMat(ndof, ndof);
    sys.K.setFromTriplets(trips.begin(), trips.end());
    sys.dirichlet = coarse_dirichlet(mh, layout, bcs.dirichlet);
    return sys;
}

struct CoarseSolution {
    Vec Q;  // full CBN dof vector
    SolveInfo info;
    long free_dofs = 0;
    long nnz = 0;
};

/// Solve K Q = f. Structurally empty CBN DOFs (stations of one-interval
/// segments influence nothing) are pinned to zero. Layouts whose segments
/// have two fine intervals give a consistent PSD system; those use CG.
inline CoarseSolution solve_coarse(const CoarseSystem& sys, const CbnLayout& layout,
                                   SolverOptions opt = {}) {
    LinearSystem lin{sys.K, sys.f, sys.dirichlet};
    std::vector<char> fixed(sys.K.rows(), 0);
    for (const auto& d : lin.dirichlet) fixed[d.dof] = 1;
    Vec diag = sys.K.diagonal();
    for (long i = 0; i < diag.size(); ++i)
        if (!fixed[i] && diag[i] == 0.0) lin.dirichlet.push_back({i, 0.0});

    const bool rank_deficient = layout.min_segment_intervals() == 2;
    if (rank_deficient && !opt.use_cg) {
        opt.use_cg = true;
        opt.tol = std::min(opt.tol, 1e-12);
    }

    ReducedSystem red = reduce_system(lin);
    CoarseSolution sol;
    sol.free_dofs = long(red.free_dofs.size());
    sol.nnz = red.K.nonZeros();
    if (opt.use_cg) {
        CgResult cg = pcg(red.K, red.f, opt.tol, opt.max_iters);
        if (!cg.converged)
            throw NumericalError("coarse solve: cg did not converge (rel residual " +
                                 format_double(cg.rel_residual) + ")");
        sol.info = {"cg", cg.iterations, cg.rel_residual};
        sol.Q = red.expand(cg.x);
        return sol;
    }
    try {
        DirectSolver solver;
        solver.factorize(red.K);
        Vec x = solver.solve(red.f);
        sol.info = {"direct", 0, solver.residual(red.f, x)};
        sol.Q = red.expand(x);
        return sol;
    } catch (const NumericalError& e) {
        // Identify loose rigid modes on the CBN coordinates for the message.
        std::string names;
        const double kn = red.K.coeffs().size() ? red.K.coeffs().cwiseAbs().maxCoeff() : 1.0;
        const int dim = layout.dim;
        std::vector<std::pair<std::string, Vec3>> dirs = {{"translation-x", Vec3(1, 0, 0)},
                                                          {"translation-y", Vec3(0, 1, 0)}};
        if (dim == 3) dirs.push_back({"translation-z", Vec3(0, 0, 1)});
        for (const auto& [name, t] : dirs) {
            Vec v = Vec::Zero(sys.K.rows());
            for (long c = 0; c < layout.global_cbn_count; ++c)
                for (int a = 0; a < dim; ++a) v[long(dim) * c + a] = t[a];
            Vec vr(red.free_dofs.size());
            for (std::size_t i = 0; i < red.free_dofs.size(); ++i) vr[i] = v[red.free_dofs[i]];
            if (vr.norm() > 0 && (red.K * vr).norm() / (kn * vr.norm()) < 1e-12)
                names += (names.empty() ? "" : ", ") + name;
        }
        throw NumericalError(std::string(e.what()) +
                             (names.empty() ? "" : "; unconstrained rigid mode: " + names));
    }
}

// ---------------------------------------------------------------------------
// Fine-scale reconstruction q = Phi~ Q^alpha per element. Interface values
// agree exactly because shared CBN DOFs feed identical interpolation rows.

inline Vec gather_element_Q(const CbnModel& model, long e, const Vec& Q) {
    const auto& layout = *model.layout;
    const int dim = layout.dim;
    Vec Qe(layout.local_dofs());
    const auto& map = layout.elem_to_global[e];
    for (int lc = 0; lc < layout.local_cbn_count; ++lc)
        for (int a = 0; a < dim; ++a)
            Qe[long(dim) * lc + a] = Q[long(dim) * map[lc] + a];
    return Qe;
}

inline Vec reconstruct_fine(const CbnModel& model, const Vec& Q) {
    const auto& mh = *model.mh;
    const int dim = mh.dim;
    Vec u = Vec::Zero(mh.global_dofs());
    for (long e = 0; e < mh.coarse_elements(); ++e) {
        const Vec q_local = model.op(e).basis.full_local * gather_element_Q(model, e, Q);
        for (long ln = 0; ln < mh.local_nodes(); ++ln) {
            const long g = mh.global_node_of(e, ln);
            for (int a = 0; a < dim; ++a) u[long(dim) * g + a] = q_local[long(dim) * ln + a];
        }
    }
    return u;
}

/// Strain of the reconstructed field on the global fine mesh; identical to
/// evaluating B^alpha Q^alpha element by element.
inline StrainField reconstruct_strain(const CbnModel& model, const Vec& Q) {
    return compute_strains(model.mh->global_fine, model.mh->fine_h, reconstruct_fine(model, Q));
}

inline double coarse_energy(const CoarseSystem& sys, const Vec& Q) {
    return 0.5 * Q.dot(sys.K * Q);
}

}  // namespace cbn
