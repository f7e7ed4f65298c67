#pragma once

#include "cbn/material.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <unordered_map>

namespace cbn {

// ---------------------------------------------------------------------------
// Reference shape functions on [-1,1]^d. Corner order is lexicographic with
// x fastest, matching StructuredGrid::cell_nodes.

inline void bilinear_shape(double xi, double eta, double N[4], double dN[4][2]) {
    static constexpr double sx[4] = {-1, 1, -1, 1};
    static constexpr double sy[4] = {-1, -1, 1, 1};
    for (int i = 0; i < 4; ++i) {
        N[i] = 0.25 * (1 + sx[i] * xi) * (1 + sy[i] * eta);
        dN[i][0] = 0.25 * sx[i] * (1 + sy[i] * eta);
        dN[i][1] = 0.25 * sy[i] * (1 + sx[i] * xi);
    }
}

inline void trilinear_shape(double xi, double eta, double zeta, double N[8], double dN[8][3]) {
    static constexpr double sx[8] = {-1, 1, -1, 1, -1, 1, -1, 1};
    static constexpr double sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
    static constexpr double sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) {
        N[i] = 0.125 * (1 + sx[i] * xi) * (1 + sy[i] * eta) * (1 + sz[i] * zeta);
        dN[i][0] = 0.125 * sx[i] * (1 + sy[i] * eta) * (1 + sz[i] * zeta);
        dN[i][1] = 0.125 * sy[i] * (1 + sx[i] * xi) * (1 + sz[i] * zeta);
        dN[i][2] = 0.125 * sz[i] * (1 + sx[i] * xi) * (1 + sy[i] * eta);
    }
}

inline int voigt_size(int dim) { return dim == 3 ? 6 : 3; }

/// Strain-displacement matrix at a reference point of a rectangular element
/// with physical edge lengths h. Engineering Voigt rows:
/// 2D (xx, yy, xy); 3D (xx, yy, zz, xy, yz, zx).
inline Mat strain_displacement(int dim, const double* ref, const std::array<double, 3>& h) {
    if (dim == 2) {
        double N[4], dN[4][2];
        bilinear_shape(ref[0], ref[1], N, dN);
        Mat B = Mat::Zero(3, 8);
        for (int i = 0; i < 4; ++i) {
            const double dx = dN[i][0] * 2.0 / h[0];
            const double dy = dN[i][1] * 2.0 / h[1];
            B(0, 2 * i) = dx;
            B(1, 2 * i + 1) = dy;
            B(2, 2 * i) = dy;
            B(2, 2 * i + 1) = dx;
        }
        return B;
    }
    double N[8], dN[8][3];
    trilinear_shape(ref[0], ref[1], ref[2], N, dN);
    Mat B = Mat::Zero(6, 24);
    for (int i = 0; i < 8; ++i) {
        const double dx = dN[i][0] * 2.0 / h[0];
        const double dy = dN[i][1] * 2.0 / h[1];
        const double dz = dN[i][2] * 2.0 / h[2];
        B(0, 3 * i) = dx;
        B(1, 3 * i + 1) = dy;
        B(2, 3 * i + 2) = dz;
        B(3, 3 * i) = dy;
        B(3, 3 * i + 1) = dx;
        B(4, 3 * i + 1) = dz;
        B(4, 3 * i + 2) = dy;
        B(5, 3 * i) = dz;
        B(5, 3 * i + 2) = dx;
    }
    return B;
}

/// 2^d Gauss points (+-1/sqrt(3), unit weights) of the reference element.
inline std::vector<std::array<double, 3>> gauss_points(int dim) {
    const double g = 1.0 / std::sqrt(3.0);
    std::vector<std::array<double, 3>> pts;
    const int kmax = dim == 3 ? 1 : 0;
    for (int k = 0; k <= kmax; ++k)
        for (int j = 0; j <= 1; ++j)
            for (int i = 0; i <= 1; ++i)
                pts.push_back({i ? g : -g, j ? g : -g, dim == 3 ? (k ? g : -g) : 0.0});
    return pts;
}

/// Element stiffness for a rectangular element with constant D; exact for
/// the 2^d Gauss rule. Symmetric PSD with d(d+1)/2 rigid modes in the null
/// space.
inline Mat element_stiffness(int dim, const Mat& D, const std::array<double, 3>& h) {
    const int n = dim == 2 ? 8 : 24;
    double detJ = 1.0;
    for (int a = 0; a < dim; ++a) detJ *= h[a] / 2.0;
    Mat K = Mat::Zero(n, n);
    for (const auto& gp : gauss_points(dim)) {
        const Mat B = strain_displacement(dim, gp.data(), h);
        K.noalias() += B.transpose() * D * B * detJ;
    }
    return 0.5 * (K + K.transpose());
}

// ---------------------------------------------------------------------------
// Sparse symmetric assembly over a structured grid of rectangular elements.
// `tensor_of` returns D for a grid cell; element matrices are cached per
// distinct D by the callers that need it (materials repeat heavily here).

inline SpMat assemble_stiffness(const StructuredGrid& grid, const std::array<double, 3>& h,
                                const std::function<Mat(long)>& tensor_of) {
    const int dim = grid.dim;
    const int npc = grid.nodes_per_cell();
    const long ndof = dim * grid.node_count();

    std::vector<Trip> trips;
    trips.reserve(grid.cell_count() * npc * npc * dim * dim);
    long nodes[8];
    // Element matrices repeat whenever D repeats; key by the D pointer-free hash.
    std::unordered_map<std::uint64_t, Mat> ke_cache;
    for (long c = 0; c < grid.cell_count(); ++c) {
        const Mat D = tensor_of(c);
        const std::uint64_t key = hash_doubles(D.data(), std::size_t(D.size()));
        auto it = ke_cache.find(key);
        if (it == ke_cache.end()) it = ke_cache.emplace(key, element_stiffness(dim, D, h)).first;
        const Mat& ke = it->second;
        grid.cell_nodes(c, nodes);
        for (int a = 0; a < npc; ++a)
            for (int ca = 0; ca < dim; ++ca)
                for (int b = 0; b < npc; ++b)
                    for (int cb = 0; cb < dim; ++cb)
                        trips.emplace_back(dim * nodes[a] + ca, dim * nodes[b] + cb,
                                           ke(dim * a + ca, dim * b + cb));
    }
    SpMat K(ndof, ndof);
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

// ---------------------------------------------------------------------------
// Constrained linear systems. Dirichlet constraints are eliminated
// symmetrically so the reduced operator stays SPD.

struct DirichletDof {
    long dof;
    double value;
};

struct LinearSystem {
    SpMat K;  // full symmetric operator, no constraints applied
    Vec f;
    std::vector<DirichletDof> dirichlet;
};

struct ReducedSystem {
    SpMat K;                      // free-free block
    Vec f;                        // load minus coupling to prescribed values
    std::vector<long> free_dofs;  // reduced index -> full dof
    std::vector<long> full_to_free;
    Vec prescribed;               // full-size, zero on free dofs

    Vec expand(const Vec& x) const {
        Vec u = prescribed;
        for (std::size_t i = 0; i < free_dofs.size(); ++i) u[free_dofs[i]] = x[i];
        return u;
    }
};

inline ReducedSystem reduce_system(const LinearSystem& sys) {
    const long n = sys.K.rows();
    ReducedSystem r;
    r.prescribed = Vec::Zero(n);
    std::vector<char> fixed(n, 0);
    for (const auto& d : sys.dirichlet) {
        if (fixed[d.dof] && r.prescribed[d.dof] != d.value)
            throw ConfigError("bcs: dof constrained twice with different values");
        fixed[d.dof] = 1;
        r.prescribed[d.dof] = d.value;
    }
    r.full_to_free.assign(n, -1);
    for (long i = 0; i < n; ++i) {
        if (!fixed[i]) {
            r.full_to_free[i] = long(r.free_dofs.size());
            r.free_dofs.push_back(i);
        }
    }
    const long m = long(r.free_dofs.size());
    Vec coupling = sys.K * r.prescribed;
    r.f = Vec(m);
    for (long i = 0; i < m; ++i) r.f[i] = sys.f[r.free_dofs[i]] - coupling[r.free_dofs[i]];

    std::vector<Trip> trips;
    trips.reserve(sys.K.nonZeros());
    for (int k = 0; k < sys.K.outerSize(); ++k) {
        for (SpMat::InnerIterator it(sys.K, k); it; ++it) {
            const long ri = r.full_to_free[it.row()], ci = r.full_to_free[it.col()];
            if (ri >= 0 && ci >= 0) trips.emplace_back(ri, ci, it.value());
        }
    }
    r.K = SpMat(m, m);
    r.K.setFromTriplets(trips.begin(), trips.end());
    return r;
}

/// Names the rigid mode closest to a detected null direction, for solver
/// diagnostics on under-constrained systems.
inline std::vector<std::pair<std::string, Vec>> rigid_modes(const StructuredGrid& grid, int dim,
                                                            const std::array<double, 3>& h) {
    std::vector<std::pair<std::string, Vec>> modes;
    const long nn = grid.node_count();
    auto mode = [&](const std::string& name, auto&& fn) {
        Vec v = Vec::Zero(dim * nn);
        for (long i = 0; i < nn; ++i) {
            const auto c = grid.node_coords(i);
            const Vec3 x(c[0] * h[0], c[1] * h[1], dim == 3 ? c[2] * h[2] : 0.0);
            const Vec3 u = fn(x);
            for (int a = 0; a < dim; ++a) v[dim * i + a] = u[a];
        }
        modes.emplace_back(name, std::move(v));
    };
    mode("translation-x", [](const Vec3&) { return Vec3(1, 0, 0); });
    mode("translation-y", [](const Vec3&) { return Vec3(0, 1, 0); });
    if (dim == 3) mode("translation-z", [](const Vec3&) { return Vec3(0, 0, 1); });
    if (dim == 2) {
        mode("rotation-z", [](const Vec3& x) { return Vec3(-x[1], x[0], 0); });
    } else {
        mode("rotation-x", [](const Vec3& x) { return Vec3(0, -x[2], x[1]); });
        mode("rotation-y", [](const Vec3& x) { return Vec3(x[2], 0, -x[0]); });
        mode("rotation-z", [](const Vec3& x) { return Vec3(-x[1], x[0], 0); });
    }
    return modes;
}

// ---------------------------------------------------------------------------
// Direct SPD solver: one factorization, many right-hand sides.

class DirectSolver {
  public:
    void factorize(const SpMat& A) {
        ldlt_.compute(A);
        if (ldlt_.info() != Eigen::Success)
            throw NumericalError("direct solver: factorization failed (matrix not SPD?)");
        A_ = A;
    }

    Vec solve(const Vec& b) const {
        Vec x = ldlt_.solve(b);
        x += ldlt_.solve(Vec(b - A_ * x));  // one refinement step
        check(b, x);
        return x;
    }

    /// Multi-RHS solve reusing the factorization.
    Mat solve_many(const Mat& B) const {
        Mat X = ldlt_.solve(B);
        X += ldlt_.solve(Mat(B - A_ * X));
        if (!X.allFinite()) throw NumericalError("direct solver: non-finite solution");
        return X;
    }

    double residual(const Vec& b, const Vec& x) const {
        const double bn = b.norm();
        return bn == 0.0 ? (A_ * x).norm() : (A_ * x - b).norm() / bn;
    }

  private:
    void check(const Vec& b, const Vec& x) const {
        if (!x.allFinite()) throw NumericalError("direct solver: non-finite solution");
        if (b.norm() > 0 && residual(b, x) > 1e-10)
            throw NumericalError("direct solver: relative residual above 1e-10");
    }

    Eigen::SimplicialLDLT<SpMat> ldlt_;
    SpMat A_;
};

// ---------------------------------------------------------------------------
// Jacobi-preconditioned conjugate gradient. Also valid on consistent PSD
// systems (the iterates stay in the range of the operator when x0 = 0).

struct CgResult {
    Vec x;
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = true;
};

inline CgResult pcg(const SpMat& A, const Vec& b, double tol, int max_iters) {
    if (!(tol > 0.0) || tol >= 1.0) throw ConfigError("solver.tol must be in (0, 1)");
    CgResult res;
    const long n = A.rows();
    res.x = Vec::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) return res;

    Vec inv_diag(n);
    for (long i = 0; i < n; ++i) {
        const double d = A.coeff(i, i);
        inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
    }

    Vec r = b;
    Vec z = inv_diag.cwiseProduct(r);
    Vec p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iters; ++it) {
        const Vec Ap = A * p;
        const double pAp = p.dot(Ap);
        if (!std::isfinite(pAp) || pAp <= 0.0)
            throw NumericalError("cg: breakdown (operator not positive on Krylov space)");
        const double alpha = rz / pAp;
        res.x += alpha * p;
        r -= alpha * Ap;
        res.iterations = it + 1;
        res.rel_residual = r.norm() / bnorm;
        if (!std::isfinite(res.rel_residual)) throw NumericalError("cg: diverged (non-finite residual)");
        if (res.rel_residual <= tol) return res;
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    res.converged = false;
    res.rel_residual = r.norm() / bnorm;
    return res;
}

// ---------------------------------------------------------------------------

struct SolveInfo {
    std::string method;  // "direct" or "cg"
    int iterations = 0;
    double rel_residual = 0.0;
};

struct SolverOptions {
    bool use_cg = false;
    double tol = 1e-10;
    int max_iters = 200000;
};

/// Solve a constrained system; reports which rigid mode is loose when the
/// operator turns out singular.
inline Vec solve_reduced(const ReducedSystem& red, const SolverOptions& opt,
                         const StructuredGrid& grid, int dim, const std::array<double, 3>& h,
                         SolveInfo* info = nullptr) {
    auto diagnose = [&]() -> std::string {
        std::string names;
        const double knorm = red.K.coeffs().size() ? red.K.coeffs().cwiseAbs().maxCoeff() : 1.0;
        for (const auto& [name, v] : rigid_modes(grid, dim, h)) {
            Vec vr(red.free_dofs.size());
            for (std::size_t i = 0; i < red.free_dofs.size(); ++i) vr[i] = v[red.free_dofs[i]];
            const double vn = vr.norm();
            if (vn == 0.0) continue;
            if ((red.K * vr).norm() / (knorm * vn) < 1e-12) names += (names.empty() ? "" : ", ") + name;
        }
        return names.empty() ? "unknown" : names;
    };

    if (red.free_dofs.empty()) {
        if (info) *info = {"direct", 0, 0.0};
        return red.prescribed;
    }

    if (opt.use_cg) {
        CgResult cg = pcg(red.K, red.f, opt.tol, opt.max_iters);
        if (!cg.converged)
            throw NumericalError("cg: no convergence in " + std::to_string(opt.max_iters) +
                                 " iterations (rel residual " + format_double(cg.rel_residual) + ")");
        if (info) *info = {"cg", cg.iterations, cg.rel_residual};
        return red.expand(cg.x);
    }

    DirectSolver solver;
    try {
        solver.factorize(red.K);
        Vec x = solver.solve(red.f);
        if (info) *info = {"direct", 0, solver.residual(red.f, x)};
        return red.expand(x);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + "; unconstrained rigid mode: " + diagnose());
    }
}

}  // namespace cbn
