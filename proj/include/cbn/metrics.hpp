#pragma once

#include "cbn/cbn_solver.hpp"

#include <sstream>

namespace cbn {

/// r_e = (e1 - e0)^2 / e0^2.
inline double effectivity_energy(double e1, double e0) {
    if (e0 == 0.0) throw NumericalError("effectivity index undefined: benchmark energy is zero");
    const double d = (e1 - e0) / e0;
    return d * d;
}

/// Lumped nodal quadrature weights: cell measure / 2^d per incident node.
inline Vec nodal_weights(const StructuredGrid& grid, const std::array<double, 3>& h) {
    const int dim = grid.dim;
    double cell = 1.0;
    for (int a = 0; a < dim; ++a) cell *= h[a];
    const double w = cell / double(1 << dim);
    Vec out = Vec::Zero(grid.node_count());
    long nodes[8];
    for (long c = 0; c < grid.cell_count(); ++c) {
        grid.cell_nodes(c, nodes);
        for (int i = 0; i < grid.nodes_per_cell(); ++i) out[nodes[i]] += w;
    }
    return out;
}

/// r_u = int (u1-u0)^2 / int u0^2 with the lumped nodal weights. Per-node
/// terms are sorted before summation, so the index is exactly invariant
/// under any relabeling of the nodes.
inline double effectivity_displacement(const Vec& u1, const Vec& u0, const MeshHierarchy& mh) {
    if (u1.size() != u0.size() || u1.size() != mh.global_dofs())
        throw NumericalError("effectivity: displacement fields must share the fine grid");
    const Vec w = nodal_weights(mh.global_fine, mh.fine_h);
    const int dim = mh.dim;
    const long nn = mh.global_fine_nodes();
    std::vector<double> num_terms(nn), den_terms(nn);
    for (long n = 0; n < nn; ++n) {
        double dn = 0.0, d0 = 0.0;
        for (int a = 0; a < dim; ++a) {
            const double diff = u1[dim * n + a] - u0[dim * n + a];
            dn += diff * diff;
            d0 += u0[dim * n + a] * u0[dim * n + a];
        }
        num_terms[n] = w[n] * dn;
        den_terms[n] = w[n] * d0;
    }
    std::sort(num_terms.begin(), num_terms.end());
    std::sort(den_terms.begin(), den_terms.end());
    double num = 0.0, den = 0.0;
    for (double v : num_terms) num += v;
    for (double v : den_terms) den += v;
    if (den == 0.0) throw NumericalError("effectivity index undefined: benchmark field is zero");
    return num / den;
}

// ---------------------------------------------------------------------------
// Shape-function property report for one coarse element operator: node
// interpolation, partition of unity, rotation invariance.

struct PropertyCheck {
    std::string property;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass() const { return max_violation <= tolerance; }
};

struct PropertyReport {
    long element = 0;
    std::vector<PropertyCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass()) return false;
        return true;
    }

    std::string to_log() const {
        std::ostringstream os;
        for (const auto& c : checks)
            os << "element=" << element << " property=" << c.property
               << " max_violation=" << format_double(c.max_violation)
               << " tolerance=" << format_double(c.tolerance)
               << " verdict=" << (c.pass() ? "PASS" : "FAIL") << "\n";
        return os.str();
    }
};

struct PropertyTolerances {
    double node_interpolation = 1e-12;
    double partition_of_unity = 1e-12;
    double rotation_invariance = 1e-10;
};

inline PropertyReport property_suite(const CbnModel& model, long e, int trials, Rng& rng,
                                     const PropertyTolerances& tol = {}) {
    const auto& mh = *model.mh;
    const auto& layout = *model.layout;
    const int dim = mh.dim;
    const int q = layout.local_dofs();
    PropertyReport rep;
    rep.element = e;

    // Node interpolation: rows at bridge-node CBNs are exact selectors.
    double vi = 0.0;
    for (int c = 0; c < layout.local_cbn_count; ++c) {
        if (!layout.local_cbn_is_bridge[c]) continue;
        const Mat N = shape_eval(model, e, layout.local_cbn_pos[c]);
        Mat sel = Mat::Zero(dim, q);
        for (int a = 0; a < dim; ++a) sel(a, dim * c + a) = 1.0;
        vi = std::max(vi, (N - sel).cwiseAbs().maxCoeff());
    }
    rep.checks.push_back({"node_interpolation", vi, tol.node_interpolation});

    // Random strictly interior points.
    std::vector<Vec3> points;
    for (int t = 0; t < trials; ++t) {
        Vec3 x = Vec3::Zero();
        for (int a = 0; a < dim; ++a) x[a] = rng.uniform(0.02, 0.98) * mh.cell_size[a];
        points.push_back(x);
    }

    double vpu = 0.0;
    for (const auto& x : points) {
        const Vec s = shape_eval(model, e, x) * Vec::Ones(q);
        vpu = std::max(vpu, (s - Vec::Ones(dim)).cwiseAbs().maxCoeff());
    }
    rep.checks.push_back({"partition_of_unity", vpu, tol.partition_of_unity});

    // Rotation invariance: N(x) (theta x X_cbn) = theta x x, normalized by
    // the field magnitude.
    Vec3 axis(0, 0, 1);
    if (dim == 3) {
        axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (axis.norm() < 1e-3) axis = Vec3(0, 0, 1);
        axis.normalize();
    }
    Vec Qrot(q);
    double scale = 0.0;
    for (int c = 0; c < layout.local_cbn_count; ++c) {
        const Vec3 r = axis.cross(layout.local_cbn_pos[c]);
        for (int a = 0; a < dim; ++a) Qrot[dim * c + a] = r[a];
        scale = std::max(scale, r.cwiseAbs().maxCoeff());
    }
    scale = std::max(scale, 1.0);
    double vrot = 0.0;
    for (const auto& x : points) {
        const Vec u = shape_eval(model, e, x) * Qrot;
        const Vec3 expect = axis.cross(x);
        for (int a = 0; a < dim; ++a) vrot = std::max(vrot, std::abs(u[a] - expect[a]) / scale);
    }
    rep.checks.push_back({"rotation_invariance", vrot, tol.rotation_invariance});
    return rep;
}

}  // namespace cbn
