#include "cbn/baselines.hpp"
#include "cbn/metrics.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace cbn;

namespace {

ProblemBcs cantilever_bcs(double width, double height) {
    ProblemBcs bcs;
    DirichletRegion clamp;
    clamp.where = DirichletRegion::Where::Side;
    clamp.side = 0;
    clamp.comp = -1;
    bcs.dirichlet.push_back(clamp);
    LoadSpec load;
    load.kind = LoadSpec::Kind::PointForce;
    load.at = Vec3(width, height, 0);
    load.vector = Vec3(0, -1, 0);
    bcs.loads.push_back(load);
    return bcs;
}

}  // namespace

TEST_CASE("homogenization of a homogeneous element returns the constituent D") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {6, 6, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {1e3, 0.3}, ElasticModel::PlaneStress);
    int rhs = 0;
    const Mat D_eff = homogenize(mh, mat, 0, &rhs);
    const Mat D = elasticity_tensor(1e3, 0.3, ElasticModel::PlaneStress);
    CHECK(rhs == 3);
    CHECK((D_eff - D).cwiseAbs().maxCoeff() <= 1e-10 * D.cwiseAbs().maxCoeff());

    auto mh3 = build_hierarchy(3, {1, 1, 1}, {3, 3, 3}, {1, 1, 1});
    auto mat3 = uniform_material(mh3, {50.0, 0.2}, ElasticModel::ThreeD);
    int rhs3 = 0;
    const Mat D3_eff = homogenize(mh3, mat3, 0, &rhs3);
    const Mat D3 = elasticity_tensor(50.0, 0.2, ElasticModel::ThreeD);
    CHECK(rhs3 == 6);
    CHECK((D3_eff - D3).cwiseAbs().maxCoeff() <= 1e-10 * D3.cwiseAbs().maxCoeff());
}

TEST_CASE("soft inclusion lowers every diagonal; effective tensor SPD") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {10, 10, 1}, {1, 1, 1});
    Region inc;
    inc.shape = Region::Shape::Ellipse;
    inc.frame = Region::Frame::Element;
    inc.center = Vec3(0.5, 0.5, 0);
    inc.half_size = Vec3(0.3, 0.3, 0);
    inc.mat = {1.0, 0.3};
    auto mat = rasterize_regions(mh, {1e3, 0.3}, {inc}, ElasticModel::PlaneStress);
    const Mat D_eff = homogenize(mh, mat, 0);
    const Mat D = elasticity_tensor(1e3, 0.3, ElasticModel::PlaneStress);
    for (int i = 0; i < 3; ++i) CHECK(D_eff(i, i) < D(i, i));
    Eigen::SelfAdjointEigenSolver<Mat> eig(D_eff);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("checkerboard symmetry: D11 equals D22") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {8, 8, 1}, {1, 1, 1});
    MaterialField mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    for (long c = 0; c < mh.global_fine_cells(); ++c) {
        const auto cc = mh.global_fine.cell_coords(c);
        mat.young[c] = (cc[0] + cc[1]) % 2 == 0 ? 1e3 : 1.0;
    }
    const Mat D_eff = homogenize(mh, mat, 0);
    CHECK(std::abs(D_eff(0, 0) - D_eff(1, 1)) <= 1e-8 * D_eff(0, 0));
}

TEST_CASE("effective tensor is invariant under 90-degree rotation of a 4-fold field") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {12, 12, 1}, {1, 1, 1});
    Region sq;
    sq.shape = Region::Shape::Rectangle;
    sq.center = Vec3(0.5, 0.5, 0);
    sq.half_size = Vec3(0.25, 0.25, 0);
    sq.mat = {1.0, 0.3};
    auto mat = rasterize_regions(mh, {1e3, 0.3}, {sq}, ElasticModel::PlaneStress);
    MaterialField rot = mat;
    const int n = 12;
    for (long c = 0; c < mh.global_fine_cells(); ++c) {
        const auto cc = mh.global_fine.cell_coords(c);
        const long src = mh.global_fine.cell_id(n - 1 - cc[1], cc[0]);
        rot.young[c] = mat.young[src];
        rot.poisson[c] = mat.poisson[src];
    }
    const Mat Da = homogenize(mh, mat, 0);
    const Mat Db = homogenize(mh, rot, 0);
    CHECK(std::abs(Da(0, 0) - Db(1, 1)) <= 1e-8 * Da(0, 0));
    CHECK(std::abs(Da(1, 1) - Db(0, 0)) <= 1e-8 * Da(1, 1));
    CHECK(std::abs(Da(2, 2) - Db(2, 2)) <= 1e-8 * Da(2, 2));
}

TEST_CASE("homogenized solve on a homogeneous structure") {
    auto mh = build_hierarchy(2, {4, 2, 1}, {8, 8, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {1e3, 0.3}, ElasticModel::PlaneStress);
    const ProblemBcs bcs = cantilever_bcs(4, 2);

    std::vector<Mat> tensors(mh.coarse_elements(), homogenize(mh, mat, 0));
    const HomogenizedSolution hs = homogenized_solve(mh, tensors, bcs);
    CHECK(hs.dofs == 2 * 15 - 6);  // 5x3 coarse nodes minus the clamped side
    CHECK(hs.rhs_cols == 3);

    // no heterogeneity penalty: identical to plain FEM on the coarse grid
    auto coarse_as_fine = build_hierarchy(2, {4, 2, 1}, {1, 1, 1}, {1, 1, 1});
    auto coarse_mat = uniform_material(coarse_as_fine, {1e3, 0.3}, ElasticModel::PlaneStress);
    const FineSolution coarse_bench = solve_fine(coarse_as_fine, coarse_mat, bcs);
    CHECK((hs.U - coarse_bench.u).norm() <= 1e-10 * coarse_bench.u.norm());

    // against the fine benchmark only coarse discretization error remains;
    // a 4x2 bilinear grid in bending carries a sizable but bounded error
    const FineSolution bench = solve_fine(mh, mat, bcs);
    const double ru = effectivity_displacement(hs.fine_field, bench.u, mh);
    CHECK(ru < 0.5);

    ProblemBcs zero = bcs;
    zero.loads.clear();
    const HomogenizedSolution hz = homogenized_solve(mh, tensors, zero);
    CHECK(hz.fine_field.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("substructuring equals the fine benchmark") {
    auto mh = build_hierarchy(2, {2, 2, 1}, {6, 6, 1}, {1, 1, 1});
    MaterialField mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    Rng rng(61);
    for (auto& e : mat.young) e = std::pow(1e3, rng.uniform());
    const ProblemBcs bcs = cantilever_bcs(2, 2);

    const FineSolution bench = solve_fine(mh, mat, bcs);
    const SubstructureSolution sub = substructure_solve(mh, mat, bcs);
    CHECK((sub.u - bench.u).norm() / bench.u.norm() <= 1e-10);
    CHECK(sub.rhs_cols == 2 * classify_nodes(mh).b());

    auto mh1 = build_hierarchy(2, {1, 1, 1}, {5, 5, 1}, {1, 1, 1});
    auto mat1 = uniform_material(mh1, {1e3, 0.3}, ElasticModel::PlaneStress);
    const ProblemBcs bcs1 = cantilever_bcs(1, 1);
    const FineSolution bench1 = solve_fine(mh1, mat1, bcs1);
    const SubstructureSolution sub1 = substructure_solve(mh1, mat1, bcs1);
    CHECK((sub1.u - bench1.u).norm() / bench1.u.norm() <= 1e-10);
}

TEST_CASE("substructuring handles interior loads through the condensed rhs") {
    auto mh = build_hierarchy(2, {2, 1, 1}, {5, 5, 1}, {1, 1, 1});
    MaterialField mat = uniform_material(mh, {10.0, 0.3}, ElasticModel::PlaneStress);
    ProblemBcs bcs = cantilever_bcs(2, 1);
    LoadSpec interior;
    interior.kind = LoadSpec::Kind::PointForce;
    interior.at = Vec3(0.4, 0.4, 0);  // strictly inside element 0
    interior.vector = Vec3(0.2, -0.5, 0);
    bcs.loads.push_back(interior);
    const FineSolution bench = solve_fine(mh, mat, bcs);
    const SubstructureSolution sub = substructure_solve(mh, mat, bcs);
    CHECK((sub.u - bench.u).norm() / bench.u.norm() <= 1e-10);
}

TEST_CASE("substructuring refuses above its caps") {
    auto mh = build_hierarchy(2, {2, 2, 1}, {6, 6, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    const ProblemBcs bcs = cantilever_bcs(2, 2);
    CHECK_THROWS_AS(substructure_solve(mh, mat, bcs, 10), NumericalError);
    CHECK_THROWS_AS(substructure_solve(mh, mat, bcs, 20000, 8), NumericalError);
}

TEST_CASE("substructuring nnz exceeds the CBN nnz on the reference instance") {
    auto mh = build_hierarchy(2, {4, 2, 1}, {10, 10, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    MaterialField mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    Rng rng(67);
    for (auto& e : mat.young) e = rng.uniform() < 0.25 ? 1.0 : 1e3;
    const ProblemBcs bcs = cantilever_bcs(4, 2);

    CbnModel model = build_cbn_model(mh, ns, layout, mat);
    CoarseSystem sys = assemble_coarse(model, bcs);
    CoarseSolution sol = solve_coarse(sys, layout);
    const SubstructureSolution sub = substructure_solve(mh, mat, bcs);
    CHECK(sub.nnz > sol.nnz);
}
