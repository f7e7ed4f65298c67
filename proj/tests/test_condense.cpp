#include "cbn/cbn_solver.hpp"

#include <doctest.h>

#include <filesystem>

using namespace cbn;

namespace {

MaterialField random_contrast_field(const MeshHierarchy& mh, Rng& rng, double max_contrast) {
    MaterialField mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    for (auto& e : mat.young) e = std::pow(max_contrast, rng.uniform());
    return mat;
}

}  // namespace

TEST_CASE("partition blocks reassemble the local stiffness exactly") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {4, 3, 1}, {1.0, 0.8, 1});
    Rng rng(31);
    auto mat = random_contrast_field(mh, rng, 1e3);
    const SpMat k = assemble_local_stiffness(mh, mat, 0);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(k, ns, 2);

    CHECK(long(p.boundary_dofs.size()) == 2 * ns.b());
    CHECK(long(p.interior_dofs.size()) == 2 * ns.i());
    CHECK((Mat(p.k_bi) - Mat(p.k_ib).transpose()).cwiseAbs().maxCoeff() == 0.0);

    Mat back = Mat::Zero(k.rows(), k.cols());
    const Mat kb = Mat(p.k_b), ki = Mat(p.k_i), kib = Mat(p.k_ib), kbi = Mat(p.k_bi);
    for (std::size_t r = 0; r < p.boundary_dofs.size(); ++r)
        for (std::size_t c = 0; c < p.boundary_dofs.size(); ++c)
            back(p.boundary_dofs[r], p.boundary_dofs[c]) = kb(long(r), long(c));
    for (std::size_t r = 0; r < p.interior_dofs.size(); ++r)
        for (std::size_t c = 0; c < p.interior_dofs.size(); ++c)
            back(p.interior_dofs[r], p.interior_dofs[c]) = ki(long(r), long(c));
    for (std::size_t r = 0; r < p.interior_dofs.size(); ++r)
        for (std::size_t c = 0; c < p.boundary_dofs.size(); ++c)
            back(p.interior_dofs[r], p.boundary_dofs[c]) = kib(long(r), long(c));
    for (std::size_t r = 0; r < p.boundary_dofs.size(); ++r)
        for (std::size_t c = 0; c < p.interior_dofs.size(); ++c)
            back(p.boundary_dofs[r], p.interior_dofs[c]) = kbi(long(r), long(c));
    CHECK((Mat(k) - back).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degenerate 1x1 local mesh: empty interior, Phi has zero rows") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {1, 1, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {1e3, 0.3}, ElasticModel::PlaneStress);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    CHECK(p.interior_dofs.empty());
    const auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    const auto bez = build_psi(mh, ns, layout);
    const CondensedBasis cb = condense(p, bez);
    CHECK(cb.phi.rows() == 0);
    CHECK(cb.full_local.rows() == 8);
    CHECK(cb.rhs_columns == 24);
}

TEST_CASE("2x2 local mesh: interior block is one node") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {2, 2, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {5.0, 0.25}, ElasticModel::PlaneStress);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    CHECK(p.k_i.rows() == 2);
    const Mat M = full_boundary_map(p);
    CHECK(M.rows() == 2);
    CHECK(M.cols() == 16);
    // row sums 1 per component
    Vec ones_b(16);
    for (int r = 0; r < 8; ++r) { ones_b[2 * r] = 1.0; ones_b[2 * r + 1] = 0.0; }
    Vec mx = M * ones_b;
    CHECK(mx[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mx[1] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("condense matches the dense boundary-interior oracle M * Psi") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {4, 4, 1}, {1, 1, 1});
    Rng rng(41);
    auto mat = random_contrast_field(mh, rng, 1e3);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    const auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    const auto bez = build_psi(mh, ns, layout);

    const CondensedBasis cb = condense(p, bez);
    CHECK(cb.rhs_columns == int(6 * layout.segments.size()));
    CHECK(cb.residual_rel <= 1e-9);

    const Mat M = full_boundary_map(p);
    const Mat phi_oracle = M * Mat(bez.psi);
    CHECK((cb.phi - phi_oracle).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1.0, phi_oracle.cwiseAbs().maxCoeff()));

    // material dependence: homogeneous element gives a different map
    auto uni = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    const PartitionedStiffness pu = partition(assemble_local_stiffness(mh, uni, 0), ns, 2);
    const Mat Mu = full_boundary_map(pu);
    CHECK((M - Mu).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("full boundary map refuses above the column cap") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {10, 10, 1}, {1, 1, 1});
    auto mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    CHECK_THROWS_AS(full_boundary_map(p, 40), NumericalError);
    CHECK_NOTHROW(full_boundary_map(p, 80));
}

TEST_CASE("rigid translation and rotation pass through the condensed basis") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {6, 6, 1}, {1, 1, 1});
    Rng rng(43);
    auto mat = random_contrast_field(mh, rng, 1e6);
    const NodeSets ns = classify_nodes(mh);
    const PartitionedStiffness p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    const auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    const CondensedBasis cb = condense(p, build_psi(mh, ns, layout));

    // translation: Q = 1 per component -> unit field on every fine dof
    Vec Qx(layout.local_dofs());
    for (int c = 0; c < layout.local_cbn_count; ++c) { Qx[2 * c] = 1.0; Qx[2 * c + 1] = 0.0; }
    const Vec ux = cb.full_local * Qx;
    for (long n = 0; n < mh.local_nodes(); ++n) {
        CHECK(std::abs(ux[2 * n] - 1.0) <= 1e-12);
        CHECK(std::abs(ux[2 * n + 1]) <= 1e-12);
    }

    // rotation: Q = theta x X_cbn -> theta x x on every fine node
    Vec Qr(layout.local_dofs());
    for (int c = 0; c < layout.local_cbn_count; ++c) {
        const Vec3 x = layout.local_cbn_pos[c];
        Qr[2 * c] = -x[1];
        Qr[2 * c + 1] = x[0];
    }
    const Vec ur = cb.full_local * Qr;
    for (long n = 0; n < mh.local_nodes(); ++n) {
        const Vec3 x = mh.local_node_pos(n);
        CHECK(std::abs(ur[2 * n] - (-x[1])) <= 1e-10);
        CHECK(std::abs(ur[2 * n + 1] - x[0]) <= 1e-10);
    }
}

TEST_CASE("condensation is invariant under uniform modulus scaling") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {5, 5, 1}, {1, 1, 1});
    Rng rng(47);
    auto mat = random_contrast_field(mh, rng, 1e3);
    auto scaled = mat;
    for (auto& e : scaled.young) e *= 137.0;
    const NodeSets ns = classify_nodes(mh);
    const auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    const auto bez = build_psi(mh, ns, layout);
    const CondensedBasis a = condense(partition(assemble_local_stiffness(mh, mat, 0), ns, 2), bez);
    const CondensedBasis b =
        condense(partition(assemble_local_stiffness(mh, scaled, 0), ns, 2), bez);
    CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, a.phi.cwiseAbs().maxCoeff()));
}

TEST_CASE("condensation is bitwise deterministic") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {6, 6, 1}, {1, 1, 1});
    Rng rng(53);
    auto mat = random_contrast_field(mh, rng, 1e4);
    const NodeSets ns = classify_nodes(mh);
    const auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    const auto bez = build_psi(mh, ns, layout);
    const auto p1 = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    const auto p2 = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    const CondensedBasis a = condense(p1, bez);
    const CondensedBasis b = condense(p2, bez);
    REQUIRE(a.phi.size() == b.phi.size());
    CHECK(std::memcmp(a.phi.data(), b.phi.data(), sizeof(double) * a.phi.size()) == 0);
}

TEST_CASE("phi disk cache round-trips and keys on both hashes") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "cbn_phi_cache_test").string();
    fs::remove_all(dir);

    auto mh = build_hierarchy(2, {1, 1, 1}, {4, 4, 1}, {1, 1, 1});
    Rng rng(59);
    auto mat = random_contrast_field(mh, rng, 1e3);
    const NodeSets ns = classify_nodes(mh);
    const auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    const auto bez = build_psi(mh, ns, layout);
    const auto p = partition(assemble_local_stiffness(mh, mat, 0), ns, 2);
    const CondensedBasis cb = condense(p, bez);

    const std::uint64_t lh = layout.layout_hash(mh);
    const std::uint64_t mhash = mat.element_hash(mh, 0);
    save_phi_cache(dir, lh, mhash, cb);

    CondensedBasis loaded;
    REQUIRE(load_phi_cache(dir, lh, mhash, p, loaded));
    CHECK(loaded.rhs_columns == cb.rhs_columns);
    CHECK((loaded.full_local - cb.full_local).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.phi - cb.phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Mat(loaded.psi) - Mat(cb.psi)).cwiseAbs().maxCoeff() == 0.0);

    CondensedBasis miss;
    CHECK_FALSE(load_phi_cache(dir, lh, mhash + 1, p, miss));
    CHECK_FALSE(load_phi_cache(dir, lh + 1, mhash, p, miss));
    fs::remove_all(dir);
}
