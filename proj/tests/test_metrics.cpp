#include "cbn/metrics.hpp"

#include <doctest.h>

using namespace cbn;

TEST_CASE("energy effectivity formula") {
    CHECK(effectivity_energy(5.0, 5.0) == 0.0);
    CHECK(effectivity_energy(2.0, 1.0) == doctest::Approx(1.0));
    CHECK(effectivity_energy(0.5, 1.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(effectivity_energy(1.0, 0.0), NumericalError);
}

TEST_CASE("displacement effectivity: identity, scaling, permutation invariance") {
    auto mh = build_hierarchy(2, {2, 1, 1}, {4, 4, 1}, {0.5, 1.2, 1});
    Rng rng(71);
    Vec u(mh.global_dofs());
    for (long i = 0; i < u.size(); ++i) u[i] = rng.uniform(-2, 2);

    CHECK(effectivity_displacement(u, u, mh) == 0.0);
    CHECK(effectivity_displacement(1.1 * u, u, mh) == doctest::Approx(0.01).epsilon(1e-12));

    Vec zero = Vec::Zero(mh.global_dofs());
    CHECK_THROWS_AS(effectivity_displacement(u, zero, mh), NumericalError);
    Vec short_u = u.head(u.size() - 2);
    CHECK_THROWS_AS(effectivity_displacement(short_u, u, mh), NumericalError);

    // exact invariance under a rigid relabeling of the nodes: mirror the
    // grid in x (weights are mirror-symmetric on a uniform grid)
    Vec u1 = 0.8 * u;
    const double r = effectivity_displacement(u1, u, mh);
    const auto& g = mh.global_fine;
    Vec up0(u.size()), up1(u.size());
    for (long n = 0; n < mh.global_fine_nodes(); ++n) {
        const auto c = g.node_coords(n);
        const long m = g.node_id(g.cells_along(0) - c[0], c[1]);
        for (int a = 0; a < 2; ++a) {
            up0[2 * m + a] = u[2 * n + a];
            up1[2 * m + a] = u1[2 * n + a];
        }
    }
    CHECK(effectivity_displacement(up1, up0, mh) == r);

    // weights integrate exactly: a constant field measures the domain area
    const Vec w = nodal_weights(mh.global_fine, mh.fine_h);
    CHECK(w.sum() == doctest::Approx(0.5 * 2 * 1.2).epsilon(1e-13));
}

TEST_CASE("property suite passes on heterogeneous elements and flags corruption") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {8, 8, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    MaterialField mat = uniform_material(mh, {1.0, 0.3}, ElasticModel::PlaneStress);
    Rng rng(73);
    for (auto& e : mat.young) e = std::pow(1e6, rng.uniform());
    CbnModel model = build_cbn_model(mh, ns, layout, mat);

    Rng trials(74);
    PropertyReport rep = property_suite(model, 0, 100, trials);
    CHECK(rep.all_pass());
    CHECK(rep.checks.size() == 3);
    const std::string log = rep.to_log();
    CHECK(log.find("partition_of_unity") != std::string::npos);
    CHECK(log.find("PASS") != std::string::npos);

    // corrupt one interior basis entry by 1e-3: PU must fail
    auto corrupted = std::make_shared<CoarseOperatorData>(*model.ops[0]);
    corrupted->basis.full_local(2 * ns.interior[0], 3) += 1e-3;
    CbnModel bad = model;
    bad.ops[0] = corrupted;
    Rng trials2(74);
    PropertyReport brep = property_suite(bad, 0, 100, trials2);
    CHECK_FALSE(brep.all_pass());
    bool pu_failed = false;
    for (const auto& c : brep.checks)
        if (c.property == "partition_of_unity" && !c.pass()) pu_failed = true;
    CHECK(pu_failed);
}
