#include "cbn/mesh.hpp"

#include <doctest.h>

#include <set>

using namespace cbn;

TEST_CASE("hierarchy counts at the reference scales") {
    // 2x4 coarse, 10x10 local fine
    auto mh = build_hierarchy(2, {4, 2, 1}, {10, 10, 1}, {1.0, 1.0, 1.0});
    CHECK(mh.coarse_elements() == 8);
    CHECK(mh.local_nodes() == 11 * 11);
    CHECK(mh.global_fine_nodes() == 41 * 21);
    CHECK(mh.global_dofs() == 1722);

    auto tiny = build_hierarchy(2, {1, 1, 1}, {1, 1, 1}, {1.0, 1.0, 1.0});
    CHECK(tiny.coarse_elements() == 1);
    CHECK(tiny.local_nodes() == 4);

    auto mh3 = build_hierarchy(3, {2, 2, 8}, {10, 10, 10}, {1.0, 1.0, 1.0});
    CHECK(mh3.coarse_elements() == 32);
    CHECK(mh3.local_nodes() == 11 * 11 * 11);
}

TEST_CASE("hierarchy rejects invalid requests") {
    CHECK_THROWS_AS(build_hierarchy(2, {0, 2, 1}, {2, 2, 1}, {1, 1, 1}), ConfigError);
    CHECK_THROWS_AS(build_hierarchy(2, {2, 2, 1}, {2, -1, 1}, {1, 1, 1}), ConfigError);
    CHECK_THROWS_AS(build_hierarchy(2, {2, 2, 1}, {2, 2, 1}, {1, 0, 1}), ConfigError);
    CHECK_THROWS_AS(build_hierarchy(4, {2, 2, 1}, {2, 2, 1}, {1, 1, 1}), ConfigError);
}

TEST_CASE("interface nodes coincide between neighbor elements") {
    auto mh = build_hierarchy(2, {2, 1, 1}, {3, 3, 1}, {0.5, 0.25, 1.0});
    // right edge of element 0 vs left edge of element 1
    for (int j = 0; j <= 3; ++j) {
        const long a = mh.global_node_of(0, mh.local.node_id(3, j));
        const long b = mh.global_node_of(1, mh.local.node_id(0, j));
        CHECK(a == b);
        CHECK(mh.global_node_pos(a).isApprox(mh.element_origin(1) + mh.local_node_pos(mh.local.node_id(0, j))));
    }
}

TEST_CASE("node classification counts") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {10, 10, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    CHECK(ns.corner.size() == 4);
    CHECK(ns.boundary.size() == 40);
    CHECK(ns.interior.size() == 81);

    auto tiny = build_hierarchy(2, {1, 1, 1}, {1, 1, 1}, {1, 1, 1});
    auto tns = classify_nodes(tiny);
    CHECK(tns.boundary.size() == 4);
    CHECK(tns.interior.size() == 0);
    CHECK(tns.corner.size() == 4);

    auto big = build_hierarchy(2, {1, 1, 1}, {64, 64, 1}, {1, 1, 1});
    CHECK(classify_nodes(big).boundary.size() == 256);
}

TEST_CASE("classification is a partition ordered by node id") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {7, 4, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    std::set<int> seen;
    for (int n : ns.boundary) seen.insert(n);
    for (int n : ns.interior) CHECK(seen.insert(n).second);
    CHECK(long(seen.size()) == mh.local_nodes());
    CHECK(std::is_sorted(ns.boundary.begin(), ns.boundary.end()));
    CHECK(std::is_sorted(ns.interior.begin(), ns.interior.end()));
    for (int c : ns.corner) CHECK(ns.boundary_row[c] >= 0);
}

TEST_CASE("corners-only CBN layout on a square element") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {10, 10, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    CHECK(layout.segments.size() == 4);
    CHECK(layout.local_cbn_count == 12);
    CHECK(layout.global_cbn_count == 12);
    CHECK(layout.dof_count() == 24);
    CHECK(layout.min_segment_intervals() == 10);

    // stations sit at exact thirds of arclength along each segment
    for (const auto& seg : layout.segments) {
        const Vec3 p0 = layout.local_cbn_pos[seg.cbn[0]];
        const Vec3 p3 = layout.local_cbn_pos[seg.cbn[3]];
        for (int m = 1; m <= 2; ++m) {
            const Vec3 expect = p0 + (m / 3.0) * (p3 - p0);
            CHECK((layout.local_cbn_pos[seg.cbn[m]] - expect).norm() <=
                  1e-14 * (p3 - p0).norm());
        }
        CHECK(layout.local_cbn_is_bridge[seg.cbn[0]]);
        CHECK(layout.local_cbn_is_bridge[seg.cbn[3]]);
        CHECK_FALSE(layout.local_cbn_is_bridge[seg.cbn[1]]);
        CHECK_FALSE(layout.local_cbn_is_bridge[seg.cbn[2]]);
    }
}

TEST_CASE("bridge policies: per-side counts and validation") {
    auto mh = build_hierarchy(2, {1, 1, 1}, {10, 10, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);

    // 2 per side + corners -> 8 bridge nodes, 8 segments, 24 CBNs, 48 DOFs
    auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    CHECK(layout.segments.size() == 8);
    CHECK(layout.local_cbn_count == 24);
    CHECK(layout.dof_count() == 48);

    // all 40 boundary nodes -> 40 segments, 120 CBNs, 240 DOFs
    auto all = place_cbns(mh, ns, {BridgePolicy::AllBoundary, 2});
    CHECK(all.segments.size() == 40);
    CHECK(all.local_cbn_count == 120);
    CHECK(all.dof_count() == 240);

    // 10 intervals are not divisible by (4-1)
    CHECK_THROWS_AS(place_cbns(mh, ns, {BridgePolicy::PerSide, 4}), ConfigError);
    CHECK_THROWS_AS(place_cbns(mh, ns, {BridgePolicy::PerSide, 1}), ConfigError);
}

TEST_CASE("CBN numbering is conforming across shared interfaces") {
    auto mh = build_hierarchy(2, {3, 2, 1}, {6, 6, 1}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});

    // neighboring elements 0 and 1 share their x-interface
    auto ids_on = [&](long e, double xcoord) {
        std::vector<std::pair<double, long>> ids;  // (y, id) sorted by y
        const Vec3 o = mh.element_origin(e);
        for (int lc = 0; lc < layout.local_cbn_count; ++lc) {
            const Vec3 p = o + layout.local_cbn_pos[lc];
            if (std::abs(p[0] - xcoord) < 1e-12)
                ids.emplace_back(p[1], layout.elem_to_global[e][lc]);
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    const auto right_of_0 = ids_on(0, 1.0);
    const auto left_of_1 = ids_on(1, 1.0);
    REQUIRE(right_of_0.size() == left_of_1.size());
    CHECK(right_of_0.size() == 7);  // 2 segments x 3 + shared endpoint
    for (std::size_t i = 0; i < right_of_0.size(); ++i) {
        CHECK(right_of_0[i].second == left_of_1[i].second);
        CHECK(right_of_0[i].first == doctest::Approx(left_of_1[i].first).epsilon(1e-14));
    }
}

TEST_CASE("3D layout: corners-only cube and the DOF-count formula") {
    auto mh = build_hierarchy(3, {1, 1, 1}, {6, 6, 6}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::CornersOnly, 2});
    CHECK(layout.faces.size() == 6);
    // 8 corners + 12 edges x 2 interior stations + 6 faces x 4 interior
    CHECK(layout.local_cbn_count == 56);
    CHECK(layout.dof_count() == 168);
    CHECK(layout.dof_count() == cbn_dof_formula_3d(8));

    auto l3 = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    // 3x3 bridge grid per face -> r = 26 bridge nodes
    CHECK(l3.dof_count() == cbn_dof_formula_3d(26));
    CHECK(l3.dof_count() == 654);
}

TEST_CASE("3D interface conformity") {
    auto mh = build_hierarchy(3, {2, 1, 1}, {4, 4, 4}, {1, 1, 1});
    auto ns = classify_nodes(mh);
    auto layout = place_cbns(mh, ns, {BridgePolicy::PerSide, 3});
    std::set<long> left, right;
    for (int lc = 0; lc < layout.local_cbn_count; ++lc) {
        const Vec3 p0 = mh.element_origin(0) + layout.local_cbn_pos[lc];
        const Vec3 p1 = mh.element_origin(1) + layout.local_cbn_pos[lc];
        if (std::abs(p0[0] - 1.0) < 1e-12) left.insert(layout.elem_to_global[0][lc]);
        if (std::abs(p1[0] - 1.0) < 1e-12) right.insert(layout.elem_to_global[1][lc]);
    }
    CHECK(left == right);
    CHECK(left.size() == 49);  // 7x7 station grid on the shared face
}
