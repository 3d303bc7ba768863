#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "awnet/affinity.hpp"
#include "test_helpers.hpp"

using namespace awnet;

namespace {

/// Stored weight for an unordered pair, 0 if absent.
double find_weight(const AffinityGraph& g, std::size_t a, std::size_t b) {
    const auto u = static_cast<std::uint32_t>(std::min(a, b));
    const auto v = static_cast<std::uint32_t>(std::max(a, b));
    for (const auto& e : g.edges)
        if (e.u == u && e.v == v)
            return e.w;
    return 0.0;
}

} // namespace

TEST_CASE("adjacent equal-intensity voxels with sigma_x 4 weigh e^(-1/16)") {
    Volume v(Dims{1, 1, 2}, 0.5f);
    AffinityParams p;
    p.sigma_i = 0.05;
    p.sigma_x = 4.0;
    p.radius = 1;
    const AffinityGraph g = build_affinity(v, p);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].w == doctest::Approx(std::exp(-1.0 / 16.0)).epsilon(1e-12));
    CHECK(g.edges[0].w == doctest::Approx(0.93941).epsilon(1e-5));
}

TEST_CASE("unit exponents in both factors give e^-2") {
    // |dF|^2 = sigma_i^2 and |dX|^2 = sigma_x^2 make each exponent -1.
    AffinityParams p;
    p.sigma_i = 0.3;
    p.sigma_x = 2.0; // distance 2 along one axis -> |dX|^2 = 4 = sigma_x^2
    p.radius = 2;
    Volume v(Dims{1, 1, 3});
    v.data = {0.2f, 0.5f, 0.2f + 0.3f};
    const AffinityGraph g = build_affinity(v, p);
    const double w = find_weight(g, 0, 2);
    // float storage rounds the 0.3 intensity gap; compare against the
    // same-rounded expectation.
    const double df = static_cast<double>(v.data[2]) - static_cast<double>(v.data[0]);
    const double expected = std::exp(-df * df / (0.3 * 0.3)) * std::exp(-4.0 / 4.0);
    CHECK(w == doctest::Approx(expected).epsilon(1e-12));
    CHECK(w == doctest::Approx(std::exp(-2.0)).epsilon(1e-4));
}

TEST_CASE("pairs beyond the radius carry zero weight") {
    Volume v(Dims{1, 1, 5}, 0.5f);
    AffinityParams p;
    p.radius = 2;
    const AffinityGraph g = build_affinity(v, p);
    CHECK(find_weight(g, 0, 3) == 0.0);
    CHECK(find_weight(g, 0, 4) == 0.0);
    CHECK(find_weight(g, 0, 2) > 0.0);
}

TEST_CASE("degree examples") {
    SUBCASE("high-contrast pair decays below the storage floor: degree 0") {
        Volume v(Dims{1, 1, 2});
        v.data = {0.0f, 1.0f};
        AffinityParams p;
        p.sigma_i = 0.2; // exp(-25) ~ 1.4e-11 < 1e-8
        p.radius = 1;
        const AffinityGraph g = build_affinity(v, p);
        CHECK(g.edges.empty());
        CHECK(g.degree(0) == 0.0);
        CHECK(g.degree(1) == 0.0);
    }

    SUBCASE("two-voxel volume: both degrees equal the single edge weight") {
        Volume v(Dims{1, 1, 2});
        v.data = {0.4f, 0.5f};
        AffinityParams p;
        p.sigma_i = 0.5;
        const AffinityGraph g = build_affinity(v, p);
        REQUIRE(g.edges.size() == 1);
        CHECK(g.degree(0) == doctest::Approx(g.edges[0].w).epsilon(1e-15));
        CHECK(g.degree(1) == doctest::Approx(g.edges[0].w).epsilon(1e-15));
    }

    SUBCASE("uniform 2x2x2 with huge sigma_x: every degree tends to 7") {
        Volume v(Dims{2, 2, 2}, 0.3f);
        AffinityParams p;
        p.sigma_x = 1e9;
        p.radius = 3;
        const AffinityGraph g = build_affinity(v, p);
        for (std::size_t u = 0; u < 8; ++u)
            CHECK(g.degree(u) == doctest::Approx(7.0).epsilon(1e-6));
    }

    SUBCASE("degree index out of range throws") {
        Volume v(Dims{1, 1, 2}, 0.5f);
        const AffinityGraph g = build_affinity(v, AffinityParams{});
        CHECK_THROWS_AS(g.degree(2), invalid_argument_error);
    }
}

TEST_CASE("stored weights match the defining formula (symmetric by construction)") {
    PhantomSpec spec;
    spec.dims = Dims{4, 4, 4};
    spec.background_intensity = 0.3;
    spec.ellipsoids.push_back({2, 2, 2, 1.5, 1.5, 1.5, 0.8, 1});
    spec.noise_sigma = 0.05;
    spec.seed = 5;
    auto [vol, labels] = generate_phantom(spec);
    AffinityParams p;
    p.sigma_i = 0.5;
    p.sigma_x = 3.0;
    p.radius = 2;
    p.min_weight = 0.0;
    const AffinityGraph g = build_affinity(vol, p);
    REQUIRE(!g.edges.empty());
    for (const auto& e : g.edges) {
        CHECK(e.u < e.v);
        CHECK(e.w > 0.0);
        CHECK(e.w <= 1.0);
        // pair_weight is symmetric, so checking (v, u) covers both directions
        CHECK(e.w == doctest::Approx(testutil::pair_weight(vol, e.v, e.u, p)).epsilon(1e-12));
    }

    SUBCASE("no duplicate pairs") {
        std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
        for (const auto& e : g.edges)
            CHECK(++seen[{e.u, e.v}] == 1);
    }

    SUBCASE("neighbor count bound (2r+1)^3 - 1") {
        std::vector<int> counts(g.n, 0);
        for (const auto& e : g.edges) {
            ++counts[e.u];
            ++counts[e.v];
        }
        const int bound = (2 * p.radius + 1) * (2 * p.radius + 1) * (2 * p.radius + 1) - 1;
        for (int c : counts)
            CHECK(c <= bound);
    }
}

TEST_CASE("cached degrees equal the recomputed edge sums") {
    const Volume v = testutil::random_volume(Dims{5, 4, 3}, 21);
    AffinityParams p;
    p.sigma_i = 0.4;
    p.radius = 2;
    const AffinityGraph g = build_affinity(v, p);
    std::vector<double> recomputed(g.n, 0.0);
    for (const auto& e : g.edges) {
        recomputed[e.u] += e.w;
        recomputed[e.v] += e.w;
    }
    for (std::size_t u = 0; u < g.n; ++u) {
        if (recomputed[u] == 0.0)
            CHECK(g.degree(u) == 0.0);
        else
            CHECK(std::abs(g.degree(u) - recomputed[u]) / recomputed[u] <= 1e-12);
    }
}

TEST_CASE("sparsity structure depends only on dims and radius") {
    PhantomSpec spec;
    spec.dims = Dims{4, 4, 4};
    spec.background_intensity = 0.3;
    spec.ellipsoids.push_back({2, 2, 2, 1.5, 1.5, 1.5, 0.7, 1});
    spec.noise_sigma = 0.03;
    AffinityParams p;
    p.sigma_i = 2.0; // wide bandwidth: no weight underflows
    p.radius = 2;
    p.min_weight = 0.0;

    spec.seed = 1;
    auto [v1, l1] = generate_phantom(spec);
    spec.seed = 2;
    auto [v2, l2] = generate_phantom(spec);
    const AffinityGraph g1 = build_affinity(v1, p);
    const AffinityGraph g2 = build_affinity(v2, p);
    REQUIRE(g1.edges.size() == g2.edges.size());
    for (std::size_t i = 0; i < g1.edges.size(); ++i) {
        CHECK(g1.edges[i].u == g2.edges[i].u);
        CHECK(g1.edges[i].v == g2.edges[i].v);
    }
}

TEST_CASE("increasing sigma_i never decreases a weight") {
    const Volume v = testutil::random_volume(Dims{3, 3, 3}, 33);
    AffinityParams lo;
    lo.sigma_i = 0.3;
    lo.radius = 2;
    lo.min_weight = 0.0;
    AffinityParams hi = lo;
    hi.sigma_i = 0.9;
    const AffinityGraph glo = build_affinity(v, lo);
    const AffinityGraph ghi = build_affinity(v, hi);
    REQUIRE(glo.edges.size() == ghi.edges.size());
    for (std::size_t i = 0; i < glo.edges.size(); ++i)
        CHECK(ghi.edges[i].w >= glo.edges[i].w);
}

TEST_CASE("the exactness toggle bounds the dropped-weight error") {
    const Volume v = normalize(testutil::random_volume(Dims{4, 4, 4}, 44));
    AffinityParams exact;
    exact.sigma_i = 0.1;
    exact.radius = 3;
    exact.min_weight = 0.0;
    AffinityParams pruned = exact;
    pruned.min_weight = 1e-8;
    const AffinityGraph ge = build_affinity(v, exact);
    const AffinityGraph gp = build_affinity(v, pruned);
    CHECK(gp.edges.size() <= ge.edges.size());
    const double we = ge.total_weight();
    const double wp = gp.total_weight();
    CHECK(std::abs(we - wp) / we < 1e-6);
}

TEST_CASE("volumes under 2 voxels are rejected") {
    Volume v(Dims{1, 1, 1}, 0.5f);
    CHECK_THROWS_AS(build_affinity(v, AffinityParams{}), invalid_argument_error);
}

TEST_CASE("graph dump and binary cache round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "awnet_test_affinity";
    fs::create_directories(dir);
    const Volume v = testutil::random_volume(Dims{3, 3, 3}, 55);
    AffinityParams p;
    p.sigma_i = 0.5;
    const AffinityGraph g = build_affinity(v, p);

    save_graph(g, dir / "g.aff");
    const AffinityGraph g2 = load_graph(dir / "g.aff");
    REQUIRE(g2.n == g.n);
    REQUIRE(g2.edges.size() == g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        CHECK(g2.edges[i].u == g.edges[i].u);
        CHECK(g2.edges[i].v == g.edges[i].v);
        CHECK(g2.edges[i].w == g.edges[i].w);
    }
    for (std::size_t u = 0; u < g.n; ++u)
        CHECK(g2.degree(u) == g.degree(u));

    save_graph_text(g, dir / "g.txt");
    std::ifstream in(dir / "g.txt");
    std::size_t n = 0, m = 0;
    in >> n >> m;
    CHECK(n == g.n);
    CHECK(m == g.edges.size());
    std::size_t eu, ev;
    double ew;
    REQUIRE((in >> eu >> ev >> ew));
    CHECK(eu == g.edges[0].u);
    CHECK(ev == g.edges[0].v);
    CHECK(ew == doctest::Approx(g.edges[0].w).epsilon(1e-15));
}
