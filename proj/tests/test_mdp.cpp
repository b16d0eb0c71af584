#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <set>
#include <sstream>

#include "transit/mdp.hpp"

using namespace transit;

namespace {

City line_city(int n, NdpParams params) {
    std::vector<Eigen::Vector2d> pos;
    std::vector<StreetEdge> edges;
    for (int i = 0; i < n; ++i) pos.push_back({static_cast<double>(i) * 100.0, 0.0});
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 100.0});
    Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(n, n, 10.0);
    demand.diagonal().setZero();
    return City(std::move(pos), std::move(edges), std::move(demand), params);
}

}  // namespace

TEST_CASE("pair ids enumerate the upper triangle exactly once") {
    City city = line_city(6, NdpParams{2, 2, 6});
    SpCatalog catalog(city);
    std::set<int> ids;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) {
            int id = catalog.pair_id(i, j);
            CHECK(id == catalog.pair_id(j, i));
            CHECK(ids.insert(id).second);
            const auto& p = catalog.path(i, j);
            CHECK(p.front() == i);
            CHECK(p.back() == j);
        }
    CHECK(static_cast<int>(ids.size()) == catalog.num_pairs());
    CHECK(*ids.rbegin() == catalog.num_pairs() - 1);
}

TEST_CASE("initial extensions are all short-enough canonical paths") {
    City city = line_city(5, NdpParams{1, 2, 3});
    SpCatalog catalog(city);
    MdpState s = init_state(city, city.params(), 0.5);
    CHECK(s.t == 1);
    CHECK(s.extension_pending());
    auto actions = enumerate_extensions(city, s, catalog);
    // Line of 5: paths of length 2 (4 of them) and 3 (3 of them) fit MAX=3.
    CHECK(actions.size() == 7);
    for (const auto& a : actions) {
        CHECK(a.path.size() <= 3);
        CHECK(a.path.front() < a.path.back());  // canonical orientation
        CHECK_FALSE(a.prepend);
    }
    // Deterministic order: sorted by new terminal, then length.
    for (size_t k = 1; k < actions.size(); ++k) {
        int prev = actions[k - 1].new_terminal(), cur = actions[k].new_terminal();
        CHECK(prev <= cur);
        if (prev == cur) CHECK(actions[k - 1].path.size() <= actions[k].path.size());
    }
}

TEST_CASE("mid-route extensions attach disjoint paths at both ends") {
    City city = line_city(7, NdpParams{1, 2, 6});
    SpCatalog catalog(city);
    MdpState s = init_state(city, city.params(), 0.5);
    s.current = {2, 3};
    auto actions = enumerate_extensions(city, s, catalog);
    REQUIRE_FALSE(actions.empty());
    for (const auto& a : actions) {
        // Budget: at most 4 more stops.
        CHECK(a.path.size() <= 4);
        for (int v : a.path) {
            CHECK(v != 2);
            CHECK(v != 3);
        }
        if (a.prepend)
            CHECK(city.adjacent(a.path.back(), 2));
        else
            CHECK(city.adjacent(a.path.front(), 3));
        // Applying keeps the route a simple street path.
        MdpState next = apply_extension(s, a);
        Network probe{{next.current}};
        CHECK_NOTHROW(probe.validate(city));
    }
    bool has_prepend = false, has_append = false;
    for (const auto& a : actions) (a.prepend ? has_prepend : has_append) = true;
    CHECK(has_prepend);
    CHECK(has_append);
}

TEST_CASE("no extension may push the route past MAX") {
    City city = line_city(8, NdpParams{1, 2, 4});
    SpCatalog catalog(city);
    MdpState s = init_state(city, city.params(), 0.5);
    s.current = {3, 4, 5};
    auto actions = enumerate_extensions(city, s, catalog);
    for (const auto& a : actions)
        CHECK(s.current.size() + a.path.size() <= 4);
    s.current = {2, 3, 4, 5};
    CHECK(enumerate_extensions(city, s, catalog).empty());
}

TEST_CASE("halt actions follow the length window") {
    City city = line_city(8, NdpParams{1, 3, 6});
    SpCatalog catalog(city);
    MdpState s = init_state(city, city.params(), 0.5);
    s.t = 2;  // halt decision

    s.current = {2, 3};  // below MIN, extensions exist
    auto set = halt_actions(city, s, catalog);
    CHECK(set.can_continue);
    CHECK_FALSE(set.can_halt);

    s.current = {2, 3, 4};  // inside the window
    set = halt_actions(city, s, catalog);
    CHECK(set.can_continue);
    CHECK(set.can_halt);

    s.current = {1, 2, 3, 4, 5, 6};  // at MAX
    set = halt_actions(city, s, catalog);
    CHECK_FALSE(set.can_continue);
    CHECK(set.can_halt);
}

TEST_CASE("a deadlocked route may halt below MIN") {
    // Line of 4: a route [1,2] cannot be extended because every remaining
    // shortest path touches it, yet MIN is 3.
    City city = line_city(4, NdpParams{1, 3, 4});
    SpCatalog catalog(city);
    MdpState s = init_state(city, city.params(), 0.5);
    s.t = 2;
    s.current = {1, 2};
    CHECK(enumerate_extensions(city, {s.finished, s.current, 3, s.params, s.alpha}, catalog)
              .empty());
    auto set = halt_actions(city, s, catalog);
    CHECK(set.can_halt);
    CHECK_FALSE(set.can_continue);
}

TEST_CASE("oversized manual extensions are rejected") {
    City city = line_city(6, NdpParams{1, 2, 3});
    MdpState s = init_state(city, city.params(), 0.5);
    s.current = {2, 3};
    ExtensionAction big{{4, 5}, false};
    s.params.max_stops = 3;
    CHECK_THROWS(apply_extension(s, big));
}

TEST_CASE("rollouts produce valid complete networks") {
    for (int trial = 0; trial < 25; ++trial) {
        RngStream rng = RngStream::derive(12, "rollout", trial);
        City city = generate_city(CityKind::FourNearest, 12, 0.1, NdpParams{4, 3, 8}, rng);
        SpCatalog catalog(city);
        UniformRandomPolicy policy;
        auto ro = rollout(city, policy, city.params(), 0.5, catalog, rng);
        CHECK(ro.network.routes.size() == 4);
        CHECK_NOTHROW(ro.network.validate(city));
        for (const auto& r : ro.network.routes) {
            CHECK(r.size() >= 2);
            CHECK(r.size() <= 8);
        }
        // Exactly one halt per finished route.
        int halts = 0;
        for (const auto& d : ro.log.decisions)
            if (!d.extension && d.chosen_index == 1) ++halts;
        CHECK(halts == 4);
        CHECK(std::isfinite(ro.log.sum_logp()));
        CHECK(ro.log.sum_logp() <= 0.0);
    }
}

TEST_CASE("rollouts are reproducible from the stream and differ across seeds") {
    RngStream city_rng = RngStream::derive(13, "city");
    City city = generate_city(CityKind::FourGrid, 9, 0.0, NdpParams{3, 2, 6}, city_rng);
    SpCatalog catalog(city);
    UniformRandomPolicy policy;
    RngStream a = RngStream::derive(5, "ro");
    RngStream b = RngStream::derive(5, "ro");
    RngStream c = RngStream::derive(6, "ro");
    auto ra = rollout(city, policy, city.params(), 0.5, catalog, a);
    auto rb = rollout(city, policy, city.params(), 0.5, catalog, b);
    auto rc = rollout(city, policy, city.params(), 0.5, catalog, c);
    CHECK(ra.network.routes == rb.network.routes);
    CHECK(ra.network.routes != rc.network.routes);
}

TEST_CASE("episode logs serialize as one JSON object per line") {
    RngStream rng = RngStream::derive(14, "jsonl");
    City city = generate_city(CityKind::FourGrid, 9, 0.0, NdpParams{2, 2, 6}, rng);
    SpCatalog catalog(city);
    UniformRandomPolicy policy;
    auto ro = rollout(city, policy, city.params(), 0.5, catalog, rng);
    std::istringstream lines(ro.log.to_jsonl());
    std::string line;
    size_t count = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK((j["kind"] == "ext" || j["kind"] == "halt"));
        CHECK(j["n_candidates"].get<int>() >= 1);
        CHECK(j["logp"].get<double>() <= 0.0);
        ++count;
    }
    CHECK(count == ro.log.decisions.size());
}

TEST_CASE("single-route rollout completes a partial network") {
    RngStream rng = RngStream::derive(15, "single");
    City city = generate_city(CityKind::FourNearest, 10, 0.0, NdpParams{3, 2, 6}, rng);
    SpCatalog catalog(city);
    UniformRandomPolicy policy;
    auto ro = rollout(city, policy, city.params(), 0.5, catalog, rng);
    Network partial = ro.network;
    partial.routes.pop_back();
    Route fresh = rollout_single_route(city, partial, policy, 0.5, catalog, rng);
    CHECK(fresh.size() >= 2);
    Network probe = partial;
    probe.routes.push_back(fresh);
    CHECK_NOTHROW(probe.validate(city));

    Network wrong = ro.network;  // already complete
    CHECK_THROWS(rollout_single_route(city, wrong, policy, 0.5, catalog, rng));
}
