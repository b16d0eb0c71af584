#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "transit/bench.hpp"

using namespace transit;

// Each acceptance criterion prints exactly one PASS/FAIL line.  Criteria
// that need the published benchmark files or a fully trained checkpoint
// fail with an explanatory message when those artifacts are absent; they
// are never skipped silently.

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void criterion(int num, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s - %s\n", num, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", num, ": ", detail);
}

#ifndef TRANSIT_SOURCE_DIR
#define TRANSIT_SOURCE_DIR "."
#endif

struct BenchmarkRow {
    std::string name;
    int n, routes, min_stops, max_stops;
};

const std::vector<BenchmarkRow>& benchmark_table() {
    static const std::vector<BenchmarkRow> rows{
        {"Mandl", 15, 6, 2, 8},       {"Mumford0", 30, 12, 2, 15},
        {"Mumford1", 70, 15, 10, 30}, {"Mumford2", 110, 56, 10, 22},
        {"Mumford3", 127, 60, 12, 25},
    };
    return rows;
}

std::string benchmark_dir() { return std::string(TRANSIT_SOURCE_DIR) + "/data/benchmarks"; }

std::optional<City> load_named_benchmark(const BenchmarkRow& row, std::string* missing) {
    const std::string tt = benchmark_dir() + "/" + row.name + "TravelTimes.txt";
    const std::string dd = benchmark_dir() + "/" + row.name + "Demand.txt";
    if (!std::filesystem::exists(tt) || !std::filesystem::exists(dd)) {
        if (missing) *missing = tt + " (+Demand)";
        return std::nullopt;
    }
    return load_benchmark_files(tt, dd, NdpParams{row.routes, row.min_stops, row.max_stops});
}

std::optional<PolicyParams> load_full_scale_policy(std::string* missing) {
    const std::string path =
        std::string(TRANSIT_SOURCE_DIR) + "/data/models/full_scale.ckpt.json";
    if (!std::filesystem::exists(path)) {
        if (missing) *missing = path;
        return std::nullopt;
    }
    return PolicyParams::load(path);
}

double mean_ea_cost(const City& city, EaMode mode, const PolicyParams* policy, double alpha,
                    int num_seeds) {
    double sum = 0.0;
    for (int seed = 0; seed < num_seeds; ++seed) {
        EaConfig cfg;
        cfg.mode = mode;
        cfg.alpha = alpha;
        cfg.seed = static_cast<uint64_t>(seed);
        sum += run_evolution(city, cfg, policy).best_cost.total;
    }
    return sum / num_seeds;
}

// Brute-force transit itinerary oracle: dynamic programming over "at
// most k route legs" built from per-route riding-time matrices, iterated
// to a fixpoint.  Independent of the expanded-graph Dijkstra under test.
struct ItineraryOracle {
    Eigen::MatrixXd times;
    Eigen::MatrixXi transfers;

    ItineraryOracle(const City& city, const Network& network, double pt) {
        const int n = city.num_nodes();
        Eigen::MatrixXd ride = Eigen::MatrixXd::Constant(n, n, kInf);
        for (int i = 0; i < n; ++i) ride(i, i) = 0.0;
        for (const auto& route : network.routes) {
            std::vector<double> pref{0.0};
            for (size_t k = 0; k + 1 < route.size(); ++k)
                pref.push_back(pref.back() + city.street_time(route[k], route[k + 1]));
            for (size_t a = 0; a < route.size(); ++a)
                for (size_t b = 0; b < route.size(); ++b)
                    ride(route[a], route[b]) =
                        std::min(ride(route[a], route[b]), std::abs(pref[a] - pref[b]));
        }
        std::vector<Eigen::MatrixXd> d{ride};
        for (int k = 1; k < 4 * n; ++k) {
            Eigen::MatrixXd next = d.back();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int m = 0; m < n; ++m) {
                        if (m == i || m == j) continue;
                        next(i, j) = std::min(next(i, j), d.back()(i, m) + pt + ride(m, j));
                    }
            bool changed = ((next.array() < d.back().array() - 1e-12).any());
            d.push_back(std::move(next));
            if (!changed) break;
        }
        times = d.back();
        transfers = Eigen::MatrixXi::Constant(n, n, -1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (!std::isfinite(times(i, j))) continue;
                for (size_t k = 0; k < d.size(); ++k)
                    if (d[k](i, j) <= times(i, j) + 1e-9) {
                        transfers(i, j) = static_cast<int>(k);
                        break;
                    }
            }
        for (int i = 0; i < n; ++i) transfers(i, i) = 0;
    }
};

// Exhaustive simple-path minimizer with branch-and-bound pruning.
void dfs_min(const City& city, int node, int goal, double acc, std::vector<char>& used,
             double& best) {
    if (acc >= best) return;
    if (node == goal) {
        best = acc;
        return;
    }
    used[node] = 1;
    for (int next : city.neighbors(node))
        if (!used[next]) dfs_min(city, next, goal, acc + city.street_time(node, next), used, best);
    used[node] = 0;
}

PolicyParams tiny_policy(uint64_t seed) {
    ModelConfig mc;
    mc.layers = 1;
    mc.heads = 2;
    mc.dim = 8;
    mc.ff_dim = 16;
    mc.head_hidden = 8;
    mc.baseline_hidden = 8;
    RngStream rng = RngStream::derive(seed, "params");
    PolicyParams p = PolicyParams::random_init(mc, rng);
    p.norm.fitted = true;
    p.norm.node_mean = Eigen::VectorXd::Zero(ModelConfig::node_feats);
    p.norm.node_std = Eigen::VectorXd::Ones(ModelConfig::node_feats);
    p.norm.edge_mean = Eigen::VectorXd::Zero(ModelConfig::edge_feats);
    p.norm.edge_std = Eigen::VectorXd::Ones(ModelConfig::edge_feats);
    p.norm.global_mean = Eigen::VectorXd::Zero(ModelConfig::global_feats);
    p.norm.global_std = Eigen::VectorXd::Ones(ModelConfig::global_feats);
    p.norm.descriptor_mean = Eigen::VectorXd::Zero(ModelConfig::descriptor_feats);
    p.norm.descriptor_std = Eigen::VectorXd::Ones(ModelConfig::descriptor_feats);
    return p;
}

// Unit-scale city so the identity normalization keeps features O(1).
City unit_city(uint64_t seed, int n, NdpParams params) {
    RngStream rng = RngStream::derive(seed, "unit-city");
    City raw = generate_city(CityKind::FourNearest, n, 0.1, params, rng);
    std::vector<Eigen::Vector2d> pos;
    std::vector<StreetEdge> edges;
    for (const auto& p : raw.positions()) pos.push_back(p / 30000.0);
    for (auto e : raw.edges()) {
        e.time /= 2000.0;
        edges.push_back(e);
    }
    Eigen::MatrixXd demand = raw.demand() / 800.0;
    return City(std::move(pos), std::move(edges), std::move(demand), params);
}

struct PermutedInstance {
    City city;
    MdpState state;
    std::vector<ExtensionAction> candidates;
};

PermutedInstance permute_instance(const City& city, const MdpState& state,
                                  const std::vector<ExtensionAction>& candidates,
                                  const std::vector<int>& perm) {
    const int n = city.num_nodes();
    std::vector<Eigen::Vector2d> pos(n);
    Eigen::MatrixXd demand(n, n);
    for (int i = 0; i < n; ++i) {
        pos[perm[i]] = city.positions()[i];
        for (int j = 0; j < n; ++j) demand(perm[i], perm[j]) = city.demand()(i, j);
    }
    std::vector<StreetEdge> edges;
    for (const auto& e : city.edges()) edges.push_back({perm[e.a], perm[e.b], e.time});
    City pc(std::move(pos), std::move(edges), std::move(demand), city.params());

    auto map_route = [&](const Route& r) {
        Route out;
        for (int v : r) out.push_back(perm[v]);
        return out;
    };
    MdpState ps = state;
    ps.finished.routes.clear();
    for (const auto& r : state.finished.routes) ps.finished.routes.push_back(map_route(r));
    ps.current = map_route(state.current);

    std::vector<ExtensionAction> pcands;
    for (const auto& c : candidates) {
        ExtensionAction a = c;
        a.path.clear();
        for (int v : c.path) a.path.push_back(perm[v]);
        pcands.push_back(std::move(a));
    }
    return {std::move(pc), std::move(ps), std::move(pcands)};
}

}  // namespace

TEST_CASE("criterion 1: benchmark ingestion matches the published parameters") {
    std::ostringstream detail;
    bool pass = true;
    for (const auto& row : benchmark_table()) {
        std::string missing;
        auto city = load_named_benchmark(row, &missing);
        if (!city) {
            pass = false;
            detail << "missing benchmark files: " << missing << "; ";
            continue;
        }
        bool ok = city->num_nodes() == row.n && city->params().num_routes == row.routes &&
                  city->params().min_stops == row.min_stops &&
                  city->params().max_stops == row.max_stops;
        if (!ok) {
            pass = false;
            detail << row.name << " loaded with n=" << city->num_nodes() << "; ";
        }
    }
    if (pass) detail << "all five cities load with the expected n, S, MIN, MAX";
    criterion(1, pass, detail.str());
}

TEST_CASE("criterion 2: EA on the 15-node benchmark reaches the expected cost band") {
    std::string missing;
    auto city = load_named_benchmark(benchmark_table()[0], &missing);
    if (!city) {
        criterion(2, false, "missing benchmark files: " + missing);
        return;
    }
    double mean = mean_ea_cost(*city, EaMode::EA, nullptr, 1.0, 10);
    std::ostringstream d;
    d << "mean final C over 10 seeds = " << mean << " (required band [0.295, 0.345])";
    criterion(2, mean >= 0.295 && mean <= 0.345, d.str());
}

TEST_CASE("criterion 3: EA on the 30-node benchmark reaches the expected cost band") {
    std::string missing;
    auto city = load_named_benchmark(benchmark_table()[1], &missing);
    if (!city) {
        criterion(3, false, "missing benchmark files: " + missing);
        return;
    }
    double mean = mean_ea_cost(*city, EaMode::EA, nullptr, 1.0, 10);
    std::ostringstream d;
    d << "mean final C over 10 seeds = " << mean << " (required band [0.60, 0.70])";
    criterion(3, mean >= 0.60 && mean <= 0.70, d.str());
}

TEST_CASE("criterion 4: neural evolution beats plain EA on the 70-node benchmark") {
    std::string missing_city, missing_model;
    auto city = load_named_benchmark(benchmark_table()[2], &missing_city);
    auto policy = load_full_scale_policy(&missing_model);
    if (!city || !policy) {
        std::string why;
        if (!city) why += "missing benchmark files: " + missing_city + "; ";
        if (!policy) why += "missing full-scale checkpoint: " + missing_model;
        criterion(4, false, why);
        return;
    }
    double ea = mean_ea_cost(*city, EaMode::EA, nullptr, 1.0, 10);
    double sum_c = 0.0, sum_cp = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        EaConfig cfg;
        cfg.mode = EaMode::NEA;
        cfg.alpha = 1.0;
        cfg.seed = static_cast<uint64_t>(seed);
        auto r = run_evolution(*city, cfg, &*policy);
        sum_c += r.best_cost.total;
        sum_cp += r.best_cost.passenger_seconds / 60.0;
    }
    double nea = sum_c / 10.0, cp = sum_cp / 10.0;
    std::ostringstream d;
    d << "NEA mean C = " << nea << " vs EA " << ea << "; NEA mean C_p = " << cp
      << " min (required: NEA < EA and C_p in 24.95 +/- 1.5)";
    criterion(4, nea < ea && std::abs(cp - 24.95) <= 1.5, d.str());
}

TEST_CASE("criterion 5: neural evolution is at least as good as best-of-100 rollouts") {
    std::string missing_model;
    auto policy = load_full_scale_policy(&missing_model);
    if (!policy) {
        criterion(5, false, "missing full-scale checkpoint: " + missing_model);
        return;
    }
    bool pass = true;
    std::ostringstream d;
    for (int idx : {2, 3, 4}) {
        std::string missing_city;
        auto city = load_named_benchmark(benchmark_table()[idx], &missing_city);
        if (!city) {
            criterion(5, false, "missing benchmark files: " + missing_city);
            return;
        }
        double nea = mean_ea_cost(*city, EaMode::NEA, &*policy, 1.0, 10);
        double lc_sum = 0.0;
        for (int seed = 0; seed < 10; ++seed)
            lc_sum += run_lc(*city, *policy, 100, 1.0, 5.0, 300.0, seed).best_cost.total;
        double lc = lc_sum / 10.0;
        d << benchmark_table()[idx].name << ": NEA " << nea << " vs LC-100 " << lc << "; ";
        if (nea > lc) pass = false;
    }
    criterion(5, pass, d.str());
}

TEST_CASE("criterion 6: transit assignment matches brute-force itinerary enumeration") {
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        RngStream rng = RngStream::derive(600, "assign", trial);
        int n = 4 + static_cast<int>(rng.uniform_int(0, 4));
        int s = 1 + static_cast<int>(rng.uniform_int(0, 2));
        NdpParams params{s, 2, std::min(n, 5)};
        City city = generate_city(CityKind::FourNearest, n, 0.1, params, rng);
        SpCatalog catalog(city);
        UniformRandomPolicy policy;
        Network net = rollout(city, policy, params, 0.5, catalog, rng).network;

        auto got = assign_transit_times(city, net, 300.0);
        ItineraryOracle want(city, net, 300.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                bool gc = got.connected(i, j);
                bool wc = std::isfinite(want.times(i, j));
                if (gc != wc) {
                    ++mismatches;
                    continue;
                }
                if (!gc) continue;
                if (std::abs(got.trip_times(i, j) - want.times(i, j)) > 1e-9) ++mismatches;
                if (got.transfers(i, j) != want.transfers(i, j)) ++mismatches;
            }
    }
    std::ostringstream d;
    d << "200 random instances (n <= 8, S <= 3), " << mismatches << " entry mismatches";
    criterion(6, mismatches == 0, d.str());
}

TEST_CASE("criterion 7: drive times match exhaustive simple-path minimization") {
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        RngStream rng = RngStream::derive(700, "sp", trial);
        int n = 5 + static_cast<int>(rng.uniform_int(0, 7));
        City city = generate_city(CityKind::FourNearest, n, 0.15, NdpParams{1, 2, 4}, rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                double best = kInf;
                std::vector<char> used(n, 0);
                dfs_min(city, i, j, 0.0, used, best);
                if (std::abs(city.drive_times()(i, j) - best) > 1e-9 * std::max(1.0, best))
                    ++mismatches;
            }
    }
    std::ostringstream d;
    d << "100 random graphs (n <= 12), " << mismatches << " pair mismatches";
    criterion(7, mismatches == 0, d.str());
}

TEST_CASE("criterion 8: ten thousand fuzzed mutations preserve network feasibility") {
    int violations = 0, applications = 0;
    for (int c = 0; c < 10; ++c) {
        RngStream crng = RngStream::derive(800, "city", c);
        NdpParams params{3 + (c % 3), 2, 6 + (c % 4)};
        City city = generate_city(CityKind::FourNearest, 9 + (c % 5), 0.1, params, crng);
        SpCatalog catalog(city);
        EaConfig cfg;
        cfg.seed = 800 + c;
        CostWeights w = CostWeights::derive(city, 0.5);
        Population pop = init_population(city, cfg, catalog);
        for (int trial = 0; trial < 1000; ++trial) {
            RngStream rng = RngStream::derive(801, "fuzz", c * 10000 + trial);
            Individual& ind = pop[trial % pop.size()];
            Network out = trial % 2 == 0 ? mutate_type1(ind, city, catalog, rng)
                                         : mutate_type2(ind, city, rng);
            ++applications;
            if (out.routes.size() != static_cast<size_t>(params.num_routes)) ++violations;
            try {
                out.validate(city);  // throws on repeats / non-adjacent stops
            } catch (const std::exception&) {
                ++violations;
            }
            CostBreakdown cb = evaluate_network(city, out, w);
            if (cb.total <= ind.cost.total) ind = Individual{out, cb};
        }
    }
    std::ostringstream d;
    d << applications << " mutator applications, " << violations << " constraint violations";
    criterion(8, applications == 10000 && violations == 0, d.str());
}

TEST_CASE("criterion 9: uniform travel-time scaling leaves the total cost unchanged") {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        RngStream rng = RngStream::derive(900, "scale", trial);
        NdpParams params{3, 2, 7};
        City city = generate_city(CityKind::FourNearest, 10, 0.1, params, rng);
        SpCatalog catalog(city);
        UniformRandomPolicy policy;
        double alpha = rng.uniform();
        Network net = rollout(city, policy, params, alpha, catalog, rng).network;
        CostBreakdown c1 = total_cost(city, net, CostWeights::derive(city, alpha));

        double factor = 0.25 + 3.75 * rng.uniform();
        std::vector<StreetEdge> edges;
        for (auto e : city.edges()) {
            e.time *= factor;
            edges.push_back(e);
        }
        City scaled(std::vector<Eigen::Vector2d>(city.positions()), std::move(edges),
                    Eigen::MatrixXd(city.demand()), params);
        // Transfer penalty is a time too, so it scales with tau.
        CostWeights w2 = CostWeights::derive(scaled, alpha, 5.0, 300.0 * factor);
        CostBreakdown c2 = total_cost(scaled, net, w2);
        worst = std::max(worst, std::abs(c2.total - c1.total) / std::max(1e-12, c1.total));
    }
    std::ostringstream d;
    d << "50 random cities, worst relative cost change = " << worst << " (limit 1e-9)";
    criterion(9, worst < 1e-9, d.str());
}

TEST_CASE("criterion 10: policy distributions are equivariant under node relabeling") {
    PolicyParams params = tiny_policy(10);
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 20; ++trial) {
        RngStream rng = RngStream::derive(1000, "perm", trial);
        int n = 7 + static_cast<int>(rng.uniform_int(0, 4));
        NdpParams np{2, 2, 5};
        City city = unit_city(1000 + trial, n, np);
        SpCatalog catalog(city);

        MdpState state = init_state(city, np, rng.uniform());
        // Advance a random number of steps to diversify the states.
        UniformRandomPolicy walker;
        int steps = static_cast<int>(rng.uniform_int(0, 3));
        for (int k = 0; k < steps && !state.terminal(); ++k) {
            if (state.extension_pending()) {
                auto cands = enumerate_extensions(city, state, catalog);
                if (cands.empty()) break;
                auto [idx, lp] = walker.choose_extension(city, state, cands, rng);
                state = apply_extension(state, cands[idx]);
            } else {
                state = apply_halt(state, false);
            }
        }
        if (state.terminal() || !state.extension_pending()) continue;
        auto cands = enumerate_extensions(city, state, catalog);
        if (cands.size() < 2) continue;

        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        PermutedInstance p = permute_instance(city, state, cands, perm);

        Eigen::VectorXd a = score_extensions(params, city, state, cands);
        Eigen::VectorXd b = score_extensions(params, p.city, p.state, p.candidates);
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());

        MdpState halt_state = apply_extension(state, cands[0]);
        MdpState halt_perm = apply_extension(p.state, p.candidates[0]);
        double ha = halt_probability(params, city, halt_state);
        double hb = halt_probability(params, p.city, halt_perm);
        worst = std::max(worst, std::abs(ha - hb));
        ++checked;
    }
    std::ostringstream d;
    d << checked << " permuted (city, state) pairs, worst probability deviation = " << worst
      << " (limit 1e-6)";
    criterion(10, checked == 20 && worst < 1e-6, d.str());
}

TEST_CASE("criterion 11: log-policy gradients agree with central finite differences") {
    PolicyParams params = tiny_policy(11);
    NdpParams np{1, 2, 4};
    City city = unit_city(1100, 6, np);
    SpCatalog catalog(city);
    MdpState state = init_state(city, np, 0.5);
    auto cands = enumerate_extensions(city, state, catalog);
    REQUIRE(cands.size() > 1);
    MdpState after = apply_extension(state, cands[0]);

    auto loss_value = [&](const PolicyParams& p, TensorMap* grads) {
        ad::Tape tape(grads != nullptr);
        ParamContext ctx(tape, p, grads);
        StateFeatures f1 = compute_features(city, state, p.norm);
        ad::Var y1 = backbone_forward(ctx, f1);
        ad::Var lp = ad::select(extension_logprobs(ctx, y1, f1, state, cands), 1, 0);
        StateFeatures f2 = compute_features(city, after, p.norm);
        ad::Var y2 = backbone_forward(ctx, f2);
        ad::Var halt = ad::neg(ad::softplus(ad::neg(halt_logit(ctx, y2, f2, after))));
        ad::Var base = ad::scale(baseline_forward(ctx, city_descriptor(city), 0.5, p.norm), 0.3);
        ad::Var loss = ad::add(ad::add(lp, halt), base);
        if (grads) tape.backward(loss);
        return loss->val(0, 0);
    };

    TensorMap grads;
    loss_value(params, &grads);

    double worst = 0.0;
    int checked = 0;
    const double eps = 1e-5;
    for (const std::string name : {"embed.w", "layer0.we", "layer0.ln1.g", "layer0.ff.w1",
                                   "ext.w1", "halt.w1", "baseline.w1"}) {
        Eigen::MatrixXd& tensor = params.tensors.at(name);
        const Eigen::MatrixXd& g = grads.at(name);
        int entries = std::min<int>(4, static_cast<int>(tensor.size()));
        for (int e = 0; e < entries; ++e) {
            int r = e % static_cast<int>(tensor.rows());
            int c = (e * 7) % static_cast<int>(tensor.cols());
            double orig = tensor(r, c);
            tensor(r, c) = orig + eps;
            double up = loss_value(params, nullptr);
            tensor(r, c) = orig - eps;
            double down = loss_value(params, nullptr);
            tensor(r, c) = orig;
            double fd = (up - down) / (2.0 * eps);
            double denom = std::max({std::abs(fd), std::abs(g(r, c)), 1e-6});
            worst = std::max(worst, std::abs(fd - g(r, c)) / denom);
            ++checked;
        }
    }
    std::ostringstream d;
    d << checked << " parameter entries, worst relative error = " << worst << " (limit 1e-4)";
    criterion(11, worst < 1e-4, d.str());
}

TEST_CASE("criterion 12: a short training run beats the untrained policy") {
    auto t0 = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.dataset_size = 1 << 12;
    cfg.city_n = 10;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.lr_policy = 1e-3;
    cfg.lr_baseline = 1e-2;
    cfg.train_params = NdpParams{4, 2, 8};
    cfg.seed = 12;
    cfg.val_max_cities = 64;
    cfg.norm_fit_cities = 32;
    cfg.model.layers = 2;
    cfg.model.heads = 2;
    cfg.model.dim = 16;
    cfg.model.ff_dim = 32;
    cfg.model.head_hidden = 16;
    cfg.model.baseline_hidden = 16;
    TrainResult result = train(cfg);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Fresh held-out cities; the untrained policy gets the same feature
    // normalization so the comparison isolates the learned weights.
    std::vector<City> holdout = build_dataset(64, 10, cfg.deletion_prob, cfg.train_params, 999);
    RngStream prng = RngStream::derive(998, "untrained");
    PolicyParams untrained = PolicyParams::random_init(cfg.model, prng);
    untrained.norm = result.best_params.norm;
    std::vector<double> alphas{0.0, 0.5, 1.0};
    double before = validate(untrained, holdout, alphas, cfg.beta, cfg.transfer_penalty).mean_cost;
    double after = validate(result.best_params, holdout, alphas, cfg.beta,
                            cfg.transfer_penalty).mean_cost;

    std::ostringstream d;
    d << "validation mean cost " << before << " untrained vs " << after << " trained ("
      << (1.0 - after / before) * 100.0 << "% better, need >= 5%), wall " << wall
      << " s (limit 1800)";
    criterion(12, after <= 0.95 * before && wall <= 1800.0, d.str());
}

TEST_CASE("criterion 13: evolution histories never increase the best-ever cost") {
    bool monotone = true, cached_ok = true;
    PolicyParams policy = tiny_policy(13);
    for (int trial = 0; trial < 4; ++trial) {
        RngStream crng = RngStream::derive(1300, "city", trial);
        NdpParams params{3, 2, 7};
        City city = generate_city(CityKind::FourNearest, 10, 0.1, params, crng);
        EaConfig cfg;
        cfg.seed = 1300 + trial;
        cfg.iterations = 12;
        cfg.mutations_per_stage = 3;
        cfg.mode = trial % 2 == 0 ? EaMode::EA : EaMode::NEA;
        EaResult r = run_evolution(city, cfg, cfg.mode == EaMode::NEA ? &policy : nullptr);
        for (size_t k = 1; k < r.history.size(); ++k)
            if (r.history[k].best_cost > r.history[k - 1].best_cost + 1e-12) monotone = false;

        // Mutation stages must never worsen an individual's cached cost.
        SpCatalog catalog(city);
        CostWeights w = CostWeights::derive(city, cfg.alpha, cfg.beta, cfg.transfer_penalty);
        Population pop = init_population(city, cfg, catalog);
        for (int iter = 0; iter < 5; ++iter) {
            std::vector<double> prev;
            for (const auto& ind : pop) prev.push_back(ind.cost.total);
            mutation_stage(pop, city, cfg, catalog, w,
                           cfg.mode == EaMode::NEA ? &policy : nullptr, iter);
            for (size_t i = 0; i < pop.size(); ++i)
                if (pop[i].cost.total > prev[i] + 1e-12) cached_ok = false;
        }
    }
    std::ostringstream d;
    d << "4 EA/NEA runs: histories monotone = " << (monotone ? "yes" : "no")
      << ", mutation stages non-worsening = " << (cached_ok ? "yes" : "no");
    criterion(13, monotone && cached_ok, d.str());
}
