#include "transit/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace transit {

CostBreakdown evaluate_network(const City& city, const Network& network,
                               const CostWeights& weights) {
    try {
        return total_cost(city, network, weights);
    } catch (const std::runtime_error&) {
        CostBreakdown bad;
        bad.total = std::numeric_limits<double>::infinity();
        return bad;
    }
}

Population init_population(const City& city, const EaConfig& config, const SpCatalog& catalog) {
    if (config.population_size < 2) throw std::runtime_error("population size must be >= 2");
    CostWeights weights =
        CostWeights::derive(city, config.alpha, config.beta, config.transfer_penalty);
    UniformRandomPolicy random_policy;
    Population pop;
    for (int b = 0; b < config.population_size; ++b) {
        RngStream rng = RngStream::derive(config.seed, "ea.init", b);
        auto ro = rollout(city, random_policy, city.params(), config.alpha, catalog, rng);
        Individual ind;
        ind.network = std::move(ro.network);
        ind.cost = evaluate_network(city, ind.network, weights);
        pop.push_back(std::move(ind));
    }
    return pop;
}

Network mutate_type1(const Individual& individual, const City& city, const SpCatalog& catalog,
                     RngStream& rng) {
    Network out = individual.network;
    int r = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(out.routes.size()) - 1));
    const Route& route = out.routes[r];
    int terminal = rng.bernoulli(0.5) ? route.back() : route.front();
    int j = static_cast<int>(rng.uniform_int(0, city.num_nodes() - 2));
    if (j >= terminal) ++j;  // uniform over nodes != terminal
    std::vector<int> path = catalog.path(terminal, j);
    if (path.front() != terminal) std::reverse(path.begin(), path.end());
    out.routes[r] = std::move(path);
    return out;
}

Network mutate_type2(const Individual& individual, const City& city, RngStream& rng) {
    Network out = individual.network;
    int r = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(out.routes.size()) - 1));
    Route& route = out.routes[r];
    bool at_back = rng.bernoulli(0.5);
    if (rng.bernoulli(0.2)) {
        if (route.size() > 1) {
            if (at_back)
                route.pop_back();
            else
                route.erase(route.begin());
        }
        return out;
    }
    int terminal = at_back ? route.back() : route.front();
    std::vector<int> options;
    for (int nb : city.neighbors(terminal))
        if (std::find(route.begin(), route.end(), nb) == route.end()) options.push_back(nb);
    if (options.empty()) return out;  // guarded no-op
    int j = options[rng.uniform_int(0, static_cast<int64_t>(options.size()) - 1)];
    if (at_back)
        route.push_back(j);
    else
        route.insert(route.begin(), j);
    return out;
}

Network mutate_neural(const Individual& individual, const City& city,
                      const PolicyParams& policy, double alpha, const SpCatalog& catalog,
                      RngStream& rng) {
    Network partial = individual.network;
    int r = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(partial.routes.size()) - 1));
    partial.routes.erase(partial.routes.begin() + r);
    NeuralPolicy neural(policy, NeuralPolicy::Mode::Sample);
    Route fresh = rollout_single_route(city, partial, neural, alpha, catalog, rng);
    partial.routes.insert(partial.routes.begin() + r, std::move(fresh));
    return partial;
}

void mutation_stage(Population& population, const City& city, const EaConfig& config,
                    const SpCatalog& catalog, const CostWeights& weights,
                    const PolicyParams* policy, int iteration) {
    const int b_count = static_cast<int>(population.size());
    std::vector<int> order(b_count);
    std::iota(order.begin(), order.end(), 0);
    RngStream part_rng = RngStream::derive(config.seed, "ea.partition", iteration);
    std::shuffle(order.begin(), order.end(), part_rng.engine());
    const int half = (b_count + 1) / 2;

    for (int slot = 0; slot < b_count; ++slot) {
        Individual& ind = population[order[slot]];
        bool use_primary = slot < half;  // type-1 for EA, neural for NEA
        for (int attempt = 0; attempt < config.mutations_per_stage; ++attempt) {
            uint64_t draw = (static_cast<uint64_t>(iteration) * b_count + slot) *
                                config.mutations_per_stage +
                            attempt;
            Network candidate;
            if (!use_primary) {
                RngStream rng = RngStream::derive(config.seed, "ea.type2", draw);
                candidate = mutate_type2(ind, city, rng);
            } else if (config.mode == EaMode::EA) {
                RngStream rng = RngStream::derive(config.seed, "ea.type1", draw);
                candidate = mutate_type1(ind, city, catalog, rng);
            } else {
                if (!policy) throw std::runtime_error("NEA mode requires a policy checkpoint");
                RngStream rng = RngStream::derive(config.seed, "ea.neural", draw);
                candidate = mutate_neural(ind, city, *policy, config.alpha, catalog, rng);
            }
            CostBreakdown cost = evaluate_network(city, candidate, weights);
            if (cost.total < ind.cost.total) {
                ind.network = std::move(candidate);
                ind.cost = cost;
            }
        }
    }
}

void selection_stage(Population& population, RngStream& rng) {
    const int b_count = static_cast<int>(population.size());
    if (b_count < 2) throw std::runtime_error("selection needs at least 2 individuals");
    double c_min = std::numeric_limits<double>::infinity();
    double c_max = -std::numeric_limits<double>::infinity();
    int best = 0;
    for (int i = 0; i < b_count; ++i) {
        double c = population[i].cost.total;
        if (c < c_min) {
            c_min = c;
            best = i;
        }
        c_max = std::max(c_max, c);
    }
    std::vector<char> dead(b_count, 0);
    std::vector<int> survivors;
    for (int i = 0; i < b_count; ++i) {
        if (i != best) {
            double p = (population[i].cost.total - c_min) / (c_max - c_min + 1e-12);
            if (rng.bernoulli(std::clamp(p, 0.0, 1.0))) dead[i] = 1;
        }
        if (!dead[i]) survivors.push_back(i);
    }
    // Refill dead slots with copies of survivors, probability inversely
    // proportional to cost.
    std::vector<double> weights(survivors.size());
    double wsum = 0.0;
    for (size_t k = 0; k < survivors.size(); ++k) {
        weights[k] = 1.0 / std::max(population[survivors[k]].cost.total, 1e-12);
        wsum += weights[k];
    }
    for (int i = 0; i < b_count; ++i) {
        if (!dead[i]) continue;
        double u = rng.uniform(0.0, wsum);
        double acc = 0.0;
        int pick = static_cast<int>(survivors.size()) - 1;
        for (size_t k = 0; k < survivors.size(); ++k) {
            acc += weights[k];
            if (u <= acc) {
                pick = static_cast<int>(k);
                break;
            }
        }
        population[i] = population[survivors[pick]];
    }
}

std::string EaResult::history_csv() const {
    std::ostringstream out;
    out << "iter,best_C,mean_C,best_Cp_minutes,best_Co_minutes,best_Cc\n";
    for (const auto& row : history)
        out << row.iter << "," << row.best_cost << "," << row.mean_cost << ","
            << row.best_passenger_minutes << "," << row.best_operator_minutes << ","
            << row.best_constraint << "\n";
    return out.str();
}

EaResult run_evolution(const City& city, const EaConfig& config, const PolicyParams* policy) {
    if (config.mode == EaMode::NEA && !policy)
        throw std::runtime_error("NEA mode requires a policy checkpoint");
    SpCatalog catalog(city);
    CostWeights weights =
        CostWeights::derive(city, config.alpha, config.beta, config.transfer_penalty);
    Population pop = init_population(city, config, catalog);

    EaResult result;
    auto best_it = std::min_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
        return a.cost.total < b.cost.total;
    });
    result.best_network = best_it->network;
    result.best_cost = best_it->cost;

    double init_mean = 0.0;
    for (const auto& ind : pop) init_mean += ind.cost.total;
    init_mean /= pop.size();
    result.history.push_back({0, best_it->cost.total, init_mean,
                              best_it->cost.passenger_seconds / 60.0,
                              best_it->cost.operator_seconds / 60.0, best_it->cost.constraint});

    for (int iter = 0; iter < config.iterations; ++iter) {
        mutation_stage(pop, city, config, catalog, weights, policy, iter);
        RngStream sel_rng = RngStream::derive(config.seed, "ea.selection", iter);
        selection_stage(pop, sel_rng);

        const Individual* best = &pop.front();
        double mean = 0.0;
        for (const auto& ind : pop) {
            mean += ind.cost.total;
            if (ind.cost.total < best->cost.total) best = &ind;
        }
        mean /= pop.size();
        if (best->cost.total < result.best_cost.total) {
            result.best_network = best->network;
            result.best_cost = best->cost;
        }
        result.history.push_back({iter + 1, best->cost.total, mean,
                                  best->cost.passenger_seconds / 60.0,
                                  best->cost.operator_seconds / 60.0, best->cost.constraint});
    }
    return result;
}

}  // namespace transit
