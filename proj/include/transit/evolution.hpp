#pragma once

#include <optional>
#include <string>
#include <vector>

#include "transit/policy.hpp"

namespace transit {

struct Individual {
    Network network;
    CostBreakdown cost;
};

enum class EaMode { EA, NEA };

struct EaConfig {
    int population_size = 10;     // B
    int mutations_per_stage = 10; // N_m
    int iterations = 400;         // I
    EaMode mode = EaMode::EA;
    double alpha = 0.5;
    double beta = 5.0;
    double transfer_penalty = 300.0;
    uint64_t seed = 0;
};

struct EaHistoryRow {
    int iter = 0;
    double best_cost = 0.0;
    double mean_cost = 0.0;
    double best_passenger_minutes = 0.0;
    double best_operator_minutes = 0.0;
    double best_constraint = 0.0;
};

struct EaResult {
    Network best_network;          // best ever seen, even if lost later
    CostBreakdown best_cost;
    std::vector<EaHistoryRow> history;

    std::string history_csv() const;
};

using Population = std::vector<Individual>;

// Evaluates a candidate; a degenerate network (no served demand) counts
// as infinitely bad rather than an error so the EA can discard it.
CostBreakdown evaluate_network(const City& city, const Network& network,
                               const CostWeights& weights);

Population init_population(const City& city, const EaConfig& config, const SpCatalog& catalog);

Network mutate_type1(const Individual& individual, const City& city, const SpCatalog& catalog,
                     RngStream& rng);
Network mutate_type2(const Individual& individual, const City& city, RngStream& rng);
Network mutate_neural(const Individual& individual, const City& city,
                      const PolicyParams& policy, double alpha, const SpCatalog& catalog,
                      RngStream& rng);

void mutation_stage(Population& population, const City& city, const EaConfig& config,
                    const SpCatalog& catalog, const CostWeights& weights,
                    const PolicyParams* policy, int iteration);

void selection_stage(Population& population, RngStream& rng);

EaResult run_evolution(const City& city, const EaConfig& config,
                       const PolicyParams* policy = nullptr);

}  // namespace transit
