#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "transit/evolution.hpp"
#include "transit/trainer.hpp"

namespace transit {

inline constexpr const char* kToolVersion = "0.1.0";

// Best-of-K sampled rollouts from a trained policy (LC-K).
struct LcResult {
    Network best_network;
    CostBreakdown best_cost;
    std::vector<double> all_costs;
};

LcResult run_lc(const City& city, const PolicyParams& policy, int rollouts, double alpha,
                double beta, double transfer_penalty, uint64_t seed);

struct SweepPoint {
    std::string mode;   // "ea" | "nea" | "lc"
    double alpha = 0.0;
    int seed = 0;
    bool ok = false;
    std::string error;
    double total = 0.0;
    double passenger_minutes = 0.0;
    double operator_minutes = 0.0;
    double constraint = 0.0;
};

struct SweepResults {
    std::vector<SweepPoint> points;

    std::string to_csv() const;
    static SweepResults from_csv(const std::string& text);
};

struct SweepCell {
    std::string mode;
    double alpha = 0.0;
    int count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double mean_passenger_minutes = 0.0;
    double std_passenger_minutes = 0.0;
    double mean_operator_minutes = 0.0;
    double std_operator_minutes = 0.0;
    int violating_seeds = 0;  // seeds whose final solution has C_c > 0
};

std::vector<SweepCell> aggregate_sweep(const SweepResults& results);
std::string sweep_table(const std::vector<SweepCell>& cells);

struct SweepSpec {
    std::vector<std::string> modes;
    std::vector<double> alphas;
    std::vector<int> seeds;
    EaConfig ea;          // B, N_m, I, beta, p_T defaults
    int lc_rollouts = 100;
};

SweepResults run_sweep(const City& city, const SweepSpec& spec, const PolicyParams* policy);

// Self-contained SVG of the passenger/operator trade-off curves, one
// polyline per mode across alpha-adjacent points, with one-standard-
// deviation error bars.  Axes are minutes.
std::string pareto_svg(const std::vector<SweepCell>& cells);

struct ConstraintReport {
    bool connected_ok = false;        // constraint 1
    bool route_count_ok = false;      // constraint 2
    bool lengths_ok = false;          // constraint 3
    bool simple_ok = false;           // constraint 4
    bool adjacency_ok = false;        // constraint 5
    int unconnected_pairs = 0;
    std::vector<std::string> problems;
    CostBreakdown cost;
    CostWeights weights;

    bool all_ok() const {
        return connected_ok && route_count_ok && lengths_ok && simple_ok && adjacency_ok;
    }
    std::string to_json() const;
};

ConstraintReport validate_network(const City& city, const Network& network, double alpha,
                                  double beta, double transfer_penalty);

}  // namespace transit
