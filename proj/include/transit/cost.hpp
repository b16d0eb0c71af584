#pragma once

#include <Eigen/Dense>
#include <vector>

#include "transit/city.hpp"

namespace transit {

using Route = std::vector<int>;

// A candidate solution: an ordered list of routes.  Complete networks
// carry exactly S routes; partial ones arise during MDP construction.
struct Network {
    std::vector<Route> routes;

    bool is_complete(const NdpParams& params) const {
        return static_cast<int>(routes.size()) == params.num_routes;
    }
    // Throws if some route repeats a node or skips a street edge.
    void validate(const City& city) const;

    std::string to_json() const;
    static Network from_json(const std::string& text);
};

struct CostWeights {
    double alpha = 0.5;
    double beta = 5.0;
    double transfer_penalty = 300.0;  // p_T, seconds
    double w_p = 0.0;
    double w_o = 0.0;

    static CostWeights derive(const City& city, double alpha, double beta = 5.0,
                              double transfer_penalty = 300.0);
};

struct TransitAssignment {
    Eigen::MatrixXd trip_times;     // seconds, includes transfer penalties
    Eigen::MatrixXi transfers;      // minimal transfers on a fastest trip; -1 if unconnected
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> connected;
};

// Label-setting search over the expanded (route, stop) graph: boarding and
// alighting are free, riding costs the inter-stop drive time, switching
// routes at a shared stop costs the transfer penalty.
TransitAssignment assign_transit_times(const City& city, const Network& network,
                                       double transfer_penalty);

// Demand-weighted mean transit trip time over connected pairs.
double passenger_cost(const City& city, const TransitAssignment& assignment);

// Total driving time of all routes, both directions.
double operator_cost(const City& city, const Network& network);

// Unconnected-pair fraction plus per-stop length violations over S, plus
// one per missing route.
double constraint_cost(const City& city, const Network& network,
                       const TransitAssignment& assignment);

struct CostBreakdown {
    double total = 0.0;
    double passenger_seconds = 0.0;
    double operator_seconds = 0.0;
    double constraint = 0.0;

    std::string to_json(const CostWeights& weights) const;
};

CostBreakdown total_cost(const City& city, const Network& network, const CostWeights& weights);

}  // namespace transit
