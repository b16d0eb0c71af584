#include "transit/cost.hpp"

#include <json.hpp>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace transit {

void Network::validate(const City& city) const {
    const int n = city.num_nodes();
    for (size_t r = 0; r < routes.size(); ++r) {
        std::vector<char> seen(n, 0);
        const auto& route = routes[r];
        for (size_t k = 0; k < route.size(); ++k) {
            int node = route[k];
            if (node < 0 || node >= n)
                throw std::runtime_error("route " + std::to_string(r) + " has invalid node");
            if (seen[node])
                throw std::runtime_error("route " + std::to_string(r) + " repeats node " +
                                         std::to_string(node));
            seen[node] = 1;
            if (k > 0 && !city.adjacent(route[k - 1], node))
                throw std::runtime_error("route " + std::to_string(r) + " skips nodes: no street edge " +
                                         std::to_string(route[k - 1]) + "-" + std::to_string(node));
        }
    }
}

std::string Network::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : routes) j.push_back(r);
    return j.dump();
}

Network Network::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Network net;
    for (const auto& r : j) net.routes.push_back(r.get<Route>());
    return net;
}

CostWeights CostWeights::derive(const City& city, double alpha, double beta,
                                double transfer_penalty) {
    CostWeights w;
    w.alpha = std::clamp(alpha, 0.0, 1.0);
    w.beta = beta;
    w.transfer_penalty = transfer_penalty;
    double max_t = city.shortest_paths().max_time();
    w.w_p = 1.0 / max_t;
    w.w_o = 1.0 / (3.0 * city.params().num_routes * max_t);
    return w;
}

TransitAssignment assign_transit_times(const City& city, const Network& network,
                                       double transfer_penalty) {
    network.validate(city);
    const int n = city.num_nodes();
    const double inf = std::numeric_limits<double>::infinity();

    // One vertex per (route, position) incidence.
    std::vector<int> stop_of;                        // incidence -> stop
    std::vector<std::vector<int>> at_stop(n);        // stop -> incidences
    std::vector<std::vector<std::tuple<int, double, int>>> arcs;  // (to, time, dtransfers)
    for (size_t r = 0; r < network.routes.size(); ++r) {
        const auto& route = network.routes[r];
        int base = static_cast<int>(stop_of.size());
        for (size_t k = 0; k < route.size(); ++k) {
            at_stop[route[k]].push_back(base + static_cast<int>(k));
            stop_of.push_back(route[k]);
            arcs.emplace_back();
        }
        for (size_t k = 0; k + 1 < route.size(); ++k) {
            double leg = city.street_time(route[k], route[k + 1]);
            arcs[base + k].emplace_back(base + k + 1, leg, 0);
            arcs[base + k + 1].emplace_back(base + k, leg, 0);
        }
    }
    // Transfer arcs between incidences sharing a stop.
    for (int j = 0; j < n; ++j)
        for (int u : at_stop[j])
            for (int v : at_stop[j])
                if (u != v) arcs[u].emplace_back(v, transfer_penalty, 1);

    const int m = static_cast<int>(stop_of.size());
    TransitAssignment out;
    out.trip_times = Eigen::MatrixXd::Constant(n, n, inf);
    out.transfers = Eigen::MatrixXi::Constant(n, n, -1);
    out.connected.setConstant(n, n, false);

    using Label = std::pair<double, int>;  // (time, transfers), lexicographic
    std::vector<Label> label(m);
    using QItem = std::tuple<double, int, int>;
    for (int origin = 0; origin < n; ++origin) {
        std::fill(label.begin(), label.end(), Label{inf, 0});
        std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
        for (int v : at_stop[origin]) {
            label[v] = {0.0, 0};
            pq.emplace(0.0, 0, v);
        }
        while (!pq.empty()) {
            auto [t, tr, u] = pq.top();
            pq.pop();
            if (Label{t, tr} > label[u]) continue;
            for (const auto& [v, dt, dtr] : arcs[u]) {
                Label cand{t + dt, tr + dtr};
                if (cand < label[v]) {
                    label[v] = cand;
                    pq.emplace(cand.first, cand.second, v);
                }
            }
        }
        out.trip_times(origin, origin) = 0.0;
        out.transfers(origin, origin) = 0;
        out.connected(origin, origin) = true;
        for (int j = 0; j < n; ++j) {
            if (j == origin) continue;
            Label best{inf, 0};
            for (int v : at_stop[j]) best = std::min(best, label[v]);
            if (best.first < inf) {
                out.trip_times(origin, j) = best.first;
                out.transfers(origin, j) = best.second;
                out.connected(origin, j) = true;
            }
        }
    }
    return out;
}

double passenger_cost(const City& city, const TransitAssignment& assignment) {
    const int n = city.num_nodes();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j || !assignment.connected(i, j)) continue;
            num += city.demand()(i, j) * assignment.trip_times(i, j);
            den += city.demand()(i, j);
        }
    if (den <= 0.0)
        throw std::runtime_error("degenerate network: no demand is served by any transit trip");
    return num / den;
}

double operator_cost(const City& city, const Network& network) {
    double total = 0.0;
    for (const auto& route : network.routes)
        for (size_t k = 0; k + 1 < route.size(); ++k)
            total += 2.0 * city.street_time(route[k], route[k + 1]);
    return total;
}

double constraint_cost(const City& city, const Network& network,
                       const TransitAssignment& assignment) {
    const int n = city.num_nodes();
    const auto& params = city.params();
    int unconnected = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (!assignment.connected(i, j)) ++unconnected;
    double frac = static_cast<double>(unconnected) / (n * (n - 1) / 2);

    double violation = 0.0;
    for (const auto& route : network.routes) {
        int len = static_cast<int>(route.size());
        violation += std::max(0, len - params.max_stops);
        violation += std::max(0, params.min_stops - len);
    }
    double missing = std::max(0, params.num_routes - static_cast<int>(network.routes.size()));
    return frac + violation / params.num_routes + missing;
}

std::string CostBreakdown::to_json(const CostWeights& weights) const {
    nlohmann::ordered_json j;
    j["alpha"] = weights.alpha;
    j["C_p_seconds"] = passenger_seconds;
    j["C_o_seconds"] = operator_seconds;
    j["C_c"] = constraint;
    j["C_total"] = total;
    j["p_T"] = weights.transfer_penalty;
    return j.dump();
}

CostBreakdown total_cost(const City& city, const Network& network, const CostWeights& weights) {
    TransitAssignment assignment = assign_transit_times(city, network, weights.transfer_penalty);
    CostBreakdown b;
    b.passenger_seconds = passenger_cost(city, assignment);
    b.operator_seconds = operator_cost(city, network);
    b.constraint = constraint_cost(city, network, assignment);
    b.total = weights.alpha * weights.w_p * b.passenger_seconds +
              (1.0 - weights.alpha) * weights.w_o * b.operator_seconds +
              weights.beta * b.constraint;
    return b;
}

}  // namespace transit
