#include "transit/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace transit {

SpCatalog::SpCatalog(const City& city) : n_(city.num_nodes()) {
    by_endpoint_.assign(n_, {});
    paths_.reserve(n_ * (n_ - 1) / 2);
    for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) {
            int id = static_cast<int>(paths_.size());
            paths_.push_back(city.shortest_paths().reconstruct(i, j));
            by_endpoint_[i].push_back(id);
            by_endpoint_[j].push_back(id);
        }
}

int SpCatalog::pair_id(int i, int j) const {
    if (i > j) std::swap(i, j);
    // Row-major upper triangle.
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
}

MdpState init_state(const City& city, NdpParams params, double alpha) {
    params.validate(city.num_nodes());
    MdpState s;
    s.params = params;
    s.alpha = alpha;
    s.t = 1;  // first decision is an extension to the empty route
    return s;
}

namespace {

bool action_less(const ExtensionAction& a, const ExtensionAction& b) {
    if (a.new_terminal() != b.new_terminal()) return a.new_terminal() < b.new_terminal();
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    if (a.path != b.path) return a.path < b.path;
    return a.prepend < b.prepend;
}

}  // namespace

std::vector<ExtensionAction> enumerate_extensions(const City& city, const MdpState& state,
                                                  const SpCatalog& catalog) {
    const int max_stops = state.params.max_stops;
    std::vector<ExtensionAction> out;

    if (state.current.empty()) {
        for (int id = 0; id < catalog.num_pairs(); ++id) {
            const auto& p = catalog.path_by_id(id);
            if (static_cast<int>(p.size()) <= max_stops) out.push_back({p, false});
        }
    } else {
        const int budget = max_stops - static_cast<int>(state.current.size());
        if (budget >= 1) {
            std::vector<char> in_current(city.num_nodes(), 0);
            for (int v : state.current) in_current[v] = 1;
            auto try_attach = [&](int attach_node, bool prepend) {
                for (int nb : city.neighbors(attach_node)) {
                    if (in_current[nb]) continue;
                    for (int id : catalog.pairs_with_endpoint(nb)) {
                        const auto& p = catalog.path_by_id(id);
                        if (static_cast<int>(p.size()) > budget) continue;
                        bool disjoint = true;
                        for (int v : p)
                            if (in_current[v]) {
                                disjoint = false;
                                break;
                            }
                        if (!disjoint) continue;
                        ExtensionAction a;
                        a.prepend = prepend;
                        a.path = p;
                        // Orient so the attachment end touches nb.
                        if (!prepend && a.path.front() != nb)
                            std::reverse(a.path.begin(), a.path.end());
                        if (prepend && a.path.back() != nb)
                            std::reverse(a.path.begin(), a.path.end());
                        out.push_back(std::move(a));
                    }
                }
            };
            try_attach(state.current.back(), /*prepend=*/false);
            try_attach(state.current.front(), /*prepend=*/true);
        }
    }
    std::sort(out.begin(), out.end(), action_less);
    return out;
}

HaltActionSet halt_actions(const City& city, const MdpState& state, const SpCatalog& catalog) {
    if (!state.halt_pending() || state.current.empty())
        throw std::runtime_error("halt_actions: not at a halt decision");
    const int len = static_cast<int>(state.current.size());
    HaltActionSet set;
    if (len >= state.params.max_stops) {
        set.can_halt = true;
        return set;
    }
    // Deadlock override: a route that cannot be extended must halt even
    // below MIN; the constraint penalty accounts for it.
    MdpState probe = state;
    probe.t += 1;
    bool extensions_exist = !enumerate_extensions(city, probe, catalog).empty();
    if (!extensions_exist) {
        set.can_halt = true;
        return set;
    }
    if (len < state.params.min_stops) {
        set.can_continue = true;
        return set;
    }
    set.can_continue = true;
    set.can_halt = true;
    return set;
}

MdpState apply_extension(const MdpState& state, const ExtensionAction& action) {
    if (!state.extension_pending())
        throw std::runtime_error("apply_extension: not at an extension decision");
    MdpState next = state;
    if (action.prepend)
        next.current.insert(next.current.begin(), action.path.begin(), action.path.end());
    else
        next.current.insert(next.current.end(), action.path.begin(), action.path.end());
    if (static_cast<int>(next.current.size()) > state.params.max_stops)
        throw std::runtime_error("apply_extension: route would exceed MAX");
    next.t += 1;
    return next;
}

MdpState apply_halt(const MdpState& state, bool halt) {
    if (!state.halt_pending()) throw std::runtime_error("apply_halt: not at a halt decision");
    MdpState next = state;
    if (halt) {
        next.finished.routes.push_back(next.current);
        next.current.clear();
    }
    next.t += 1;
    return next;
}

std::pair<int, double> UniformRandomPolicy::choose_extension(
    const City&, const MdpState&, const std::vector<ExtensionAction>& candidates,
    RngStream& rng) {
    int k = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(candidates.size()) - 1));
    return {k, -std::log(static_cast<double>(candidates.size()))};
}

std::pair<bool, double> UniformRandomPolicy::choose_halt(const City&, const MdpState&,
                                                         RngStream& rng) {
    return {rng.bernoulli(0.5), std::log(0.5)};
}

double EpisodeLog::sum_logp() const {
    double s = 0.0;
    for (const auto& d : decisions) s += d.logp;
    return s;
}

std::string EpisodeLog::to_jsonl() const {
    std::ostringstream out;
    for (const auto& d : decisions) {
        nlohmann::ordered_json j;
        j["t"] = d.t;
        j["kind"] = d.extension ? "ext" : "halt";
        j["n_candidates"] = d.num_candidates;
        j["chosen_index"] = d.chosen_index;
        j["logp"] = d.logp;
        out << j.dump() << "\n";
    }
    return out.str();
}

namespace {

// Runs the extend/halt loop until `stop_after_routes` routes are finished.
RolloutResult run_episode(const City& city, Policy& policy, MdpState state,
                          const SpCatalog& catalog, RngStream& rng, int stop_after_routes) {
    RolloutResult result;
    while (!state.terminal() &&
           static_cast<int>(state.finished.routes.size()) < stop_after_routes) {
        if (state.extension_pending()) {
            auto candidates = enumerate_extensions(city, state, catalog);
            if (candidates.empty())
                throw std::runtime_error("no legal extension at an extension decision");
            int chosen = 0;
            double logp = 0.0;
            if (candidates.size() > 1)
                std::tie(chosen, logp) = policy.choose_extension(city, state, candidates, rng);
            result.log.decisions.push_back(
                {state.t, true, static_cast<int>(candidates.size()), chosen, logp});
            state = apply_extension(state, candidates[chosen]);
        } else {
            auto set = halt_actions(city, state, catalog);
            bool halt;
            double logp = 0.0;
            bool free_choice = set.can_halt && set.can_continue;
            if (free_choice)
                std::tie(halt, logp) = policy.choose_halt(city, state, rng);
            else
                halt = set.can_halt;
            result.log.decisions.push_back(
                {state.t, false, free_choice ? 2 : 1, halt ? 1 : 0, logp});
            state = apply_halt(state, halt);
        }
    }
    result.network = std::move(state.finished);
    return result;
}

}  // namespace

RolloutResult rollout(const City& city, Policy& policy, NdpParams params, double alpha,
                      const SpCatalog& catalog, RngStream& rng) {
    MdpState state = init_state(city, params, alpha);
    return run_episode(city, policy, std::move(state), catalog, rng, params.num_routes);
}

Route rollout_single_route(const City& city, const Network& partial, Policy& policy,
                           double alpha, const SpCatalog& catalog, RngStream& rng) {
    const NdpParams& params = city.params();
    if (static_cast<int>(partial.routes.size()) != params.num_routes - 1)
        throw std::runtime_error("rollout_single_route: partial network must have S-1 routes");
    MdpState state;
    state.params = params;
    state.alpha = alpha;
    state.t = 1;
    state.finished = partial;
    auto result = run_episode(city, policy, std::move(state), catalog, rng, params.num_routes);
    return result.network.routes.back();
}

}  // namespace transit
