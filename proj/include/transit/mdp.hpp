#pragma once

#include <memory>
#include <string>
#include <vector>

#include "transit/cost.hpp"

namespace transit {

// Canonical shortest-path set: one path per unordered node pair, indexed
// by endpoint for fast extension lookup.
class SpCatalog {
public:
    explicit SpCatalog(const City& city);

    const std::vector<int>& path(int i, int j) const { return paths_[pair_id(i, j)]; }
    const std::vector<int>& pairs_with_endpoint(int node) const { return by_endpoint_[node]; }
    const std::vector<int>& path_by_id(int pair_id) const { return paths_[pair_id]; }
    int pair_id(int i, int j) const;
    int num_pairs() const { return static_cast<int>(paths_.size()); }

private:
    int n_;
    std::vector<std::vector<int>> paths_;      // pair id -> node sequence (low node first)
    std::vector<std::vector<int>> by_endpoint_;
};

// Extending the in-progress route with a shortest-path segment.  The path
// is stored in attachment orientation: appended after the route's last
// stop, or prepended before its first.
struct ExtensionAction {
    std::vector<int> path;
    bool prepend = false;

    int new_terminal() const { return prepend ? path.front() : path.back(); }
};

struct MdpState {
    Network finished;      // R_t
    Route current;         // r_t
    int t = 0;
    NdpParams params;
    double alpha = 0.5;

    bool terminal() const {
        return static_cast<int>(finished.routes.size()) == params.num_routes;
    }
    bool extension_pending() const { return !terminal() && t % 2 == 1; }
    bool halt_pending() const { return !terminal() && t % 2 == 0; }
};

struct HaltActionSet {
    bool can_continue = false;
    bool can_halt = false;
};

MdpState init_state(const City& city, NdpParams params, double alpha);

// Legal shortest-path extensions in a deterministic order.
std::vector<ExtensionAction> enumerate_extensions(const City& city, const MdpState& state,
                                                  const SpCatalog& catalog);

// Eq.-(3) action set, with a forced halt when no extension would be legal
// so that the episode always terminates.
HaltActionSet halt_actions(const City& city, const MdpState& state, const SpCatalog& catalog);

MdpState apply_extension(const MdpState& state, const ExtensionAction& action);
MdpState apply_halt(const MdpState& state, bool halt);

// A decision-making policy over MDP actions.  choose_halt is consulted
// only when both halt actions are legal.
class Policy {
public:
    virtual ~Policy() = default;
    // Returns (candidate index, log-probability).
    virtual std::pair<int, double> choose_extension(const City& city, const MdpState& state,
                                                    const std::vector<ExtensionAction>& candidates,
                                                    RngStream& rng) = 0;
    // Returns (halt?, log-probability).
    virtual std::pair<bool, double> choose_halt(const City& city, const MdpState& state,
                                                RngStream& rng) = 0;
};

class UniformRandomPolicy : public Policy {
public:
    std::pair<int, double> choose_extension(const City&, const MdpState&,
                                            const std::vector<ExtensionAction>& candidates,
                                            RngStream& rng) override;
    std::pair<bool, double> choose_halt(const City&, const MdpState&, RngStream& rng) override;
};

struct DecisionRecord {
    int t = 0;
    bool extension = false;   // extension vs halt decision
    int num_candidates = 0;   // 2 for a free halt decision
    int chosen_index = 0;     // for halts: 1 = halt, 0 = continue
    double logp = 0.0;
};

struct EpisodeLog {
    std::vector<DecisionRecord> decisions;
    double sum_logp() const;
    std::string to_jsonl() const;
};

struct RolloutResult {
    Network network;
    EpisodeLog log;
};

RolloutResult rollout(const City& city, Policy& policy, NdpParams params, double alpha,
                      const SpCatalog& catalog, RngStream& rng);

// Completes a single route on top of a partial network with S-1 routes.
Route rollout_single_route(const City& city, const Network& partial, Policy& policy,
                           double alpha, const SpCatalog& catalog, RngStream& rng);

}  // namespace transit
