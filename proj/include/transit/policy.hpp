#pragma once

#include <map>
#include <optional>
#include <string>

#include "transit/autodiff.hpp"
#include "transit/mdp.hpp"

namespace transit {

inline constexpr int kCheckpointVersion = 1;

struct ModelConfig {
    int layers = 3;
    int heads = 4;
    int dim = 64;
    int ff_dim = 256;
    int head_hidden = 64;
    int baseline_hidden = 64;

    // Fixed by the feature layout.
    static constexpr int node_feats = 6;
    static constexpr int edge_feats = 6;
    static constexpr int global_feats = 3;
    static constexpr int descriptor_feats = 8;
};

struct NormStats {
    bool fitted = false;
    Eigen::VectorXd node_mean, node_std;
    Eigen::VectorXd edge_mean, edge_std;
    Eigen::VectorXd global_mean, global_std;
    Eigen::VectorXd descriptor_mean, descriptor_std;
};

using TensorMap = std::map<std::string, Eigen::MatrixXd>;

struct PolicyParams {
    ModelConfig config;
    NormStats norm;
    TensorMap tensors;

    static PolicyParams random_init(const ModelConfig& config, RngStream& rng);

    // Names of tensors belonging to the baseline net (gradient isolation).
    static bool is_baseline_tensor(const std::string& name);

    void save(const std::string& path) const;
    static PolicyParams load(const std::string& path);
};

// Raw (unstandardized) features of an MDP state.  Edge rows are stored
// column-major: e_ij lives at row i + j*n.
struct StateFeatures {
    Eigen::MatrixXd node;      // n x node_feats
    Eigen::MatrixXd edge;      // n*n x edge_feats
    Eigen::RowVectorXd global; // 1 x global_feats
};

StateFeatures compute_raw_features(const City& city, const MdpState& state);
// Standardizes in place; throws if stats were never fitted.
StateFeatures compute_features(const City& city, const MdpState& state, const NormStats& norm);

Eigen::RowVectorXd city_descriptor(const City& city);

// Per-tape cache of parameter leaves.  When `grads` is non-null,
// backward() accumulates into it.
class ParamContext {
public:
    ParamContext(ad::Tape& tape, const PolicyParams& params, TensorMap* grads = nullptr)
        : tape_(tape), params_(params), grads_(grads) {}

    ad::Var operator()(const std::string& name);
    ad::Tape& tape() { return tape_; }
    const ModelConfig& config() const { return params_.config; }

private:
    ad::Tape& tape_;
    const PolicyParams& params_;
    TensorMap* grads_;
    std::map<std::string, ad::Var> cache_;
};

// Graph-attention backbone over the fully connected node graph with
// edge-conditioned attention logits.  Returns node embeddings (n x dim).
ad::Var backbone_forward(ParamContext& ctx, const StateFeatures& features);

// Log-probabilities (m x 1) over extension candidates.
ad::Var extension_logprobs(ParamContext& ctx, ad::Var embeddings,
                           const StateFeatures& features, const MdpState& state,
                           const std::vector<ExtensionAction>& candidates);

// Halt-head logit (1 x 1); p_halt = sigmoid(logit).
ad::Var halt_logit(ParamContext& ctx, ad::Var embeddings, const StateFeatures& features,
                   const MdpState& state);

// Convenience for inference/tests: full-policy probabilities.
Eigen::VectorXd score_extensions(const PolicyParams& params, const City& city,
                                 const MdpState& state,
                                 const std::vector<ExtensionAction>& candidates);
double halt_probability(const PolicyParams& params, const City& city, const MdpState& state);

ad::Var baseline_forward(ParamContext& ctx, const Eigen::RowVectorXd& descriptor,
                         double alpha, const NormStats& norm);
double baseline_value(const PolicyParams& params, const City& city, double alpha);

// Training hook: collects chosen-action log-probability vars on a shared
// tape so REINFORCE can backpropagate through a whole episode.
struct EpisodeRecorder {
    ad::Tape tape{true};
    std::vector<ad::Var> chosen_logps;
    std::optional<ParamContext> ctx;
};

class NeuralPolicy : public Policy {
public:
    enum class Mode { Sample, Greedy };

    NeuralPolicy(const PolicyParams& params, Mode mode) : params_(params), mode_(mode) {}

    void set_recorder(EpisodeRecorder* recorder) { recorder_ = recorder; }

    std::pair<int, double> choose_extension(const City& city, const MdpState& state,
                                            const std::vector<ExtensionAction>& candidates,
                                            RngStream& rng) override;
    std::pair<bool, double> choose_halt(const City& city, const MdpState& state,
                                        RngStream& rng) override;

private:
    const PolicyParams& params_;
    Mode mode_;
    EpisodeRecorder* recorder_ = nullptr;
};

}  // namespace transit
