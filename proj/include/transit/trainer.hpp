#pragma once

#include <functional>
#include <string>
#include <vector>

#include "transit/policy.hpp"

namespace transit {

struct TrainConfig {
    int dataset_size = 1 << 15;
    int city_n = 20;
    double deletion_prob = 0.1;
    int batch_size = 64;
    int epochs = 5;
    NdpParams train_params{10, 2, 15};  // S, MIN, MAX
    double lr_policy = 1e-4;
    double lr_baseline = 1e-3;
    double grad_clip = 1.0;
    double beta = 5.0;
    double transfer_penalty = 300.0;
    uint64_t seed = 0;
    // Validation rollouts are greedy; cap keeps epoch turnaround sane on CPU.
    int val_max_cities = 256;
    int norm_fit_cities = 64;
    ModelConfig model;
    std::string out_dir;  // checkpoints + history written here when set

    double train_fraction = 0.9;
};

std::vector<City> build_dataset(int count, int n, double deletion_prob, NdpParams params,
                                uint64_t seed);

NormStats fit_normalization(const std::vector<City>& sample, NdpParams params, uint64_t seed);

struct EpochStats {
    int epoch = 0;
    double train_cost_mean = 0.0;
    double val_cost_mean = 0.0;
    double val_cost_alpha0 = 0.0;
    double val_cost_alpha05 = 0.0;
    double val_cost_alpha1 = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    PolicyParams best_params;
    int best_epoch = 0;
    std::vector<EpochStats> history;

    std::string history_csv() const;
};

struct ValidationResult {
    double mean_cost = 0.0;
    std::vector<std::pair<double, double>> per_alpha;  // (alpha, mean cost)
};

ValidationResult validate(const PolicyParams& params, const std::vector<City>& cities,
                          const std::vector<double>& alpha_grid, double beta,
                          double transfer_penalty);

TrainResult train(const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

// Adam with per-tensor moments; shared by policy and baseline updates.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(TensorMap& tensors, const TensorMap& grads,
              const std::function<bool(const std::string&)>& filter);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    TensorMap m_, v_;
};

// L2 norm over a filtered subset of a gradient map.
double grad_norm(const TensorMap& grads, const std::function<bool(const std::string&)>& filter);
void clip_grads(TensorMap& grads, double max_norm,
                const std::function<bool(const std::string&)>& filter);

}  // namespace transit
