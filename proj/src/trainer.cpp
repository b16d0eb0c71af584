#include "transit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

namespace transit {

std::vector<City> build_dataset(int count, int n, double deletion_prob, NdpParams params,
                                uint64_t seed) {
    if (count < 10) throw std::runtime_error("dataset needs at least 10 cities");
    std::vector<City> cities;
    cities.reserve(count);
    const CityKind kinds[4] = {CityKind::FourNearest, CityKind::FourGrid, CityKind::EightGrid,
                               CityKind::Voronoi};
    for (int i = 0; i < count; ++i) {
        RngStream rng = RngStream::derive(seed, "dataset", i);
        CityKind kind = kinds[rng.uniform_int(0, 3)];
        cities.push_back(generate_city(kind, n, deletion_prob, params, rng));
    }
    return cities;
}

NormStats fit_normalization(const std::vector<City>& sample, NdpParams params, uint64_t seed) {
    if (sample.empty()) throw std::runtime_error("empty normalization sample");
    NormStats stats;
    Eigen::VectorXd node_sum = Eigen::VectorXd::Zero(ModelConfig::node_feats);
    Eigen::VectorXd node_sq = node_sum, edge_sum = Eigen::VectorXd::Zero(ModelConfig::edge_feats);
    Eigen::VectorXd edge_sq = edge_sum, glob_sum = Eigen::VectorXd::Zero(ModelConfig::global_feats);
    Eigen::VectorXd glob_sq = glob_sum, desc_sum = Eigen::VectorXd::Zero(ModelConfig::descriptor_feats);
    Eigen::VectorXd desc_sq = desc_sum;
    long node_rows = 0, edge_rows = 0, glob_rows = 0, desc_rows = 0;

    UniformRandomPolicy random_policy;
    for (size_t c = 0; c < sample.size(); ++c) {
        const City& city = sample[c];
        SpCatalog catalog(city);
        RngStream rng = RngStream::derive(seed, "normfit", c);
        double alpha = rng.uniform();
        NdpParams p = params;
        p.max_stops = std::min(p.max_stops, city.num_nodes());

        // Visit every decision state of one random-policy episode.
        MdpState state = init_state(city, p, alpha);
        while (!state.terminal()) {
            StateFeatures f = compute_raw_features(city, state);
            for (int i = 0; i < f.node.rows(); ++i) {
                node_sum += f.node.row(i).transpose();
                node_sq += f.node.row(i).transpose().cwiseAbs2();
            }
            node_rows += f.node.rows();
            for (int i = 0; i < f.edge.rows(); ++i) {
                edge_sum += f.edge.row(i).transpose();
                edge_sq += f.edge.row(i).transpose().cwiseAbs2();
            }
            edge_rows += f.edge.rows();
            glob_sum += f.global.transpose();
            glob_sq += f.global.transpose().cwiseAbs2();
            glob_rows += 1;

            if (state.extension_pending()) {
                auto cands = enumerate_extensions(city, state, catalog);
                auto [k, logp] = random_policy.choose_extension(city, state, cands, rng);
                state = apply_extension(state, cands[k]);
            } else {
                auto set = halt_actions(city, state, catalog);
                bool halt = set.can_halt && set.can_continue
                                ? random_policy.choose_halt(city, state, rng).first
                                : set.can_halt;
                state = apply_halt(state, halt);
            }
        }
        Eigen::RowVectorXd d = city_descriptor(city);
        desc_sum += d.transpose();
        desc_sq += d.transpose().cwiseAbs2();
        desc_rows += 1;
    }
    if (node_rows < 1000)
        throw std::runtime_error("normalization sample too small: " + std::to_string(node_rows) +
                                 " feature rows (need >= 1000)");

    auto finish = [](const Eigen::VectorXd& sum, const Eigen::VectorXd& sq, long count,
                     Eigen::VectorXd& mean, Eigen::VectorXd& std) {
        mean = sum / count;
        Eigen::VectorXd var = sq / count - mean.cwiseAbs2();
        std = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-6);
    };
    finish(node_sum, node_sq, node_rows, stats.node_mean, stats.node_std);
    finish(edge_sum, edge_sq, edge_rows, stats.edge_mean, stats.edge_std);
    finish(glob_sum, glob_sq, glob_rows, stats.global_mean, stats.global_std);
    finish(desc_sum, desc_sq, desc_rows, stats.descriptor_mean, stats.descriptor_std);
    stats.fitted = true;
    return stats;
}

double grad_norm(const TensorMap& grads, const std::function<bool(const std::string&)>& filter) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        if (filter(name)) sq += g.squaredNorm();
    return std::sqrt(sq);
}

void clip_grads(TensorMap& grads, double max_norm,
                const std::function<bool(const std::string&)>& filter) {
    double norm = grad_norm(grads, filter);
    if (norm <= max_norm || norm == 0.0) return;
    double s = max_norm / norm;
    for (auto& [name, g] : grads)
        if (filter(name)) g *= s;
}

void AdamOptimizer::step(TensorMap& tensors, const TensorMap& grads,
                         const std::function<bool(const std::string&)>& filter) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, w] : tensors) {
        if (!filter(name)) continue;
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Eigen::MatrixXd& g = git->second;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() == 0) {
            m = Eigen::MatrixXd::Zero(w.rows(), w.cols());
            v = Eigen::MatrixXd::Zero(w.rows(), w.cols());
        }
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
        Eigen::ArrayXXd mhat = m.array() / bc1;
        Eigen::ArrayXXd vhat = v.array() / bc2;
        w.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
    }
}

ValidationResult validate(const PolicyParams& params, const std::vector<City>& cities,
                          const std::vector<double>& alpha_grid, double beta,
                          double transfer_penalty) {
    if (cities.empty()) throw std::runtime_error("validate: empty city list");
    ValidationResult res;
    NeuralPolicy greedy(params, NeuralPolicy::Mode::Greedy);
    RngStream unused(0);
    double total = 0.0;
    long count = 0;
    for (double alpha : alpha_grid) {
        double alpha_total = 0.0;
        for (const City& city : cities) {
            SpCatalog catalog(city);
            NdpParams p = city.params();
            auto result = rollout(city, greedy, p, alpha, catalog, unused);
            CostWeights w = CostWeights::derive(city, alpha, beta, transfer_penalty);
            double c = total_cost(city, result.network, w).total;
            alpha_total += c;
            total += c;
            ++count;
        }
        res.per_alpha.emplace_back(alpha, alpha_total / cities.size());
    }
    res.mean_cost = total / count;
    return res;
}

std::string TrainResult::history_csv() const {
    std::ostringstream out;
    out << "epoch,train_cost_mean,val_cost_mean,val_cost_alpha0,val_cost_alpha05,"
           "val_cost_alpha1,wall_seconds\n";
    for (const auto& e : history)
        out << e.epoch << "," << e.train_cost_mean << "," << e.val_cost_mean << ","
            << e.val_cost_alpha0 << "," << e.val_cost_alpha05 << "," << e.val_cost_alpha1 << ","
            << e.wall_seconds << "\n";
    return out.str();
}

TrainResult train(const TrainConfig& config, const std::function<void(const EpochStats&)>& on_epoch) {
    auto dataset = build_dataset(config.dataset_size, config.city_n, config.deletion_prob,
                                 config.train_params, config.seed);
    int train_count = static_cast<int>(dataset.size() * config.train_fraction);
    std::vector<City> train_cities(dataset.begin(), dataset.begin() + train_count);
    std::vector<City> val_cities(dataset.begin() + train_count, dataset.end());
    if (static_cast<int>(val_cities.size()) > config.val_max_cities)
        val_cities.erase(val_cities.begin() + config.val_max_cities, val_cities.end());

    std::vector<City> norm_sample(
        train_cities.begin(),
        train_cities.begin() + std::min<size_t>(config.norm_fit_cities, train_cities.size()));
    NormStats norm = fit_normalization(norm_sample, config.train_params, config.seed);

    RngStream init_rng = RngStream::derive(config.seed, "init");
    PolicyParams params = PolicyParams::random_init(config.model, init_rng);
    params.norm = norm;

    AdamOptimizer policy_opt(config.lr_policy);
    AdamOptimizer baseline_opt(config.lr_baseline);
    auto is_policy = [](const std::string& n) { return !PolicyParams::is_baseline_tensor(n); };
    auto is_baseline = [](const std::string& n) { return PolicyParams::is_baseline_tensor(n); };

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    int worse_streak = 0;
    uint64_t episode_counter = 0;

    std::vector<int> order(train_cities.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        RngStream shuffle_rng = RngStream::derive(config.seed, "shuffle", epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

        double epoch_cost_sum = 0.0;
        long epoch_episodes = 0;

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            TensorMap grads;
            for (size_t b = start; b < end; ++b) {
                const City& base_city = train_cities[order[b]];
                uint64_t ep = episode_counter++;
                RngStream aug_rng = RngStream::derive(config.seed, "augment", ep);
                RngStream roll_rng = RngStream::derive(config.seed, "rollout", ep);
                City city = augment(base_city, aug_rng);
                double alpha = RngStream::derive(config.seed, "alpha", ep).uniform();
                SpCatalog catalog(city);

                EpisodeRecorder recorder;
                recorder.ctx.emplace(recorder.tape, params, &grads);
                NeuralPolicy policy(params, NeuralPolicy::Mode::Sample);
                policy.set_recorder(&recorder);

                NdpParams p = city.params();
                auto ro = rollout(city, policy, p, alpha, catalog, roll_rng);
                CostWeights w =
                    CostWeights::derive(city, alpha, config.beta, config.transfer_penalty);
                double G = -total_cost(city, ro.network, w).total;
                if (!std::isfinite(G))
                    throw std::runtime_error("non-finite return during training (epoch " +
                                             std::to_string(epoch) + ")");
                epoch_cost_sum += -G;
                ++epoch_episodes;

                // Baseline loss (G - b)^2; its gradient stays inside the
                // baseline net.
                ad::Var b_var =
                    baseline_forward(*recorder.ctx, city_descriptor(city), alpha, params.norm);
                double b_val = b_var->val(0, 0);
                ad::Var diff = ad::sub_bcast(b_var, recorder.tape.constant_scalar(G));
                ad::Var baseline_loss = ad::hadamard(diff, diff);

                // REINFORCE with baseline: -(G - b) * sum_t log pi(a_t|s_t),
                // with b treated as a constant.
                ad::Var total_loss = baseline_loss;
                if (!recorder.chosen_logps.empty()) {
                    ad::Var sum_logp = recorder.chosen_logps.front();
                    for (size_t i = 1; i < recorder.chosen_logps.size(); ++i)
                        sum_logp = ad::add(sum_logp, recorder.chosen_logps[i]);
                    ad::Var policy_loss = ad::scale(sum_logp, -(G - b_val));
                    total_loss = ad::add(total_loss, policy_loss);
                }
                if (!std::isfinite(total_loss->val(0, 0)))
                    throw std::runtime_error("NaN loss during training (epoch " +
                                             std::to_string(epoch) + ", episode " +
                                             std::to_string(ep) + ")");
                recorder.tape.backward(total_loss);
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (auto& [name, gmat] : grads) gmat *= inv;
            clip_grads(grads, config.grad_clip, is_policy);
            clip_grads(grads, config.grad_clip, is_baseline);
            policy_opt.step(params.tensors, grads, is_policy);
            baseline_opt.step(params.tensors, grads, is_baseline);
        }

        ValidationResult val =
            validate(params, val_cities, {0.0, 0.5, 1.0}, config.beta, config.transfer_penalty);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_cost_mean = epoch_cost_sum / std::max(1L, epoch_episodes);
        stats.val_cost_mean = val.mean_cost;
        stats.val_cost_alpha0 = val.per_alpha[0].second;
        stats.val_cost_alpha05 = val.per_alpha[1].second;
        stats.val_cost_alpha1 = val.per_alpha[2].second;
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (!config.out_dir.empty()) {
            std::filesystem::create_directories(config.out_dir);
            params.save(config.out_dir + "/epoch" + std::to_string(epoch) + ".ckpt.json");
            write_text_file(config.out_dir + "/history.csv", result.history_csv());
        }

        if (val.mean_cost < best_val) {
            best_val = val.mean_cost;
            result.best_params = params;
            result.best_epoch = epoch;
            worse_streak = 0;
        } else if (++worse_streak >= 3) {
            break;  // divergence guard
        }
    }
    if (!config.out_dir.empty()) {
        result.best_params.save(config.out_dir + "/best.ckpt.json");
        write_text_file(config.out_dir + "/best_epoch.txt",
                        std::to_string(result.best_epoch) + "\n");
    }
    return result;
}

}  // namespace transit
