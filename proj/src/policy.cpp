#include "transit/policy.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace transit {

using ad::Var;

namespace {

std::vector<std::pair<std::string, std::pair<int, int>>> tensor_shapes(const ModelConfig& c) {
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
    auto add = [&](const std::string& name, int r, int cc) { shapes.push_back({name, {r, cc}}); };
    add("embed.w", ModelConfig::node_feats, c.dim);
    add("embed.b", 1, c.dim);
    for (int l = 0; l < c.layers; ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        for (const char* w : {"wq", "wk", "wv", "wo"}) add(p + w, c.dim, c.dim);
        for (const char* b : {"bq", "bk", "bv", "bo"}) add(p + b, 1, c.dim);
        add(p + "we", ModelConfig::edge_feats, c.heads);
        add(p + "ln1.g", 1, c.dim);
        add(p + "ln1.b", 1, c.dim);
        add(p + "ln2.g", 1, c.dim);
        add(p + "ln2.b", 1, c.dim);
        add(p + "ff.w1", c.dim, c.ff_dim);
        add(p + "ff.b1", 1, c.ff_dim);
        add(p + "ff.w2", c.ff_dim, c.dim);
        add(p + "ff.b2", 1, c.dim);
    }
    add("ext.w1", 2 * c.dim + 2 + ModelConfig::global_feats, c.head_hidden);
    add("ext.b1", 1, c.head_hidden);
    add("ext.w2", c.head_hidden, 1);
    add("ext.b2", 1, 1);
    add("halt.w1", c.dim + ModelConfig::global_feats, c.head_hidden);
    add("halt.b1", 1, c.head_hidden);
    add("halt.w2", c.head_hidden, 1);
    add("halt.b2", 1, 1);
    add("baseline.w1", ModelConfig::descriptor_feats + 1, c.baseline_hidden);
    add("baseline.b1", 1, c.baseline_hidden);
    add("baseline.w2", c.baseline_hidden, c.baseline_hidden);
    add("baseline.b2", 1, c.baseline_hidden);
    add("baseline.w3", c.baseline_hidden, 1);
    add("baseline.b3", 1, 1);
    return shapes;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& std) {
    Eigen::MatrixXd out = x;
    for (int c = 0; c < out.cols(); ++c)
        out.col(c) = (out.col(c).array() - mean(c)) / std(c);
    return out;
}

}  // namespace

bool PolicyParams::is_baseline_tensor(const std::string& name) {
    return name.rfind("baseline.", 0) == 0;
}

PolicyParams PolicyParams::random_init(const ModelConfig& config, RngStream& rng) {
    PolicyParams p;
    p.config = config;
    for (const auto& [name, shape] : tensor_shapes(config)) {
        auto [r, c] = shape;
        Eigen::MatrixXd m(r, c);
        bool is_gain = name.find("ln") != std::string::npos && name.back() == 'g';
        bool is_bias = name.find(".b") != std::string::npos && !is_gain;
        if (is_gain) {
            m.setOnes();
        } else if (is_bias) {
            m.setZero();
        } else {
            double sd = std::sqrt(2.0 / (r + c));
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, sd);
        }
        p.tensors[name] = std::move(m);
    }
    return p;
}

Var ParamContext::operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto t = params_.tensors.find(name);
    if (t == params_.tensors.end()) throw std::runtime_error("unknown tensor: " + name);
    Eigen::MatrixXd* grad = nullptr;
    if (grads_) {
        auto& slot = (*grads_)[name];
        if (slot.size() == 0) slot = Eigen::MatrixXd::Zero(t->second.rows(), t->second.cols());
        grad = &slot;
    }
    Var v = tape_.leaf(t->second, grad);
    cache_[name] = v;
    return v;
}

StateFeatures compute_raw_features(const City& city, const MdpState& state) {
    const int n = city.num_nodes();
    StateFeatures f;

    std::vector<char> in_current(n, 0);
    for (int v : state.current) in_current[v] = 1;
    std::vector<char> same_route(static_cast<size_t>(n) * n, 0);
    auto mark_route = [&](const Route& r) {
        for (size_t a = 0; a < r.size(); ++a)
            for (size_t b = 0; b < r.size(); ++b)
                if (a != b) same_route[r[a] + static_cast<size_t>(r[b]) * n] = 1;
    };
    for (const auto& r : state.finished.routes) mark_route(r);
    if (!state.current.empty()) mark_route(state.current);

    f.node.resize(n, ModelConfig::node_feats);
    for (int i = 0; i < n; ++i) {
        bool terminal = !state.current.empty() &&
                        (state.current.front() == i || state.current.back() == i);
        f.node(i, 0) = city.positions()[i].x();
        f.node(i, 1) = city.positions()[i].y();
        f.node(i, 2) = city.demand().row(i).sum();
        f.node(i, 3) = static_cast<double>(city.neighbors(i).size());
        f.node(i, 4) = in_current[i] ? 1.0 : 0.0;
        f.node(i, 5) = terminal ? 1.0 : 0.0;
    }

    f.edge.resize(static_cast<Eigen::Index>(n) * n, ModelConfig::edge_feats);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            Eigen::Index row = i + static_cast<Eigen::Index>(j) * n;
            bool street = i != j && city.adjacent(i, j);
            bool adj_in_current = false;
            for (size_t k = 0; k + 1 < state.current.size(); ++k)
                if ((state.current[k] == i && state.current[k + 1] == j) ||
                    (state.current[k] == j && state.current[k + 1] == i)) {
                    adj_in_current = true;
                    break;
                }
            f.edge(row, 0) = city.demand()(i, j);
            f.edge(row, 1) = city.drive_times()(i, j);
            f.edge(row, 2) = street ? city.street_time(i, j) : 0.0;
            f.edge(row, 3) = street ? 1.0 : 0.0;
            f.edge(row, 4) = same_route[i + static_cast<size_t>(j) * n] ? 1.0 : 0.0;
            f.edge(row, 5) = adj_in_current ? 1.0 : 0.0;
        }

    f.global.resize(ModelConfig::global_feats);
    f.global(0) = state.alpha;
    f.global(1) = static_cast<double>(state.finished.routes.size()) / state.params.num_routes;
    f.global(2) = static_cast<double>(state.current.size()) / state.params.max_stops;
    return f;
}

StateFeatures compute_features(const City& city, const MdpState& state, const NormStats& norm) {
    if (!norm.fitted)
        throw std::runtime_error("normalization statistics missing; fit or load them first");
    StateFeatures f = compute_raw_features(city, state);
    f.node = standardize(f.node, norm.node_mean, norm.node_std);
    f.edge = standardize(f.edge, norm.edge_mean, norm.edge_std);
    f.global = standardize(f.global, norm.global_mean, norm.global_std);
    return f;
}

Eigen::RowVectorXd city_descriptor(const City& city) {
    const int n = city.num_nodes();
    double dsum = 0.0, dmax = 0.0, tsum = 0.0, tmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            dsum += city.demand()(i, j);
            dmax = std::max(dmax, city.demand()(i, j));
            tsum += city.drive_times()(i, j);
            tmax = std::max(tmax, city.drive_times()(i, j));
        }
    double pairs = static_cast<double>(n) * (n - 1);
    Eigen::RowVectorXd d(ModelConfig::descriptor_feats);
    d << n, dsum / pairs, dmax, tsum / pairs, tmax, city.params().num_routes,
        city.params().min_stops, city.params().max_stops;
    return d;
}

Var backbone_forward(ParamContext& ctx, const StateFeatures& features) {
    ad::Tape& tape = ctx.tape();
    const ModelConfig& c = ctx.config();
    const int n = static_cast<int>(features.node.rows());
    const int dk = c.dim / c.heads;

    Var node_in = tape.constant(features.node);
    Var edge_in = tape.constant(features.edge);
    Var x = ad::add_rowwise(ad::matmul(node_in, ctx("embed.w")), ctx("embed.b"));

    for (int l = 0; l < c.layers; ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        Var q = ad::add_rowwise(ad::matmul(x, ctx(p + "wq")), ctx(p + "bq"));
        Var k = ad::add_rowwise(ad::matmul(x, ctx(p + "wk")), ctx(p + "bk"));
        Var v = ad::add_rowwise(ad::matmul(x, ctx(p + "wv")), ctx(p + "bv"));
        Var e = ad::matmul(edge_in, ctx(p + "we"));  // n^2 x heads

        std::vector<Var> head_outs;
        for (int h = 0; h < c.heads; ++h) {
            Var qh = ad::slice_cols(q, h * dk, dk);
            Var kh = ad::slice_cols(k, h * dk, dk);
            Var vh = ad::slice_cols(v, h * dk, dk);
            Var logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(dk));
            Var eh = ad::reshape(ad::slice_cols(e, h, 1), n, n);
            Var attn = ad::softmax_rows(ad::add(logits, eh));
            head_outs.push_back(ad::matmul(attn, vh));
        }
        Var o = ad::add_rowwise(ad::matmul(ad::concat_cols(head_outs), ctx(p + "wo")),
                                ctx(p + "bo"));
        x = ad::add_rowwise(
            ad::mul_rowwise(ad::layernorm_rows(ad::add(x, o)), ctx(p + "ln1.g")),
            ctx(p + "ln1.b"));
        Var h1 = ad::relu(ad::add_rowwise(ad::matmul(x, ctx(p + "ff.w1")), ctx(p + "ff.b1")));
        Var f = ad::add_rowwise(ad::matmul(h1, ctx(p + "ff.w2")), ctx(p + "ff.b2"));
        x = ad::add_rowwise(
            ad::mul_rowwise(ad::layernorm_rows(ad::add(x, f)), ctx(p + "ln2.g")),
            ctx(p + "ln2.b"));
    }
    if (!x->val.allFinite()) throw std::runtime_error("NaN in backbone activations");
    return x;
}

Var extension_logprobs(ParamContext& ctx, Var embeddings, const StateFeatures& features,
                       const MdpState& state, const std::vector<ExtensionAction>& candidates) {
    if (candidates.empty())
        throw std::runtime_error("score_extensions: empty candidate list");
    ad::Tape& tape = ctx.tape();
    const int m = static_cast<int>(candidates.size());

    std::vector<std::vector<int>> groups(m);
    std::vector<int> attach(m);
    Eigen::MatrixXd extras(m, 2);
    for (int i = 0; i < m; ++i) {
        groups[i] = candidates[i].path;
        if (state.current.empty())
            attach[i] = -1;
        else
            attach[i] = candidates[i].prepend ? state.current.front() : state.current.back();
        extras(i, 0) =
            static_cast<double>(candidates[i].path.size()) / state.params.max_stops;
        extras(i, 1) = candidates[i].prepend ? 1.0 : 0.0;
    }
    Var feat = ad::concat_cols({ad::group_mean_rows(embeddings, groups),
                                ad::gather_rows(embeddings, attach),
                                tape.constant(extras),
                                ad::repeat_rows(tape.constant(features.global), m)});
    Var h = ad::relu(ad::add_rowwise(ad::matmul(feat, ctx("ext.w1")), ctx("ext.b1")));
    Var logits = ad::add_rowwise(ad::matmul(h, ctx("ext.w2")), ctx("ext.b2"));
    return ad::log_softmax_col(logits);
}

Var halt_logit(ParamContext& ctx, Var embeddings, const StateFeatures& features,
               const MdpState& state) {
    ad::Tape& tape = ctx.tape();
    std::vector<std::vector<int>> group = {state.current};
    Var route_emb = ad::group_mean_rows(embeddings, group);
    Var feat = ad::concat_cols({route_emb, tape.constant(features.global)});
    Var h = ad::relu(ad::add_rowwise(ad::matmul(feat, ctx("halt.w1")), ctx("halt.b1")));
    return ad::add_rowwise(ad::matmul(h, ctx("halt.w2")), ctx("halt.b2"));
}

Eigen::VectorXd score_extensions(const PolicyParams& params, const City& city,
                                 const MdpState& state,
                                 const std::vector<ExtensionAction>& candidates) {
    ad::Tape tape(false);
    ParamContext ctx(tape, params);
    StateFeatures f = compute_features(city, state, params.norm);
    Var y = backbone_forward(ctx, f);
    Var logp = extension_logprobs(ctx, y, f, state, candidates);
    return logp->val.array().exp().matrix().col(0);
}

double halt_probability(const PolicyParams& params, const City& city, const MdpState& state) {
    if (static_cast<int>(state.current.size()) >= state.params.max_stops) return 1.0;
    if (static_cast<int>(state.current.size()) < state.params.min_stops) return 0.0;
    ad::Tape tape(false);
    ParamContext ctx(tape, params);
    StateFeatures f = compute_features(city, state, params.norm);
    Var y = backbone_forward(ctx, f);
    Var z = halt_logit(ctx, y, f, state);
    return 1.0 / (1.0 + std::exp(-z->val(0, 0)));
}

Var baseline_forward(ParamContext& ctx, const Eigen::RowVectorXd& descriptor, double alpha,
                     const NormStats& norm) {
    if (!norm.fitted) throw std::runtime_error("normalization statistics missing");
    Eigen::RowVectorXd in(ModelConfig::descriptor_feats + 1);
    for (int i = 0; i < ModelConfig::descriptor_feats; ++i)
        in(i) = (descriptor(i) - norm.descriptor_mean(i)) / norm.descriptor_std(i);
    in(ModelConfig::descriptor_feats) = alpha;
    ad::Tape& tape = ctx.tape();
    Var x = tape.constant(in);
    Var h1 = ad::relu(ad::add_rowwise(ad::matmul(x, ctx("baseline.w1")), ctx("baseline.b1")));
    Var h2 = ad::relu(ad::add_rowwise(ad::matmul(h1, ctx("baseline.w2")), ctx("baseline.b2")));
    return ad::add_rowwise(ad::matmul(h2, ctx("baseline.w3")), ctx("baseline.b3"));
}

double baseline_value(const PolicyParams& params, const City& city, double alpha) {
    ad::Tape tape(false);
    ParamContext ctx(tape, params);
    return baseline_forward(ctx, city_descriptor(city), alpha, params.norm)->val(0, 0);
}

std::pair<int, double> NeuralPolicy::choose_extension(
    const City& city, const MdpState& state, const std::vector<ExtensionAction>& candidates,
    RngStream& rng) {
    std::optional<ad::Tape> local_tape;
    std::optional<ParamContext> local_ctx;
    ParamContext* ctx;
    if (recorder_) {
        ctx = &*recorder_->ctx;
    } else {
        local_tape.emplace(false);
        local_ctx.emplace(*local_tape, params_);
        ctx = &*local_ctx;
    }
    StateFeatures f = compute_features(city, state, params_.norm);
    Var y = backbone_forward(*ctx, f);
    Var logp = extension_logprobs(*ctx, y, f, state, candidates);
    if (!logp->val.allFinite()) throw std::runtime_error("NaN in extension probabilities");

    int chosen = 0;
    if (mode_ == Mode::Greedy) {
        logp->val.col(0).maxCoeff(&chosen);
    } else {
        double u = rng.uniform();
        double acc = 0.0;
        for (int i = 0; i < logp->val.rows(); ++i) {
            acc += std::exp(logp->val(i, 0));
            if (u <= acc || i == logp->val.rows() - 1) {
                chosen = i;
                break;
            }
        }
    }
    if (recorder_) recorder_->chosen_logps.push_back(ad::select(logp, chosen, 0));
    return {chosen, logp->val(chosen, 0)};
}

std::pair<bool, double> NeuralPolicy::choose_halt(const City& city, const MdpState& state,
                                                  RngStream& rng) {
    std::optional<ad::Tape> local_tape;
    std::optional<ParamContext> local_ctx;
    ParamContext* ctx;
    if (recorder_) {
        ctx = &*recorder_->ctx;
    } else {
        local_tape.emplace(false);
        local_ctx.emplace(*local_tape, params_);
        ctx = &*local_ctx;
    }
    StateFeatures f = compute_features(city, state, params_.norm);
    Var y = backbone_forward(*ctx, f);
    Var z = halt_logit(*ctx, y, f, state);
    double p_halt = 1.0 / (1.0 + std::exp(-z->val(0, 0)));
    if (!std::isfinite(p_halt)) throw std::runtime_error("NaN in halt probability");

    bool halt;
    if (mode_ == Mode::Greedy)
        halt = p_halt > 0.5;
    else
        halt = rng.uniform() < p_halt;
    Var chosen_logp = halt ? ad::neg(ad::softplus(ad::neg(z))) : ad::neg(ad::softplus(z));
    if (recorder_) recorder_->chosen_logps.push_back(chosen_logp);
    return {halt, chosen_logp->val(0, 0)};
}

void PolicyParams::save(const std::string& path) const {
    nlohmann::ordered_json j;
    j["version"] = kCheckpointVersion;
    j["config"] = {{"layers", config.layers},       {"heads", config.heads},
                   {"dim", config.dim},             {"ff_dim", config.ff_dim},
                   {"head_hidden", config.head_hidden},
                   {"baseline_hidden", config.baseline_hidden}};
    auto vec_json = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["norm_stats"] = {
        {"fitted", norm.fitted},
        {"node_mean", vec_json(norm.node_mean)},   {"node_std", vec_json(norm.node_std)},
        {"edge_mean", vec_json(norm.edge_mean)},   {"edge_std", vec_json(norm.edge_std)},
        {"global_mean", vec_json(norm.global_mean)},
        {"global_std", vec_json(norm.global_std)},
        {"descriptor_mean", vec_json(norm.descriptor_mean)},
        {"descriptor_std", vec_json(norm.descriptor_std)}};
    nlohmann::ordered_json tj;
    for (const auto& [name, m] : tensors) {
        tj[name] = {{"rows", m.rows()},
                    {"cols", m.cols()},
                    {"data", std::vector<double>(m.data(), m.data() + m.size())}};
    }
    j["tensors"] = std::move(tj);
    write_text_file(path, j.dump());
}

PolicyParams PolicyParams::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt checkpoint file " + path + ": " + e.what());
    }
    int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version " + std::to_string(version) +
                                 " not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    PolicyParams p;
    const auto& cj = j.at("config");
    p.config.layers = cj.at("layers").get<int>();
    p.config.heads = cj.at("heads").get<int>();
    p.config.dim = cj.at("dim").get<int>();
    p.config.ff_dim = cj.at("ff_dim").get<int>();
    p.config.head_hidden = cj.at("head_hidden").get<int>();
    p.config.baseline_hidden = cj.at("baseline_hidden").get<int>();

    auto vec_from = [&](const char* key) {
        auto v = j.at("norm_stats").at(key).get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval();
    };
    p.norm.fitted = j.at("norm_stats").at("fitted").get<bool>();
    p.norm.node_mean = vec_from("node_mean");
    p.norm.node_std = vec_from("node_std");
    p.norm.edge_mean = vec_from("edge_mean");
    p.norm.edge_std = vec_from("edge_std");
    p.norm.global_mean = vec_from("global_mean");
    p.norm.global_std = vec_from("global_std");
    p.norm.descriptor_mean = vec_from("descriptor_mean");
    p.norm.descriptor_std = vec_from("descriptor_std");

    for (const auto& [name, shape] : tensor_shapes(p.config)) {
        const auto& tj = j.at("tensors").at(name);
        int rows = tj.at("rows").get<int>(), cols = tj.at("cols").get<int>();
        if (rows != shape.first || cols != shape.second)
            throw std::runtime_error("checkpoint tensor " + name + " has wrong shape");
        auto data = tj.at("data").get<std::vector<double>>();
        if (static_cast<int>(data.size()) != rows * cols)
            throw std::runtime_error("checkpoint tensor " + name + " has wrong size");
        p.tensors[name] = Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
    }
    return p;
}

}  // namespace transit
