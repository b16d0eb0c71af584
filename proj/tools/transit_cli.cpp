// Command-line front end for the transit network design toolkit.
//
// Subcommands:
//   gen-cities   synthesize training/evaluation cities as JSON files
//   train        train the construction policy on synthetic cities
//   lc           best-of-K sampled construction with a trained policy
//   ea           evolutionary improvement with shortest-path mutators
//   nea          evolutionary improvement with the neural mutator
//   sweep        run ea/nea/lc across an alpha grid and seed list
//   pareto-plot  render a sweep CSV as an SVG trade-off plot
//   validate     check a network against the problem constraints

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "transit/bench.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace transit;

namespace {

struct CityInput {
    std::string city_json_path;
    std::string times_path;
    std::string demand_path;
    int S = 0, MIN = 0, MAX = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--city", city_json_path, "City as native JSON");
        cmd->add_option("--times", times_path, "Benchmark travel-time matrix (minutes, Inf = no street)");
        cmd->add_option("--demand", demand_path, "Benchmark demand matrix (trips/day)");
        cmd->add_option("--routes,--S", S, "Route count for benchmark input");
        cmd->add_option("--min-stops,--MIN", MIN, "Minimum stops per route for benchmark input");
        cmd->add_option("--max-stops,--MAX", MAX, "Maximum stops per route for benchmark input");
    }

    City load() const {
        if (!city_json_path.empty()) return City::from_json(read_text_file(city_json_path));
        if (times_path.empty() || demand_path.empty())
            throw std::runtime_error("provide either --city or both --times and --demand");
        if (S <= 0) throw std::runtime_error("benchmark input requires --routes/--min-stops/--max-stops");
        return load_benchmark_files(times_path, demand_path, NdpParams{S, MIN, MAX});
    }

    ordered_json describe() const {
        ordered_json j;
        if (!city_json_path.empty()) {
            j["city"] = city_json_path;
        } else {
            j["times"] = times_path;
            j["demand"] = demand_path;
            j["routes"] = S;
            j["min_stops"] = MIN;
            j["max_stops"] = MAX;
        }
        return j;
    }
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ordered_json& resolved) {
    ordered_json m;
    m["tool_version"] = kToolVersion;
    m["command"] = command;
    m["config"] = resolved;
    write_text_file((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) throw std::runtime_error("--out directory is required");
    fs::create_directories(dir);
}

// Flat key=value config file whose keys mirror a subcommand's long
// option names.  Command-line values take precedence.
void apply_config(CLI::App* cmd, const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     " is not key=value: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || key == "config")
            throw std::runtime_error("unknown config key for " + cmd->get_name() + ": " + key);
        if (opt->count() > 0) continue;
        opt->add_result(val);
        opt->run_callback();
    }
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Transit network design toolkit"};
    app.require_subcommand(1);

    // --- gen-cities ------------------------------------------------------
    auto* gen = app.add_subcommand("gen-cities", "Generate synthetic cities");
    std::string gen_kind = "voronoi";
    int gen_n = 20, gen_count = 1;
    double gen_delete = 0.1;
    int gen_S = 10, gen_MIN = 2, gen_MAX = 15;
    uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--kind", gen_kind, "4nn | 4grid | 8grid | voronoi")->capture_default_str();
    gen->add_option("--n", gen_n, "Nodes per city")->capture_default_str();
    gen->add_option("--count", gen_count, "Number of cities")->capture_default_str();
    gen->add_option("--delete-prob", gen_delete, "Node deletion probability")->capture_default_str();
    gen->add_option("--routes,--S", gen_S)->capture_default_str();
    gen->add_option("--min-stops,--MIN", gen_MIN)->capture_default_str();
    gen->add_option("--max-stops,--MAX", gen_MAX)->capture_default_str();
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--out", gen_out, "Output directory");

    // --- train -----------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train the construction policy");
    TrainConfig tc;
    tr->add_option("--dataset-size", tc.dataset_size)->capture_default_str();
    tr->add_option("--city-n", tc.city_n)->capture_default_str();
    tr->add_option("--delete-prob", tc.deletion_prob)->capture_default_str();
    tr->add_option("--batch-size", tc.batch_size)->capture_default_str();
    tr->add_option("--epochs", tc.epochs)->capture_default_str();
    tr->add_option("--routes,--S", tc.train_params.num_routes)->capture_default_str();
    tr->add_option("--min-stops,--MIN", tc.train_params.min_stops)->capture_default_str();
    tr->add_option("--max-stops,--MAX", tc.train_params.max_stops)->capture_default_str();
    tr->add_option("--lr-policy", tc.lr_policy)->capture_default_str();
    tr->add_option("--lr-baseline", tc.lr_baseline)->capture_default_str();
    tr->add_option("--grad-clip", tc.grad_clip)->capture_default_str();
    tr->add_option("--beta", tc.beta)->capture_default_str();
    tr->add_option("--pt", tc.transfer_penalty, "Transfer penalty, seconds")->capture_default_str();
    tr->add_option("--seed", tc.seed)->capture_default_str();
    tr->add_option("--val-max-cities", tc.val_max_cities)->capture_default_str();
    tr->add_option("--norm-fit-cities", tc.norm_fit_cities)->capture_default_str();
    tr->add_option("--layers", tc.model.layers)->capture_default_str();
    tr->add_option("--heads", tc.model.heads)->capture_default_str();
    tr->add_option("--dim", tc.model.dim)->capture_default_str();
    tr->add_option("--ff-dim", tc.model.ff_dim)->capture_default_str();
    std::string tr_out;
    tr->add_option("--out", tr_out, "Output directory");

    // --- lc ---------------------------------------------------------------
    auto* lc = app.add_subcommand("lc", "Best-of-K sampled construction");
    CityInput lc_city;
    lc_city.attach(lc);
    std::string lc_model, lc_out;
    int lc_rollouts = 100;
    double lc_alpha = 0.5, lc_beta = 5.0, lc_pt = 300.0;
    uint64_t lc_seed = 0;
    lc->add_option("--model", lc_model, "Policy checkpoint");
    lc->add_option("--rollouts", lc_rollouts)->capture_default_str();
    lc->add_option("--alpha", lc_alpha)->capture_default_str();
    lc->add_option("--beta", lc_beta)->capture_default_str();
    lc->add_option("--pt", lc_pt)->capture_default_str();
    lc->add_option("--seed", lc_seed)->capture_default_str();
    lc->add_option("--out", lc_out, "Output directory");

    // --- ea / nea ----------------------------------------------------------
    auto* ea = app.add_subcommand("ea", "Evolutionary improvement");
    auto* nea = app.add_subcommand("nea", "Neural-evolutionary improvement");
    CityInput ea_city, nea_city;
    ea_city.attach(ea);
    nea_city.attach(nea);
    EaConfig ec;
    std::string ea_out, nea_out, nea_model;
    for (auto [cmd, out_ptr] : {std::pair{ea, &ea_out}, std::pair{nea, &nea_out}}) {
        cmd->add_option("--population", ec.population_size)->capture_default_str();
        cmd->add_option("--mutations", ec.mutations_per_stage)->capture_default_str();
        cmd->add_option("--iterations", ec.iterations)->capture_default_str();
        cmd->add_option("--alpha", ec.alpha)->capture_default_str();
        cmd->add_option("--beta", ec.beta)->capture_default_str();
        cmd->add_option("--pt", ec.transfer_penalty)->capture_default_str();
        cmd->add_option("--seed", ec.seed)->capture_default_str();
        cmd->add_option("--out", *out_ptr, "Output directory");
    }
    nea->add_option("--model", nea_model, "Policy checkpoint");

    // --- sweep --------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "Run modes across alphas and seeds");
    CityInput sw_city;
    sw_city.attach(sw);
    std::string sw_modes = "ea", sw_alphas = "0,0.5,1", sw_model, sw_out;
    int sw_num_seeds = 3, sw_lc_rollouts = 100;
    EaConfig sw_ec;
    sw->add_option("--modes", sw_modes, "Comma list of ea,nea,lc")->capture_default_str();
    sw->add_option("--alphas", sw_alphas, "Comma list of alpha values")->capture_default_str();
    sw->add_option("--num-seeds", sw_num_seeds)->capture_default_str();
    sw->add_option("--population", sw_ec.population_size)->capture_default_str();
    sw->add_option("--mutations", sw_ec.mutations_per_stage)->capture_default_str();
    sw->add_option("--iterations", sw_ec.iterations)->capture_default_str();
    sw->add_option("--beta", sw_ec.beta)->capture_default_str();
    sw->add_option("--pt", sw_ec.transfer_penalty)->capture_default_str();
    sw->add_option("--lc-rollouts", sw_lc_rollouts)->capture_default_str();
    sw->add_option("--model", sw_model, "Policy checkpoint (for nea/lc)");
    sw->add_option("--out", sw_out, "Output directory");

    // --- pareto-plot ---------------------------------------------------------
    auto* pp = app.add_subcommand("pareto-plot", "Render a sweep CSV as SVG");
    std::string pp_in, pp_out;
    pp->add_option("--in", pp_in, "Sweep CSV");
    pp->add_option("--out", pp_out, "Output SVG path");

    // --- validate --------------------------------------------------------------
    auto* va = app.add_subcommand("validate", "Check a network against constraints");
    CityInput va_city;
    va_city.attach(va);
    std::string va_network;
    double va_alpha = 0.5, va_beta = 5.0, va_pt = 300.0;
    va->add_option("--network", va_network, "Network JSON");
    va->add_option("--alpha", va_alpha)->capture_default_str();
    va->add_option("--beta", va_beta)->capture_default_str();
    va->add_option("--pt", va_pt)->capture_default_str();

    std::string config_path;
    for (CLI::App* sub : {gen, tr, lc, ea, nea, sw, pp, va})
        sub->add_option("--config", config_path, "Flat key=value config file");

    CLI11_PARSE(app, argc, argv);

    if (!config_path.empty())
        for (CLI::App* sub : app.get_subcommands()) apply_config(sub, config_path);

    if (gen->parsed()) {
        ensure_dir(gen_out);
        CityKind kind = parse_city_kind(gen_kind);
        NdpParams params{gen_S, gen_MIN, gen_MAX};
        for (int i = 0; i < gen_count; ++i) {
            RngStream rng = RngStream::derive(gen_seed, "gen-cities", i);
            City city = generate_city(kind, gen_n, gen_delete, params, rng);
            std::ostringstream name;
            name << "city_" << i << ".json";
            write_text_file((fs::path(gen_out) / name.str()).string(), city.to_json());
        }
        ordered_json cfg{{"kind", gen_kind}, {"n", gen_n},      {"count", gen_count},
                         {"delete_prob", gen_delete},           {"routes", gen_S},
                         {"min_stops", gen_MIN},                {"max_stops", gen_MAX},
                         {"seed", gen_seed}};
        write_manifest(gen_out, "gen-cities", cfg);
        std::cout << "wrote " << gen_count << " cities to " << gen_out << "\n";
        return 0;
    }

    if (tr->parsed()) {
        ensure_dir(tr_out);
        tc.out_dir = tr_out;
        ordered_json cfg{{"dataset_size", tc.dataset_size},
                         {"city_n", tc.city_n},
                         {"delete_prob", tc.deletion_prob},
                         {"batch_size", tc.batch_size},
                         {"epochs", tc.epochs},
                         {"routes", tc.train_params.num_routes},
                         {"min_stops", tc.train_params.min_stops},
                         {"max_stops", tc.train_params.max_stops},
                         {"lr_policy", tc.lr_policy},
                         {"lr_baseline", tc.lr_baseline},
                         {"grad_clip", tc.grad_clip},
                         {"beta", tc.beta},
                         {"pt", tc.transfer_penalty},
                         {"seed", tc.seed},
                         {"val_max_cities", tc.val_max_cities},
                         {"norm_fit_cities", tc.norm_fit_cities},
                         {"layers", tc.model.layers},
                         {"heads", tc.model.heads},
                         {"dim", tc.model.dim},
                         {"ff_dim", tc.model.ff_dim}};
        write_manifest(tr_out, "train", cfg);
        TrainResult result = train(tc, [](const EpochStats& s) {
            std::cout << "epoch " << s.epoch << "  train " << s.train_cost_mean << "  val "
                      << s.val_cost_mean << "  (" << s.wall_seconds << "s)" << std::endl;
        });
        std::cout << "best epoch: " << result.best_epoch << "\n";
        return 0;
    }

    if (lc->parsed()) {
        ensure_dir(lc_out);
        City city = lc_city.load();
        if (lc_model.empty()) throw std::runtime_error("lc requires --model");
        PolicyParams policy = PolicyParams::load(lc_model);
        LcResult result = run_lc(city, policy, lc_rollouts, lc_alpha, lc_beta, lc_pt, lc_seed);
        CostWeights weights = CostWeights::derive(city, lc_alpha, lc_beta, lc_pt);
        write_text_file((fs::path(lc_out) / "network.json").string(),
                        result.best_network.to_json());
        write_text_file((fs::path(lc_out) / "cost.json").string(),
                        result.best_cost.to_json(weights));
        ordered_json cfg{{"model", lc_model}, {"rollouts", lc_rollouts}, {"alpha", lc_alpha},
                         {"beta", lc_beta},   {"pt", lc_pt},             {"seed", lc_seed}};
        cfg["input"] = lc_city.describe();
        write_manifest(lc_out, "lc", cfg);
        std::cout << "best of " << lc_rollouts << ": C = " << result.best_cost.total << "\n";
        return 0;
    }

    if (ea->parsed() || nea->parsed()) {
        const bool neural = nea->parsed();
        const std::string& out_dir = neural ? nea_out : ea_out;
        ensure_dir(out_dir);
        City city = neural ? nea_city.load() : ea_city.load();
        ec.mode = neural ? EaMode::NEA : EaMode::EA;
        std::optional<PolicyParams> policy;
        if (neural) {
            if (nea_model.empty()) throw std::runtime_error("nea requires --model");
            policy = PolicyParams::load(nea_model);
        }
        EaResult result = run_evolution(city, ec, policy ? &*policy : nullptr);
        CostWeights weights = CostWeights::derive(city, ec.alpha, ec.beta, ec.transfer_penalty);
        write_text_file((fs::path(out_dir) / "network.json").string(),
                        result.best_network.to_json());
        write_text_file((fs::path(out_dir) / "cost.json").string(),
                        result.best_cost.to_json(weights));
        write_text_file((fs::path(out_dir) / "history.csv").string(), result.history_csv());
        ordered_json cfg{{"population", ec.population_size},
                         {"mutations", ec.mutations_per_stage},
                         {"iterations", ec.iterations},
                         {"alpha", ec.alpha},
                         {"beta", ec.beta},
                         {"pt", ec.transfer_penalty},
                         {"seed", ec.seed}};
        if (neural) cfg["model"] = nea_model;
        cfg["input"] = (neural ? nea_city : ea_city).describe();
        write_manifest(out_dir, neural ? "nea" : "ea", cfg);
        std::cout << (neural ? "nea" : "ea") << " best C = " << result.best_cost.total << "\n";
        return 0;
    }

    if (sw->parsed()) {
        ensure_dir(sw_out);
        City city = sw_city.load();
        SweepSpec spec;
        std::stringstream ms(sw_modes);
        std::string tok;
        while (std::getline(ms, tok, ',')) {
            if (tok != "ea" && tok != "nea" && tok != "lc")
                throw std::runtime_error("unknown sweep mode: " + tok);
            spec.modes.push_back(tok);
        }
        spec.alphas = parse_double_list(sw_alphas);
        for (int s = 0; s < sw_num_seeds; ++s) spec.seeds.push_back(s);
        spec.ea = sw_ec;
        spec.lc_rollouts = sw_lc_rollouts;
        std::optional<PolicyParams> policy;
        if (!sw_model.empty()) policy = PolicyParams::load(sw_model);
        SweepResults results = run_sweep(city, spec, policy ? &*policy : nullptr);
        write_text_file((fs::path(sw_out) / "sweep.csv").string(), results.to_csv());
        auto cells = aggregate_sweep(results);
        write_text_file((fs::path(sw_out) / "summary.txt").string(), sweep_table(cells));
        write_text_file((fs::path(sw_out) / "pareto.svg").string(), pareto_svg(cells));
        ordered_json cfg{{"modes", sw_modes},           {"alphas", sw_alphas},
                         {"num_seeds", sw_num_seeds},   {"population", sw_ec.population_size},
                         {"mutations", sw_ec.mutations_per_stage},
                         {"iterations", sw_ec.iterations},
                         {"beta", sw_ec.beta},          {"pt", sw_ec.transfer_penalty},
                         {"lc_rollouts", sw_lc_rollouts}};
        if (!sw_model.empty()) cfg["model"] = sw_model;
        cfg["input"] = sw_city.describe();
        write_manifest(sw_out, "sweep", cfg);
        std::cout << sweep_table(cells);
        return 0;
    }

    if (pp->parsed()) {
        if (pp_in.empty() || pp_out.empty())
            throw std::runtime_error("pareto-plot requires --in and --out");
        SweepResults results = SweepResults::from_csv(read_text_file(pp_in));
        write_text_file(pp_out, pareto_svg(aggregate_sweep(results)));
        std::cout << "wrote " << pp_out << "\n";
        return 0;
    }

    if (va->parsed()) {
        City city = va_city.load();
        if (va_network.empty()) throw std::runtime_error("validate requires --network");
        Network network = Network::from_json(read_text_file(va_network));
        ConstraintReport report = validate_network(city, network, va_alpha, va_beta, va_pt);
        std::cout << report.to_json() << "\n";
        return report.all_ok() ? 0 : 2;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", e.what()}};
        std::cerr << err.dump() << std::endl;
        return 1;
    }
}
