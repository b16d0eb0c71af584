#include "transit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace transit {

LcResult run_lc(const City& city, const PolicyParams& policy, int rollouts, double alpha,
                double beta, double transfer_penalty, uint64_t seed) {
    if (rollouts < 1) throw std::runtime_error("LC needs at least one rollout");
    SpCatalog catalog(city);
    CostWeights weights = CostWeights::derive(city, alpha, beta, transfer_penalty);
    NeuralPolicy sampler(policy, NeuralPolicy::Mode::Sample);
    LcResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < rollouts; ++k) {
        RngStream rng = RngStream::derive(seed, "lc.rollout", k);
        auto ro = rollout(city, sampler, city.params(), alpha, catalog, rng);
        CostBreakdown cost = evaluate_network(city, ro.network, weights);
        result.all_costs.push_back(cost.total);
        if (cost.total < best) {
            best = cost.total;
            result.best_network = std::move(ro.network);
            result.best_cost = cost;
        }
    }
    return result;
}

std::string SweepResults::to_csv() const {
    std::ostringstream out;
    out << "mode,alpha,seed,ok,C,Cp_minutes,Co_minutes,Cc,error\n";
    for (const auto& p : points) {
        std::string err = p.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << p.mode << "," << p.alpha << "," << p.seed << "," << (p.ok ? 1 : 0) << ","
            << std::setprecision(12) << p.total << "," << p.passenger_minutes << ","
            << p.operator_minutes << "," << p.constraint << "," << err << "\n";
    }
    return out.str();
}

SweepResults SweepResults::from_csv(const std::string& text) {
    SweepResults res;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        SweepPoint p;
        std::getline(ls, p.mode, ',');
        std::getline(ls, tok, ',');
        p.alpha = std::stod(tok);
        std::getline(ls, tok, ',');
        p.seed = std::stoi(tok);
        std::getline(ls, tok, ',');
        p.ok = tok == "1";
        std::getline(ls, tok, ',');
        p.total = std::stod(tok);
        std::getline(ls, tok, ',');
        p.passenger_minutes = std::stod(tok);
        std::getline(ls, tok, ',');
        p.operator_minutes = std::stod(tok);
        std::getline(ls, tok, ',');
        p.constraint = std::stod(tok);
        std::getline(ls, p.error);
        res.points.push_back(std::move(p));
    }
    return res;
}

std::vector<SweepCell> aggregate_sweep(const SweepResults& results) {
    std::map<std::pair<std::string, double>, std::vector<const SweepPoint*>> groups;
    for (const auto& p : results.points)
        if (p.ok) groups[{p.mode, p.alpha}].push_back(&p);

    std::vector<SweepCell> cells;
    for (const auto& [key, pts] : groups) {
        SweepCell cell;
        cell.mode = key.first;
        cell.alpha = key.second;
        cell.count = static_cast<int>(pts.size());
        auto stats = [&](auto getter, double& mean, double& stddev) {
            double sum = 0.0;
            for (const auto* p : pts) sum += getter(*p);
            mean = sum / pts.size();
            double sq = 0.0;
            for (const auto* p : pts) sq += (getter(*p) - mean) * (getter(*p) - mean);
            stddev = pts.size() > 1 ? std::sqrt(sq / (pts.size() - 1)) : 0.0;
        };
        stats([](const SweepPoint& p) { return p.total; }, cell.mean, cell.stddev);
        stats([](const SweepPoint& p) { return p.passenger_minutes; },
              cell.mean_passenger_minutes, cell.std_passenger_minutes);
        stats([](const SweepPoint& p) { return p.operator_minutes; },
              cell.mean_operator_minutes, cell.std_operator_minutes);
        for (const auto* p : pts)
            if (p->constraint > 0.0) ++cell.violating_seeds;
        cells.push_back(cell);
    }
    std::sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.mode != b.mode) return a.mode < b.mode;
        return a.alpha < b.alpha;
    });
    return cells;
}

std::string sweep_table(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "mode" << std::setw(8) << "alpha" << std::setw(22)
        << "C (mean +/- std)" << std::setw(8) << "runs" << "violating seeds\n";
    for (const auto& c : cells) {
        std::ostringstream val;
        val << std::fixed << std::setprecision(3) << c.mean << " +/- " << c.stddev;
        out << std::left << std::setw(6) << c.mode << std::setw(8) << c.alpha << std::setw(22)
            << val.str() << std::setw(8) << c.count << c.violating_seeds << "\n";
    }
    return out.str();
}

SweepResults run_sweep(const City& city, const SweepSpec& spec, const PolicyParams* policy) {
    SweepResults results;
    for (const auto& mode : spec.modes)
        for (double alpha : spec.alphas)
            for (int seed : spec.seeds) {
                SweepPoint p;
                p.mode = mode;
                p.alpha = alpha;
                p.seed = seed;
                try {
                    CostBreakdown cost;
                    if (mode == "lc") {
                        if (!policy) throw std::runtime_error("lc mode requires a checkpoint");
                        cost = run_lc(city, *policy, spec.lc_rollouts, alpha, spec.ea.beta,
                                      spec.ea.transfer_penalty, seed).best_cost;
                    } else {
                        EaConfig cfg = spec.ea;
                        cfg.alpha = alpha;
                        cfg.seed = seed;
                        cfg.mode = mode == "nea" ? EaMode::NEA : EaMode::EA;
                        if (mode == "nea" && !policy)
                            throw std::runtime_error("nea mode requires a checkpoint");
                        cost = run_evolution(city, cfg, mode == "nea" ? policy : nullptr)
                                   .best_cost;
                    }
                    p.ok = true;
                    p.total = cost.total;
                    p.passenger_minutes = cost.passenger_seconds / 60.0;
                    p.operator_minutes = cost.operator_seconds / 60.0;
                    p.constraint = cost.constraint;
                } catch (const std::exception& e) {
                    p.ok = false;
                    p.error = e.what();
                }
                results.points.push_back(std::move(p));
            }
    return results;
}

namespace {

struct AxisTransform {
    double xmin, xmax, ymin, ymax;
    double left, top, width, height;

    double px(double x) const { return left + (x - xmin) / (xmax - xmin) * width; }
    // SVG y grows downward.
    double py(double y) const { return top + (ymax - y) / (ymax - ymin) * height; }
};

const char* mode_color(const std::string& mode) {
    if (mode == "ea") return "#d62728";
    if (mode == "nea") return "#1f77b4";
    if (mode == "lc") return "#2ca02c";
    return "#7f7f7f";
}

}  // namespace

std::string pareto_svg(const std::vector<SweepCell>& cells) {
    if (cells.empty()) throw std::runtime_error("no sweep results to plot");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : cells) {
        xmin = std::min(xmin, c.mean_passenger_minutes - c.std_passenger_minutes);
        xmax = std::max(xmax, c.mean_passenger_minutes + c.std_passenger_minutes);
        ymin = std::min(ymin, c.mean_operator_minutes - c.std_operator_minutes);
        ymax = std::max(ymax, c.mean_operator_minutes + c.std_operator_minutes);
    }
    double xpad = std::max(1e-9, (xmax - xmin) * 0.05 + 1e-9);
    double ypad = std::max(1e-9, (ymax - ymin) * 0.05 + 1e-9);
    AxisTransform t{xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad, 70, 30, 540, 420};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"520\">\n";
    // Machine-readable transform so downstream tooling can invert it.
    nlohmann::ordered_json meta;
    meta["xmin"] = t.xmin;
    meta["xmax"] = t.xmax;
    meta["ymin"] = t.ymin;
    meta["ymax"] = t.ymax;
    meta["left"] = t.left;
    meta["top"] = t.top;
    meta["width"] = t.width;
    meta["height"] = t.height;
    svg << "<!--axis-transform " << meta.dump() << " -->\n";
    svg << "<rect x=\"" << t.left << "\" y=\"" << t.top << "\" width=\"" << t.width
        << "\" height=\"" << t.height << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        double xv = t.xmin + (t.xmax - t.xmin) * k / 5.0;
        double yv = t.ymin + (t.ymax - t.ymin) * k / 5.0;
        svg << "<text x=\"" << t.px(xv) << "\" y=\"" << t.top + t.height + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << std::fixed
            << std::setprecision(1) << xv << "</text>\n";
        svg << "<text x=\"" << t.left - 8 << "\" y=\"" << t.py(yv) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << std::setprecision(0) << yv
            << "</text>\n";
    }
    svg << std::setprecision(6);
    svg << "<text x=\"" << t.left + t.width / 2 << "\" y=\"" << t.top + t.height + 38
        << "\" font-size=\"13\" text-anchor=\"middle\">passenger cost C_p (minutes)</text>\n";
    svg << "<text x=\"16\" y=\"" << t.top + t.height / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << t.top + t.height / 2 << ")\">operator cost C_o (minutes)</text>\n";

    std::map<std::string, std::vector<const SweepCell*>> by_mode;
    for (const auto& c : cells) by_mode[c.mode].push_back(&c);
    for (auto& [mode, pts] : by_mode) {
        std::sort(pts.begin(), pts.end(),
                  [](const SweepCell* a, const SweepCell* b) { return a->alpha < b->alpha; });
        const char* color = mode_color(mode);
        if (pts.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto* c : pts)
                svg << t.px(c->mean_passenger_minutes) << "," << t.py(c->mean_operator_minutes)
                    << " ";
            svg << "\"/>\n";
        }
        for (const auto* c : pts) {
            double cx = t.px(c->mean_passenger_minutes);
            double cy = t.py(c->mean_operator_minutes);
            double x0 = t.px(c->mean_passenger_minutes - c->std_passenger_minutes);
            double x1 = t.px(c->mean_passenger_minutes + c->std_passenger_minutes);
            double y0 = t.py(c->mean_operator_minutes - c->std_operator_minutes);
            double y1 = t.py(c->mean_operator_minutes + c->std_operator_minutes);
            svg << "<line x1=\"" << x0 << "\" y1=\"" << cy << "\" x2=\"" << x1 << "\" y2=\""
                << cy << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
            svg << "<line x1=\"" << cx << "\" y1=\"" << y0 << "\" x2=\"" << cx << "\" y2=\""
                << y1 << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
            svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3.5\" fill=\"" << color
                << "\"><title>" << mode << " alpha=" << c->alpha << "</title></circle>\n";
        }
        double lx = t.left + t.width - 90;
        double ly = t.top + 16 + 16.0 * std::distance(by_mode.begin(), by_mode.find(mode));
        svg << "<circle cx=\"" << lx << "\" cy=\"" << ly - 4 << "\" r=\"4\" fill=\"" << color
            << "\"/>\n<text x=\"" << lx + 10 << "\" y=\"" << ly << "\" font-size=\"12\">" << mode
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

ConstraintReport validate_network(const City& city, const Network& network, double alpha,
                                  double beta, double transfer_penalty) {
    ConstraintReport rep;
    const int n = city.num_nodes();
    const auto& params = city.params();

    rep.route_count_ok = static_cast<int>(network.routes.size()) == params.num_routes;
    if (!rep.route_count_ok)
        rep.problems.push_back("constraint 2: network has " +
                               std::to_string(network.routes.size()) + " routes, expected " +
                               std::to_string(params.num_routes));

    rep.lengths_ok = true;
    rep.simple_ok = true;
    rep.adjacency_ok = true;
    for (size_t r = 0; r < network.routes.size(); ++r) {
        const auto& route = network.routes[r];
        int len = static_cast<int>(route.size());
        if (len < params.min_stops || len > params.max_stops) {
            rep.lengths_ok = false;
            rep.problems.push_back("constraint 3: route " + std::to_string(r) + " has " +
                                   std::to_string(len) + " stops (bounds " +
                                   std::to_string(params.min_stops) + ".." +
                                   std::to_string(params.max_stops) + ")");
        }
        std::vector<char> seen(n, 0);
        for (size_t k = 0; k < route.size(); ++k) {
            if (route[k] < 0 || route[k] >= n || seen[route[k]]) {
                rep.simple_ok = false;
                rep.problems.push_back("constraint 4: route " + std::to_string(r) +
                                       " repeats node " + std::to_string(route[k]));
                break;
            }
            seen[route[k]] = 1;
        }
        for (size_t k = 0; k + 1 < route.size(); ++k)
            if (!city.adjacent(route[k], route[k + 1])) {
                rep.adjacency_ok = false;
                rep.problems.push_back("constraint 5: route " + std::to_string(r) +
                                       " stops " + std::to_string(route[k]) + "-" +
                                       std::to_string(route[k + 1]) + " are not street-adjacent");
            }
    }

    rep.weights = CostWeights::derive(city, alpha, beta, transfer_penalty);
    if (rep.simple_ok && rep.adjacency_ok) {
        TransitAssignment assignment =
            assign_transit_times(city, network, transfer_penalty);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (!assignment.connected(i, j)) ++rep.unconnected_pairs;
        rep.connected_ok = rep.unconnected_pairs == 0;
        if (!rep.connected_ok)
            rep.problems.push_back("constraint 1: " + std::to_string(rep.unconnected_pairs) +
                                   " node pairs unreachable via transit");
        rep.cost = evaluate_network(city, network, rep.weights);
    }
    return rep;
}

std::string ConstraintReport::to_json() const {
    nlohmann::ordered_json j;
    j["constraint1_connected"] = connected_ok;
    j["constraint2_route_count"] = route_count_ok;
    j["constraint3_lengths"] = lengths_ok;
    j["constraint4_simple"] = simple_ok;
    j["constraint5_adjacency"] = adjacency_ok;
    j["unconnected_pairs"] = unconnected_pairs;
    j["problems"] = problems;
    j["cost"] = nlohmann::json::parse(cost.to_json(weights));
    return j.dump(2);
}

}  // namespace transit
