#include "transit/city.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace transit {

namespace {

constexpr double kSquareSide = 30000.0;   // 30 km x 30 km sampling square
constexpr double kVehicleSpeed = 15.0;    // m/s
constexpr double kDemandLo = 60.0;
constexpr double kDemandHi = 800.0;

void check_connected(const std::vector<std::vector<int>>& neighbors) {
    const int n = static_cast<int>(neighbors.size());
    if (n == 0) throw std::runtime_error("city has no nodes");
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : neighbors[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                q.push(v);
            }
        }
    }
    if (count != n) {
        int bad = 0;
        while (seen[bad]) ++bad;
        throw std::runtime_error("street graph is disconnected: node 0 cannot reach node " +
                                 std::to_string(bad));
    }
}

bool graph_is_connected(int n, const std::vector<StreetEdge>& edges) {
    std::vector<std::vector<int>> nb(n);
    for (const auto& e : edges) {
        nb[e.a].push_back(e.b);
        nb[e.b].push_back(e.a);
    }
    try {
        check_connected(nb);
    } catch (const std::runtime_error&) {
        return false;
    }
    return true;
}

Eigen::MatrixXd sample_demand(int n, RngStream& rng) {
    // Sample the upper triangle and mirror it so that D stays symmetric
    // with the stated marginal range.
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            d(i, j) = rng.uniform(kDemandLo, kDemandHi);
            d(j, i) = d(i, j);
        }
    }
    return d;
}

double edge_time(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a - b).norm() / kVehicleSpeed;
}

// ---- Delaunay triangulation (Bowyer-Watson), used for the voronoi kind ----

struct Tri {
    int a, b, c;
};

bool in_circumcircle(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    // Sign of the incircle determinant, with orientation normalized.
    Eigen::Vector2d A = a - p, B = b - p, C = c - p;
    double det = (A.squaredNorm()) * (B.x() * C.y() - B.y() * C.x()) -
                 (B.squaredNorm()) * (A.x() * C.y() - A.y() * C.x()) +
                 (C.squaredNorm()) * (A.x() * B.y() - A.y() * B.x());
    double orient = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    return orient > 0 ? det > 0 : det < 0;
}

Eigen::Vector2d circumcenter(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                             const Eigen::Vector2d& c) {
    double d = 2.0 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
    if (std::abs(d) < 1e-12) return (a + b + c) / 3.0;
    double ux = (a.squaredNorm() * (b.y() - c.y()) + b.squaredNorm() * (c.y() - a.y()) +
                 c.squaredNorm() * (a.y() - b.y())) / d;
    double uy = (a.squaredNorm() * (c.x() - b.x()) + b.squaredNorm() * (a.x() - c.x()) +
                 c.squaredNorm() * (b.x() - a.x())) / d;
    return {ux, uy};
}

std::vector<Tri> delaunay(const std::vector<Eigen::Vector2d>& pts) {
    std::vector<Eigen::Vector2d> p = pts;
    const int n = static_cast<int>(pts.size());
    // Super-triangle large enough to enclose the sampling square.
    double big = 10.0 * kSquareSide;
    p.push_back({-big, -big});
    p.push_back({3.0 * big, -big});
    p.push_back({0.5 * kSquareSide, 3.0 * big});
    std::vector<Tri> tris = {{n, n + 1, n + 2}};

    for (int i = 0; i < n; ++i) {
        std::vector<Tri> bad;
        std::vector<Tri> keep;
        for (const auto& t : tris) {
            if (in_circumcircle(p[i], p[t.a], p[t.b], p[t.c]))
                bad.push_back(t);
            else
                keep.push_back(t);
        }
        // Boundary of the cavity: edges that appear in exactly one bad triangle.
        std::vector<std::pair<int, int>> boundary;
        auto add_edge = [&](int u, int v) {
            auto rev = std::make_pair(v, u);
            auto it = std::find(boundary.begin(), boundary.end(), rev);
            if (it != boundary.end())
                boundary.erase(it);
            else
                boundary.emplace_back(u, v);
        };
        for (const auto& t : bad) {
            add_edge(t.a, t.b);
            add_edge(t.b, t.c);
            add_edge(t.c, t.a);
        }
        tris = keep;
        for (const auto& [u, v] : boundary) tris.push_back({u, v, i});
    }
    std::vector<Tri> result;
    for (const auto& t : tris)
        if (t.a < n && t.b < n && t.c < n) result.push_back(t);
    return result;
}

// Voronoi graph clipped to the sampling square: vertices are circumcenters
// of Delaunay triangles, edges join circumcenters of edge-adjacent triangles.
struct VoronoiGraph {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::pair<int, int>> edges;
};

VoronoiGraph voronoi_graph(int m, RngStream& rng) {
    std::vector<Eigen::Vector2d> seeds(m);
    for (auto& s : seeds) s = {rng.uniform(0.0, kSquareSide), rng.uniform(0.0, kSquareSide)};
    auto tris = delaunay(seeds);

    std::vector<Eigen::Vector2d> centers(tris.size());
    for (size_t t = 0; t < tris.size(); ++t)
        centers[t] = circumcenter(seeds[tris[t].a], seeds[tris[t].b], seeds[tris[t].c]);

    // Map each Delaunay edge to the triangles that share it.
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (size_t t = 0; t < tris.size(); ++t) {
        auto reg = [&](int u, int v) {
            if (u > v) std::swap(u, v);
            edge_tris[{u, v}].push_back(static_cast<int>(t));
        };
        reg(tris[t].a, tris[t].b);
        reg(tris[t].b, tris[t].c);
        reg(tris[t].c, tris[t].a);
    }

    auto inside = [](const Eigen::Vector2d& v) {
        return v.x() >= 0.0 && v.x() <= kSquareSide && v.y() >= 0.0 && v.y() <= kSquareSide;
    };
    // Merge coincident circumcenters and drop vertices outside the square.
    std::vector<int> remap(tris.size(), -1);
    VoronoiGraph g;
    for (size_t t = 0; t < tris.size(); ++t) {
        if (!inside(centers[t])) continue;
        int found = -1;
        for (size_t u = 0; u < g.nodes.size(); ++u)
            if ((g.nodes[u] - centers[t]).norm() < 1e-6) {
                found = static_cast<int>(u);
                break;
            }
        if (found < 0) {
            found = static_cast<int>(g.nodes.size());
            g.nodes.push_back(centers[t]);
        }
        remap[t] = found;
    }
    std::set<std::pair<int, int>> added;
    for (const auto& [e, ts] : edge_tris) {
        if (ts.size() != 2) continue;
        int u = remap[ts[0]], v = remap[ts[1]];
        if (u < 0 || v < 0 || u == v) continue;
        if (u > v) std::swap(u, v);
        if (added.insert({u, v}).second) g.edges.emplace_back(u, v);
    }
    return g;
}

// Deterministic force-directed layout for benchmark cities whose files
// carry no coordinates.  Positions only feed the neural features; drive
// times always come from the file.
std::vector<Eigen::Vector2d> spring_layout(int n, const std::vector<StreetEdge>& edges) {
    std::vector<Eigen::Vector2d> pos(n);
    for (int i = 0; i < n; ++i) {
        double ang = 2.0 * M_PI * i / n;
        double rad = 0.25 + 0.5 * ((i * 2654435761u) % 1000) / 1000.0;
        pos[i] = {0.5 + rad * 0.5 * std::cos(ang), 0.5 + rad * 0.5 * std::sin(ang)};
    }
    double mean_tau = 0.0;
    for (const auto& e : edges) mean_tau += e.time;
    mean_tau /= std::max<size_t>(1, edges.size());
    const double target = 0.15;  // desired edge length in layout units
    for (int iter = 0; iter < 300; ++iter) {
        double step = 0.05 * (1.0 - iter / 300.0);
        std::vector<Eigen::Vector2d> disp(n, Eigen::Vector2d::Zero());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Eigen::Vector2d d = pos[i] - pos[j];
                double dist = std::max(d.norm(), 1e-6);
                Eigen::Vector2d rep = d / dist * (target * target / dist) * 0.05;
                disp[i] += rep;
                disp[j] -= rep;
            }
        for (const auto& e : edges) {
            Eigen::Vector2d d = pos[e.a] - pos[e.b];
            double dist = std::max(d.norm(), 1e-6);
            double want = target * e.time / std::max(mean_tau, 1e-9);
            Eigen::Vector2d att = d / dist * (dist - want) * 0.2;
            disp[e.a] -= att;
            disp[e.b] += att;
        }
        for (int i = 0; i < n; ++i) {
            double len = disp[i].norm();
            if (len > step) disp[i] *= step / len;
            pos[i] += disp[i];
        }
    }
    // Scale so the mean street edge length matches mean_tau * vehicle speed.
    double mean_len = 0.0;
    for (const auto& e : edges) mean_len += (pos[e.a] - pos[e.b]).norm();
    mean_len /= std::max<size_t>(1, edges.size());
    double scale = mean_tau * kVehicleSpeed / std::max(mean_len, 1e-9);
    for (auto& v : pos) v *= scale;
    return pos;
}

Eigen::MatrixXd parse_matrix(const std::string& text, bool allow_inf) {
    std::istringstream in(text);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            std::string low = tok;
            std::transform(low.begin(), low.end(), low.begin(), ::tolower);
            if (low == "inf" || low == "infinity") {
                if (!allow_inf) throw std::runtime_error("unexpected Inf in demand matrix");
                row.push_back(std::numeric_limits<double>::infinity());
            } else {
                size_t used = 0;
                double v = std::stod(tok, &used);
                if (used != tok.size()) throw std::runtime_error("bad matrix token: " + tok);
                row.push_back(v);
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    const size_t n = rows.size();
    if (n == 0) throw std::runtime_error("empty matrix file");
    Eigen::MatrixXd m(n, n);
    for (size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n)
            throw std::runtime_error("matrix is not square: row " + std::to_string(i) + " has " +
                                     std::to_string(rows[i].size()) + " of " + std::to_string(n) +
                                     " entries");
        for (size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

}  // namespace

void NdpParams::validate(int n) const {
    if (num_routes < 1) throw std::runtime_error("S must be >= 1");
    if (min_stops < 2) throw std::runtime_error("MIN must be >= 2");
    if (max_stops < min_stops) throw std::runtime_error("MAX must be >= MIN");
    if (max_stops > n) throw std::runtime_error("MAX must be <= number of nodes");
}

std::vector<int> ShortestPathTable::reconstruct(int from, int to) const {
    std::vector<int> path = {from};
    int cur = from;
    const int n = static_cast<int>(times.rows());
    while (cur != to) {
        cur = next(cur, to);
        path.push_back(cur);
        if (static_cast<int>(path.size()) > n)
            throw std::runtime_error("cycle in successor table");
    }
    return path;
}

ShortestPathTable all_pairs_shortest_paths(const Eigen::MatrixXd& street_time) {
    const int n = static_cast<int>(street_time.rows());
    const double inf = std::numeric_limits<double>::infinity();
    ShortestPathTable sp;
    sp.times = Eigen::MatrixXd::Constant(n, n, inf);
    sp.next = Eigen::MatrixXi::Constant(n, n, -1);
    for (int i = 0; i < n; ++i) {
        sp.times(i, i) = 0.0;
        sp.next(i, i) = i;
        for (int j = 0; j < n; ++j) {
            if (i != j && street_time(i, j) >= 0.0) {
                sp.times(i, j) = street_time(i, j);
                sp.next(i, j) = j;
            }
        }
    }
    // Floyd-Warshall; on ties prefer the lower successor index so the
    // canonical path set is deterministic.
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
            if (i == k || sp.times(i, k) == inf) continue;
            for (int j = 0; j < n; ++j) {
                if (sp.times(k, j) == inf) continue;
                double cand = sp.times(i, k) + sp.times(k, j);
                double tol = 1e-9 * std::max(1.0, std::min(sp.times(i, j), cand));
                if (cand < sp.times(i, j) - tol) {
                    sp.times(i, j) = cand;
                    sp.next(i, j) = sp.next(i, k);
                } else if (cand <= sp.times(i, j) + tol && i != j &&
                           sp.next(i, k) < sp.next(i, j)) {
                    sp.next(i, j) = sp.next(i, k);
                }
            }
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (sp.times(i, j) == inf)
                throw std::runtime_error("street graph is disconnected: no path from node " +
                                         std::to_string(i) + " to node " + std::to_string(j));
    return sp;
}

City::City(std::vector<Eigen::Vector2d> positions, std::vector<StreetEdge> edges,
           Eigen::MatrixXd demand, NdpParams params, bool synthetic_coords)
    : positions_(std::move(positions)),
      edges_(std::move(edges)),
      demand_(std::move(demand)),
      params_(params),
      synthetic_coords_(synthetic_coords) {
    const int n = num_nodes();
    params_.validate(n);
    if (demand_.rows() != n || demand_.cols() != n)
        throw std::runtime_error("demand matrix shape does not match node count");
    for (int i = 0; i < n; ++i) {
        if (demand_(i, i) != 0.0) throw std::runtime_error("demand diagonal must be zero");
        for (int j = 0; j < n; ++j) {
            if (demand_(i, j) < 0.0) throw std::runtime_error("demand must be non-negative");
            if (std::abs(demand_(i, j) - demand_(j, i)) > 1e-6 * std::max(1.0, demand_(i, j)))
                throw std::runtime_error("demand matrix must be symmetric");
        }
    }
    street_time_ = Eigen::MatrixXd::Constant(n, n, -1.0);
    neighbors_.assign(n, {});
    for (const auto& e : edges_) {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || e.a == e.b)
            throw std::runtime_error("invalid street edge endpoints");
        if (e.time <= 0.0) throw std::runtime_error("street edge times must be positive");
        street_time_(e.a, e.b) = e.time;
        street_time_(e.b, e.a) = e.time;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (street_time_(i, j) >= 0.0) neighbors_[i].push_back(j);
    check_connected(neighbors_);
    sp_ = all_pairs_shortest_paths(street_time_);
}

CityKind parse_city_kind(const std::string& name) {
    if (name == "4nn") return CityKind::FourNearest;
    if (name == "4grid") return CityKind::FourGrid;
    if (name == "8grid") return CityKind::EightGrid;
    if (name == "voronoi") return CityKind::Voronoi;
    throw std::runtime_error("unknown city kind: " + name);
}

std::string city_kind_name(CityKind kind) {
    switch (kind) {
        case CityKind::FourNearest: return "4nn";
        case CityKind::FourGrid: return "4grid";
        case CityKind::EightGrid: return "8grid";
        case CityKind::Voronoi: return "voronoi";
    }
    return "?";
}

City load_benchmark(const std::string& travel_time_text, const std::string& demand_text,
                    NdpParams params) {
    Eigen::MatrixXd tt = parse_matrix(travel_time_text, /*allow_inf=*/true);
    Eigen::MatrixXd dd = parse_matrix(demand_text, /*allow_inf=*/false);
    const int n = static_cast<int>(tt.rows());
    if (dd.rows() != n)
        throw std::runtime_error("travel time and demand matrices disagree on size");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool fin_ij = std::isfinite(tt(i, j)), fin_ji = std::isfinite(tt(j, i));
            if (fin_ij != fin_ji ||
                (fin_ij && std::abs(tt(i, j) - tt(j, i)) > 1e-6 * std::max(1.0, tt(i, j))))
                throw std::runtime_error("travel time matrix is asymmetric");
            if (fin_ij && tt(i, j) < 0.0) throw std::runtime_error("negative travel time");
        }
    std::vector<StreetEdge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::isfinite(tt(i, j)) && tt(i, j) > 0.0)
                edges.push_back({i, j, tt(i, j) * 60.0});  // minutes -> seconds
    if (!graph_is_connected(n, edges))
        throw std::runtime_error("benchmark street graph is disconnected");
    // Zero out any stray diagonal demand; some distributions carry it.
    for (int i = 0; i < n; ++i) dd(i, i) = 0.0;
    auto pos = spring_layout(n, edges);
    return City(std::move(pos), std::move(edges), std::move(dd), params,
                /*synthetic_coords=*/true);
}

City load_benchmark_files(const std::string& travel_time_path, const std::string& demand_path,
                          NdpParams params) {
    return load_benchmark(read_text_file(travel_time_path), read_text_file(demand_path), params);
}

City generate_city(CityKind kind, int n, double deletion_prob, NdpParams params,
                   RngStream& rng) {
    if (n < 4) throw std::runtime_error("generated cities need n >= 4");
    if (deletion_prob < 0.0 || deletion_prob >= 1.0)
        throw std::runtime_error("deletion probability must be in [0, 1)");

    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<Eigen::Vector2d> pos;
        std::vector<StreetEdge> edges;
        std::set<std::pair<int, int>> edge_set;
        auto add_edge = [&](int i, int j) {
            if (i == j) return;
            if (i > j) std::swap(i, j);
            if (edge_set.insert({i, j}).second)
                edges.push_back({i, j, edge_time(pos[i], pos[j])});
        };

        if (kind == CityKind::FourNearest) {
            pos.resize(n);
            for (auto& p : pos) p = {rng.uniform(0.0, kSquareSide), rng.uniform(0.0, kSquareSide)};
            for (int i = 0; i < n; ++i) {
                std::vector<std::pair<double, int>> dist;
                for (int j = 0; j < n; ++j)
                    if (j != i) dist.emplace_back((pos[i] - pos[j]).norm(), j);
                std::sort(dist.begin(), dist.end());
                for (int k = 0; k < 4 && k < static_cast<int>(dist.size()); ++k)
                    add_edge(i, dist[k].second);
            }
        } else if (kind == CityKind::FourGrid || kind == CityKind::EightGrid) {
            int rows = static_cast<int>(std::round(std::sqrt(static_cast<double>(n))));
            rows = std::max(1, rows);
            int cols = (n + rows - 1) / rows;
            double dx = kSquareSide / cols, dy = kSquareSide / ((n + cols - 1) / cols);
            std::vector<std::vector<int>> grid(rows + 2, std::vector<int>(cols, -1));
            int r = 0, c = 0;
            pos.resize(n);
            for (int i = 0; i < n; ++i) {
                grid[r][c] = i;
                pos[i] = {(c + 0.5) * dx, (r + 0.5) * dy};
                if (++c == cols) {
                    c = 0;
                    ++r;
                }
            }
            for (int i = 0; i < n; ++i) {
                int ri = i / cols, ci = i % cols;
                auto at = [&](int rr, int cc) -> int {
                    if (rr < 0 || cc < 0 || cc >= cols || rr >= static_cast<int>(grid.size()))
                        return -1;
                    return grid[rr][cc];
                };
                if (int j = at(ri, ci + 1); j >= 0) add_edge(i, j);
                if (int j = at(ri + 1, ci); j >= 0) add_edge(i, j);
                if (kind == CityKind::EightGrid) {
                    if (int j = at(ri + 1, ci + 1); j >= 0) add_edge(i, j);
                    if (int j = at(ri + 1, ci - 1); j >= 0) add_edge(i, j);
                }
            }
        } else {  // Voronoi
            int lo = std::max(4, n / 3), hi = 4 * n + 8;
            VoronoiGraph best;
            bool exact = false;
            for (int tries = 0; tries < 50; ++tries) {
                int m = (lo + hi) / 2;
                VoronoiGraph g = voronoi_graph(m, rng);
                int got = static_cast<int>(g.nodes.size());
                if (std::abs(got - n) <
                    std::abs(static_cast<int>(best.nodes.size()) - n))
                    best = g;
                if (got == n) {
                    best = g;
                    exact = true;
                    break;
                }
                if (got < n)
                    lo = std::min(m + 1, hi);
                else
                    hi = std::max(m - 1, lo);
                if (lo >= hi) {
                    lo = std::max(4, n / 3);
                    hi = 4 * n + 8;
                }
            }
            int got = static_cast<int>(best.nodes.size());
            if (!exact) {
                if (std::abs(got - n) > 2)
                    throw std::runtime_error("voronoi generator failed to reach " +
                                             std::to_string(n) + " nodes (got " +
                                             std::to_string(got) + ")");
                fprintf(stderr, "warning: voronoi city has %d nodes, requested %d\n", got, n);
            }
            pos = best.nodes;
            for (const auto& [u, v] : best.edges) add_edge(u, v);
        }

        // Edge deletion applies to every kind except voronoi.
        if (kind != CityKind::Voronoi && deletion_prob > 0.0) {
            std::vector<StreetEdge> kept;
            for (const auto& e : edges)
                if (!rng.bernoulli(deletion_prob)) kept.push_back(e);
            edges = std::move(kept);
        }
        const int got = static_cast<int>(pos.size());
        if (!graph_is_connected(got, edges)) continue;  // discard and repeat

        NdpParams p = params;
        p.max_stops = std::min(p.max_stops, got);
        Eigen::MatrixXd demand = sample_demand(got, rng);
        return City(std::move(pos), std::move(edges), std::move(demand), p);
    }
    throw std::runtime_error("city generation failed 1000 times; deletion probability too high?");
}

City augment_with(const City& city, double scale, double rotation, double demand_factor) {
    if (city.has_synthetic_coords())
        throw std::runtime_error("augmentation requires real coordinates");
    const int n = city.num_nodes();
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : city.positions()) centroid += p;
    centroid /= n;
    Eigen::Rotation2D<double> rot(rotation);
    std::vector<Eigen::Vector2d> pos(n);
    for (int i = 0; i < n; ++i)
        pos[i] = centroid + rot * ((city.positions()[i] - centroid) * scale);
    std::vector<StreetEdge> edges = city.edges();
    for (auto& e : edges) e.time *= scale;
    Eigen::MatrixXd demand = city.demand() * demand_factor;
    return City(std::move(pos), std::move(edges), std::move(demand), city.params());
}

City augment(const City& city, RngStream& rng) {
    double scale = rng.uniform(0.4, 1.6);
    double rotation = rng.uniform(0.0, 2.0 * M_PI);
    double demand_factor = rng.uniform(0.8, 1.2);
    return augment_with(city, scale, rotation, demand_factor);
}

std::string City::to_json() const {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& p : positions_) j["nodes"].push_back({p.x(), p.y()});
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : edges_) j["edges"].push_back({e.a, e.b, e.time});
    j["demand"] = nlohmann::ordered_json::array();
    for (int i = 0; i < num_nodes(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int k = 0; k < num_nodes(); ++k) row.push_back(demand_(i, k));
        j["demand"].push_back(row);
    }
    j["params"] = {{"S", params_.num_routes}, {"MIN", params_.min_stops},
                   {"MAX", params_.max_stops}};
    j["synthetic_coords"] = synthetic_coords_;
    return j.dump();
}

City City::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<Eigen::Vector2d> pos;
    for (const auto& p : j.at("nodes")) pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    std::vector<StreetEdge> edges;
    for (const auto& e : j.at("edges"))
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
    const int n = static_cast<int>(pos.size());
    Eigen::MatrixXd demand(n, n);
    const auto& dj = j.at("demand");
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) demand(i, k) = dj.at(i).at(k).get<double>();
    NdpParams params;
    params.num_routes = j.at("params").at("S").get<int>();
    params.min_stops = j.at("params").at("MIN").get<int>();
    params.max_stops = j.at("params").at("MAX").get<int>();
    bool synthetic = j.value("synthetic_coords", false);
    return City(std::move(pos), std::move(edges), std::move(demand), params, synthetic);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

}  // namespace transit
