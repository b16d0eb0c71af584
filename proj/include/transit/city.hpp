#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "transit/rng.hpp"

namespace transit {

struct NdpParams {
    int num_routes = 1;   // S
    int min_stops = 2;    // MIN
    int max_stops = 2;    // MAX

    void validate(int n) const;
};

// Shortest drive times between all node pairs plus a successor table for
// path reconstruction.  Ties are broken toward the lower successor index,
// which makes the canonical shortest-path set deterministic.
struct ShortestPathTable {
    Eigen::MatrixXd times;              // seconds
    Eigen::MatrixXi next;               // next[i][j] = successor of i on the path to j

    std::vector<int> reconstruct(int from, int to) const;
    double max_time() const { return times.maxCoeff(); }
};

struct StreetEdge {
    int a = 0;
    int b = 0;
    double time = 0.0;  // seconds, one direction (symmetric)
};

enum class CityKind { FourNearest, FourGrid, EightGrid, Voronoi };

CityKind parse_city_kind(const std::string& name);
std::string city_kind_name(CityKind kind);

// A city instance: candidate stop locations, street graph with drive
// times, and an origin-destination demand matrix.  Immutable once built;
// the shortest-path table is computed at construction.
class City {
public:
    City(std::vector<Eigen::Vector2d> positions,
         std::vector<StreetEdge> edges,
         Eigen::MatrixXd demand,
         NdpParams params,
         bool synthetic_coords = false);

    int num_nodes() const { return static_cast<int>(positions_.size()); }
    const std::vector<Eigen::Vector2d>& positions() const { return positions_; }
    const std::vector<StreetEdge>& edges() const { return edges_; }
    const Eigen::MatrixXd& demand() const { return demand_; }
    const NdpParams& params() const { return params_; }
    bool has_synthetic_coords() const { return synthetic_coords_; }

    const ShortestPathTable& shortest_paths() const { return sp_; }
    const Eigen::MatrixXd& drive_times() const { return sp_.times; }

    // Street adjacency; street_time(i, j) < 0 means no edge.
    bool adjacent(int i, int j) const { return street_time_(i, j) >= 0.0; }
    double street_time(int i, int j) const { return street_time_(i, j); }
    const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

    std::string to_json() const;
    static City from_json(const std::string& text);

private:
    std::vector<Eigen::Vector2d> positions_;
    std::vector<StreetEdge> edges_;
    Eigen::MatrixXd demand_;
    NdpParams params_;
    bool synthetic_coords_ = false;

    Eigen::MatrixXd street_time_;       // -1 where no edge
    std::vector<std::vector<int>> neighbors_;
    ShortestPathTable sp_;
};

// Exact all-pairs shortest drive times with deterministic tie-breaking.
// Throws if some pair is unreachable, naming the pair.
ShortestPathTable all_pairs_shortest_paths(const Eigen::MatrixXd& street_time);

// Mumford-format benchmark ingestion: two whitespace-separated n-by-n
// matrices, travel times in minutes with `Inf` marking non-adjacent
// pairs, demand in trips/day.  Node coordinates are synthesized by a
// deterministic layout and flagged as such.
City load_benchmark(const std::string& travel_time_text,
                    const std::string& demand_text,
                    NdpParams params);
City load_benchmark_files(const std::string& travel_time_path,
                          const std::string& demand_path,
                          NdpParams params);

City generate_city(CityKind kind, int n, double deletion_prob, NdpParams params,
                   RngStream& rng);

// Random scale/rotation/demand augmentation used during training.
City augment(const City& city, RngStream& rng);
// Deterministic variant for tests: explicit scale, rotation (radians),
// demand factor.
City augment_with(const City& city, double scale, double rotation, double demand_factor);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace transit
