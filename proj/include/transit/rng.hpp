#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace transit {

// All randomness in the toolkit flows from a single root seed through
// named sub-streams, so that two runs sharing a root seed also share
// every stream that they both draw from (e.g. EA and NEA selection).
class RngStream {
public:
    RngStream() : engine_(0) {}
    explicit RngStream(uint64_t seed) : engine_(seed) {}

    static uint64_t derive_seed(uint64_t root, std::string_view name, uint64_t index = 0);
    static RngStream derive(uint64_t root, std::string_view name, uint64_t index = 0) {
        return RngStream(derive_seed(root, name, index));
    }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
    }
    bool bernoulli(double p) {
        return std::bernoulli_distribution(p)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace transit
