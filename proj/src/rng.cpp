#include "transit/rng.hpp"

namespace transit {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t RngStream::derive_seed(uint64_t root, std::string_view name, uint64_t index) {
    // FNV-1a over the stream name, then mix with root and index.
    uint64_t h = 14695981039346656037ULL;
    for (char c : name) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ULL;
    }
    uint64_t s = splitmix64(root ^ splitmix64(h));
    return splitmix64(s ^ splitmix64(index + 0x51ed270b0a1c75f1ULL));
}

}  // namespace transit
