#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace omnifuse {

// Splittable deterministic random stream. The stream identity is the seed;
// split() derives a child seed from (seed, label) only, so a child stream is
// unaffected by how many draws the parent has consumed.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t seed() const { return seed_; }

    uint64_t next_u64();
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    double normal();                     // standard normal, Box-Muller
    int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive range

    Rng split(std::string_view label) const;
    Rng split(uint64_t label) const;

    // Fisher-Yates
    void shuffle(std::vector<int64_t>& v);

private:
    uint64_t seed_;
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

uint64_t fnv1a64(std::string_view s);
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace omnifuse
