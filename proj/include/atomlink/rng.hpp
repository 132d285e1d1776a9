#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace atomlink {

// Deterministic RNG with named substreams. Every stochastic component draws
// from Rng(master_seed, "some/stream/name"), so reruns with the same seed
// reproduce the exact byte stream regardless of execution order or threading.
// Generator is xoshiro256++ seeded through splitmix64; all distributions are
// implemented here rather than with std::<distribution>, which is not
// bit-stable across standard libraries.
class Rng {
public:
    Rng(std::uint64_t master_seed, std::string_view stream_name);
    explicit Rng(std::uint64_t raw_seed);

    std::uint64_t next_u64();

    // uniform in [0, 1) with 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);
    bool bernoulli(double p);
    // integer in [0, n)
    std::uint64_t below(std::uint64_t n);
    double exponential(double mean);
    double normal(double mean = 0.0, double sigma = 1.0);
    // exact Poisson sampling (exponential inter-arrival counting)
    long poisson(double mean);

private:
    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a hash of a string, used to derive substream seeds from names.
std::uint64_t hash_name(std::string_view name);

// splitmix64 step, exposed for counter-based derivations elsewhere.
std::uint64_t splitmix64(std::uint64_t& state);

} // namespace atomlink
