#include "atomlink/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace atomlink {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(std::uint64_t raw_seed) {
    std::uint64_t sm = raw_seed;
    for (auto& s : s_) s = splitmix64(sm);
}

Rng::Rng(std::uint64_t master_seed, std::string_view stream_name)
    : Rng(master_seed ^ hash_name(stream_name)) {}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

bool Rng::bernoulli(double p) {
    return uniform() < p;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    // rejection sampling keeps the result unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::exponential(double mean) {
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return -mean * std::log(u);
}

double Rng::normal(double mean, double sigma) {
    if (have_spare_) {
        have_spare_ = false;
        return mean + sigma * spare_;
    }
    double u, v, s;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return mean + sigma * u * f;
}

long Rng::poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("Rng::poisson: negative mean");
    if (mean == 0.0) return 0;
    // count unit-rate exponential arrivals before `mean`; exact for any mean,
    // O(mean) draws which is fine at the rates used here
    double t = 0.0;
    long n = -1;
    while (t < mean) {
        t += exponential(1.0);
        ++n;
    }
    return n;
}

} // namespace atomlink
