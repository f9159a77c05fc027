#include "jumpcap/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace jumpcap {

namespace {

// SplitMix64 finalizer; bijective avalanche used for substream derivation.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct U32x2 {
    std::uint32_t hi, lo;
};

inline U32x2 mulhilo(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    return {static_cast<std::uint32_t>(prod >> 32), static_cast<std::uint32_t>(prod)};
}

// Philox4x32-10: key = master seed, counter block = (position, stream id).
inline void philox4x32(std::uint64_t key64, std::uint64_t ctr, std::uint64_t stream,
                       std::uint32_t out[4]) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;

    std::uint32_t k0 = static_cast<std::uint32_t>(key64);
    std::uint32_t k1 = static_cast<std::uint32_t>(key64 >> 32);
    std::uint32_t c0 = static_cast<std::uint32_t>(ctr);
    std::uint32_t c1 = static_cast<std::uint32_t>(ctr >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);

    for (int round = 0; round < 10; ++round) {
        const U32x2 p0 = mulhilo(kM0, c0);
        const U32x2 p1 = mulhilo(kM1, c2);
        const std::uint32_t n0 = p1.hi ^ c1 ^ k0;
        const std::uint32_t n1 = p1.lo;
        const std::uint32_t n2 = p0.hi ^ c3 ^ k1;
        const std::uint32_t n3 = p0.lo;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kW0;
        k1 += kW1;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
}

} // namespace

RngStream RngStream::seeded(std::uint64_t master_seed, std::uint64_t stream_id) {
    RngStream s;
    s.master_seed_ = master_seed;
    s.stream_id_ = stream_id;
    return s;
}

std::uint64_t RngStream::next_u64() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    std::uint32_t block[4];
    philox4x32(master_seed_, counter_++, stream_id_, block);
    spare_ = (static_cast<std::uint64_t>(block[3]) << 32) | block[2];
    has_spare_ = true;
    return (static_cast<std::uint64_t>(block[1]) << 32) | block[0];
}

double RngStream::next_unit() {
    // (x >> 12) spans [0, 2^52); the half-offset keeps the result in the
    // open interval, so -log stays finite on both ends.
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double RngStream::next_exponential(double m) {
    if (!(m > 0.0)) {
        throw std::invalid_argument("exponential rate m must be > 0");
    }
    return -std::log(next_unit()) / m;
}

std::uint64_t RngStream::next_poisson(double mean) {
    if (!(mean >= 0.0)) {
        throw std::invalid_argument("poisson mean must be >= 0");
    }
    if (mean == 0.0) {
        return 0;
    }
    const double u = next_unit();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (p < 1e-300 || k > 100000) {
            break; // CDF saturated in double precision
        }
    }
    return k;
}

double RngStream::next_gaussian() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

RngStream substream(const RngStream& parent, std::uint64_t index) {
    RngStream child;
    child = RngStream::seeded(parent.master_seed(),
                              mix64(parent.stream_id() ^ mix64(index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL)));
    return child;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return mix64(master_seed ^ mix64(index * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

std::vector<double> sample_jumps(double intensity, double inv_mean_size, double dt, RngStream& rng) {
    if (!(inv_mean_size > 0.0)) {
        throw std::invalid_argument("jump size rate m must be > 0");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("time span dt must be > 0");
    }
    if (!(intensity >= 0.0)) {
        throw std::invalid_argument("jump intensity must be >= 0");
    }
    const std::uint64_t count = rng.next_poisson(intensity * dt);
    std::vector<double> sizes(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        sizes[i] = rng.next_exponential(inv_mean_size);
    }
    return sizes;
}

} // namespace jumpcap
