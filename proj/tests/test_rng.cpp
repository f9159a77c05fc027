#include <doctest.h>

#include "jumpcap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace jumpcap;

TEST_CASE("zero intensity never produces jumps") {
    RngStream rng = RngStream::seeded(1);
    for (int i = 0; i < 200; ++i) {
        CHECK(sample_jumps(0.0, 1.0, 0.02, rng).empty());
    }
}

TEST_CASE("invalid jump parameters are rejected") {
    RngStream rng = RngStream::seeded(1);
    CHECK_THROWS_AS(sample_jumps(5.0, 0.0, 0.02, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_jumps(5.0, -1.0, 0.02, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_jumps(5.0, 1.0, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_jumps(-1.0, 1.0, 0.02, rng), std::invalid_argument);
    CHECK_THROWS_AS(rng.next_exponential(0.0), std::invalid_argument);
}

TEST_CASE("poisson count matches the analytic pmf at zero") {
    // lambda*dt = 0.1, P(count = 0) = exp(-0.1)
    RngStream rng = RngStream::seeded(42);
    const int n = 1000000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        if (rng.next_poisson(0.1) == 0) {
            ++zeros;
        }
    }
    const double p = std::exp(-0.1);
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(zeros) / n - p) < 3.0 * se);
}

TEST_CASE("poisson count mean and variance equal lambda*dt") {
    RngStream rng = RngStream::seeded(7);
    const int n = 1000000;
    const double mean_target = 0.1;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k = static_cast<double>(rng.next_poisson(mean_target));
        sum += k;
        sum_sq += k * k;
    }
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1);
    const double se_mean = std::sqrt(mean_target / n);
    // Var of the sample variance of a Poisson: (mu + 2 mu^2) / n.
    const double se_var = std::sqrt((mean_target + 2.0 * mean_target * mean_target) / n);
    CHECK(std::abs(mean - mean_target) < 3.0 * se_mean);
    CHECK(std::abs(var - mean_target) < 3.0 * se_var);
}

TEST_CASE("jump sizes are positive with the exponential mean") {
    // m = 0.5 from the reference parameters: mean size 2.
    RngStream rng = RngStream::seeded(3);
    double sum = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < 1000000; ++i) {
        for (const double z : sample_jumps(5.0, 0.5, 0.02, rng)) {
            CHECK(z > 0.0);
            sum += z;
            ++count;
        }
    }
    REQUIRE(count > 50000);
    const double mean = sum / static_cast<double>(count);
    const double se = 2.0 / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean - 2.0) < 3.0 * se);
}

TEST_CASE("identical stream identity reproduces the identical sequence") {
    RngStream a = RngStream::seeded(7, 0);
    RngStream b = RngStream::seeded(7, 0);
    for (int i = 0; i < 128; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }

    RngStream c = substream(RngStream::seeded(7), 0);
    RngStream d = substream(RngStream::seeded(7), 0);
    for (int i = 0; i < 128; ++i) {
        CHECK(c.next_u64() == d.next_u64());
    }
}

TEST_CASE("distinct substreams differ") {
    RngStream master = RngStream::seeded(7);
    RngStream a = substream(master, 0);
    RngStream b = substream(master, 1);
    int agree = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u64() == b.next_u64()) {
            ++agree;
        }
    }
    CHECK(agree == 0);
}

TEST_CASE("pooled exponential mean over substreams") {
    RngStream master = RngStream::seeded(11);
    double sum = 0.0;
    const int streams = 100;
    const int per_stream = 1000;
    for (int s = 0; s < streams; ++s) {
        RngStream child = substream(master, static_cast<std::uint64_t>(s));
        for (int i = 0; i < per_stream; ++i) {
            sum += child.next_exponential(1.0);
        }
    }
    const int n = streams * per_stream;
    const double mean = sum / n;
    CHECK(std::abs(mean - 1.0) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform draws stay inside the open unit interval") {
    RngStream rng = RngStream::seeded(23);
    double lo = 1.0;
    double hi = 0.0;
    for (int i = 0; i < 200000; ++i) {
        const double u = rng.next_unit();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
}

TEST_CASE("exponential sampler passes Kolmogorov-Smirnov at the 1e-3 level") {
    const int n = 1000000;
    std::vector<double> samples(n);
    RngStream rng = RngStream::seeded(99);
    for (double& x : samples) {
        x = rng.next_exponential(1.0);
    }
    std::sort(samples.begin(), samples.end());
    double d_stat = 0.0;
    for (int i = 0; i < n; ++i) {
        const double cdf = 1.0 - std::exp(-samples[static_cast<std::size_t>(i)]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d_stat = std::max(d_stat, std::max(cdf - lo, hi - cdf));
    }
    // K-S critical value at alpha = 1e-3: sqrt(-ln(alpha/2)/2) / sqrt(n).
    const double critical = 1.9495 / std::sqrt(static_cast<double>(n));
    CHECK(d_stat < critical);
}

TEST_CASE("substream derivation does not advance the parent") {
    RngStream master = RngStream::seeded(5);
    RngStream probe = master;
    (void)substream(master, 3);
    (void)substream(master, 4);
    CHECK(master.next_u64() == probe.next_u64());
}
