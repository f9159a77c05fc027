#pragma once

#include <cstdint>
#include <vector>

namespace jumpcap {

/// Counter-based random stream (Philox4x32-10). A stream is identified by
/// (master_seed, stream_id); identical identifiers reproduce the identical
/// sample sequence on any platform and under any threading layout. Streams
/// are cheap values: copy freely, but do not share one instance mutably
/// across threads. All parallel code derives per-task substreams instead.
class RngStream {
public:
    RngStream() = default;
    static RngStream seeded(std::uint64_t master_seed, std::uint64_t stream_id = 0);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();
    /// Uniform on the open interval (0,1); never returns 0 or 1.
    double next_unit();
    /// Exponential with rate m (mean 1/m). Throws std::invalid_argument for m <= 0.
    double next_exponential(double m);
    /// Poisson by CDF inversion; intended for small means (here lambda*dt <= 10).
    std::uint64_t next_poisson(double mean);
    /// Standard normal via Box-Muller (consumes two uniforms).
    double next_gaussian();

private:
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t spare_ = 0;
    bool has_spare_ = false;
};

/// Child stream deterministic in (parent, index); children with distinct
/// indices are statistically independent. Derivable in O(1) without
/// advancing the parent, so batches of paths can be seeded up front.
RngStream substream(const RngStream& parent, std::uint64_t index);

/// Convenience for modules that hold plain integer seeds: the stream_id of
/// substream(seeded(master), index), usable as a fresh master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

/// Jump events of one compound Poisson source over a time span:
/// count ~ Poisson(lambda*dt), sizes i.i.d. Exponential(mean 1/m).
/// Sizes are strictly positive. Throws std::invalid_argument for
/// m <= 0 or dt <= 0.
std::vector<double> sample_jumps(double intensity, double inv_mean_size, double dt, RngStream& rng);

/// Jump events of both model sources over one step.
struct JumpSample {
    std::vector<double> sizes1;
    std::vector<double> sizes2;

    std::size_t count1() const { return sizes1.size(); }
    std::size_t count2() const { return sizes2.size(); }
    bool empty() const { return sizes1.empty() && sizes2.empty(); }
};

} // namespace jumpcap
