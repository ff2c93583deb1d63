#pragma once

#include <cstdint>
#include <random>

namespace heavysgd {

/// A reproducible random stream identified by (seed, stream_id).
///
/// Streams are plain values: copying one forks an identical sequence, and two
/// streams that differ only in stream_id are seeded through std::seed_seq from
/// the full 128 bits of (seed, stream_id), which gives unrelated engine states.
/// Every draw helper consumes a fixed number of 64-bit engine outputs so the
/// position in the stream depends only on the sequence of calls.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Stream with the same seed and a different id.
    RngStream sibling(std::uint64_t stream_id) const { return RngStream(seed_, stream_id); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1); 53-bit resolution, one engine output.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

    /// Standard normal via Box-Muller without caching; two engine outputs.
    double normal();

    /// Fair sign in {-1, +1}; one engine output.
    double sign() { return (engine_() >> 63) != 0 ? -1.0 : 1.0; }

    void discard(unsigned long long n) { engine_.discard(n); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace heavysgd
