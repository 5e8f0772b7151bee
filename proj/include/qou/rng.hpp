#pragma once

// Reproducible random streams.  A stream is identified by (master_seed,
// stream_id); the pair is expanded through std::seed_seq into the state of a
// 64-bit Mersenne Twister, so streams with different ids are statistically
// independent and each replays bit for bit.

#include <cstdint>
#include <random>

namespace qou {

struct RngSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

class Rng {
  public:
    explicit Rng(const RngSeed& seed) : seed_(seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed.master_seed),
                          static_cast<std::uint32_t>(seed.master_seed >> 32),
                          static_cast<std::uint32_t>(seed.stream_id),
                          static_cast<std::uint32_t>(seed.stream_id >> 32)};
        engine_.seed(seq);
    }

    const RngSeed& seed() const noexcept { return seed_; }

    /// Uniform on the open interval (0, 1), on the 2^-53 lattice shifted by half a step.
    double uniform() noexcept {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t bits() noexcept { return engine_(); }

  private:
    RngSeed seed_;
    std::mt19937_64 engine_;
};

}  // namespace qou
