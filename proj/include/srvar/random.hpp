#pragma once

#include <array>
#include <cstdint>

namespace srvar {

/// Philox4x32-10 block function (Salmon et al., Random123).
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits.
class Philox4x32
{
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer; used only to derive stream identifiers.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/**
 * Counter-based random stream identified by (seed, stream id).
 *
 * The k-th 64-bit output is a pure function of (seed, stream, k), so two
 * streams with the same identity always produce the same sequence, and
 * independent substreams can be handed to different threads without any
 * shared state.
 */
class RandomStream
{
public:
    constexpr RandomStream() noexcept = default;
    constexpr RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : seed_{seed}, stream_{stream}
    {}

    /// Independent child stream. Distinct ids give distinct streams.
    [[nodiscard]] constexpr RandomStream substream(std::uint64_t id) const noexcept
    {
        return RandomStream{seed_, mix64(stream_ ^ mix64(id + 0x632BE59BD9B4E019ull))};
    }

    constexpr std::uint64_t next_u64() noexcept
    {
        if (!have_spare_) {
            const Philox4x32::Counter ctr{
                static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
            const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                                      static_cast<std::uint32_t>(seed_ >> 32)};
            const auto out = Philox4x32::block(ctr, key);
            ++block_;
            spare_ = (std::uint64_t{out[3]} << 32) | out[2];
            have_spare_ = true;
            ++draws_;
            return (std::uint64_t{out[1]} << 32) | out[0];
        }
        have_spare_ = false;
        ++draws_;
        return spare_;
    }

    /// Uniform on {k * 2^-53 : 0 <= k < 2^53}.
    constexpr double next_uniform() noexcept
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] constexpr std::uint64_t stream() const noexcept { return stream_; }
    /// Number of 64-bit words consumed so far.
    [[nodiscard]] constexpr std::uint64_t draws() const noexcept { return draws_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    std::uint64_t draws_ = 0;
    bool have_spare_ = false;
};

} // namespace srvar
