#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsdelab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
// pure function of (key, counter), which is what lets every path own an
// independent stream regardless of how paths are split across workers.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key)
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    Block operator()(std::uint64_t stream, std::uint64_t position) const {
        Block c{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32)};
        std::uint32_t k0 = key_[0];
        std::uint32_t k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }

private:
    std::array<std::uint32_t, 2> key_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Separate key spaces for the different consumers of a user seed.
enum class StreamDomain : std::uint64_t {
    brownian = 0x42524f574e000001ull,
    start_law = 0x5354415254000002ull,
    validation = 0x56414c4944000003ull,
    certification = 0x4345525449000004ull,
};

inline std::uint64_t derive_key(std::uint64_t seed, StreamDomain domain) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)));
}

// Uniform in the open interval (0, 1) with 53 bits from two 32-bit words.
inline double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t hi = a >> 5;
    const std::uint64_t lo = b >> 6;
    return (static_cast<double>(hi * 67108864ull + lo) + 0.5) * (1.0 / 9007199254740992.0);
}

// Box-Muller on one Philox block: two standard normals.
inline std::array<double, 2> normal_pair(const Philox4x32::Block& block) {
    const double u1 = to_unit(block[0], block[1]);
    const double u2 = to_unit(block[2], block[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

// Sequential uniform draws from one (key, stream) pair.
class UniformStream {
public:
    UniformStream(const Philox4x32& gen, std::uint64_t stream) : gen_(gen), stream_(stream) {}

    double next() {
        if (slot_ == 2) {
            block_ = gen_(stream_, position_++);
            slot_ = 0;
        }
        const double u = slot_ == 0 ? to_unit(block_[0], block_[1]) : to_unit(block_[2], block_[3]);
        ++slot_;
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

private:
    const Philox4x32& gen_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    Philox4x32::Block block_{};
    int slot_ = 2;
};

}  // namespace bsdelab
