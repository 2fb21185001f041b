#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mbma {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is addressed by (experiment seed, replicate index, stream role);
// the seed is the 64-bit key and the last two counter words hold replicate
// and role, so streams never overlap and any one of them can be regenerated
// independently of the others.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed, std::uint32_t replicate = 0, std::uint32_t role = 0) noexcept;

    // The bare bijection, exposed for known-answer tests.
    static Block block(Block counter, Key key) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept;

    // Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept;
    // Standard normal via Box-Muller.
    double normal() noexcept;

    std::uint64_t seed() const noexcept;

private:
    Key key_;
    Block counter_;
    Block buffer_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Roles used to key independent streams within one replicate.
enum class StreamRole : std::uint32_t {
    Data = 1,
    Init = 2,
    MiseMonteCarlo = 3,
    KlMonteCarlo = 4,
    Padding = 5,
};

inline Philox4x32 make_stream(std::uint64_t seed, std::uint32_t replicate, StreamRole role) noexcept {
    return Philox4x32(seed, replicate, static_cast<std::uint32_t>(role));
}

}  // namespace mbma
