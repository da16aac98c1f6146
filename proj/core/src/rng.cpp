#include "sae/rng.hpp"

#include <cmath>
#include <numbers>

namespace sae {

namespace {

constexpr std::uint64_t kMultiplier = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(product >> 64);
    lo = static_cast<std::uint64_t>(product);
}

}  // namespace

void Philox::generate_block() {
    std::uint64_t x0 = ctr_hi_;
    std::uint64_t x1 = ctr_lo_;
    std::uint64_t k = key_;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi, lo;
        mulhilo(kMultiplier, x0, hi, lo);
        x0 = hi ^ k ^ x1;
        x1 = lo;
        k += kWeyl;
    }
    block_[0] = x0;
    block_[1] = x1;
    block_pos_ = 0;
    if (++ctr_lo_ == 0) ++ctr_hi_;
}

std::uint64_t Philox::next_u64() {
    if (block_pos_ >= 2) generate_block();
    return block_[block_pos_++];
}

double Philox::uniform() {
    // 53 random bits, shifted into (0,1) so log() is always finite.
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Philox::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Philox::next_below(std::uint64_t bound) {
    if (bound < 2) return 0;
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return draw % bound;
}

}  // namespace sae
