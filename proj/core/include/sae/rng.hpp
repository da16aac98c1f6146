#pragma once

#include <cstdint>

namespace sae {

// Philox2x64-10 counter generator (Salmon et al., SC'11). A (seed, stream,
// counter) triple maps to the same output on every platform, and distinct
// streams are independent, so chains and simulation replicates each get
// their own stream off one user seed.
class Philox {
  public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_(seed), ctr_hi_(stream), ctr_lo_(0) {}

    std::uint64_t next_u64();

    // Uniform on the open interval (0, 1).
    double uniform();

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Uniform integer in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound);

  private:
    void generate_block();

    std::uint64_t key_;
    std::uint64_t ctr_hi_;
    std::uint64_t ctr_lo_;
    std::uint64_t block_[2]{};
    unsigned block_pos_ = 2;  // empty
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace sae
