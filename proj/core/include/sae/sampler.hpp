#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/model.hpp"

namespace sae {

struct SamplerConfig {
    unsigned chains = 4;
    unsigned iterations = 4000;  // total per chain, warmup included
    unsigned warmup = 2000;
    std::uint64_t seed = 1;
    double target_accept = 0.8;
    unsigned max_leapfrog = 64;
    double int_time = 2.5;  // nominal trajectory length in integration time
    // Post-warmup divergence fraction above which the run is rejected.
    double max_divergence_rate = 0.10;
    double init_radius = 1.0;  // uniform(-r, r) initial jitter per coordinate

    std::size_t retained() const { return iterations > warmup ? iterations - warmup : 0; }
    void validate() const;
};

struct ChainStats {
    double accept_rate = 0.0;
    unsigned divergences = 0;
    double step_size = 0.0;
};

// Retained post-warmup draws, chain-major on the unconstrained scale.
struct DrawsMatrix {
    std::vector<std::string> names;
    std::size_t n_chains = 0;
    std::size_t per_chain = 0;
    std::vector<double> values;  // [chain][draw][param]
    std::vector<ChainStats> stats;

    std::size_t dim() const { return names.size(); }
    std::size_t chain_count() const { return n_chains; }
    std::size_t total_draws() const { return n_chains * per_chain; }

    double at(std::size_t chain, std::size_t draw, std::size_t param) const {
        return values[(chain * per_chain + draw) * dim() + param];
    }
    // One parameter's draws for one chain, contiguous.
    std::vector<double> column(std::size_t chain, std::size_t param) const;
    // Draw r in pooled chain-major order; view into the storage.
    std::span<const double> draw(std::size_t pooled_index) const {
        return {values.data() + pooled_index * dim(), dim()};
    }
};

// Adaptive Hamiltonian sampler: leapfrog trajectories with jittered step
// count, dual-averaging step size targeting `target_accept`, and a diagonal
// mass matrix estimated during warmup. Deterministic for a fixed
// (seed, config, model): chains use independent counter-RNG streams.
DrawsMatrix run_chains(const LogDensityModel& model, const SamplerConfig& config);

// Random-walk Metropolis fallback for gradient-free debugging; same
// determinism contract.
DrawsMatrix run_chains_rw(const LogDensityModel& model, const SamplerConfig& config);

// Production entry point for the hierarchical model. Samples the area
// effects non-centered (v = sigma_v * z) so small sigma_v does not funnel
// the geometry, then maps the draws back to the centered scale, which is
// what DrawsMatrix always stores.
DrawsMatrix sample_posterior(const HierarchicalLogit& model, const SamplerConfig& config);

}  // namespace sae
