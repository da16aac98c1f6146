#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/data.hpp"
#include "sae/model.hpp"
#include "sae/sampler.hpp"
#include "sae/util.hpp"

namespace sae {

// True generating parameters for the finite population. The population has
// no survey-weight term; informativeness enters through the sampling design.
struct SimTruth {
    std::vector<double> alpha;  // one per race x ethnicity intercept
    std::vector<double> beta;   // one per generated area covariate
    std::vector<double> xi;     // age slope per gender
    double sigma_v = 0.2;
};

struct SimConfig {
    CellSchema schema;
    std::size_t areas = 20;
    std::int64_t count_min = 0;     // clamp on generated cell counts
    std::int64_t count_max = 4000;
    // Cell sizes follow a lognormal profile shared across areas, so the same
    // demographic cells are populous everywhere and samples cover most of the
    // population share. 0 gives equal-sized cells.
    double cell_size_skew = 1.5;
    // Area population is sampling_scale x target sample size, keeping the
    // sampling fraction (and so the weight distribution) comparable across
    // areas. Unsampled areas get the population of a target-15 area.
    double sampling_scale = 400.0;
    SimTruth truth;
    // Per-area target sample sizes, cycled over areas; zeros keep the area
    // census-only and exercise the synthetic path.
    std::vector<std::size_t> target_n = {0,  8,  12, 20, 40,  60, 80, 100, 130, 160,
                                         15, 25, 35, 50, 120, 70, 90, 110, 140, 150};
    // Inclusion propensities are logistic in a latent size variable
    //   z = outcome_correlation * (2y - 1) + noise,
    // scaled by `informativeness`. The product of the two knobs sets the
    // selection tilt between outcome classes. Strong outcome correlation
    // makes the weight an outcome proxy, which no within-cell weighting can
    // repair for one-respondent cells; defaults keep the design mildly
    // informative, the regime the weight-covariate correction targets.
    double informativeness = 0.4;
    double outcome_correlation = 0.12;
    unsigned replicates = 100;
    std::uint64_t seed = 1;

    ModelConfig fit_model;       // model fitted to each replicate
    SamplerConfig fit_sampler;   // per-replicate sampler settings
    PriorConfig prior;

    static SimConfig defaults();
    void validate() const;
};

// A generated finite population: census counts, per-cell success counts and
// probabilities, exact area means, and the area covariates used to
// generate it.
struct Population {
    CellFrame cells;
    AreaCovariateTable covariates;
    std::vector<std::vector<double>> theta;        // [area][cell]
    std::vector<std::vector<std::int64_t>> ones;   // [area][cell] count of y=1
    std::vector<double> area_mean;                 // exact Ybar_i
    std::vector<double> area_effect;               // true v_i
};

Population gen_population(const SimConfig& config, std::uint64_t stream);

// Poisson sampling with logistic propensities in a latent variable
// correlated with the outcome; weights are inverse propensities. The result
// round-trips through the survey CSV schema. Throws EmptySample.
std::vector<SurveyRecord> draw_sample(const Population& population, const SimConfig& config,
                                      std::uint64_t stream);

// Per-area outcome of one replicate fit, as consumed by evaluate_recovery.
struct AreaRecovery {
    AreaId area_id = 0;
    double truth = 0.0;
    double hb_mean = 0.0;
    double hb_sd = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    bool direct_available = false;
    double direct = 0.0;
    double direct_se = 0.0;
    std::size_t n_i = 0;
    double residual_share = 0.0;
};

struct ReplicateResult {
    unsigned replicate = 0;
    std::vector<AreaRecovery> areas;
};

struct RecoveryReport {
    std::size_t replicates = 0;
    std::size_t areas = 0;
    double coverage = 0.0;        // pooled 95%-interval coverage
    double mean_bias = 0.0;       // pooled hb_mean - truth
    double mean_abs_bias = 0.0;
    SummaryStats direct_estimates{};
    SummaryStats hb_estimates{};
    SummaryStats direct_se{};
    SummaryStats hb_se{};
    SummaryStats residual_share{};
    // Direct-SE / HB-SE ratios split by realized area sample size.
    double se_ratio_median_small = 0.0;  // n_i <= small_area_cutoff
    double se_ratio_median_large = 0.0;
    std::size_t small_area_cutoff = 10;
};

// Pools replicate results; needs >= 30 replicates (InsufficientReplicates).
RecoveryReport evaluate_recovery(const std::vector<ReplicateResult>& replicates,
                                 std::size_t small_area_cutoff = 10);

// Generates, samples, fits and aggregates one replicate end to end.
ReplicateResult run_replicate(const SimConfig& config, unsigned replicate);

}  // namespace sae
