#include "sae/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sae/aggregate.hpp"
#include "sae/diagnostics.hpp"
#include "sae/direct.hpp"
#include "sae/rng.hpp"

namespace sae {

namespace {

// Distinct stream namespaces per use so replicate streams never collide
// with chain streams.
constexpr std::uint64_t kPopulationStream = 0x100000000ULL;
constexpr std::uint64_t kSampleStream = 0x200000000ULL;

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

SimConfig SimConfig::defaults() {
    SimConfig config;
    // Cell-level effects are free to be strong (the synthetic pooling handles
    // them exactly); area-level effects are modest, as the two-set
    // approximation assumes.
    config.truth.alpha = {-0.9, -0.2, 0.1, -0.4, -0.5, -1.0, -0.2, -0.7};
    config.truth.beta = {-0.05, 0.05};
    config.truth.xi = {0.25, 0.12};
    config.truth.sigma_v = 0.05;

    config.fit_model.name = "sim";
    config.fit_model.area_covariates = {"x1", "x2"};
    // Logistic propensities make the selection tilt linear in ln(w), so the
    // log transform is the well-specified choice for the recovery fit.
    config.fit_model.weight_transform = WeightTransform::log;
    config.fit_model.standardize = true;

    config.fit_sampler.chains = 2;
    config.fit_sampler.iterations = 1500;
    config.fit_sampler.warmup = 750;
    config.fit_sampler.target_accept = 0.9;
    return config;
}

void SimConfig::validate() const {
    if (areas < 2) throw Error(errc::config_error, "need at least 2 areas");
    if (count_min < 0 || count_max < count_min)
        throw Error(errc::config_error, "census count range is invalid");
    if (!(sampling_scale > 1.0))
        throw Error(errc::config_error, "sampling_scale must exceed 1");
    if (cell_size_skew < 0.0)
        throw Error(errc::config_error, "cell_size_skew must be nonnegative");
    if (truth.alpha.size() != schema.intercept_count())
        throw Error(errc::config_error, "truth.alpha must have one entry per intercept");
    if (truth.xi.size() != schema.gender.size())
        throw Error(errc::config_error, "truth.xi must have one entry per gender level");
    if (target_n.empty()) throw Error(errc::config_error, "target_n must be nonempty");
    if (fit_model.area_covariates.size() != truth.beta.size())
        throw Error(errc::config_error, "fit model covariates must match truth.beta");
}

Population gen_population(const SimConfig& config, std::uint64_t stream) {
    config.validate();
    Philox rng(config.seed, kPopulationStream + stream);
    const std::size_t n_cells = config.schema.cell_count();

    Population pop;
    pop.cells.schema = config.schema;
    pop.cells.area_ids.resize(config.areas);
    std::iota(pop.cells.area_ids.begin(), pop.cells.area_ids.end(), AreaId{1});

    pop.covariates.names.clear();
    for (std::size_t j = 0; j < config.truth.beta.size(); ++j)
        pop.covariates.names.push_back("x" + format_int(std::int64_t(j + 1)));
    pop.covariates.transforms.assign(config.truth.beta.size(), CovariateTransform::identity);

    pop.cells.counts.assign(config.areas, std::vector<std::int64_t>(n_cells, 0));
    pop.cells.area_totals.assign(config.areas, 0);
    pop.theta.assign(config.areas, std::vector<double>(n_cells, 0.0));
    pop.ones.assign(config.areas, std::vector<std::int64_t>(n_cells, 0));
    pop.area_mean.assign(config.areas, 0.0);
    pop.area_effect.assign(config.areas, 0.0);

    // Shared cell-size profile: the same cells are large in every area.
    std::vector<double> profile(n_cells);
    double profile_sum = 0.0;
    for (double& p : profile) {
        p = std::exp(config.cell_size_skew * rng.normal());
        profile_sum += p;
    }
    for (double& p : profile) p /= profile_sum;

    for (std::size_t i = 0; i < config.areas; ++i) {
        std::vector<double> covariate_row;
        for (std::size_t j = 0; j < config.truth.beta.size(); ++j)
            covariate_row.push_back(rng.normal());
        pop.covariates.rows.emplace(pop.cells.area_ids[i], covariate_row);
        pop.area_effect[i] = config.truth.sigma_v * rng.normal();

        const std::size_t target = config.target_n[i % config.target_n.size()];
        const double area_units =
            config.sampling_scale * static_cast<double>(target > 0 ? target : 15);

        std::int64_t total_ones = 0;
        for (std::size_t g = 0; g < n_cells; ++g) {
            const CellKey key = cell_key(config.schema, g);
            const double jitter = 0.8 + 0.4 * rng.uniform();
            const std::int64_t count = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::llround(area_units * profile[g] * jitter)),
                config.count_min, config.count_max);
            pop.cells.counts[i][g] = count;
            pop.cells.area_totals[i] += count;

            double eta = config.truth.alpha[intercept_index(config.schema, key)];
            for (std::size_t j = 0; j < config.truth.beta.size(); ++j)
                eta += config.truth.beta[j] * covariate_row[j];
            eta += config.truth.xi[key.gender] * static_cast<double>(key.age_band);
            eta += pop.area_effect[i];
            const double theta = inv_link(eta);
            pop.theta[i][g] = theta;

            std::int64_t ones = 0;
            for (std::int64_t u = 0; u < count; ++u)
                if (rng.uniform() < theta) ++ones;
            pop.ones[i][g] = ones;
            total_ones += ones;
        }
        pop.area_mean[i] = static_cast<double>(total_ones) /
                           static_cast<double>(pop.cells.area_totals[i]);
    }
    return pop;
}

std::vector<SurveyRecord> draw_sample(const Population& population, const SimConfig& config,
                                      std::uint64_t stream) {
    Philox rng(config.seed, kSampleStream + stream);
    const std::size_t n_cells = population.cells.schema.cell_count();
    std::vector<SurveyRecord> records;

    for (std::size_t i = 0; i < population.cells.area_count(); ++i) {
        const std::size_t target = config.target_n[i % config.target_n.size()];
        if (target == 0) continue;
        const double base = std::clamp(static_cast<double>(target) /
                                           static_cast<double>(population.cells.area_totals[i]),
                                       1e-9, 0.9);
        const double base_logit = logit(base);
        for (std::size_t g = 0; g < n_cells; ++g) {
            const CellKey key = cell_key(population.cells.schema, g);
            const std::int64_t count = population.cells.counts[i][g];
            const std::int64_t ones = population.ones[i][g];
            for (std::int64_t u = 0; u < count; ++u) {
                const int y = u < ones ? 1 : 0;
                // Latent size variable, weakly correlated with the outcome;
                // informativeness = 0 recovers equal-probability sampling.
                const double latent =
                    config.outcome_correlation * (2.0 * y - 1.0) + rng.normal();
                const double propensity =
                    inv_link(base_logit + config.informativeness * latent);
                if (rng.uniform() < propensity) {
                    SurveyRecord rec;
                    rec.area_id = population.cells.area_ids[i];
                    rec.cell = key;
                    rec.y = static_cast<std::uint8_t>(y);
                    rec.weight = 1.0 / propensity;
                    records.push_back(rec);
                }
            }
        }
    }
    if (records.empty()) throw Error(errc::empty_sample, "design produced an empty sample");
    return records;
}

RecoveryReport evaluate_recovery(const std::vector<ReplicateResult>& replicates,
                                 std::size_t small_area_cutoff) {
    if (replicates.size() < 30)
        throw Error(errc::insufficient_replicates,
                    "need >= 30 replicates, got " + format_int(std::int64_t(replicates.size())));

    RecoveryReport report;
    report.replicates = replicates.size();
    report.areas = replicates.front().areas.size();
    report.small_area_cutoff = small_area_cutoff;

    std::vector<double> direct_est, hb_est, direct_se, hb_se, residual;
    std::vector<double> ratio_small, ratio_large;
    double covered = 0.0, total = 0.0, bias_sum = 0.0, abs_bias_sum = 0.0;

    for (const auto& rep : replicates) {
        for (const auto& area : rep.areas) {
            total += 1.0;
            if (area.truth >= area.ci_lower && area.truth <= area.ci_upper) covered += 1.0;
            bias_sum += area.hb_mean - area.truth;
            abs_bias_sum += std::abs(area.hb_mean - area.truth);
            hb_est.push_back(area.hb_mean);
            hb_se.push_back(area.hb_sd);
            residual.push_back(area.residual_share);
            if (area.direct_available) {
                direct_est.push_back(area.direct);
                direct_se.push_back(area.direct_se);
                if (area.hb_sd > 0.0) {
                    const double ratio = area.direct_se / area.hb_sd;
                    (area.n_i <= small_area_cutoff ? ratio_small : ratio_large).push_back(ratio);
                }
            }
        }
    }

    report.coverage = covered / total;
    report.mean_bias = bias_sum / total;
    report.mean_abs_bias = abs_bias_sum / total;
    report.direct_estimates = summary_stats(direct_est);
    report.hb_estimates = summary_stats(hb_est);
    report.direct_se = summary_stats(direct_se);
    report.hb_se = summary_stats(hb_se);
    report.residual_share = summary_stats(residual);
    report.se_ratio_median_small =
        ratio_small.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : quantile_type7(ratio_small, 0.5);
    report.se_ratio_median_large =
        ratio_large.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : quantile_type7(ratio_large, 0.5);
    return report;
}

ReplicateResult run_replicate(const SimConfig& config, unsigned replicate) {
    const Population population = gen_population(config, replicate);
    const std::vector<SurveyRecord> records = draw_sample(population, config, replicate);

    LinkedDataset dataset = link(records, population.cells, population.covariates);
    DesignMatrix design = build_design(dataset, config.fit_model);
    HierarchicalLogit model(std::move(design), config.prior);

    SamplerConfig sampler = config.fit_sampler;
    sampler.seed = config.seed ^ (0x9E3779B97F4A7C15ULL * (replicate + 1));
    const DrawsMatrix draws = sample_posterior(model, sampler);

    const CellPartition partition = partition_cells(dataset);
    const CoverageShares shares = coverage_shares(dataset.cells, partition);
    const auto area_draws = area_draws_from_fit(dataset, partition, shares, model, draws);
    const auto posterior = posterior_area_summary(dataset, area_draws);
    const auto direct = direct_table(dataset);

    ReplicateResult result;
    result.replicate = replicate;
    result.areas.resize(dataset.m);
    for (std::size_t i = 0; i < dataset.m; ++i) {
        auto& area = result.areas[i];
        area.area_id = dataset.area_id_at(i);
        area.truth = population.area_mean[i];
        area.hb_mean = posterior[i].mean;
        area.hb_sd = posterior[i].sd;
        area.ci_lower = posterior[i].ci_lower;
        area.ci_upper = posterior[i].ci_upper;
        area.direct_available = !direct[i].no_sample;
        area.direct = direct[i].estimate;
        area.direct_se = direct[i].se;
        area.n_i = dataset.n_i[i];
        area.residual_share = shares.residual[i];
    }
    return result;
}

}  // namespace sae
