#pragma once

#include <span>
#include <string>
#include <vector>

#include "sae/model.hpp"

namespace sae {

struct DrawsMatrix;

// R x n pointwise Bernoulli log densities over retained draws.
struct LogLikMatrix {
    std::size_t draws = 0;
    std::size_t obs = 0;
    std::vector<double> values;  // row-major [draw][obs]

    double at(std::size_t r, std::size_t k) const { return values[r * obs + k]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * obs, obs}; }
};

// Throws NonFiniteEntry on a non-finite log density.
LogLikMatrix pointwise_loglik(const DrawsMatrix& draws, const HierarchicalLogit& model);

// Generalized Pareto tail fit (Zhang-Stephens profile posterior estimate,
// with the standard weak-prior pull of k toward 1/2). k follows the usual
// heavy-tail-positive convention. Needs >= 5 exceedances.
struct GpdFit {
    double k = 0.0;
    double sigma = 1.0;
};
GpdFit gpd_fit(std::vector<double> exceedances);

// Pareto-smoothed importance weights for one observation.
struct PsisEntry {
    std::vector<double> log_weights;  // normalized: logsumexp == 0
    double khat = 0.0;                // +inf when the tail fit failed
    std::size_t tail_len = 0;
};

// Tail size min(0.2 R, 3 sqrt(R)); tail replaced by expected GPD order
// statistics, truncated at the raw maximum, normalized in log space. Falls
// back to plain normalization (khat = +inf) when the tail fit fails.
PsisEntry psis_smooth(std::span<const double> raw_log_ratios);

inline constexpr double kParetoKWarn = 0.7;

struct ElpdReport {
    double elpd_loo = 0.0;
    double se = 0.0;
    std::vector<double> pointwise;
    std::vector<double> khat;

    std::size_t flagged(double threshold = kParetoKWarn) const;
};

ElpdReport elpd_loo(const LogLikMatrix& loglik);

// Paired comparison on identical observations (throws
// MismatchedObservations otherwise).
struct PairwiseDiff {
    double elpd_diff = 0.0;
    double se_diff = 0.0;
};
PairwiseDiff compare(const ElpdReport& a, const ElpdReport& b);

// Ranked comparison table, best model first with (0, 0) as in the usual
// loo-cv presentation.
struct ComparisonRow {
    std::string model;
    double elpd_diff = 0.0;
    double se_diff = 0.0;
    double elpd_loo = 0.0;
    double se = 0.0;
};
std::vector<ComparisonRow> compare_table(const std::vector<std::string>& names,
                                         const std::vector<ElpdReport>& reports);

}  // namespace sae
