#pragma once

#include <span>
#include <string>
#include <vector>

namespace sae {

struct DrawsMatrix;

// Potential scale reduction on split half-chains:
//   Rhat = sqrt((W(n-1)/n + B/n) / W)
// Needs >= 2 chains of >= 4 draws; throws ZeroVariance when every draw is
// identical (undefined, not 1).
double split_rhat(const std::vector<std::vector<double>>& chains);

// Effective sample size from autocorrelation sums with Geyer's
// initial-monotone truncation, combined across split half-chains and capped
// at the total draw count.
double ess(const std::vector<std::vector<double>>& chains);

struct ParamSummary {
    std::string name;
    double mean = 0.0;
    double se_mean = 0.0;  // sd / sqrt(ess)
    double sd = 0.0;
    std::vector<double> quantiles;
    double n_eff = 0.0;  // NaN when undefined
    double rhat = 0.0;   // NaN when undefined
};

struct DiagnosticsTable {
    std::vector<double> probs;
    std::vector<ParamSummary> rows;

    // True when every row has a defined Rhat below the threshold.
    bool converged(double threshold = 1.05) const;
};

inline constexpr double kDefaultProbs[] = {0.10, 0.15, 0.85, 0.90};

// One row per parameter: mean, se_mean, sd, quantiles (default 10/15/85/90%),
// n_eff, Rhat. A derived sigma_v row is appended when a log_sigma_v
// parameter is present.
DiagnosticsTable summarize(const DrawsMatrix& draws,
                           std::span<const double> probs = kDefaultProbs);

}  // namespace sae
