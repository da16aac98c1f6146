#include "sae/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sae/errors.hpp"
#include "sae/sampler.hpp"
#include "sae/util.hpp"

namespace sae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Splits each chain into halves of equal length (odd middle draw dropped).
std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    halves.reserve(chains.size() * 2);
    for (const auto& chain : chains) {
        const std::size_t half = chain.size() / 2;
        halves.emplace_back(chain.begin(), chain.begin() + half);
        halves.emplace_back(chain.end() - static_cast<std::ptrdiff_t>(half), chain.end());
    }
    return halves;
}

struct Pooled {
    double within = 0.0;    // W
    double between = 0.0;   // B
    double var_plus = 0.0;  // W(n-1)/n + B/n
    std::size_t n = 0;      // per-chain length
    std::size_t m = 0;      // chain count
};

Pooled pooled_variances(const std::vector<std::vector<double>>& chains) {
    Pooled p;
    p.m = chains.size();
    p.n = chains.front().size();
    std::vector<double> means(p.m);
    double grand = 0.0;
    for (std::size_t j = 0; j < p.m; ++j) {
        means[j] = mean_of(chains[j]);
        grand += means[j];
    }
    grand /= static_cast<double>(p.m);
    double w = 0.0;
    for (std::size_t j = 0; j < p.m; ++j) {
        double ss = 0.0;
        for (double x : chains[j]) ss += (x - means[j]) * (x - means[j]);
        w += ss / static_cast<double>(p.n - 1);
    }
    p.within = w / static_cast<double>(p.m);
    double sb = 0.0;
    for (std::size_t j = 0; j < p.m; ++j) sb += (means[j] - grand) * (means[j] - grand);
    p.between = p.m > 1
                    ? static_cast<double>(p.n) * sb / static_cast<double>(p.m - 1)
                    : 0.0;
    p.var_plus = p.within * static_cast<double>(p.n - 1) / static_cast<double>(p.n) +
                 p.between / static_cast<double>(p.n);
    return p;
}

void check_shape(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2)
        throw Error(errc::dimension_mismatch, "need at least 2 chains");
    const std::size_t n = chains.front().size();
    if (n < 4) throw Error(errc::dimension_mismatch, "need at least 4 draws per chain");
    for (const auto& chain : chains)
        if (chain.size() != n)
            throw Error(errc::dimension_mismatch, "chains must have equal length");
}

// Autocovariance at the given lag (biased 1/n normalization, mean removed).
double autocov(const std::vector<double>& chain, double mean, std::size_t lag) {
    const std::size_t n = chain.size();
    double sum = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t)
        sum += (chain[t] - mean) * (chain[t + lag] - mean);
    return sum / static_cast<double>(n);
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    check_shape(chains);
    const auto halves = split_halves(chains);
    const auto p = pooled_variances(halves);
    if (!(p.within > 0.0))
        throw Error(errc::zero_variance, "all draws identical; Rhat undefined");
    // Values below one are estimator noise at equilibrium; report 1 there.
    return std::max(1.0, std::sqrt(p.var_plus / p.within));
}

double ess(const std::vector<std::vector<double>>& chains) {
    check_shape(chains);
    const auto halves = split_halves(chains);
    const auto p = pooled_variances(halves);
    if (!(p.var_plus > 0.0))
        throw Error(errc::zero_variance, "all draws identical; ESS undefined");

    const std::size_t m = halves.size();
    const std::size_t n = p.n;
    std::vector<double> means(m);
    for (std::size_t j = 0; j < m; ++j) means[j] = mean_of(halves[j]);

    const auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t j = 0; j < m; ++j) acov += autocov(halves[j], means[j], lag);
        acov /= static_cast<double>(m);
        return 1.0 - (p.within * static_cast<double>(n - 1) / static_cast<double>(n) - acov) /
                         p.var_plus;
    };

    // Geyer: sum pair sums P_t = rho(2t) + rho(2t+1) while positive, then
    // enforce monotone decrease.
    double tau = 1.0;  // = -rho(0) + contributions; rho(0) pair handled below
    double prev_pair = std::numeric_limits<double>::infinity();
    double rho_even = rho(0);  // == 1 up to fp noise
    tau = -rho_even;
    for (std::size_t t = 0; 2 * t + 1 < n; ++t) {
        const double even = (t == 0) ? rho_even : rho(2 * t);
        const double odd = rho(2 * t + 1);
        double pair = even + odd;
        if (pair < 0.0) break;
        if (pair > prev_pair) pair = prev_pair;
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    const double total = static_cast<double>(m * n);
    if (!(tau > 0.0)) return total;
    return std::min(total / tau, total);
}

bool DiagnosticsTable::converged(double threshold) const {
    for (const auto& row : rows)
        if (!(row.rhat == row.rhat) || row.rhat >= threshold) return false;
    return true;
}

DiagnosticsTable summarize(const DrawsMatrix& draws, std::span<const double> probs) {
    if (draws.total_draws() == 0)
        throw Error(errc::dimension_mismatch, "no draws to summarize");
    DiagnosticsTable table;
    table.probs.assign(probs.begin(), probs.end());

    const auto summarize_column = [&](const std::string& name,
                                      const std::vector<std::vector<double>>& chains) {
        ParamSummary row;
        row.name = name;
        std::vector<double> pooled;
        for (const auto& chain : chains) pooled.insert(pooled.end(), chain.begin(), chain.end());
        row.mean = mean_of(pooled);
        row.sd = pooled.size() > 1 ? sd_of(pooled) : 0.0;
        std::sort(pooled.begin(), pooled.end());
        for (double p : probs) row.quantiles.push_back(quantile_type7_sorted(pooled, p));
        try {
            row.n_eff = ess(chains);
            row.se_mean = row.sd / std::sqrt(row.n_eff);
        } catch (const Error&) {
            row.n_eff = kNaN;
            row.se_mean = kNaN;
        }
        if (chains.size() >= 2) {
            try {
                row.rhat = split_rhat(chains);
            } catch (const Error&) {
                row.rhat = kNaN;
            }
        } else {
            row.rhat = kNaN;
        }
        return row;
    };

    for (std::size_t p = 0; p < draws.dim(); ++p) {
        std::vector<std::vector<double>> chains;
        for (std::size_t c = 0; c < draws.chain_count(); ++c) chains.push_back(draws.column(c, p));
        table.rows.push_back(summarize_column(draws.names[p], chains));

        // Report sigma_v on its natural scale alongside the sampled parameter.
        if (draws.names[p] == "log_sigma_v") {
            std::vector<std::vector<double>> transformed = chains;
            for (auto& chain : transformed)
                for (double& x : chain) x = std::exp(x);
            table.rows.push_back(summarize_column("sigma_v", transformed));
        }
    }
    return table;
}

}  // namespace sae
