#include "sae/loo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sae/sampler.hpp"
#include "sae/util.hpp"

namespace sae {

LogLikMatrix pointwise_loglik(const DrawsMatrix& draws, const HierarchicalLogit& model) {
    LogLikMatrix out;
    out.draws = draws.total_draws();
    out.obs = model.design().n();
    out.values.resize(out.draws * out.obs);
    std::vector<double> row(out.obs);
    for (std::size_t r = 0; r < out.draws; ++r) {
        pointwise_log_likelihood(draws.draw(r), model.design(), row);
        for (std::size_t k = 0; k < out.obs; ++k) {
            if (!std::isfinite(row[k]))
                throw Error(errc::non_finite_entry,
                            "log likelihood entry at draw " + format_int(std::int64_t(r)) +
                                ", observation " + format_int(std::int64_t(k)));
            out.values[r * out.obs + k] = row[k];
        }
    }
    return out;
}

GpdFit gpd_fit(std::vector<double> exceedances) {
    const std::size_t n = exceedances.size();
    if (n < 5)
        throw Error(errc::too_few_tail_samples,
                    "need at least 5 tail samples, got " + format_int(std::int64_t(n)));
    std::sort(exceedances.begin(), exceedances.end());
    if (!(exceedances.front() >= 0.0) || !(exceedances.back() > 0.0))
        throw Error(errc::too_few_tail_samples, "exceedances must be nonnegative");

    // Zhang & Stephens (2009): profile likelihood over a data-driven grid of
    // theta = k_zs / sigma, weighted by the profile posterior.
    const std::size_t grid = 30 + static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    const double quartile = exceedances[static_cast<std::size_t>(
        std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(n + 2) / 4 - 1))];
    if (!(quartile > 0.0))
        throw Error(errc::too_few_tail_samples, "tail has too many ties at the cutoff");
    const double x_max = exceedances.back();

    std::vector<double> theta(grid), log_profile(grid);
    for (std::size_t j = 0; j < grid; ++j) {
        theta[j] = 1.0 / x_max +
                   (1.0 - std::sqrt(static_cast<double>(grid) / (static_cast<double>(j) + 0.5))) /
                       (3.0 * quartile);
        double mean_log = 0.0;
        for (double x : exceedances) mean_log += std::log1p(-theta[j] * x);
        mean_log /= static_cast<double>(n);
        const double k_zs = -mean_log;
        log_profile[j] = static_cast<double>(n) * (std::log(theta[j] / k_zs) + k_zs - 1.0);
    }
    const double norm = logsumexp(log_profile);
    double theta_hat = 0.0;
    for (std::size_t j = 0; j < grid; ++j)
        theta_hat += theta[j] * std::exp(log_profile[j] - norm);

    double k = 0.0;
    for (double x : exceedances) k += std::log1p(-theta_hat * x);
    k /= static_cast<double>(n);  // heavy-tail-positive convention
    GpdFit fit;
    fit.sigma = -k / theta_hat;
    // Weak prior pull toward 1/2 (10 pseudo-observations).
    fit.k = (k * static_cast<double>(n) + 5.0) / (static_cast<double>(n) + 10.0);
    return fit;
}

namespace {

// GPD quantile, heavy-tail-positive k.
double gpd_quantile(double p, double k, double sigma) {
    if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
    return sigma / k * (std::pow(1.0 - p, -k) - 1.0);
}

}  // namespace

PsisEntry psis_smooth(std::span<const double> raw_log_ratios) {
    const std::size_t r = raw_log_ratios.size();
    if (r < 100)
        throw Error(errc::dimension_mismatch,
                    "need at least 100 draws for smoothing, got " + format_int(std::int64_t(r)));
    PsisEntry entry;
    entry.log_weights.assign(raw_log_ratios.begin(), raw_log_ratios.end());

    const double max_raw = *std::max_element(entry.log_weights.begin(), entry.log_weights.end());
    for (double& w : entry.log_weights) w -= max_raw;

    const double r_real = static_cast<double>(r);
    const std::size_t tail_len = static_cast<std::size_t>(
        std::min(0.2 * r_real, 3.0 * std::sqrt(r_real)));
    entry.tail_len = tail_len;

    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return entry.log_weights[a] < entry.log_weights[b];
    });

    const double cutoff_log = entry.log_weights[order[r - tail_len - 1]];
    const double cutoff = std::exp(cutoff_log);

    bool smoothed = false;
    if (tail_len >= 5) {
        std::vector<double> exceed(tail_len);
        bool distinct = false;
        for (std::size_t j = 0; j < tail_len; ++j) {
            exceed[j] = std::exp(entry.log_weights[order[r - tail_len + j]]) - cutoff;
            if (exceed[j] > 0.0) distinct = true;
        }
        if (distinct) {
            try {
                const GpdFit fit = gpd_fit(exceed);
                entry.khat = fit.k;
                for (std::size_t j = 0; j < tail_len; ++j) {
                    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail_len);
                    const double q = gpd_quantile(p, fit.k, fit.sigma) + cutoff;
                    // Truncate at the raw maximum (0 after shifting).
                    entry.log_weights[order[r - tail_len + j]] = std::min(std::log(q), 0.0);
                }
                smoothed = true;
            } catch (const Error&) {
                smoothed = false;
            }
        }
    }
    if (!smoothed) entry.khat = std::numeric_limits<double>::infinity();

    const double total = logsumexp(entry.log_weights);
    for (double& w : entry.log_weights) w -= total;
    return entry;
}

std::size_t ElpdReport::flagged(double threshold) const {
    std::size_t count = 0;
    for (double k : khat)
        if (!(k <= threshold)) ++count;
    return count;
}

ElpdReport elpd_loo(const LogLikMatrix& loglik) {
    ElpdReport report;
    const std::size_t n = loglik.obs;
    const std::size_t r = loglik.draws;
    report.pointwise.resize(n);
    report.khat.resize(n);

    std::vector<double> column(r), combined(r);
    for (std::size_t k = 0; k < n; ++k) {
        // Importance ratios for leave-one-out are 1 / p(y_k | theta_r).
        for (std::size_t d = 0; d < r; ++d) column[d] = -loglik.at(d, k);
        const PsisEntry entry = psis_smooth(column);
        report.khat[k] = entry.khat;
        for (std::size_t d = 0; d < r; ++d)
            combined[d] = entry.log_weights[d] + loglik.at(d, k);
        report.pointwise[k] = logsumexp(combined);
    }
    report.elpd_loo = std::accumulate(report.pointwise.begin(), report.pointwise.end(), 0.0);
    const double sd = n > 1 ? sd_of(report.pointwise) : 0.0;
    report.se = std::sqrt(static_cast<double>(n)) * sd;
    return report;
}

PairwiseDiff compare(const ElpdReport& a, const ElpdReport& b) {
    if (a.pointwise.size() != b.pointwise.size())
        throw Error(errc::mismatched_observations,
                    "models were fitted on different observation counts");
    const std::size_t n = a.pointwise.size();
    std::vector<double> diff(n);
    for (std::size_t k = 0; k < n; ++k) diff[k] = a.pointwise[k] - b.pointwise[k];
    PairwiseDiff out;
    out.elpd_diff = std::accumulate(diff.begin(), diff.end(), 0.0);
    out.se_diff = n > 1 ? std::sqrt(static_cast<double>(n)) * sd_of(diff) : 0.0;
    return out;
}

std::vector<ComparisonRow> compare_table(const std::vector<std::string>& names,
                                         const std::vector<ElpdReport>& reports) {
    if (names.size() != reports.size() || reports.empty())
        throw Error(errc::dimension_mismatch, "comparison inputs disagree");
    std::vector<std::size_t> order(reports.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return reports[a].elpd_loo > reports[b].elpd_loo;
    });
    const std::size_t best = order.front();
    std::vector<ComparisonRow> table;
    for (std::size_t idx : order) {
        ComparisonRow row;
        row.model = names[idx];
        row.elpd_loo = reports[idx].elpd_loo;
        row.se = reports[idx].se;
        if (idx == best) {
            row.elpd_diff = 0.0;
            row.se_diff = 0.0;
        } else {
            const PairwiseDiff d = compare(reports[idx], reports[best]);
            row.elpd_diff = d.elpd_diff;
            row.se_diff = d.se_diff;
        }
        table.push_back(row);
    }
    return table;
}

}  // namespace sae
