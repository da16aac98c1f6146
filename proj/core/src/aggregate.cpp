#include "sae/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sae/model.hpp"
#include "sae/sampler.hpp"

namespace sae {

CellPartition partition_cells(const LinkedDataset& dataset) {
    CellPartition part;
    part.m = dataset.m;
    part.n_cells = dataset.schema.cell_count();

    std::vector<bool> sampled_anywhere(part.n_cells, false);
    for (std::size_t i = 0; i < part.m; ++i)
        for (std::size_t g = 0; g < part.n_cells; ++g)
            if (dataset.n_ig[i][g] > 0) sampled_anywhere[g] = true;

    part.set.assign(part.m, std::vector<std::uint8_t>(part.n_cells, 3));
    part.g1.resize(part.m);
    part.g2.resize(part.m);
    for (std::size_t g = 0; g < part.n_cells; ++g)
        if (!sampled_anywhere[g]) part.g3.push_back(static_cast<std::uint32_t>(g));

    for (std::size_t i = 0; i < part.m; ++i) {
        for (std::size_t g = 0; g < part.n_cells; ++g) {
            if (dataset.n_ig[i][g] > 0) {
                part.set[i][g] = 1;
                part.g1[i].push_back(static_cast<std::uint32_t>(g));
            } else if (sampled_anywhere[g]) {
                part.set[i][g] = 2;
                part.g2[i].push_back(static_cast<std::uint32_t>(g));
            }
        }
    }
    return part;
}

CoverageShares coverage_shares(const CellFrame& cells, const CellPartition& partition) {
    CoverageShares shares;
    const std::size_t m = partition.m;
    shares.a1.resize(m);
    shares.a2.resize(m);
    shares.residual.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::int64_t n1 = 0, n2 = 0;
        for (std::uint32_t g : partition.g1[i]) n1 += cells.counts[i][g];
        for (std::uint32_t g : partition.g2[i]) n2 += cells.counts[i][g];
        const double total = static_cast<double>(cells.area_totals[i]);
        shares.a1[i] = static_cast<double>(n1) / total;
        shares.a2[i] = static_cast<double>(n2) / total;
        // Computed as the exact complement so the three parts sum to one.
        shares.residual[i] = 1.0 - shares.a1[i] - shares.a2[i];
    }
    return shares;
}

std::vector<std::pair<std::uint32_t, double>> cell_share_weights(const CellFrame& cells,
                                                                 const CellPartition& partition,
                                                                 std::size_t area_index,
                                                                 int which) {
    const auto& set = which == 1 ? partition.g1[area_index] : partition.g2[area_index];
    if (set.empty())
        throw Error(errc::empty_cell_set, "cell set " + format_int(which) + " empty for area index " +
                                              format_int(std::int64_t(area_index)));
    std::int64_t total = 0;
    for (std::uint32_t g : set) total += cells.counts[area_index][g];
    std::vector<std::pair<std::uint32_t, double>> weights;
    weights.reserve(set.size());
    if (total <= 0) {
        // All census counts zero on the set: fall back to equal weights so the
        // shares still sum to one (their a-share is zero anyway).
        const double w = 1.0 / static_cast<double>(set.size());
        for (std::uint32_t g : set) weights.emplace_back(g, w);
        return weights;
    }
    for (std::uint32_t g : set)
        weights.emplace_back(g, static_cast<double>(cells.counts[area_index][g]) /
                                    static_cast<double>(total));
    return weights;
}

AreaDrawValues per_draw_area_proportions(const LinkedDataset& dataset,
                                         const CellPartition& partition,
                                         const CoverageShares& shares,
                                         std::span<const double> record_theta) {
    if (record_theta.size() != dataset.n)
        throw Error(errc::dimension_mismatch, "record theta length");
    const std::size_t m = dataset.m;
    const std::size_t n_cells = partition.n_cells;

    // Weighted sums per (area, cell) and pooled per cell.
    std::vector<double> cell_w(m * n_cells, 0.0), cell_wt(m * n_cells, 0.0);
    std::vector<double> pool_w(n_cells, 0.0), pool_wt(n_cells, 0.0);
    for (std::size_t k = 0; k < dataset.n; ++k) {
        const std::size_t i = dataset.record_area[k];
        const std::size_t g = dataset.record_cell[k];
        const double w = dataset.records[k].weight;
        const double wt = w * record_theta[k];
        cell_w[i * n_cells + g] += w;
        cell_wt[i * n_cells + g] += wt;
        pool_w[g] += w;
        pool_wt[g] += wt;
    }

    AreaDrawValues out;
    out.normalized.assign(m, std::numeric_limits<double>::quiet_NaN());
    out.raw.assign(m, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < m; ++i) {
        double theta1 = 0.0;
        if (!partition.g1[i].empty()) {
            for (const auto& [g, b] : cell_share_weights(dataset.cells, partition, i, 1)) {
                const double w = cell_w[i * n_cells + g];
                theta1 += b * (cell_wt[i * n_cells + g] / w);
            }
        }
        double theta2 = 0.0;
        if (!partition.g2[i].empty()) {
            for (const auto& [g, b] : cell_share_weights(dataset.cells, partition, i, 2)) {
                // Donor pool excludes this area's records; for a set-2 cell the
                // area has none, so this is everybody else's.
                const double w = pool_w[g] - cell_w[i * n_cells + g];
                const double wt = pool_wt[g] - cell_wt[i * n_cells + g];
                if (!(w > 0.0))
                    throw Error(errc::empty_donor_pool,
                                "no donor records for a set-2 cell; partition is inconsistent");
                theta2 += b * (wt / w);
            }
        }
        const double a1 = shares.a1[i];
        const double a2 = shares.a2[i];
        const double raw = a1 * theta1 + a2 * theta2;
        out.raw[i] = raw;
        out.normalized[i] = (a1 + a2) > 0.0 ? raw / (a1 + a2)
                                            : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

std::vector<AreaPosterior> posterior_area_summary(const LinkedDataset& dataset,
                                                  const std::vector<AreaDrawValues>& theta_draws,
                                                  double ci_level) {
    if (theta_draws.empty())
        throw Error(errc::dimension_mismatch, "no draws for area summary");
    const std::size_t draw_count = theta_draws.size();
    const double tail = (1.0 - ci_level) / 2.0;

    std::vector<AreaPosterior> table(dataset.m);
    std::vector<double> normalized(draw_count), raw(draw_count);
    for (std::size_t i = 0; i < dataset.m; ++i) {
        for (std::size_t r = 0; r < draw_count; ++r) {
            normalized[r] = theta_draws[r].normalized[i];
            raw[r] = theta_draws[r].raw[i];
        }
        auto& row = table[i];
        row.area_id = dataset.area_id_at(i);
        row.mean = mean_of(normalized);
        row.sd = draw_count > 1 ? sd_of(normalized) : 0.0;
        row.mean_raw = mean_of(raw);
        std::sort(normalized.begin(), normalized.end());
        row.ci_lower = quantile_type7_sorted(normalized, tail);
        row.ci_upper = quantile_type7_sorted(normalized, 1.0 - tail);
    }
    return table;
}

std::vector<AreaDrawValues> area_draws_from_fit(const LinkedDataset& dataset,
                                                const CellPartition& partition,
                                                const CoverageShares& shares,
                                                const HierarchicalLogit& model,
                                                const DrawsMatrix& draws) {
    const std::size_t total = draws.total_draws();
    std::vector<AreaDrawValues> out(total);
    std::vector<double> theta(dataset.n);
    for (std::size_t r = 0; r < total; ++r) {
        record_thetas(draws.draw(r), model.design(), theta);
        out[r] = per_draw_area_proportions(dataset, partition, shares, theta);
    }
    return out;
}

}  // namespace sae
