#pragma once

#include <span>
#include <vector>

#include "sae/data.hpp"
#include "sae/util.hpp"

namespace sae {

struct DrawsMatrix;
class HierarchicalLogit;

// Cell partition per area:
//   set 1 - sampled in this area, set 2 - sampled only in other areas,
//   set 3 - sampled nowhere (identical across areas, never estimated).
struct CellPartition {
    std::size_t m = 0;
    std::size_t n_cells = 0;
    std::vector<std::vector<std::uint8_t>> set;    // [area][cell] in {1,2,3}
    std::vector<std::vector<std::uint32_t>> g1;    // sorted cell indices, per area
    std::vector<std::vector<std::uint32_t>> g2;
    std::vector<std::uint32_t> g3;                 // global
};

CellPartition partition_cells(const LinkedDataset& dataset);

// Population shares a1/a2 and the never-sampled residual, per area. They sum
// to one exactly by construction.
struct CoverageShares {
    std::vector<double> a1, a2, residual;
};

CoverageShares coverage_shares(const CellFrame& cells, const CellPartition& partition);

// b_ig = N_ig / sum over the chosen set (which = 1 or 2); positive on the
// set, summing to one. Throws EmptyCellSet.
std::vector<std::pair<std::uint32_t, double>> cell_share_weights(const CellFrame& cells,
                                                                 const CellPartition& partition,
                                                                 std::size_t area_index,
                                                                 int which);

// Per-area proportions for a single draw, from per-record theta values:
//   theta_ig      = weighted mean over the area's records in the cell
//   theta_ig_syn  = pooled weighted mean over all other areas' records
//   raw           = a1*theta_1 + a2*theta_2
//   normalized    = raw / (a1 + a2)
struct AreaDrawValues {
    std::vector<double> normalized;
    std::vector<double> raw;
};

AreaDrawValues per_draw_area_proportions(const LinkedDataset& dataset,
                                         const CellPartition& partition,
                                         const CoverageShares& shares,
                                         std::span<const double> record_theta);

struct AreaPosterior {
    AreaId area_id = 0;
    double mean = 0.0;
    double sd = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double mean_raw = 0.0;  // before the (a1+a2) renormalization
};

// Equal-tailed credible intervals (default 95%) from per-draw proportions.
// theta_draws is draw-major: [draw][area].
std::vector<AreaPosterior> posterior_area_summary(const LinkedDataset& dataset,
                                                  const std::vector<AreaDrawValues>& theta_draws,
                                                  double ci_level = 0.95);

// Runs the per-draw map over every retained draw of a fit.
std::vector<AreaDrawValues> area_draws_from_fit(const LinkedDataset& dataset,
                                                const CellPartition& partition,
                                                const CoverageShares& shares,
                                                const HierarchicalLogit& model,
                                                const DrawsMatrix& draws);

// Warn threshold on 1 - a1 - a2; above it the two-set approximation is
// questionable for that area.
inline constexpr double kResidualShareWarning = 0.05;

}  // namespace sae
