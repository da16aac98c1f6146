#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here stays deliberately separate from the library implementation paths it
// is used to check.

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sae/data.hpp"
#include "sae/model.hpp"
#include "sae/rng.hpp"

namespace test {

// Central finite-difference gradient, the oracle for analytic gradients.
inline std::vector<double> fd_gradient(
    const std::function<double(std::span<const double>)>& f, std::vector<double> point,
    double step = 1e-5) {
    std::vector<double> grad(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + step;
        const double up = f(point);
        point[i] = saved - step;
        const double down = f(point);
        point[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

// Composite Simpson integration on [lo, hi]; n must be even.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double sum = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) sum += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

// Posterior mean and sd of a 1-D unnormalized log density via quadrature.
struct QuadratureMoments {
    double mean;
    double sd;
};
inline QuadratureMoments quadrature_moments(const std::function<double(double)>& log_density,
                                            double lo, double hi, int n = 40000) {
    // Stabilize by the maximum over the grid.
    double peak = -1e308;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        peak = std::max(peak, log_density(x));
    }
    const auto density = [&](double x) { return std::exp(log_density(x) - peak); };
    const double z = simpson(density, lo, hi, n);
    const double mean = simpson([&](double x) { return x * density(x); }, lo, hi, n) / z;
    const double second = simpson([&](double x) { return x * x * density(x); }, lo, hi, n) / z;
    return {mean, std::sqrt(second - mean * mean)};
}

// A small linked dataset: `areas` areas (ids 1..areas), a handful of cells
// populated, deterministic records.
inline sae::LinkedDataset tiny_dataset(std::size_t areas = 3, std::size_t records_per_area = 8,
                                       std::uint64_t seed = 7) {
    sae::CellSchema schema;
    sae::Philox rng(seed, 42);

    sae::CellFrame frame;
    frame.schema = schema;
    const std::size_t n_cells = schema.cell_count();
    for (std::size_t i = 0; i < areas; ++i) {
        frame.area_ids.push_back(static_cast<sae::AreaId>(i + 1));
        std::vector<std::int64_t> counts(n_cells);
        std::int64_t total = 0;
        for (auto& c : counts) {
            c = 20 + static_cast<std::int64_t>(rng.next_below(200));
            total += c;
        }
        frame.counts.push_back(std::move(counts));
        frame.area_totals.push_back(total);
    }

    sae::AreaCovariateTable covariates;
    covariates.names = {"comorbidity", "percent_republican"};
    covariates.transforms = {sae::CovariateTransform::logit, sae::CovariateTransform::identity};
    for (std::size_t i = 0; i < areas; ++i)
        covariates.rows.emplace(static_cast<sae::AreaId>(i + 1),
                                std::vector<double>{0.2 + 0.1 * (i % 3), 0.4 + 0.05 * i});

    std::vector<sae::SurveyRecord> records;
    for (std::size_t i = 0; i < areas; ++i) {
        for (std::size_t k = 0; k < records_per_area; ++k) {
            sae::SurveyRecord rec;
            rec.area_id = static_cast<sae::AreaId>(i + 1);
            rec.cell = sae::cell_key(schema, rng.next_below(n_cells));
            rec.y = rng.uniform() < 0.55 ? 1 : 0;
            rec.weight = 0.5 + 3.0 * rng.uniform();
            records.push_back(rec);
        }
    }
    return sae::link(std::move(records), std::move(frame), std::move(covariates));
}

inline std::string survey_csv(const std::string& rows) {
    return "area_id,race,ethnicity,gender,age_band,y,weight\n" + rows;
}

inline std::string census_csv(const std::string& rows) {
    return "area_id,race,ethnicity,gender,age_band,count\n" + rows;
}

}  // namespace test
