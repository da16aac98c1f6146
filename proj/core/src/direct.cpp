#include "sae/direct.hpp"

#include <cmath>

#include "sae/util.hpp"

namespace sae {

DirectEstimate direct_estimate(AreaId area_id, std::span<const SurveyRecord> records) {
    if (records.empty())
        throw Error(errc::no_sample, "area " + format_int(area_id) + " has no sample");
    double weight_sum = 0.0;
    double weighted_y = 0.0;
    for (const auto& rec : records) {
        weight_sum += rec.weight;
        weighted_y += rec.weight * rec.y;
    }
    const double estimate = weighted_y / weight_sum;
    double ss = 0.0;
    for (const auto& rec : records) {
        const double resid = rec.y - estimate;
        ss += rec.weight * rec.weight * resid * resid;
    }
    DirectEstimate out;
    out.area_id = area_id;
    out.estimate = estimate;
    out.se = std::sqrt(ss) / weight_sum;
    out.n = records.size();
    return out;
}

std::vector<DirectEstimate> direct_table(const LinkedDataset& dataset) {
    std::vector<DirectEstimate> table;
    table.reserve(dataset.m);
    std::size_t start = 0;
    for (std::size_t i = 0; i < dataset.m; ++i) {
        std::size_t end = start;
        while (end < dataset.n && dataset.record_area[end] == i) ++end;
        if (end == start) {
            DirectEstimate flag;
            flag.area_id = dataset.area_id_at(i);
            flag.no_sample = true;
            table.push_back(flag);
        } else {
            table.push_back(direct_estimate(
                dataset.area_id_at(i),
                std::span<const SurveyRecord>(dataset.records.data() + start, end - start)));
        }
        start = end;
    }
    return table;
}

}  // namespace sae
