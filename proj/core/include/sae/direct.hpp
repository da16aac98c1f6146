#pragma once

#include <span>
#include <vector>

#include "sae/data.hpp"

namespace sae {

// Survey-weighted direct estimate for one area. Hajek ratio form with the
// weight-normalized linearization variance, no finite-population correction
// and no small-sample factor, so results are exactly reproducible:
//   estimate = sum(w y) / sum(w)
//   se       = sqrt(sum(w^2 (y - estimate)^2)) / sum(w)
struct DirectEstimate {
    AreaId area_id = 0;
    bool no_sample = false;
    double estimate = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Throws NoSample when the record span is empty.
DirectEstimate direct_estimate(AreaId area_id, std::span<const SurveyRecord> records);

// One row per census area, ordered by area id; unsampled areas flagged.
std::vector<DirectEstimate> direct_table(const LinkedDataset& dataset);

}  // namespace sae
