#include "sae/errors.hpp"

#include <sstream>

namespace sae {

const char* errc_name(errc code) {
    switch (code) {
        case errc::config_error: return "ConfigError";
        case errc::io_error: return "IoError";
        case errc::missing_column: return "MissingColumn";
        case errc::bad_enum_level: return "BadEnumLevel";
        case errc::nonpositive_weight: return "NonpositiveWeight";
        case errc::non_binary_outcome: return "NonBinaryOutcome";
        case errc::negative_count: return "NegativeCount";
        case errc::duplicate_cell: return "DuplicateCell";
        case errc::area_with_zero_population: return "AreaWithZeroPopulation";
        case errc::unknown_area: return "UnknownArea";
        case errc::missing_covariate_row: return "MissingCovariateRow";
        case errc::logit_domain: return "LogitDomain";
        case errc::no_sample: return "NoSample";
        case errc::empty_sample: return "EmptySample";
        case errc::degenerate_covariate: return "DegenerateCovariate";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::non_finite_value: return "NonFiniteValue";
        case errc::divergence_rate_exceeded: return "DivergenceRateExceeded";
        case errc::non_finite_start: return "NonFiniteStart";
        case errc::zero_variance: return "ZeroVariance";
        case errc::non_converged: return "NonConverged";
        case errc::empty_cell_set: return "EmptyCellSet";
        case errc::empty_donor_pool: return "EmptyDonorPool";
        case errc::too_few_tail_samples: return "TooFewTailSamples";
        case errc::mismatched_observations: return "MismatchedObservations";
        case errc::non_finite_entry: return "NonFiniteEntry";
        case errc::insufficient_replicates: return "InsufficientReplicates";
        case errc::internal_error: return "InternalError";
    }
    return "UnknownError";
}

int errc_exit_code(errc code) {
    switch (code) {
        case errc::config_error:
        case errc::io_error:
            return 2;
        case errc::missing_column:
        case errc::bad_enum_level:
        case errc::nonpositive_weight:
        case errc::non_binary_outcome:
        case errc::negative_count:
        case errc::duplicate_cell:
        case errc::area_with_zero_population:
        case errc::unknown_area:
        case errc::missing_covariate_row:
        case errc::logit_domain:
        case errc::no_sample:
        case errc::empty_sample:
        case errc::degenerate_covariate:
        case errc::mismatched_observations:
        case errc::insufficient_replicates:
            return 3;
        case errc::divergence_rate_exceeded:
        case errc::non_finite_start:
        case errc::non_converged:
            return 4;
        default:
            return 5;
    }
}

std::string DatasetError::format(const std::vector<RowIssue>& issues) {
    std::ostringstream out;
    out << issues.size() << " issue(s)";
    const std::size_t shown = issues.size() < 8 ? issues.size() : 8;
    for (std::size_t i = 0; i < shown; ++i) {
        out << "\n  " << errc_name(issues[i].code);
        if (issues[i].row > 0) out << " (row " << issues[i].row << ")";
        out << ": " << issues[i].message;
    }
    if (shown < issues.size()) out << "\n  ... " << (issues.size() - shown) << " more";
    return out.str();
}

}  // namespace sae
