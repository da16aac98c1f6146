#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sae/cell.hpp"
#include "sae/errors.hpp"

namespace sae {

using AreaId = std::int64_t;

// One survey respondent. The age band doubles as the continuous age
// covariate (band index 1..7 cast to a real).
struct SurveyRecord {
    AreaId area_id = 0;
    CellKey cell;
    std::uint8_t y = 0;
    double weight = 1.0;
};

// Census population counts N_ig, dense over all cells for every area.
struct CellFrame {
    CellSchema schema;
    std::vector<AreaId> area_ids;               // sorted ascending
    std::vector<std::vector<std::int64_t>> counts;  // [area][cell]
    std::vector<std::int64_t> area_totals;      // N_i

    std::size_t area_count() const { return area_ids.size(); }
    // Dense area index for an id; -1 when unknown.
    std::ptrdiff_t area_index(AreaId id) const;
};

enum class CovariateTransform { identity, logit };

// Per-area continuous covariates with a declared transform per column.
struct AreaCovariateTable {
    std::vector<std::string> names;
    std::vector<CovariateTransform> transforms;  // parallel to names
    std::map<AreaId, std::vector<double>> rows;  // raw (untransformed) values

    std::ptrdiff_t column(std::string_view name) const;
};

// The immutable analysis dataset: records are sorted by (area, cell, input
// order) and cross-referenced against the census frame, so m, n, n_i and
// n_ig are all fixed at link time.
struct LinkedDataset {
    CellSchema schema;
    std::vector<SurveyRecord> records;
    CellFrame cells;
    AreaCovariateTable covariates;

    std::size_t m = 0;  // area count (census universe)
    std::size_t n = 0;  // record count
    std::vector<std::uint32_t> record_area;          // dense area index per record
    std::vector<std::uint32_t> record_cell;          // dense cell index per record
    std::vector<std::vector<std::uint32_t>> n_ig;    // [area][cell] sample counts
    std::vector<std::uint32_t> n_i;                  // per area
    std::vector<std::uint32_t> g_i;                  // cells represented per area

    AreaId area_id_at(std::size_t area_index) const { return cells.area_ids[area_index]; }
};

// --- parsing ----------------------------------------------------------------

struct SurveyParse {
    std::vector<SurveyRecord> records;
    std::vector<RowIssue> issues;
};

struct CensusParse {
    CellFrame frame;
    std::vector<RowIssue> issues;
    std::size_t missing_cells = 0;  // absent rows defaulted to zero
};

struct CovariateParse {
    AreaCovariateTable table;
    std::vector<RowIssue> issues;
};

// Schemas are fixed (see README): headers are mandatory, comma separated,
// matched case-insensitively in any column order.
SurveyParse parse_survey(std::istream& in, const CellSchema& schema);
CensusParse parse_census(std::istream& in, const CellSchema& schema);
CovariateParse parse_covariates(std::istream& in);

SurveyParse parse_survey_file(const std::string& path, const CellSchema& schema);
CensusParse parse_census_file(const std::string& path, const CellSchema& schema);
CovariateParse parse_covariates_file(const std::string& path);

// Attach declared transforms by column name; validates logit domains.
void apply_transforms(AreaCovariateTable& table,
                      const std::map<std::string, CovariateTransform>& transforms,
                      std::vector<RowIssue>& issues);

// Throws DatasetError when the issue list is nonempty.
void require_clean(const std::vector<RowIssue>& issues);

// Cross-references the three tables. Throws DatasetError (UnknownArea,
// MissingCovariateRow) on referential failures.
LinkedDataset link(std::vector<SurveyRecord> records, CellFrame cells,
                   AreaCovariateTable covariates);

// --- canonical serialization -------------------------------------------------

// Writes CSV that reparses bit-identically (shortest round-trip doubles).
void write_survey_csv(std::ostream& out, const CellSchema& schema,
                      const std::vector<SurveyRecord>& records);
void write_census_csv(std::ostream& out, const CellFrame& frame);
void write_covariates_csv(std::ostream& out, const AreaCovariateTable& table);

// Checksum of the canonical serialization; fit artifacts carry this so that
// model comparisons refuse to mix datasets.
std::string dataset_checksum(const LinkedDataset& dataset);

}  // namespace sae
