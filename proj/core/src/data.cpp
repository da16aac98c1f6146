#include "sae/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sae/util.hpp"

namespace sae {

namespace {

// Column positions resolved from a header line, case-insensitive, any order.
struct Header {
    std::vector<std::string> names;
    std::ptrdiff_t find(std::string_view want) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (iequals(names[i], want)) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }
};

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

Header read_header(std::istream& in) {
    Header header;
    std::string line;
    if (!read_line(in, line)) return header;
    for (auto field : split_csv_line(line)) header.names.emplace_back(field);
    return header;
}

// Resolves required columns, recording a MissingColumn issue per absence.
std::vector<std::ptrdiff_t> require_columns(const Header& header,
                                            std::initializer_list<const char*> wanted,
                                            std::vector<RowIssue>& issues) {
    std::vector<std::ptrdiff_t> cols;
    for (const char* name : wanted) {
        const auto idx = header.find(name);
        if (idx < 0)
            issues.push_back({errc::missing_column, 1, std::string("column '") + name + "' not in header"});
        cols.push_back(idx);
    }
    return cols;
}

std::optional<CellKey> parse_cell(const CellSchema& schema, std::string_view race,
                                  std::string_view ethnicity, std::string_view gender,
                                  std::string_view age_band, long row,
                                  std::vector<RowIssue>& issues) {
    CellKey key;
    bool ok = true;
    if (auto level = find_level(schema.race, race))
        key.race = *level;
    else {
        issues.push_back({errc::bad_enum_level, row, "race '" + std::string(race) + "'"});
        ok = false;
    }
    if (auto level = find_level(schema.ethnicity, ethnicity))
        key.ethnicity = *level;
    else {
        issues.push_back({errc::bad_enum_level, row, "ethnicity '" + std::string(ethnicity) + "'"});
        ok = false;
    }
    if (auto level = find_level(schema.gender, gender))
        key.gender = *level;
    else {
        issues.push_back({errc::bad_enum_level, row, "gender '" + std::string(gender) + "'"});
        ok = false;
    }
    const auto band = parse_int(age_band);
    if (band && *band >= 1 && *band <= schema.age_bands)
        key.age_band = static_cast<std::uint16_t>(*band);
    else {
        issues.push_back({errc::bad_enum_level, row, "age_band '" + std::string(age_band) + "'"});
        ok = false;
    }
    if (!ok) return std::nullopt;
    return key;
}

}  // namespace

std::ptrdiff_t CellFrame::area_index(AreaId id) const {
    const auto it = std::lower_bound(area_ids.begin(), area_ids.end(), id);
    if (it == area_ids.end() || *it != id) return -1;
    return it - area_ids.begin();
}

std::ptrdiff_t AreaCovariateTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (iequals(names[i], name)) return static_cast<std::ptrdiff_t>(i);
    return -1;
}

SurveyParse parse_survey(std::istream& in, const CellSchema& schema) {
    SurveyParse out;
    const Header header = read_header(in);
    const auto cols = require_columns(
        header, {"area_id", "race", "ethnicity", "gender", "age_band", "y", "weight"}, out.issues);
    if (!out.issues.empty()) return out;

    std::string line;
    long row = 1;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.names.size()) {
            out.issues.push_back({errc::missing_column, row, "expected " +
                                  format_int(std::int64_t(header.names.size())) + " fields, got " +
                                  format_int(std::int64_t(fields.size()))});
            continue;
        }
        SurveyRecord rec;
        bool ok = true;
        if (auto id = parse_int(fields[std::size_t(cols[0])]))
            rec.area_id = *id;
        else {
            out.issues.push_back({errc::bad_enum_level, row, "area_id not an integer"});
            ok = false;
        }
        const auto key = parse_cell(schema, fields[std::size_t(cols[1])], fields[std::size_t(cols[2])],
                                    fields[std::size_t(cols[3])], fields[std::size_t(cols[4])], row,
                                    out.issues);
        if (key)
            rec.cell = *key;
        else
            ok = false;
        const auto y = parse_int(fields[std::size_t(cols[5])]);
        if (y && (*y == 0 || *y == 1))
            rec.y = static_cast<std::uint8_t>(*y);
        else {
            out.issues.push_back({errc::non_binary_outcome, row,
                                  "y '" + std::string(fields[std::size_t(cols[5])]) + "' not in {0,1}"});
            ok = false;
        }
        const auto w = parse_double(fields[std::size_t(cols[6])]);
        if (w && std::isfinite(*w) && *w > 0.0)
            rec.weight = *w;
        else {
            out.issues.push_back({errc::nonpositive_weight, row,
                                  "weight '" + std::string(fields[std::size_t(cols[6])]) +
                                      "' must be finite and > 0"});
            ok = false;
        }
        if (ok) out.records.push_back(rec);
    }
    return out;
}

CensusParse parse_census(std::istream& in, const CellSchema& schema) {
    CensusParse out;
    out.frame.schema = schema;
    const Header header = read_header(in);
    const auto cols = require_columns(
        header, {"area_id", "race", "ethnicity", "gender", "age_band", "count"}, out.issues);
    if (!out.issues.empty()) return out;

    const std::size_t n_cells = schema.cell_count();
    std::map<AreaId, std::vector<std::int64_t>> counts;
    std::map<AreaId, std::vector<bool>> seen;

    std::string line;
    long row = 1;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.names.size()) {
            out.issues.push_back({errc::missing_column, row, "expected " +
                                  format_int(std::int64_t(header.names.size())) + " fields, got " +
                                  format_int(std::int64_t(fields.size()))});
            continue;
        }
        const auto id = parse_int(fields[std::size_t(cols[0])]);
        if (!id) {
            out.issues.push_back({errc::bad_enum_level, row, "area_id not an integer"});
            continue;
        }
        const auto key = parse_cell(schema, fields[std::size_t(cols[1])], fields[std::size_t(cols[2])],
                                    fields[std::size_t(cols[3])], fields[std::size_t(cols[4])], row,
                                    out.issues);
        if (!key) continue;
        const auto count = parse_int(fields[std::size_t(cols[5])]);
        if (!count || *count < 0) {
            out.issues.push_back({errc::negative_count, row,
                                  "count '" + std::string(fields[std::size_t(cols[5])]) +
                                      "' must be a nonnegative integer"});
            continue;
        }
        auto& area_counts = counts.try_emplace(*id, std::vector<std::int64_t>(n_cells, 0)).first->second;
        auto& area_seen = seen.try_emplace(*id, std::vector<bool>(n_cells, false)).first->second;
        const std::size_t idx = cell_index(schema, *key);
        if (area_seen[idx]) {
            out.issues.push_back({errc::duplicate_cell, row,
                                  "cell " + cell_label(schema, *key) + " repeated for area " +
                                      format_int(*id)});
            continue;
        }
        area_seen[idx] = true;
        area_counts[idx] = *count;
    }

    for (const auto& [id, area_counts] : counts) {
        const auto& area_seen = seen[id];
        for (std::size_t g = 0; g < n_cells; ++g)
            if (!area_seen[g]) ++out.missing_cells;
        const std::int64_t total = std::accumulate(area_counts.begin(), area_counts.end(),
                                                   std::int64_t{0});
        if (total <= 0) {
            out.issues.push_back({errc::area_with_zero_population, 0,
                                  "area " + format_int(id) + " has zero total population"});
            continue;
        }
        out.frame.area_ids.push_back(id);
        out.frame.counts.push_back(area_counts);
        out.frame.area_totals.push_back(total);
    }
    return out;
}

CovariateParse parse_covariates(std::istream& in) {
    CovariateParse out;
    const Header header = read_header(in);
    if (header.names.empty() || !iequals(header.names.front(), "area_id")) {
        out.issues.push_back({errc::missing_column, 1, "first column must be area_id"});
        return out;
    }
    for (std::size_t i = 1; i < header.names.size(); ++i) {
        out.table.names.push_back(header.names[i]);
        out.table.transforms.push_back(CovariateTransform::identity);
    }

    std::string line;
    long row = 1;
    while (read_line(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.names.size()) {
            out.issues.push_back({errc::missing_column, row, "expected " +
                                  format_int(std::int64_t(header.names.size())) + " fields, got " +
                                  format_int(std::int64_t(fields.size()))});
            continue;
        }
        const auto id = parse_int(fields[0]);
        if (!id) {
            out.issues.push_back({errc::bad_enum_level, row, "area_id not an integer"});
            continue;
        }
        std::vector<double> values;
        bool ok = true;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto v = parse_double(fields[i]);
            if (!v || !std::isfinite(*v)) {
                out.issues.push_back({errc::bad_enum_level, row,
                                      "covariate '" + out.table.names[i - 1] + "' not a finite number"});
                ok = false;
                break;
            }
            values.push_back(*v);
        }
        if (!ok) continue;
        if (!out.table.rows.emplace(*id, std::move(values)).second)
            out.issues.push_back({errc::duplicate_cell, row,
                                  "covariate row for area " + format_int(*id) + " repeated"});
    }
    return out;
}

namespace {
template <typename Parse, typename Fn>
Parse parse_file(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io_error, "cannot open '" + path + "'");
    return fn(in);
}
}  // namespace

SurveyParse parse_survey_file(const std::string& path, const CellSchema& schema) {
    return parse_file<SurveyParse>(path, [&](std::istream& in) { return parse_survey(in, schema); });
}
CensusParse parse_census_file(const std::string& path, const CellSchema& schema) {
    return parse_file<CensusParse>(path, [&](std::istream& in) { return parse_census(in, schema); });
}
CovariateParse parse_covariates_file(const std::string& path) {
    return parse_file<CovariateParse>(path, [](std::istream& in) { return parse_covariates(in); });
}

void apply_transforms(AreaCovariateTable& table,
                      const std::map<std::string, CovariateTransform>& transforms,
                      std::vector<RowIssue>& issues) {
    for (const auto& [name, transform] : transforms) {
        const auto col = table.column(name);
        if (col < 0) {
            issues.push_back({errc::missing_column, 0,
                              "transform declared for unknown covariate '" + name + "'"});
            continue;
        }
        table.transforms[std::size_t(col)] = transform;
    }
    for (std::size_t c = 0; c < table.names.size(); ++c) {
        if (table.transforms[c] != CovariateTransform::logit) continue;
        for (const auto& [id, values] : table.rows) {
            const double v = values[c];
            if (!(v > 0.0 && v < 1.0))
                issues.push_back({errc::logit_domain, 0,
                                  "covariate '" + table.names[c] + "' = " + format_double(v) +
                                      " for area " + format_int(id) + " not in (0,1)"});
        }
    }
}

void require_clean(const std::vector<RowIssue>& issues) {
    if (!issues.empty()) throw DatasetError(issues);
}

LinkedDataset link(std::vector<SurveyRecord> records, CellFrame cells,
                   AreaCovariateTable covariates) {
    std::vector<RowIssue> issues;
    const std::size_t n_cells = cells.schema.cell_count();

    std::vector<AreaId> missing_cov;
    for (const auto& rec : records) {
        if (cells.area_index(rec.area_id) < 0)
            issues.push_back({errc::unknown_area, 0,
                              "survey area " + format_int(rec.area_id) + " absent from census"});
        else if (!covariates.names.empty() && !covariates.rows.count(rec.area_id)) {
            if (std::find(missing_cov.begin(), missing_cov.end(), rec.area_id) == missing_cov.end())
                missing_cov.push_back(rec.area_id);
        }
    }
    for (AreaId id : missing_cov)
        issues.push_back({errc::missing_covariate_row, 0,
                          "no covariate row for sampled area " + format_int(id)});
    // Deduplicate unknown-area issues (one per distinct id).
    std::sort(issues.begin(), issues.end(), [](const RowIssue& a, const RowIssue& b) {
        return a.message < b.message;
    });
    issues.erase(std::unique(issues.begin(), issues.end(),
                             [](const RowIssue& a, const RowIssue& b) {
                                 return a.code == b.code && a.message == b.message;
                             }),
                 issues.end());
    require_clean(issues);

    LinkedDataset ds;
    ds.schema = cells.schema;
    ds.m = cells.area_count();
    ds.cells = std::move(cells);
    ds.covariates = std::move(covariates);

    // Deterministic order: (area, cell, original position).
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::uint32_t> rec_area(records.size()), rec_cell(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        rec_area[k] = static_cast<std::uint32_t>(ds.cells.area_index(records[k].area_id));
        rec_cell[k] = static_cast<std::uint32_t>(cell_index(ds.schema, records[k].cell));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rec_area[a] != rec_area[b]) return rec_area[a] < rec_area[b];
        return rec_cell[a] < rec_cell[b];
    });

    ds.n = records.size();
    ds.records.reserve(ds.n);
    ds.record_area.reserve(ds.n);
    ds.record_cell.reserve(ds.n);
    ds.n_ig.assign(ds.m, std::vector<std::uint32_t>(n_cells, 0));
    ds.n_i.assign(ds.m, 0);
    for (std::size_t pos : order) {
        ds.records.push_back(records[pos]);
        ds.record_area.push_back(rec_area[pos]);
        ds.record_cell.push_back(rec_cell[pos]);
        ds.n_ig[rec_area[pos]][rec_cell[pos]] += 1;
        ds.n_i[rec_area[pos]] += 1;
    }
    ds.g_i.assign(ds.m, 0);
    for (std::size_t i = 0; i < ds.m; ++i)
        for (std::size_t g = 0; g < n_cells; ++g)
            if (ds.n_ig[i][g] > 0) ds.g_i[i] += 1;
    return ds;
}

void write_survey_csv(std::ostream& out, const CellSchema& schema,
                      const std::vector<SurveyRecord>& records) {
    out << "area_id,race,ethnicity,gender,age_band,y,weight\n";
    for (const auto& rec : records) {
        out << format_int(rec.area_id) << ',' << schema.race[rec.cell.race] << ','
            << schema.ethnicity[rec.cell.ethnicity] << ',' << schema.gender[rec.cell.gender] << ','
            << format_int(rec.cell.age_band) << ',' << int(rec.y) << ','
            << format_double(rec.weight) << '\n';
    }
}

void write_census_csv(std::ostream& out, const CellFrame& frame) {
    out << "area_id,race,ethnicity,gender,age_band,count\n";
    for (std::size_t i = 0; i < frame.area_count(); ++i) {
        for (std::size_t g = 0; g < frame.schema.cell_count(); ++g) {
            const CellKey key = cell_key(frame.schema, g);
            out << format_int(frame.area_ids[i]) << ',' << frame.schema.race[key.race] << ','
                << frame.schema.ethnicity[key.ethnicity] << ',' << frame.schema.gender[key.gender]
                << ',' << format_int(key.age_band) << ',' << format_int(frame.counts[i][g]) << '\n';
        }
    }
}

void write_covariates_csv(std::ostream& out, const AreaCovariateTable& table) {
    out << "area_id";
    for (const auto& name : table.names) out << ',' << name;
    out << '\n';
    for (const auto& [id, values] : table.rows) {
        out << format_int(id);
        for (double v : values) out << ',' << format_double(v);
        out << '\n';
    }
}

std::string dataset_checksum(const LinkedDataset& dataset) {
    std::ostringstream buf;
    write_survey_csv(buf, dataset.schema, dataset.records);
    buf << '\x1e';
    write_census_csv(buf, dataset.cells);
    buf << '\x1e';
    write_covariates_csv(buf, dataset.covariates);
    return to_hex(fnv1a(buf.str()));
}

}  // namespace sae
