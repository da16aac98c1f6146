#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "sae/data.hpp"

using namespace sae;

namespace {
const CellSchema kSchema;

bool has_issue(const std::vector<RowIssue>& issues, errc code, long row = -1) {
    for (const auto& issue : issues)
        if (issue.code == code && (row < 0 || issue.row == row)) return true;
    return false;
}
}  // namespace

TEST_CASE("survey rows map directly to records") {
    std::istringstream in(test::survey_csv("1,White,NonHispanic,Male,3,1,2.5\n"));
    const auto parsed = parse_survey(in, kSchema);
    REQUIRE(parsed.issues.empty());
    REQUIRE(parsed.records.size() == 1);
    const auto& rec = parsed.records[0];
    CHECK(rec.area_id == 1);
    CHECK(rec.cell.race == 0);
    CHECK(rec.cell.ethnicity == 0);
    CHECK(rec.cell.gender == 0);
    CHECK(rec.cell.age_band == 3);
    CHECK(rec.y == 1);
    CHECK(rec.weight == 2.5);
}

TEST_CASE("survey parsing flags bad rows with line numbers") {
    std::istringstream in(test::survey_csv("1,White,NonHispanic,Male,3,1,0\n"
                                           "1,White,NonHispanic,Male,3,2,1.5\n"
                                           "1,Martian,NonHispanic,Male,3,1,1.0\n"
                                           "2,Black,Hispanic,Female,7,0,0.25\n"));
    const auto parsed = parse_survey(in, kSchema);
    CHECK(parsed.records.size() == 1);  // only the last row is clean
    CHECK(has_issue(parsed.issues, errc::nonpositive_weight, 2));
    CHECK(has_issue(parsed.issues, errc::non_binary_outcome, 3));
    CHECK(has_issue(parsed.issues, errc::bad_enum_level, 4));
}

TEST_CASE("missing survey column is reported") {
    std::istringstream in("area_id,race,ethnicity,gender,age_band,y\n1,White,NonHispanic,Male,3,1\n");
    const auto parsed = parse_survey(in, kSchema);
    CHECK(parsed.records.empty());
    CHECK(has_issue(parsed.issues, errc::missing_column, 1));
}

TEST_CASE("census duplicate and zero-population checks") {
    std::istringstream dup(test::census_csv("1,White,NonHispanic,Male,1,10\n"
                                            "1,White,NonHispanic,Male,1,12\n"));
    CHECK(has_issue(parse_census(dup, kSchema).issues, errc::duplicate_cell, 3));

    std::istringstream zero(test::census_csv("1,White,NonHispanic,Male,1,0\n"));
    CHECK(has_issue(parse_census(zero, kSchema).issues, errc::area_with_zero_population));

    std::istringstream negative(test::census_csv("1,White,NonHispanic,Male,1,-4\n"));
    CHECK(has_issue(parse_census(negative, kSchema).issues, errc::negative_count, 2));
}

TEST_CASE("absent census cells default to zero with a warning count") {
    std::istringstream in(test::census_csv("1,White,NonHispanic,Male,1,50\n"));
    const auto parsed = parse_census(in, kSchema);
    REQUIRE(parsed.issues.empty());
    CHECK(parsed.missing_cells == 111);
    CHECK(parsed.frame.area_count() == 1);
    CHECK(parsed.frame.area_totals[0] == 50);
}

TEST_CASE("dense frame from a full generated fixture") {
    std::ostringstream rows;
    for (int area = 1; area <= 51; ++area)
        for (std::size_t g = 0; g < kSchema.cell_count(); ++g) {
            const CellKey key = cell_key(kSchema, g);
            rows << area << ',' << kSchema.race[key.race] << ',' << kSchema.ethnicity[key.ethnicity]
                 << ',' << kSchema.gender[key.gender] << ',' << key.age_band << ',' << (g + 1)
                 << '\n';
        }
    std::istringstream in(test::census_csv(rows.str()));
    const auto parsed = parse_census(in, kSchema);
    REQUIRE(parsed.issues.empty());
    CHECK(parsed.missing_cells == 0);
    CHECK(parsed.frame.area_count() == 51);
    for (std::size_t i = 0; i < 51; ++i) CHECK(parsed.frame.counts[i].size() == 112);
}

TEST_CASE("link rejects unknown areas and missing covariate rows") {
    std::istringstream survey(test::survey_csv("9,White,NonHispanic,Male,3,1,1.0\n"));
    std::istringstream census(test::census_csv("1,White,NonHispanic,Male,3,100\n"));
    auto survey_parsed = parse_survey(survey, kSchema);
    auto census_parsed = parse_census(census, kSchema);
    REQUIRE(survey_parsed.issues.empty());
    REQUIRE(census_parsed.issues.empty());

    AreaCovariateTable covariates;
    covariates.names = {"x"};
    covariates.transforms = {CovariateTransform::identity};
    covariates.rows.emplace(1, std::vector<double>{0.5});

    CHECK_THROWS_WITH_AS(link(survey_parsed.records, census_parsed.frame, covariates),
                         doctest::Contains("UnknownArea"), DatasetError);

    std::istringstream survey2(test::survey_csv("1,White,NonHispanic,Male,3,1,1.0\n"));
    auto survey2_parsed = parse_survey(survey2, kSchema);
    AreaCovariateTable empty_rows;
    empty_rows.names = {"x"};
    empty_rows.transforms = {CovariateTransform::identity};
    CHECK_THROWS_WITH_AS(link(survey2_parsed.records, census_parsed.frame, empty_rows),
                         doctest::Contains("MissingCovariateRow"), DatasetError);
}

TEST_CASE("empty record list links fine: every cell is synthetic or unsampled") {
    std::istringstream census(test::census_csv("1,White,NonHispanic,Male,3,100\n"
                                               "2,White,NonHispanic,Male,3,80\n"));
    auto census_parsed = parse_census(census, kSchema);
    const auto ds = link({}, census_parsed.frame, {});
    CHECK(ds.n == 0);
    CHECK(ds.m == 2);
    for (auto n : ds.n_i) CHECK(n == 0);
}

TEST_CASE("counting fixture: 3 records in 2 cells of one area") {
    std::istringstream survey(test::survey_csv("1,White,NonHispanic,Male,3,1,1.0\n"
                                               "1,White,NonHispanic,Male,3,0,2.0\n"
                                               "1,Black,Hispanic,Female,2,1,1.5\n"));
    std::ostringstream census_rows;
    for (std::size_t g = 0; g < kSchema.cell_count(); ++g) {
        const CellKey key = cell_key(kSchema, g);
        census_rows << "1," << kSchema.race[key.race] << ',' << kSchema.ethnicity[key.ethnicity]
                    << ',' << kSchema.gender[key.gender] << ',' << key.age_band << ",10\n";
    }
    std::istringstream census(test::census_csv(census_rows.str()));
    auto survey_parsed = parse_survey(survey, kSchema);
    auto census_parsed = parse_census(census, kSchema);
    const auto ds = link(survey_parsed.records, census_parsed.frame, {});
    CHECK(ds.n_i[0] == 3);
    CHECK(ds.g_i[0] == 2);
    CHECK(ds.n == 3);
}

TEST_CASE("serialization round-trips bitwise") {
    const auto ds = test::tiny_dataset(3, 10);

    std::ostringstream survey_out, census_out, cov_out;
    write_survey_csv(survey_out, ds.schema, ds.records);
    write_census_csv(census_out, ds.cells);
    write_covariates_csv(cov_out, ds.covariates);

    std::istringstream survey_in(survey_out.str()), census_in(census_out.str()),
        cov_in(cov_out.str());
    auto survey_parsed = parse_survey(survey_in, ds.schema);
    auto census_parsed = parse_census(census_in, ds.schema);
    auto cov_parsed = parse_covariates(cov_in);
    REQUIRE(survey_parsed.issues.empty());
    REQUIRE(census_parsed.issues.empty());
    REQUIRE(cov_parsed.issues.empty());
    cov_parsed.table.transforms = ds.covariates.transforms;
    const auto round = link(std::move(survey_parsed.records), std::move(census_parsed.frame),
                            std::move(cov_parsed.table));

    REQUIRE(round.n == ds.n);
    for (std::size_t k = 0; k < ds.n; ++k) {
        CHECK(round.records[k].area_id == ds.records[k].area_id);
        CHECK(round.records[k].cell == ds.records[k].cell);
        CHECK(round.records[k].y == ds.records[k].y);
        CHECK(round.records[k].weight == ds.records[k].weight);
    }
    CHECK(round.cells.counts == ds.cells.counts);
    CHECK(dataset_checksum(round) == dataset_checksum(ds));
}

TEST_CASE("count identities hold on the tiny fixture") {
    const auto ds = test::tiny_dataset(4, 12);
    std::size_t total = 0;
    for (std::size_t i = 0; i < ds.m; ++i) {
        std::size_t per_area = 0;
        for (std::size_t g = 0; g < ds.schema.cell_count(); ++g) per_area += ds.n_ig[i][g];
        CHECK(per_area == ds.n_i[i]);
        total += per_area;
    }
    CHECK(total == ds.n);
}

TEST_CASE("logit transform validation rejects out-of-range rates") {
    AreaCovariateTable table;
    table.names = {"rate"};
    table.transforms = {CovariateTransform::identity};
    table.rows.emplace(1, std::vector<double>{1.2});
    std::vector<RowIssue> issues;
    apply_transforms(table, {{"rate", CovariateTransform::logit}}, issues);
    CHECK(has_issue(issues, errc::logit_domain));
}
