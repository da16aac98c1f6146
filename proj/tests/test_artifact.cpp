#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "sae/artifact.hpp"

using namespace sae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sae_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("run config json round-trips through the loader") {
    TempDir tmp;
    RunConfig config;
    config.survey_path = "s.csv";
    config.census_path = "c.csv";
    config.covariates_path = "x.csv";
    config.transforms["comorbidity"] = CovariateTransform::logit;
    config.model = ModelConfig::preset("M2");
    config.sampler.chains = 3;
    config.sampler.iterations = 123;
    config.sampler.warmup = 45;
    config.sampler.seed = 987;
    config.output_dir = "somewhere";

    const auto path = (tmp.path / "config.json").string();
    atomic_write(path, run_config_json(config, "deadbeef00000000"));
    const RunConfig loaded = load_run_config(path);
    CHECK(loaded.survey_path == "s.csv");
    CHECK(loaded.model.name == "M2");
    CHECK(loaded.model.area_covariates == config.model.area_covariates);
    CHECK(loaded.sampler.chains == 3);
    CHECK(loaded.sampler.iterations == 123);
    CHECK(loaded.sampler.warmup == 45);
    CHECK(loaded.sampler.seed == 987);
    CHECK(loaded.transforms.at("comorbidity") == CovariateTransform::logit);
    CHECK(loaded.output_dir == "somewhere");
}

TEST_CASE("atomic_write leaves no temp files behind") {
    TempDir tmp;
    const auto path = (tmp.path / "a" / "b.csv").string();
    atomic_write(path, "x,y\n1,2\n");
    CHECK(slurp(path) == "x,y\n1,2\n");
    CHECK_FALSE(fs::exists(path + ".tmp"));
}

TEST_CASE("loglik matrix bytes round-trip") {
    LogLikMatrix loglik;
    loglik.draws = 3;
    loglik.obs = 2;
    loglik.values = {-0.5, -1.5, -0.25, -2.0, -3.5, -0.125};
    const auto bytes = loglik_bytes(loglik);
    const auto back = loglik_from_bytes(bytes);
    CHECK(back.draws == 3);
    CHECK(back.obs == 2);
    CHECK(back.values == loglik.values);
    CHECK_THROWS_AS(loglik_from_bytes("garbage"), Error);
}

TEST_CASE("fit artifact round-trips draws and checksum") {
    TempDir tmp;
    const auto ds = test::tiny_dataset(3, 8);
    RunConfig config;
    config.model = ModelConfig::preset("M3");

    auto design = build_design(ds, config.model);
    HierarchicalLogit model(std::move(design), config.prior);
    SamplerConfig sampler;
    sampler.chains = 2;
    sampler.iterations = 200;
    sampler.warmup = 100;
    sampler.seed = 4;
    const auto draws = run_chains(model, sampler);
    const auto diagnostics = summarize(draws);
    const auto loglik = pointwise_loglik(draws, model);

    const std::string dir = (tmp.path / "fit").string();
    write_fit_artifact(dir, config, ds, draws, diagnostics, loglik);

    const auto artifact = read_fit_artifact(dir);
    CHECK(artifact.model_name == "M3");
    CHECK(artifact.dataset_checksum == dataset_checksum(ds));
    CHECK(artifact.draws.names == draws.names);
    CHECK(artifact.draws.n_chains == draws.n_chains);
    CHECK(artifact.draws.per_chain == draws.per_chain);
    REQUIRE(artifact.draws.values.size() == draws.values.size());
    for (std::size_t i = 0; i < draws.values.size(); ++i)
        CHECK(artifact.draws.values[i] == draws.values[i]);

    const auto loglik_back = read_loglik(dir);
    CHECK(loglik_back.values == loglik.values);
}

TEST_CASE("csv renderers emit the documented headers") {
    const auto ds = test::tiny_dataset(2, 5);
    const auto direct = direct_table(ds);
    const auto direct_csv = render_direct_csv(direct);
    CHECK(direct_csv.rfind("area_id,estimate,se,n\n", 0) == 0);

    const auto part = partition_cells(ds);
    const auto shares = coverage_shares(ds.cells, part);
    const auto cov_csv = render_coverage_summary_csv(shares);
    CHECK(cov_csv.rfind("quantity,min,q1,median,mean,q3,max\n", 0) == 0);
    CHECK(cov_csv.find("residual_share") != std::string::npos);

    std::vector<AreaDrawValues> area_draws(120);
    std::vector<double> theta(ds.n, 0.4);
    for (auto& d : area_draws) d = per_draw_area_proportions(ds, part, shares, theta);
    const auto posterior = posterior_area_summary(ds, area_draws);
    const auto est_csv = render_area_estimates_csv(posterior, direct);
    CHECK(est_csv.rfind("area_id,hb_estimate,sd,ci_lower,ci_upper,hb_estimate_raw,direct,"
                        "direct_se,n\n", 0) == 0);

    const auto ratios_csv = render_se_ratios_csv(ds, posterior, direct);
    CHECK(ratios_csv.rfind("area_id,n,direct_se,hb_sd,se_ratio\n", 0) == 0);
}

TEST_CASE("comparison csv layout: best first, zeros first row") {
    ElpdReport a, b;
    a.elpd_loo = -10.0;
    a.pointwise = {-5.0, -5.0};
    b.elpd_loo = -11.5;
    b.pointwise = {-6.0, -5.5};
    const auto table = compare_table({"M3", "M2"}, {a, b});
    const auto csv = render_comparison_csv(table);
    // diffs {-1, -0.5}: elpd_diff -1.5, se_diff sqrt(2) * sd = 0.5.
    CHECK(csv.rfind("model,elpd_diff,se_diff\nM3,0,0\nM2,-1.5,", 0) == 0);
    CHECK(table[1].se_diff == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dataset loader applies transforms and reports issues") {
    TempDir tmp;
    {
        std::ofstream survey(tmp.path / "survey.csv");
        survey << test::survey_csv("1,White,NonHispanic,Male,3,1,2.0\n"
                                   "2,Black,Hispanic,Female,5,0,1.0\n");
        std::ofstream census(tmp.path / "census.csv");
        census << "area_id,race,ethnicity,gender,age_band,count\n";
        const CellSchema schema;
        for (int area = 1; area <= 2; ++area)
            for (std::size_t g = 0; g < schema.cell_count(); ++g) {
                const CellKey key = cell_key(schema, g);
                census << area << ',' << schema.race[key.race] << ','
                       << schema.ethnicity[key.ethnicity] << ',' << schema.gender[key.gender]
                       << ',' << key.age_band << ",25\n";
            }
        std::ofstream cov(tmp.path / "cov.csv");
        cov << "area_id,comorbidity,percent_republican\n1,0.25,0.51\n2,0.30,0.43\n";
    }
    RunConfig config;
    config.survey_path = (tmp.path / "survey.csv").string();
    config.census_path = (tmp.path / "census.csv").string();
    config.covariates_path = (tmp.path / "cov.csv").string();
    config.transforms["comorbidity"] = CovariateTransform::logit;
    const auto loaded = load_dataset(config);
    CHECK(loaded.dataset.n == 2);
    CHECK(loaded.dataset.m == 2);
    CHECK(loaded.dataset.covariates.transforms[0] == CovariateTransform::logit);

    config.transforms["percent_republican"] = CovariateTransform::logit;
    RunConfig bad = config;
    bad.covariates_path = (tmp.path / "cov_bad.csv").string();
    {
        std::ofstream cov(tmp.path / "cov_bad.csv");
        cov << "area_id,comorbidity,percent_republican\n1,0.25,1.51\n2,0.30,0.43\n";
    }
    CHECK_THROWS_AS(load_dataset(bad), DatasetError);
}
