#include "sae/artifact.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sae/util.hpp"

namespace sae {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    return format_double(v);
}

CovariateTransform parse_transform(const std::string& name) {
    if (iequals(name, "identity")) return CovariateTransform::identity;
    if (iequals(name, "logit")) return CovariateTransform::logit;
    throw Error(errc::config_error, "unknown covariate transform '" + name + "'");
}

const char* transform_name(CovariateTransform t) {
    return t == CovariateTransform::logit ? "logit" : "identity";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io_error, "cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(errc::config_error, "bad JSON in '" + path + "': " + e.what());
    }
    return j;
}

void parse_schema(const json& j, CellSchema& schema) {
    if (j.contains("race")) schema.race = j.at("race").get<std::vector<std::string>>();
    if (j.contains("ethnicity"))
        schema.ethnicity = j.at("ethnicity").get<std::vector<std::string>>();
    if (j.contains("gender")) schema.gender = j.at("gender").get<std::vector<std::string>>();
    if (j.contains("age_bands")) schema.age_bands = j.at("age_bands").get<int>();
    if (schema.race.empty() || schema.ethnicity.empty() || schema.gender.empty() ||
        schema.age_bands < 1)
        throw Error(errc::config_error, "cell schema must have nonempty factors");
}

ModelConfig parse_model(const json& j) {
    if (j.is_string()) return ModelConfig::preset(j.get<std::string>());
    ModelConfig model;
    model.name = j.value("name", std::string("custom"));
    if (j.contains("preset")) {
        model = ModelConfig::preset(j.at("preset").get<std::string>());
    }
    if (j.contains("area_covariates"))
        model.area_covariates = j.at("area_covariates").get<std::vector<std::string>>();
    if (j.contains("weight_transform"))
        model.weight_transform = parse_weight_transform(j.at("weight_transform").get<std::string>());
    if (j.contains("standardize")) model.standardize = j.at("standardize").get<bool>();
    return model;
}

void parse_sampler(const json& j, SamplerConfig& sampler) {
    if (j.contains("chains")) sampler.chains = j.at("chains").get<unsigned>();
    if (j.contains("iterations")) sampler.iterations = j.at("iterations").get<unsigned>();
    if (j.contains("warmup")) sampler.warmup = j.at("warmup").get<unsigned>();
    if (j.contains("seed")) sampler.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("target_accept")) sampler.target_accept = j.at("target_accept").get<double>();
    if (j.contains("max_leapfrog")) sampler.max_leapfrog = j.at("max_leapfrog").get<unsigned>();
    if (j.contains("int_time")) sampler.int_time = j.at("int_time").get<double>();
    if (j.contains("init_radius")) sampler.init_radius = j.at("init_radius").get<double>();
}

json model_json(const ModelConfig& model) {
    json j;
    j["name"] = model.name;
    j["area_covariates"] = model.area_covariates;
    j["weight_transform"] = weight_transform_name(model.weight_transform);
    j["standardize"] = model.standardize;
    return j;
}

json schema_json(const CellSchema& schema) {
    json j;
    j["race"] = schema.race;
    j["ethnicity"] = schema.ethnicity;
    j["gender"] = schema.gender;
    j["age_bands"] = schema.age_bands;
    return j;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    const json j = read_json_file(path);
    RunConfig config;
    config.survey_path = j.value("survey", "");
    config.census_path = j.value("census", "");
    config.covariates_path = j.value("covariates", "");
    if (j.contains("covariate_transforms"))
        for (const auto& [name, value] : j.at("covariate_transforms").items())
            config.transforms[name] = parse_transform(value.get<std::string>());
    if (j.contains("cell_schema")) parse_schema(j.at("cell_schema"), config.schema);
    if (j.contains("model")) config.model = parse_model(j.at("model"));
    if (j.contains("sampler")) parse_sampler(j.at("sampler"), config.sampler);
    if (j.contains("prior")) {
        config.prior.coef_sd = j.at("prior").value("coef_sd", config.prior.coef_sd);
        config.prior.sigma_v_scale =
            j.at("prior").value("sigma_v_scale", config.prior.sigma_v_scale);
    }
    config.output_dir = j.value("output", config.output_dir);
    config.allow_nonconverged = j.value("allow_nonconverged", false);
    return config;
}

std::string run_config_json(const RunConfig& config, const std::string& dataset_checksum) {
    json j;
    j["survey"] = config.survey_path;
    j["census"] = config.census_path;
    j["covariates"] = config.covariates_path;
    json transforms;
    for (const auto& [name, t] : config.transforms) transforms[name] = transform_name(t);
    j["covariate_transforms"] = transforms;
    j["cell_schema"] = schema_json(config.schema);
    j["model"] = model_json(config.model);
    j["sampler"] = {{"chains", config.sampler.chains},
                    {"iterations", config.sampler.iterations},
                    {"warmup", config.sampler.warmup},
                    {"seed", config.sampler.seed},
                    {"target_accept", config.sampler.target_accept},
                    {"max_leapfrog", config.sampler.max_leapfrog},
                    {"int_time", config.sampler.int_time},
                    {"init_radius", config.sampler.init_radius}};
    j["prior"] = {{"coef_sd", config.prior.coef_sd},
                  {"sigma_v_scale", config.prior.sigma_v_scale}};
    j["output"] = config.output_dir;
    j["allow_nonconverged"] = config.allow_nonconverged;
    if (!dataset_checksum.empty()) j["dataset_checksum"] = dataset_checksum;
    return j.dump(2) + "\n";
}

SimConfig load_sim_config(const std::string& path) {
    const json j = read_json_file(path);
    SimConfig config = SimConfig::defaults();
    if (j.contains("cell_schema")) parse_schema(j.at("cell_schema"), config.schema);
    config.areas = j.value("areas", config.areas);
    config.count_min = j.value("count_min", config.count_min);
    config.count_max = j.value("count_max", config.count_max);
    config.cell_size_skew = j.value("cell_size_skew", config.cell_size_skew);
    config.sampling_scale = j.value("sampling_scale", config.sampling_scale);
    if (j.contains("target_n")) config.target_n = j.at("target_n").get<std::vector<std::size_t>>();
    config.informativeness = j.value("informativeness", config.informativeness);
    config.outcome_correlation = j.value("outcome_correlation", config.outcome_correlation);
    config.replicates = j.value("replicates", config.replicates);
    config.seed = j.value("seed", config.seed);
    if (j.contains("truth")) {
        const auto& t = j.at("truth");
        if (t.contains("alpha")) config.truth.alpha = t.at("alpha").get<std::vector<double>>();
        if (t.contains("beta")) config.truth.beta = t.at("beta").get<std::vector<double>>();
        if (t.contains("xi")) config.truth.xi = t.at("xi").get<std::vector<double>>();
        config.truth.sigma_v = t.value("sigma_v", config.truth.sigma_v);
    }
    if (j.contains("fit_model")) config.fit_model = parse_model(j.at("fit_model"));
    if (j.contains("fit_sampler")) parse_sampler(j.at("fit_sampler"), config.fit_sampler);
    if (config.fit_model.area_covariates.size() != config.truth.beta.size()) {
        // Keep the generated covariate columns and the fitted ones in sync.
        config.fit_model.area_covariates.clear();
        for (std::size_t jdx = 0; jdx < config.truth.beta.size(); ++jdx)
            config.fit_model.area_covariates.push_back("x" + format_int(std::int64_t(jdx + 1)));
    }
    return config;
}

std::string sim_config_json(const SimConfig& config) {
    json j;
    j["cell_schema"] = schema_json(config.schema);
    j["areas"] = config.areas;
    j["count_min"] = config.count_min;
    j["count_max"] = config.count_max;
    j["cell_size_skew"] = config.cell_size_skew;
    j["sampling_scale"] = config.sampling_scale;
    j["target_n"] = config.target_n;
    j["informativeness"] = config.informativeness;
    j["outcome_correlation"] = config.outcome_correlation;
    j["replicates"] = config.replicates;
    j["seed"] = config.seed;
    j["truth"] = {{"alpha", config.truth.alpha},
                  {"beta", config.truth.beta},
                  {"xi", config.truth.xi},
                  {"sigma_v", config.truth.sigma_v}};
    j["fit_model"] = model_json(config.fit_model);
    j["fit_sampler"] = {{"chains", config.fit_sampler.chains},
                        {"iterations", config.fit_sampler.iterations},
                        {"warmup", config.fit_sampler.warmup},
                        {"target_accept", config.fit_sampler.target_accept},
                        {"max_leapfrog", config.fit_sampler.max_leapfrog}};
    return j.dump(2) + "\n";
}

LoadedDataset load_dataset(const RunConfig& config) {
    if (config.survey_path.empty() || config.census_path.empty() ||
        config.covariates_path.empty())
        throw Error(errc::config_error, "survey, census and covariates paths are all required");

    auto survey = parse_survey_file(config.survey_path, config.schema);
    auto census = parse_census_file(config.census_path, config.schema);
    auto covariates = parse_covariates_file(config.covariates_path);

    std::vector<RowIssue> issues;
    issues.insert(issues.end(), survey.issues.begin(), survey.issues.end());
    issues.insert(issues.end(), census.issues.begin(), census.issues.end());
    issues.insert(issues.end(), covariates.issues.begin(), covariates.issues.end());
    apply_transforms(covariates.table, config.transforms, issues);
    require_clean(issues);

    LoadedDataset out{link(std::move(survey.records), std::move(census.frame),
                           std::move(covariates.table)),
                      census.missing_cells};
    return out;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::io_error, "cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error(errc::io_error, "write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string loglik_bytes(const LogLikMatrix& loglik) {
    std::string bytes;
    bytes.reserve(24 + loglik.values.size() * sizeof(double));
    bytes.append("SAELL1\n\0", 8);
    const auto append_u64 = [&](std::uint64_t v) {
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
        bytes.append(buf, 8);
    };
    append_u64(loglik.draws);
    append_u64(loglik.obs);
    bytes.append(reinterpret_cast<const char*>(loglik.values.data()),
                 loglik.values.size() * sizeof(double));
    return bytes;
}

LogLikMatrix loglik_from_bytes(const std::string& bytes) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), "SAELL1\n\0", 8) != 0)
        throw Error(errc::io_error, "not a loglik matrix file");
    const auto read_u64 = [&](std::size_t offset) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i]))
                 << (8 * i);
        return v;
    };
    LogLikMatrix loglik;
    loglik.draws = read_u64(8);
    loglik.obs = read_u64(16);
    const std::size_t expected = 24 + loglik.draws * loglik.obs * sizeof(double);
    if (bytes.size() != expected)
        throw Error(errc::io_error, "loglik matrix file is truncated");
    loglik.values.resize(loglik.draws * loglik.obs);
    std::memcpy(loglik.values.data(), bytes.data() + 24, bytes.size() - 24);
    return loglik;
}

void write_fit_artifact(const std::string& dir, const RunConfig& config,
                        const LinkedDataset& dataset, const DrawsMatrix& draws,
                        const DiagnosticsTable& diagnostics, const LogLikMatrix& loglik) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    atomic_write(dir + "/config.json", run_config_json(config, dataset_checksum(dataset)));
    atomic_write(dir + "/draws.csv", render_draws_csv(draws));
    atomic_write(dir + "/diagnostics.csv", render_diagnostics_csv(diagnostics));
    atomic_write(dir + "/sampler_stats.csv", render_sampler_stats_csv(draws));
    atomic_write(dir + "/loglik.bin", loglik_bytes(loglik));
}

FitArtifact read_fit_artifact(const std::string& dir) {
    FitArtifact artifact;
    artifact.dir = dir;
    const json j = read_json_file(dir + "/config.json");
    if (!j.contains("dataset_checksum"))
        throw Error(errc::io_error, "'" + dir + "/config.json' has no dataset checksum");
    artifact.dataset_checksum = j.at("dataset_checksum").get<std::string>();
    artifact.model = parse_model(j.at("model"));
    artifact.model_name = artifact.model.name;

    std::ifstream in(dir + "/draws.csv");
    if (!in) throw Error(errc::io_error, "cannot open '" + dir + "/draws.csv'");
    std::string line;
    if (!std::getline(in, line)) throw Error(errc::io_error, "empty draws file");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "chain" || header[1] != "draw")
        throw Error(errc::io_error, "unexpected draws header");
    DrawsMatrix& draws = artifact.draws;
    for (std::size_t p = 2; p < header.size(); ++p) draws.names.emplace_back(header[p]);

    std::vector<double> values;
    std::size_t max_chain = 0, max_draw = 0, rows = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw Error(errc::io_error, "ragged draws row");
        const auto chain = parse_int(fields[0]);
        const auto draw = parse_int(fields[1]);
        if (!chain || !draw) throw Error(errc::io_error, "bad draws row indices");
        max_chain = std::max(max_chain, static_cast<std::size_t>(*chain));
        max_draw = std::max(max_draw, static_cast<std::size_t>(*draw));
        for (std::size_t p = 2; p < fields.size(); ++p) {
            const auto v = parse_double(fields[p]);
            if (!v) throw Error(errc::io_error, "bad draws value");
            values.push_back(*v);
        }
        ++rows;
    }
    draws.n_chains = max_chain + 1;
    draws.per_chain = max_draw + 1;
    if (rows != draws.n_chains * draws.per_chain)
        throw Error(errc::io_error, "draws file has missing rows");
    draws.values = std::move(values);
    draws.stats.resize(draws.n_chains);
    return artifact;
}

LogLikMatrix read_loglik(const std::string& dir) {
    std::ifstream in(dir + "/loglik.bin", std::ios::binary);
    if (!in) throw Error(errc::io_error, "cannot open '" + dir + "/loglik.bin'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return loglik_from_bytes(buf.str());
}

// --- CSV renderers --------------------------------------------------------------

std::string render_direct_csv(const std::vector<DirectEstimate>& table) {
    std::ostringstream out;
    out << "area_id,estimate,se,n\n";
    for (const auto& row : table) {
        out << format_int(row.area_id) << ',';
        if (row.no_sample)
            out << "NA,NA,0\n";
        else
            out << format_double(row.estimate) << ',' << format_double(row.se) << ','
                << format_int(std::int64_t(row.n)) << '\n';
    }
    return out.str();
}

std::string render_diagnostics_csv(const DiagnosticsTable& table) {
    std::ostringstream out;
    out << "parameter,mean,se_mean,sd";
    for (double p : table.probs)
        out << ",p" << format_double(p * 100.0);
    out << ",n_eff,rhat\n";
    for (const auto& row : table.rows) {
        out << row.name << ',' << fmt(row.mean) << ',' << fmt(row.se_mean) << ',' << fmt(row.sd);
        for (double q : row.quantiles) out << ',' << fmt(q);
        out << ',' << fmt(row.n_eff) << ',' << fmt(row.rhat) << '\n';
    }
    return out.str();
}

std::string render_draws_csv(const DrawsMatrix& draws) {
    std::ostringstream out;
    out << "chain,draw";
    for (const auto& name : draws.names) out << ',' << name;
    out << '\n';
    for (std::size_t c = 0; c < draws.chain_count(); ++c)
        for (std::size_t d = 0; d < draws.per_chain; ++d) {
            out << format_int(std::int64_t(c)) << ',' << format_int(std::int64_t(d));
            for (std::size_t p = 0; p < draws.dim(); ++p)
                out << ',' << format_double(draws.at(c, d, p));
            out << '\n';
        }
    return out.str();
}

std::string render_sampler_stats_csv(const DrawsMatrix& draws) {
    std::ostringstream out;
    out << "chain,accept_rate,divergences,step_size\n";
    for (std::size_t c = 0; c < draws.stats.size(); ++c)
        out << format_int(std::int64_t(c)) << ',' << format_double(draws.stats[c].accept_rate)
            << ',' << format_int(std::int64_t(draws.stats[c].divergences)) << ','
            << format_double(draws.stats[c].step_size) << '\n';
    return out.str();
}

std::string render_area_estimates_csv(const std::vector<AreaPosterior>& posterior,
                                      const std::vector<DirectEstimate>& direct) {
    std::ostringstream out;
    out << "area_id,hb_estimate,sd,ci_lower,ci_upper,hb_estimate_raw,direct,direct_se,n\n";
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        const auto& hb = posterior[i];
        const auto& d = direct[i];
        out << format_int(hb.area_id) << ',' << fmt(hb.mean) << ',' << fmt(hb.sd) << ','
            << fmt(hb.ci_lower) << ',' << fmt(hb.ci_upper) << ',' << fmt(hb.mean_raw) << ',';
        if (d.no_sample)
            out << "NA,NA,0\n";
        else
            out << format_double(d.estimate) << ',' << format_double(d.se) << ','
                << format_int(std::int64_t(d.n)) << '\n';
    }
    return out.str();
}

namespace {
void summary_row(std::ostringstream& out, const char* name, const SummaryStats& s) {
    out << name << ',' << fmt(s.min) << ',' << fmt(s.q1) << ',' << fmt(s.median) << ','
        << fmt(s.mean) << ',' << fmt(s.q3) << ',' << fmt(s.max) << '\n';
}
}  // namespace

std::string render_coverage_summary_csv(const CoverageShares& shares) {
    std::ostringstream out;
    out << "quantity,min,q1,median,mean,q3,max\n";
    summary_row(out, "residual_share", summary_stats(shares.residual));
    summary_row(out, "a1", summary_stats(shares.a1));
    summary_row(out, "a2", summary_stats(shares.a2));
    return out.str();
}

std::string render_area_shares_csv(const LinkedDataset& dataset, const CoverageShares& shares) {
    std::ostringstream out;
    out << "area_id,a1,a2,residual\n";
    for (std::size_t i = 0; i < dataset.m; ++i)
        out << format_int(dataset.area_id_at(i)) << ',' << format_double(shares.a1[i]) << ','
            << format_double(shares.a2[i]) << ',' << format_double(shares.residual[i]) << '\n';
    return out.str();
}

std::string render_se_ratios_csv(const LinkedDataset& dataset,
                                 const std::vector<AreaPosterior>& posterior,
                                 const std::vector<DirectEstimate>& direct) {
    // Figure-2 style: one row per sampled area, ordered by sample size.
    std::vector<std::size_t> order(dataset.m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.n_i[a] < dataset.n_i[b];
    });
    std::ostringstream out;
    out << "area_id,n,direct_se,hb_sd,se_ratio\n";
    for (std::size_t i : order) {
        if (direct[i].no_sample) continue;
        const double ratio = posterior[i].sd > 0.0
                                 ? direct[i].se / posterior[i].sd
                                 : std::numeric_limits<double>::quiet_NaN();
        out << format_int(posterior[i].area_id) << ',' << format_int(std::int64_t(dataset.n_i[i]))
            << ',' << format_double(direct[i].se) << ',' << fmt(posterior[i].sd) << ','
            << fmt(ratio) << '\n';
    }
    return out.str();
}

std::string render_comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream out;
    out << "model,elpd_diff,se_diff\n";
    for (const auto& row : rows)
        out << row.model << ',' << format_double(row.elpd_diff) << ','
            << format_double(row.se_diff) << '\n';
    return out.str();
}

std::string render_pareto_k_csv(const std::vector<std::string>& names,
                                const std::vector<ElpdReport>& reports) {
    std::ostringstream out;
    out << "model,observation,khat,flagged\n";
    for (std::size_t m = 0; m < names.size(); ++m)
        for (std::size_t k = 0; k < reports[m].khat.size(); ++k) {
            const double khat = reports[m].khat[k];
            out << names[m] << ',' << format_int(std::int64_t(k)) << ','
                << (std::isinf(khat) ? "inf" : format_double(khat)) << ','
                << ((khat > kParetoKWarn) ? 1 : 0) << '\n';
        }
    return out.str();
}

std::string render_recovery_report_csv(const RecoveryReport& report) {
    std::ostringstream out;
    out << "metric,value\n";
    out << "replicates," << format_int(std::int64_t(report.replicates)) << '\n';
    out << "areas," << format_int(std::int64_t(report.areas)) << '\n';
    out << "coverage," << format_double(report.coverage) << '\n';
    out << "mean_bias," << format_double(report.mean_bias) << '\n';
    out << "mean_abs_bias," << format_double(report.mean_abs_bias) << '\n';
    out << "small_area_cutoff," << format_int(std::int64_t(report.small_area_cutoff)) << '\n';
    out << "se_ratio_median_small," << fmt(report.se_ratio_median_small) << '\n';
    out << "se_ratio_median_large," << fmt(report.se_ratio_median_large) << '\n';
    return out.str();
}

std::string render_recovery_summary_csv(const RecoveryReport& report) {
    std::ostringstream out;
    out << "quantity,min,q1,median,mean,q3,max\n";
    summary_row(out, "direct_estimate", report.direct_estimates);
    summary_row(out, "hb_estimate", report.hb_estimates);
    summary_row(out, "direct_se", report.direct_se);
    summary_row(out, "hb_se", report.hb_se);
    summary_row(out, "residual_share", report.residual_share);
    return out.str();
}

std::string render_recovery_areas_csv(const std::vector<ReplicateResult>& replicates) {
    std::ostringstream out;
    out << "replicate,area_id,n,truth,hb_mean,hb_sd,ci_lower,ci_upper,covered,direct,direct_se\n";
    for (const auto& rep : replicates)
        for (const auto& area : rep.areas) {
            const bool covered = area.truth >= area.ci_lower && area.truth <= area.ci_upper;
            out << format_int(std::int64_t(rep.replicate)) << ',' << format_int(area.area_id)
                << ',' << format_int(std::int64_t(area.n_i)) << ',' << format_double(area.truth)
                << ',' << fmt(area.hb_mean) << ',' << fmt(area.hb_sd) << ','
                << fmt(area.ci_lower) << ',' << fmt(area.ci_upper) << ',' << (covered ? 1 : 0)
                << ',';
            if (area.direct_available)
                out << format_double(area.direct) << ',' << format_double(area.direct_se) << '\n';
            else
                out << "NA,NA\n";
        }
    return out.str();
}

}  // namespace sae
