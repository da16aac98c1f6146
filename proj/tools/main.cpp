// Command-line front end: validate | direct | fit | estimate | compare | simulate.
// Exit codes: 0 success, 2 config, 3 data, 4 convergence, 5 internal.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sae/artifact.hpp"

namespace {

using namespace sae;

struct CommonFlags {
    std::string config_path;
    std::string survey, census, covariates;
    std::string output;
    std::string model;
    std::string weight_transform;
    unsigned chains = 0;
    unsigned iters = 0;
    long warmup = -1;
    long long seed = -1;
    double target_accept = 0.0;
    bool allow_nonconverged = false;
};

void add_dataset_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run config");
    cmd->add_option("--survey", flags.survey, "survey CSV path");
    cmd->add_option("--census", flags.census, "census CSV path");
    cmd->add_option("--covariates", flags.covariates, "area covariate CSV path");
    cmd->add_option("--output", flags.output, "output directory");
}

void add_fit_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--model", flags.model, "model preset M1..M4");
    cmd->add_option("--weight-transform", flags.weight_transform,
                    "survey weight transform: id|log|inv|none");
    cmd->add_option("--chains", flags.chains, "number of chains");
    cmd->add_option("--iters", flags.iters, "iterations per chain (warmup included)");
    cmd->add_option("--warmup", flags.warmup, "warmup iterations per chain");
    cmd->add_option("--seed", flags.seed, "RNG seed");
    cmd->add_option("--target-accept", flags.target_accept, "step size adaptation target");
    cmd->add_flag("--allow-nonconverged", flags.allow_nonconverged,
                  "keep artifacts even when Rhat >= 1.05");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) config = load_run_config(flags.config_path);
    if (!flags.survey.empty()) config.survey_path = flags.survey;
    if (!flags.census.empty()) config.census_path = flags.census;
    if (!flags.covariates.empty()) config.covariates_path = flags.covariates;
    if (!flags.output.empty()) config.output_dir = flags.output;
    if (!flags.model.empty()) config.model = ModelConfig::preset(flags.model);
    if (!flags.weight_transform.empty())
        config.model.weight_transform = parse_weight_transform(flags.weight_transform);
    if (flags.chains > 0) config.sampler.chains = flags.chains;
    if (flags.iters > 0) config.sampler.iterations = flags.iters;
    if (flags.warmup >= 0) config.sampler.warmup = static_cast<unsigned>(flags.warmup);
    if (flags.seed >= 0) config.sampler.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.target_accept > 0.0) config.sampler.target_accept = flags.target_accept;
    if (flags.allow_nonconverged) config.allow_nonconverged = true;
    return config;
}

int run_validate(const CommonFlags& flags) {
    const RunConfig config = resolve_config(flags);
    const LoadedDataset loaded = load_dataset(config);
    const LinkedDataset& ds = loaded.dataset;

    // The linker enforces the referential invariants; re-check the count
    // identities here so `validate` fails loudly if they ever drift.
    std::size_t total = 0;
    for (std::size_t i = 0; i < ds.m; ++i) {
        std::size_t area_total = 0;
        for (std::size_t g = 0; g < ds.schema.cell_count(); ++g) area_total += ds.n_ig[i][g];
        if (area_total != ds.n_i[i]) throw Error(errc::internal_error, "n_ig totals disagree");
        total += area_total;
    }
    if (total != ds.n) throw Error(errc::internal_error, "n_i totals disagree");

    std::cout << "dataset ok: m=" << ds.m << " areas, n=" << ds.n << " records, "
              << ds.schema.cell_count() << " cells/area\n";
    if (loaded.census_missing_cells > 0)
        std::cout << "warning: " << loaded.census_missing_cells
                  << " census cells absent, defaulted to zero\n";
    std::cout << "checksum: " << dataset_checksum(ds) << "\n";
    return 0;
}

int run_direct(const CommonFlags& flags) {
    const RunConfig config = resolve_config(flags);
    const LoadedDataset loaded = load_dataset(config);
    const auto table = direct_table(loaded.dataset);
    atomic_write(config.output_dir + "/direct.csv", render_direct_csv(table));
    atomic_write(config.output_dir + "/config.json",
                 run_config_json(config, dataset_checksum(loaded.dataset)));
    std::cout << "wrote " << config.output_dir << "/direct.csv (" << table.size() << " areas)\n";
    return 0;
}

int run_fit(const CommonFlags& flags) {
    const RunConfig config = resolve_config(flags);
    const LoadedDataset loaded = load_dataset(config);

    DesignMatrix design = build_design(loaded.dataset, config.model);
    HierarchicalLogit model(std::move(design), config.prior);
    const DrawsMatrix draws = sample_posterior(model, config.sampler);
    const DiagnosticsTable diagnostics = summarize(draws);
    const LogLikMatrix loglik = pointwise_loglik(draws, model);

    write_fit_artifact(config.output_dir, config, loaded.dataset, draws, diagnostics, loglik);
    std::cout << "wrote fit artifact to " << config.output_dir << " (" << draws.total_draws()
              << " draws, " << draws.dim() << " parameters)\n";

    if (!diagnostics.converged()) {
        std::cerr << "non-converged: some Rhat >= 1.05 (see diagnostics.csv)\n";
        if (!config.allow_nonconverged)
            throw Error(errc::non_converged, "fit did not converge");
    }
    return 0;
}

int run_estimate(const CommonFlags& flags, const std::string& fit_dir) {
    const RunConfig config = resolve_config(flags);
    const LoadedDataset loaded = load_dataset(config);
    const LinkedDataset& ds = loaded.dataset;
    if (ds.n == 0)
        throw Error(errc::empty_sample, "cannot aggregate with an empty survey sample");

    const FitArtifact artifact = read_fit_artifact(fit_dir);
    if (artifact.dataset_checksum != dataset_checksum(ds))
        throw Error(errc::mismatched_observations,
                    "fit artifact was produced from a different dataset");

    DesignMatrix design = build_design(ds, artifact.model);
    HierarchicalLogit model(std::move(design), config.prior);

    const CellPartition partition = partition_cells(ds);
    const CoverageShares shares = coverage_shares(ds.cells, partition);
    for (std::size_t i = 0; i < ds.m; ++i)
        if (shares.residual[i] > kResidualShareWarning)
            std::cerr << "warning: area " << ds.area_id_at(i) << " residual share "
                      << shares.residual[i] << " exceeds " << kResidualShareWarning
                      << "; two-set approximation questionable\n";

    const auto area_draws = area_draws_from_fit(ds, partition, shares, model, artifact.draws);
    const auto posterior = posterior_area_summary(ds, area_draws);
    const auto direct = direct_table(ds);

    const std::string& dir = config.output_dir;
    atomic_write(dir + "/area_estimates.csv", render_area_estimates_csv(posterior, direct));
    atomic_write(dir + "/coverage_shares.csv", render_coverage_summary_csv(shares));
    atomic_write(dir + "/area_shares.csv", render_area_shares_csv(ds, shares));
    atomic_write(dir + "/se_ratios.csv", render_se_ratios_csv(ds, posterior, direct));
    atomic_write(dir + "/config.json", run_config_json(config, dataset_checksum(ds)));
    std::cout << "wrote area estimates for " << ds.m << " areas to " << dir << "\n";
    return 0;
}

int run_compare(const CommonFlags& flags, const std::vector<std::string>& fit_dirs) {
    if (fit_dirs.size() < 2)
        throw Error(errc::config_error, "compare needs at least two fit directories");
    std::vector<std::string> names;
    std::vector<ElpdReport> reports;
    std::string checksum;
    for (const auto& dir : fit_dirs) {
        const FitArtifact artifact = read_fit_artifact(dir);
        if (checksum.empty())
            checksum = artifact.dataset_checksum;
        else if (checksum != artifact.dataset_checksum)
            throw Error(errc::mismatched_observations,
                        "fit artifacts come from different datasets");
        names.push_back(artifact.model_name);
        reports.push_back(elpd_loo(read_loglik(dir)));
    }
    const auto table = compare_table(names, reports);

    const std::string dir = flags.output.empty() ? std::string("compare_out") : flags.output;
    atomic_write(dir + "/comparison.csv", render_comparison_csv(table));
    atomic_write(dir + "/pareto_k.csv", render_pareto_k_csv(names, reports));
    {
        std::ostringstream manifest;
        manifest << "{\n  \"fits\": [";
        for (std::size_t i = 0; i < fit_dirs.size(); ++i)
            manifest << (i ? ", " : "") << '"' << fit_dirs[i] << '"';
        manifest << "],\n  \"dataset_checksum\": \"" << checksum << "\"\n}\n";
        atomic_write(dir + "/config.json", manifest.str());
    }
    for (const auto& row : table)
        std::cout << row.model << " elpd_diff=" << row.elpd_diff << " se_diff=" << row.se_diff
                  << "\n";
    std::size_t flagged = 0;
    for (const auto& r : reports) flagged += r.flagged();
    if (flagged > 0)
        std::cerr << "warning: " << flagged << " observation(s) with Pareto k > " << kParetoKWarn
                  << "\n";
    return 0;
}

int run_simulate(const std::string& sim_config_path, unsigned reps_override,
                 long long seed_override, const std::string& output) {
    SimConfig config =
        sim_config_path.empty() ? SimConfig::defaults() : load_sim_config(sim_config_path);
    if (reps_override > 0) config.replicates = reps_override;
    if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
    config.validate();

    const std::string dir = output.empty() ? std::string("sim_out") : output;
    atomic_write(dir + "/config.json", sim_config_json(config));
    std::vector<ReplicateResult> results;
    results.reserve(config.replicates);
    for (unsigned rep = 0; rep < config.replicates; ++rep) {
        // Persist each replicate's dataset so a run is fully reproducible
        // from its artifacts alone.
        const Population population = gen_population(config, rep);
        const auto records = draw_sample(population, config, rep);
        char name[32];
        std::snprintf(name, sizeof(name), "rep_%04u", rep);
        const std::string rep_dir = dir + "/" + name;
        {
            std::ostringstream survey, census, covariates, truth;
            write_survey_csv(survey, config.schema, records);
            write_census_csv(census, population.cells);
            write_covariates_csv(covariates, population.covariates);
            truth << "area_id,truth\n";
            for (std::size_t i = 0; i < population.cells.area_count(); ++i)
                truth << population.cells.area_ids[i] << ','
                      << format_double(population.area_mean[i]) << '\n';
            atomic_write(rep_dir + "/survey.csv", survey.str());
            atomic_write(rep_dir + "/census.csv", census.str());
            atomic_write(rep_dir + "/covariates.csv", covariates.str());
            atomic_write(rep_dir + "/truth.csv", truth.str());
        }
        results.push_back(run_replicate(config, rep));
        if ((rep + 1) % 10 == 0)
            std::cout << "finished replicate " << (rep + 1) << "/" << config.replicates
                      << std::endl;
    }

    const RecoveryReport report = evaluate_recovery(results);
    atomic_write(dir + "/recovery_report.csv", render_recovery_report_csv(report));
    atomic_write(dir + "/recovery_summary.csv", render_recovery_summary_csv(report));
    atomic_write(dir + "/recovery_areas.csv", render_recovery_areas_csv(results));
    std::cout << "coverage=" << report.coverage
              << " se_ratio_median_small=" << report.se_ratio_median_small << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Small-area proportion estimation: hierarchical Bayes fits over survey,"
                 " census and covariate tables"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* validate_cmd = app.add_subcommand("validate", "parse and check the dataset");
    add_dataset_flags(validate_cmd, flags);

    auto* direct_cmd = app.add_subcommand("direct", "design-based direct estimates");
    add_dataset_flags(direct_cmd, flags);

    auto* fit_cmd = app.add_subcommand("fit", "sample the posterior and write a fit artifact");
    add_dataset_flags(fit_cmd, flags);
    add_fit_flags(fit_cmd, flags);

    std::string fit_dir;
    auto* estimate_cmd = app.add_subcommand("estimate", "per-area estimates from a fit");
    add_dataset_flags(estimate_cmd, flags);
    estimate_cmd->add_option("--fit", fit_dir, "fit artifact directory")->required();

    std::vector<std::string> fit_dirs;
    auto* compare_cmd = app.add_subcommand("compare", "PSIS-LOO model comparison");
    compare_cmd->add_option("fits", fit_dirs, "two or more fit artifact directories");
    compare_cmd->add_option("--output", flags.output, "output directory");

    std::string sim_config_path, sim_output;
    unsigned reps = 0;
    long long sim_seed = -1;
    auto* simulate_cmd = app.add_subcommand("simulate", "synthetic-population recovery study");
    simulate_cmd->add_option("--sim-config", sim_config_path, "JSON simulation config");
    simulate_cmd->add_option("--reps", reps, "replicate count override");
    simulate_cmd->add_option("--seed", sim_seed, "seed override");
    simulate_cmd->add_option("--output", sim_output, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) return run_validate(flags);
        if (direct_cmd->parsed()) return run_direct(flags);
        if (fit_cmd->parsed()) return run_fit(flags);
        if (estimate_cmd->parsed()) return run_estimate(flags, fit_dir);
        if (compare_cmd->parsed()) return run_compare(flags, fit_dirs);
        if (simulate_cmd->parsed()) return run_simulate(sim_config_path, reps, sim_seed, sim_output);
    } catch (const sae::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
