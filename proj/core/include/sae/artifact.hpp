#pragma once

#include <map>
#include <string>
#include <vector>

#include "sae/aggregate.hpp"
#include "sae/data.hpp"
#include "sae/diagnostics.hpp"
#include "sae/direct.hpp"
#include "sae/loo.hpp"
#include "sae/model.hpp"
#include "sae/sampler.hpp"
#include "sae/simulate.hpp"

namespace sae {

// Everything a run needs, loadable from a JSON config file; command-line
// flags override individual fields. The full resolved config is written next
// to every artifact.
struct RunConfig {
    std::string survey_path;
    std::string census_path;
    std::string covariates_path;
    std::map<std::string, CovariateTransform> transforms;
    CellSchema schema;
    ModelConfig model = ModelConfig::preset("M3");
    SamplerConfig sampler;
    PriorConfig prior;
    std::string output_dir = "out";
    bool allow_nonconverged = false;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& config, const std::string& dataset_checksum);

SimConfig load_sim_config(const std::string& path);
std::string sim_config_json(const SimConfig& config);

struct LoadedDataset {
    LinkedDataset dataset;
    std::size_t census_missing_cells = 0;
};
LoadedDataset load_dataset(const RunConfig& config);

// --- atomic file output -------------------------------------------------------

// Writes to <path>.tmp then renames, so partial artifacts never appear.
void atomic_write(const std::string& path, const std::string& content);

// --- fit artifacts -------------------------------------------------------------

// Layout of a fit directory:
//   config.json      resolved config + dataset checksum
//   draws.csv        chain,draw,<parameter...>
//   diagnostics.csv  parameter,mean,se_mean,sd,p10,p15,p85,p90,n_eff,rhat
//   sampler_stats.csv chain,accept_rate,divergences,step_size
//   loglik.bin       R x n float64 matrix (see README)
void write_fit_artifact(const std::string& dir, const RunConfig& config,
                        const LinkedDataset& dataset, const DrawsMatrix& draws,
                        const DiagnosticsTable& diagnostics, const LogLikMatrix& loglik);

struct FitArtifact {
    std::string dir;
    std::string model_name;
    std::string dataset_checksum;
    ModelConfig model;
    DrawsMatrix draws;
};

FitArtifact read_fit_artifact(const std::string& dir);
LogLikMatrix read_loglik(const std::string& dir);

std::string loglik_bytes(const LogLikMatrix& loglik);
LogLikMatrix loglik_from_bytes(const std::string& bytes);

// --- CSV renderers --------------------------------------------------------------

std::string render_direct_csv(const std::vector<DirectEstimate>& table);
std::string render_diagnostics_csv(const DiagnosticsTable& table);
std::string render_draws_csv(const DrawsMatrix& draws);
std::string render_sampler_stats_csv(const DrawsMatrix& draws);
std::string render_area_estimates_csv(const std::vector<AreaPosterior>& posterior,
                                      const std::vector<DirectEstimate>& direct);
std::string render_coverage_summary_csv(const CoverageShares& shares);
std::string render_area_shares_csv(const LinkedDataset& dataset, const CoverageShares& shares);
std::string render_se_ratios_csv(const LinkedDataset& dataset,
                                 const std::vector<AreaPosterior>& posterior,
                                 const std::vector<DirectEstimate>& direct);
std::string render_comparison_csv(const std::vector<ComparisonRow>& rows);
std::string render_pareto_k_csv(const std::vector<std::string>& names,
                                const std::vector<ElpdReport>& reports);
std::string render_recovery_report_csv(const RecoveryReport& report);
std::string render_recovery_summary_csv(const RecoveryReport& report);
std::string render_recovery_areas_csv(const std::vector<ReplicateResult>& replicates);

}  // namespace sae
