#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sae {

// Exit-code contract used by the CLI: 0 success, 2 config, 3 data,
// 4 convergence, 5 internal.
enum class errc {
    // config / IO
    config_error,
    io_error,
    // dataset parsing and linking
    missing_column,
    bad_enum_level,
    nonpositive_weight,
    non_binary_outcome,
    negative_count,
    duplicate_cell,
    area_with_zero_population,
    unknown_area,
    missing_covariate_row,
    logit_domain,
    no_sample,
    empty_sample,
    // model evaluation
    degenerate_covariate,
    dimension_mismatch,
    non_finite_value,
    // sampler and diagnostics
    divergence_rate_exceeded,
    non_finite_start,
    zero_variance,
    non_converged,
    // aggregation
    empty_cell_set,
    empty_donor_pool,
    // loo
    too_few_tail_samples,
    mismatched_observations,
    non_finite_entry,
    // simulation
    insufficient_replicates,
    internal_error,
};

const char* errc_name(errc code);
int errc_exit_code(errc code);

class Error : public std::runtime_error {
  public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const { return code_; }
    int exit_code() const { return errc_exit_code(code_); }

  private:
    errc code_;
};

// One bad input row. Parsers collect these instead of aborting on the first
// problem, so a caller always sees the complete list.
struct RowIssue {
    errc code;
    long row;  // 1-based line number in the source file; 0 when not row-bound
    std::string message;
};

// Thrown once parsing/linking finished with a nonempty issue list.
class DatasetError : public Error {
  public:
    explicit DatasetError(std::vector<RowIssue> issues)
        : Error(issues.empty() ? errc::internal_error : issues.front().code,
                format(issues)),
          issues_(std::move(issues)) {}

    const std::vector<RowIssue>& issues() const { return issues_; }

  private:
    static std::string format(const std::vector<RowIssue>& issues);
    std::vector<RowIssue> issues_;
};

}  // namespace sae
