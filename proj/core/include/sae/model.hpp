#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sae/data.hpp"

namespace sae {

enum class WeightTransform { identity, log, inverse, none };

const char* weight_transform_name(WeightTransform t);
WeightTransform parse_weight_transform(std::string_view text);

// Throws NonpositiveWeight for w <= 0 or non-finite w.
double weight_transform_value(double w, WeightTransform t);

// Which covariate blocks a model uses. Race-ethnicity intercepts and
// gender-specific age slopes are always on; area covariates are named
// columns of the covariate table; the survey-weight term is present unless
// the transform is `none`.
struct ModelConfig {
    std::string name = "custom";
    std::vector<std::string> area_covariates;
    WeightTransform weight_transform = WeightTransform::identity;
    bool standardize = true;

    bool has_weight_term() const { return weight_transform != WeightTransform::none; }

    // Presets M1..M4 over the canonical covariate columns comorbidity,
    // flu_shot, test_rate, positivity_rate, percent_republican.
    static ModelConfig preset(std::string_view name);
};

// Unconstrained parameter layout:
//   [ alpha (intercepts) | beta (area covariates) | xi (age slope per gender)
//     | lambda (if weight term) | v (area effects) | log_sigma_v ]
struct ParamLayout {
    std::size_t n_intercept = 0;
    std::size_t n_beta = 0;
    std::size_t n_gender = 0;
    bool has_lambda = false;
    std::size_t m = 0;

    std::size_t dim() const { return n_intercept + n_beta + n_gender + (has_lambda ? 1 : 0) + m + 1; }
    std::size_t alpha(std::size_t i) const { return i; }
    std::size_t beta(std::size_t j) const { return n_intercept + j; }
    std::size_t xi(std::size_t g) const { return n_intercept + n_beta + g; }
    std::size_t lambda() const { return n_intercept + n_beta + n_gender; }
    std::size_t v(std::size_t a) const {
        return n_intercept + n_beta + n_gender + (has_lambda ? 1 : 0) + a;
    }
    std::size_t log_sigma_v() const { return dim() - 1; }
};

struct StandardizationEntry {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
};

// One respondent's covariate row. Area covariates are stored per area (they
// repeat across the area's records); the age value carries a gender selector.
struct DesignMatrix {
    ParamLayout layout;
    std::vector<std::string> param_names;

    std::vector<std::uint32_t> intercept_idx;  // per record
    std::vector<std::uint32_t> area_idx;       // per record, dense
    std::vector<std::uint32_t> gender_idx;     // per record
    std::vector<double> age;                   // per record, transformed
    std::vector<double> hw;                    // per record, empty when transform = none
    std::vector<std::uint8_t> y;               // outcomes
    std::vector<double> weight;                // raw survey weights
    std::vector<std::vector<double>> area_values;  // [area][beta column], transformed

    std::vector<StandardizationEntry> standardization;

    std::size_t n() const { return y.size(); }
    std::size_t dim() const { return layout.dim(); }
};

// Builds per-record design rows; continuous covariates (area covariates, age,
// h(w)) are centered/scaled over the records when config.standardize is set.
// Throws DegenerateCovariate when a standardized column has zero spread and
// MissingColumn when a named covariate is absent from the table.
DesignMatrix build_design(const LinkedDataset& dataset, const ModelConfig& config);

// eta = alpha[cell] + x_i'beta + age * xi[gender] + v_i + lambda * h(w).
// Throws DimensionMismatch when params.size() != design.dim().
double linear_predictor(const DesignMatrix& design, std::span<const double> params,
                        std::size_t row);

// Numerically stable logistic inverse link.
double inv_link(double eta);

// Weakly informative priors: Normal(0, coef_sd^2) on alpha/beta/xi/lambda,
// v_i ~ Normal(0, sigma_v^2), sigma_v ~ HalfNormal(0, sigma_v_scale) sampled
// on the log scale with the Jacobian term included.
struct PriorConfig {
    double coef_sd = 5.0;
    double sigma_v_scale = 1.0;
};

double log_prior(std::span<const double> params, const ParamLayout& layout,
                 const PriorConfig& prior);

double log_likelihood(std::span<const double> params, const DesignMatrix& design);

// Per-record Bernoulli log density; sums to log_likelihood.
void pointwise_log_likelihood(std::span<const double> params, const DesignMatrix& design,
                              std::span<double> out);

// theta_k = inv_link(eta_k) per record, for the aggregation step.
void record_thetas(std::span<const double> params, const DesignMatrix& design,
                   std::span<double> out);

// Log posterior value and its exact analytic gradient with respect to every
// unconstrained parameter. Throws NonFiniteValue when the value blows up.
double log_posterior_grad(std::span<const double> params, const DesignMatrix& design,
                          const PriorConfig& prior, std::span<double> grad);

// --- sampler-facing interface ------------------------------------------------

class LogDensityModel {
  public:
    virtual ~LogDensityModel() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<std::string> param_names() const = 0;
    virtual double value_and_grad(std::span<const double> position,
                                  std::span<double> grad) const = 0;
};

// The hierarchical model bound to a dataset; shareable across chains.
class HierarchicalLogit final : public LogDensityModel {
  public:
    HierarchicalLogit(DesignMatrix design, PriorConfig prior)
        : design_(std::move(design)), prior_(prior) {}

    std::size_t dim() const override { return design_.dim(); }
    std::vector<std::string> param_names() const override { return design_.param_names; }
    double value_and_grad(std::span<const double> position,
                          std::span<double> grad) const override {
        return log_posterior_grad(position, design_, prior_, grad);
    }

    const DesignMatrix& design() const { return design_; }
    const PriorConfig& prior() const { return prior_; }

  private:
    DesignMatrix design_;
    PriorConfig prior_;
};

}  // namespace sae
