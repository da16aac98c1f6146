#include "sae/model.hpp"

#include <cmath>
#include <numbers>

#include "sae/util.hpp"

namespace sae {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// log density of Normal(0, sd^2) at x.
inline double normal_logpdf0(double x, double sd) {
    const double z = x / sd;
    return -0.5 * (kLogTwoPi + z * z) - std::log(sd);
}

// log(sigmoid(eta)), stable for large |eta|.
inline double log_sigmoid(double eta) {
    if (eta >= 0.0) return -std::log1p(std::exp(-eta));
    return eta - std::log1p(std::exp(eta));
}

}  // namespace

const char* weight_transform_name(WeightTransform t) {
    switch (t) {
        case WeightTransform::identity: return "identity";
        case WeightTransform::log: return "log";
        case WeightTransform::inverse: return "inverse";
        case WeightTransform::none: return "none";
    }
    return "?";
}

WeightTransform parse_weight_transform(std::string_view text) {
    const std::string t = to_lower(trim(text));
    if (t == "identity" || t == "id" || t == "w") return WeightTransform::identity;
    if (t == "log" || t == "ln") return WeightTransform::log;
    if (t == "inverse" || t == "inv") return WeightTransform::inverse;
    if (t == "none") return WeightTransform::none;
    throw Error(errc::config_error, "unknown weight transform '" + std::string(text) + "'");
}

double weight_transform_value(double w, WeightTransform t) {
    if (!(w > 0.0) || !std::isfinite(w))
        throw Error(errc::nonpositive_weight, "weight " + format_double(w));
    switch (t) {
        case WeightTransform::identity: return w;
        case WeightTransform::log: return std::log(w);
        case WeightTransform::inverse: return 1.0 / w;
        case WeightTransform::none:
            throw Error(errc::internal_error, "no weight term in this model");
    }
    return 0.0;
}

ModelConfig ModelConfig::preset(std::string_view name) {
    ModelConfig config;
    config.name = std::string(name);
    const std::string key = to_lower(trim(name));
    if (key == "m1") {
        config.area_covariates = {"comorbidity", "flu_shot", "test_rate", "positivity_rate",
                                  "percent_republican"};
        config.weight_transform = WeightTransform::identity;
    } else if (key == "m2") {
        config.area_covariates = {"comorbidity", "test_rate", "percent_republican"};
        config.weight_transform = WeightTransform::identity;
    } else if (key == "m3") {
        config.area_covariates = {"comorbidity", "percent_republican"};
        config.weight_transform = WeightTransform::identity;
    } else if (key == "m4") {
        config.area_covariates = {"comorbidity", "percent_republican"};
        config.weight_transform = WeightTransform::none;
    } else {
        throw Error(errc::config_error, "unknown model preset '" + std::string(name) + "'");
    }
    return config;
}

namespace {

struct Standardizer {
    double mean = 0.0;
    double sd = 1.0;
};

// Mean/sd over the records; throws DegenerateCovariate when sd == 0.
Standardizer fit_standardizer(std::span<const double> values, const std::string& name) {
    Standardizer s;
    s.mean = mean_of(values);
    s.sd = values.size() > 1 ? sd_of(values) : 0.0;
    if (!(s.sd > 0.0))
        throw Error(errc::degenerate_covariate,
                    "covariate '" + name + "' has zero variance under standardization");
    return s;
}

}  // namespace

DesignMatrix build_design(const LinkedDataset& dataset, const ModelConfig& config) {
    DesignMatrix design;
    design.layout.n_intercept = dataset.schema.intercept_count();
    design.layout.n_beta = config.area_covariates.size();
    design.layout.n_gender = dataset.schema.gender.size();
    design.layout.has_lambda = config.has_weight_term();
    design.layout.m = dataset.m;

    // Resolve covariate columns up front.
    std::vector<std::size_t> columns;
    for (const auto& name : config.area_covariates) {
        const auto col = dataset.covariates.column(name);
        if (col < 0)
            throw Error(errc::missing_column,
                        "model covariate '" + name + "' not in covariate table");
        columns.push_back(static_cast<std::size_t>(col));
    }

    const std::size_t n = dataset.n;
    design.intercept_idx.resize(n);
    design.area_idx = dataset.record_area;
    design.gender_idx.resize(n);
    design.age.resize(n);
    design.y.resize(n);
    design.weight.resize(n);
    if (config.has_weight_term()) design.hw.resize(n);

    for (std::size_t k = 0; k < n; ++k) {
        const auto& rec = dataset.records[k];
        design.intercept_idx[k] =
            static_cast<std::uint32_t>(intercept_index(dataset.schema, rec.cell));
        design.gender_idx[k] = rec.cell.gender;
        design.age[k] = static_cast<double>(rec.cell.age_band);
        design.y[k] = rec.y;
        design.weight[k] = rec.weight;
        if (config.has_weight_term())
            design.hw[k] = weight_transform_value(rec.weight, config.weight_transform);
    }

    // Area covariate values, transformed; populated for areas with records
    // and zero elsewhere (unsampled areas contribute no likelihood terms).
    design.area_values.assign(dataset.m, std::vector<double>(columns.size(), 0.0));
    std::vector<bool> area_sampled(dataset.m, false);
    for (std::size_t k = 0; k < n; ++k) area_sampled[dataset.record_area[k]] = true;
    for (std::size_t i = 0; i < dataset.m; ++i) {
        if (!area_sampled[i]) continue;
        const auto it = dataset.covariates.rows.find(dataset.area_id_at(i));
        if (it == dataset.covariates.rows.end())
            throw Error(errc::missing_covariate_row,
                        "area " + format_int(dataset.area_id_at(i)));
        for (std::size_t j = 0; j < columns.size(); ++j) {
            double value = it->second[columns[j]];
            if (dataset.covariates.transforms[columns[j]] == CovariateTransform::logit) {
                if (!(value > 0.0 && value < 1.0))
                    throw Error(errc::logit_domain, "covariate '" + config.area_covariates[j] +
                                                        "' outside (0,1) for logit transform");
                value = std::log(value / (1.0 - value));
            }
            design.area_values[i][j] = value;
        }
    }

    if (config.standardize && n > 0) {
        std::vector<double> buffer(n);
        for (std::size_t j = 0; j < columns.size(); ++j) {
            for (std::size_t k = 0; k < n; ++k)
                buffer[k] = design.area_values[dataset.record_area[k]][j];
            const auto s = fit_standardizer(buffer, config.area_covariates[j]);
            design.standardization.push_back({config.area_covariates[j], s.mean, s.sd});
            for (std::size_t i = 0; i < dataset.m; ++i)
                design.area_values[i][j] = (design.area_values[i][j] - s.mean) / s.sd;
        }
        const auto age_s = fit_standardizer(design.age, "age");
        design.standardization.push_back({"age", age_s.mean, age_s.sd});
        for (double& a : design.age) a = (a - age_s.mean) / age_s.sd;
        if (config.has_weight_term()) {
            const auto hw_s = fit_standardizer(design.hw, "hw");
            design.standardization.push_back({"hw", hw_s.mean, hw_s.sd});
            for (double& h : design.hw) h = (h - hw_s.mean) / hw_s.sd;
        }
    }

    // Parameter names in layout order.
    const auto& schema = dataset.schema;
    for (const auto& race : schema.race)
        for (const auto& eth : schema.ethnicity)
            design.param_names.push_back("alpha[" + race + ":" + eth + "]");
    for (const auto& name : config.area_covariates)
        design.param_names.push_back("beta[" + name + "]");
    for (const auto& gender : schema.gender) design.param_names.push_back("xi[" + gender + "]");
    if (config.has_weight_term()) design.param_names.push_back("lambda");
    for (std::size_t i = 0; i < dataset.m; ++i)
        design.param_names.push_back("v[" + format_int(dataset.area_id_at(i)) + "]");
    design.param_names.push_back("log_sigma_v");
    return design;
}

double linear_predictor(const DesignMatrix& design, std::span<const double> params,
                        std::size_t row) {
    if (params.size() != design.dim())
        throw Error(errc::dimension_mismatch,
                    "expected " + format_int(std::int64_t(design.dim())) + " parameters, got " +
                        format_int(std::int64_t(params.size())));
    const auto& layout = design.layout;
    const std::size_t area = design.area_idx[row];
    double eta = params[layout.alpha(design.intercept_idx[row])];
    const auto& xi_area = design.area_values[area];
    for (std::size_t j = 0; j < layout.n_beta; ++j) eta += params[layout.beta(j)] * xi_area[j];
    eta += params[layout.xi(design.gender_idx[row])] * design.age[row];
    eta += params[layout.v(area)];
    if (layout.has_lambda) eta += params[layout.lambda()] * design.hw[row];
    return eta;
}

double inv_link(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double log_prior(std::span<const double> params, const ParamLayout& layout,
                 const PriorConfig& prior) {
    double lp = 0.0;
    for (std::size_t i = 0; i < layout.n_intercept; ++i)
        lp += normal_logpdf0(params[layout.alpha(i)], prior.coef_sd);
    for (std::size_t j = 0; j < layout.n_beta; ++j)
        lp += normal_logpdf0(params[layout.beta(j)], prior.coef_sd);
    for (std::size_t g = 0; g < layout.n_gender; ++g)
        lp += normal_logpdf0(params[layout.xi(g)], prior.coef_sd);
    if (layout.has_lambda) lp += normal_logpdf0(params[layout.lambda()], prior.coef_sd);

    const double log_sigma = params[layout.log_sigma_v()];
    const double sigma = std::exp(log_sigma);
    for (std::size_t a = 0; a < layout.m; ++a) lp += normal_logpdf0(params[layout.v(a)], sigma);

    // HalfNormal(0, scale) on sigma_v plus the log|Jacobian| of exp.
    const double z = sigma / prior.sigma_v_scale;
    lp += std::log(2.0) - 0.5 * kLogTwoPi - std::log(prior.sigma_v_scale) - 0.5 * z * z;
    lp += log_sigma;
    return lp;
}

double log_likelihood(std::span<const double> params, const DesignMatrix& design) {
    double ll = 0.0;
    for (std::size_t k = 0; k < design.n(); ++k) {
        const double eta = linear_predictor(design, params, k);
        ll += design.y[k] ? log_sigmoid(eta) : log_sigmoid(-eta);
    }
    return ll;
}

void pointwise_log_likelihood(std::span<const double> params, const DesignMatrix& design,
                              std::span<double> out) {
    if (out.size() != design.n())
        throw Error(errc::dimension_mismatch, "pointwise output length");
    for (std::size_t k = 0; k < design.n(); ++k) {
        const double eta = linear_predictor(design, params, k);
        out[k] = design.y[k] ? log_sigmoid(eta) : log_sigmoid(-eta);
    }
}

void record_thetas(std::span<const double> params, const DesignMatrix& design,
                   std::span<double> out) {
    if (out.size() != design.n())
        throw Error(errc::dimension_mismatch, "theta output length");
    for (std::size_t k = 0; k < design.n(); ++k)
        out[k] = inv_link(linear_predictor(design, params, k));
}

double log_posterior_grad(std::span<const double> params, const DesignMatrix& design,
                          const PriorConfig& prior, std::span<double> grad) {
    const auto& layout = design.layout;
    if (params.size() != layout.dim() || grad.size() != layout.dim())
        throw Error(errc::dimension_mismatch,
                    "expected " + format_int(std::int64_t(layout.dim())) + " parameters");
    std::fill(grad.begin(), grad.end(), 0.0);

    // Likelihood: d/d eta = y - theta, pushed through each active term.
    double value = 0.0;
    for (std::size_t k = 0; k < design.n(); ++k) {
        const std::size_t area = design.area_idx[k];
        double eta = params[layout.alpha(design.intercept_idx[k])];
        const auto& xi_area = design.area_values[area];
        for (std::size_t j = 0; j < layout.n_beta; ++j) eta += params[layout.beta(j)] * xi_area[j];
        eta += params[layout.xi(design.gender_idx[k])] * design.age[k];
        eta += params[layout.v(area)];
        if (layout.has_lambda) eta += params[layout.lambda()] * design.hw[k];

        value += design.y[k] ? log_sigmoid(eta) : log_sigmoid(-eta);
        const double g = static_cast<double>(design.y[k]) - inv_link(eta);
        grad[layout.alpha(design.intercept_idx[k])] += g;
        for (std::size_t j = 0; j < layout.n_beta; ++j) grad[layout.beta(j)] += g * xi_area[j];
        grad[layout.xi(design.gender_idx[k])] += g * design.age[k];
        grad[layout.v(area)] += g;
        if (layout.has_lambda) grad[layout.lambda()] += g * design.hw[k];
    }

    // Priors.
    const double inv_coef_var = 1.0 / (prior.coef_sd * prior.coef_sd);
    for (std::size_t i = 0; i < layout.n_intercept; ++i)
        grad[layout.alpha(i)] -= params[layout.alpha(i)] * inv_coef_var;
    for (std::size_t j = 0; j < layout.n_beta; ++j)
        grad[layout.beta(j)] -= params[layout.beta(j)] * inv_coef_var;
    for (std::size_t g = 0; g < layout.n_gender; ++g)
        grad[layout.xi(g)] -= params[layout.xi(g)] * inv_coef_var;
    if (layout.has_lambda) grad[layout.lambda()] -= params[layout.lambda()] * inv_coef_var;

    const double log_sigma = params[layout.log_sigma_v()];
    const double sigma = std::exp(log_sigma);
    const double inv_var = std::exp(-2.0 * log_sigma);
    double sum_v_sq = 0.0;
    for (std::size_t a = 0; a < layout.m; ++a) {
        const double v = params[layout.v(a)];
        sum_v_sq += v * v;
        grad[layout.v(a)] -= v * inv_var;
    }
    const double scale_sq = prior.sigma_v_scale * prior.sigma_v_scale;
    grad[layout.log_sigma_v()] += -static_cast<double>(layout.m) + sum_v_sq * inv_var -
                                  sigma * sigma / scale_sq + 1.0;

    value += log_prior(params, layout, prior);
    if (!std::isfinite(value))
        throw Error(errc::non_finite_value, "log posterior is not finite");
    return value;
}

}  // namespace sae
