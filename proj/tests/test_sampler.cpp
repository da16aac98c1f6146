#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sae/diagnostics.hpp"
#include "sae/util.hpp"
#include "sae/sampler.hpp"

using namespace sae;

namespace {

// Standard normal in `d` dimensions.
class GaussianTarget final : public LogDensityModel {
  public:
    explicit GaussianTarget(std::size_t d) : d_(d) {}
    std::size_t dim() const override { return d_; }
    std::vector<std::string> param_names() const override {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < d_; ++i) names.push_back("q" + std::to_string(i));
        return names;
    }
    double value_and_grad(std::span<const double> q, std::span<double> grad) const override {
        double v = 0.0;
        for (std::size_t i = 0; i < d_; ++i) {
            v -= 0.5 * q[i] * q[i];
            grad[i] = -q[i];
        }
        return v;
    }

  private:
    std::size_t d_;
};

// Correlated 2-D Gaussian with precision solved from a fixed covariance.
class Gaussian2D final : public LogDensityModel {
  public:
    Gaussian2D(double var_x, double var_y, double cov) {
        const double det = var_x * var_y - cov * cov;
        p00_ = var_y / det;
        p11_ = var_x / det;
        p01_ = -cov / det;
    }
    std::size_t dim() const override { return 2; }
    std::vector<std::string> param_names() const override { return {"x", "y"}; }
    double value_and_grad(std::span<const double> q, std::span<double> grad) const override {
        grad[0] = -(p00_ * q[0] + p01_ * q[1]);
        grad[1] = -(p01_ * q[0] + p11_ * q[1]);
        return 0.5 * (grad[0] * q[0] + grad[1] * q[1]);
    }

  private:
    double p00_, p11_, p01_;
};

// 1-parameter Bernoulli-logit posterior with a flat-ish Normal(0, 5^2) prior:
// 50 fixed observations, `ones` successes.
class BernoulliLogit final : public LogDensityModel {
  public:
    BernoulliLogit(int n, int ones) : n_(n), ones_(ones) {}
    std::size_t dim() const override { return 1; }
    std::vector<std::string> param_names() const override { return {"eta"}; }
    double value_and_grad(std::span<const double> q, std::span<double> grad) const override {
        const double eta = q[0];
        const double theta = 1.0 / (1.0 + std::exp(-eta));
        const double log_sig = eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
        const double log_sig_neg = -eta >= 0 ? -std::log1p(std::exp(eta)) : -eta - std::log1p(std::exp(-eta));
        const double value = ones_ * log_sig + (n_ - ones_) * log_sig_neg - 0.5 * eta * eta / 25.0;
        grad[0] = ones_ - n_ * theta - eta / 25.0;
        return value;
    }
    double log_density(double eta) const {
        double g;
        std::span<double> grad(&g, 1);
        std::span<const double> q(&eta, 1);
        return value_and_grad(q, grad);
    }

  private:
    int n_;
    int ones_;
};

}  // namespace

TEST_CASE("fixed seed reproduces the draws matrix bit for bit") {
    GaussianTarget target(3);
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 400;
    config.warmup = 200;
    config.seed = 77;
    const auto a = run_chains(target, config);
    const auto b = run_chains(target, config);
    CHECK(a.values == b.values);
    const auto c = run_chains_rw(target, config);
    const auto d = run_chains_rw(target, config);
    CHECK(c.values == d.values);
}

TEST_CASE("warmup draws never appear in the retained matrix") {
    GaussianTarget target(1);
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 300;
    config.warmup = 250;
    config.seed = 5;
    const auto draws = run_chains(target, config);
    CHECK(draws.per_chain == 50);
    CHECK(draws.total_draws() == 100);
    for (double v : draws.values) CHECK(std::isfinite(v));
}

TEST_CASE("standard normal target recovers mean within 3 MCSE") {
    GaussianTarget target(1);
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 4000;
    config.warmup = 2000;
    config.seed = 11;
    const auto draws = run_chains(target, config);
    const auto table = summarize(draws);
    const auto& row = table.rows[0];
    CHECK(std::abs(row.mean) < 3.0 * row.se_mean);
    CHECK(row.sd == doctest::Approx(1.0).epsilon(0.1));
    CHECK(row.rhat < 1.05);
}

TEST_CASE("bernoulli-logit posterior matches the quadrature oracle within 3 MCSE") {
    BernoulliLogit target(50, 31);
    const auto oracle = test::quadrature_moments(
        [&](double eta) { return target.log_density(eta); }, -4.0, 4.0, 20000);

    SamplerConfig config;
    config.chains = 2;
    config.iterations = 4000;
    config.warmup = 2000;
    config.seed = 19;
    const auto draws = run_chains(target, config);
    const auto table = summarize(draws);
    const auto& row = table.rows[0];
    CHECK(std::abs(row.mean - oracle.mean) < 3.0 * row.se_mean);
    CHECK(std::abs(row.sd - oracle.sd) < 3.0 * row.se_mean);
    CHECK(row.rhat < 1.02);
}

TEST_CASE("2-D correlated gaussian: sample covariance converges") {
    const double var_x = 1.0, var_y = 2.0, cov = 0.8;
    Gaussian2D target(var_x, var_y, cov);
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 6000;
    config.warmup = 2000;
    config.seed = 23;
    const auto draws = run_chains(target, config);

    const std::size_t total = draws.total_draws();
    std::vector<double> xs(total), ys(total), products(total);
    for (std::size_t c = 0; c < draws.chain_count(); ++c)
        for (std::size_t d = 0; d < draws.per_chain; ++d) {
            xs[c * draws.per_chain + d] = draws.at(c, d, 0);
            ys[c * draws.per_chain + d] = draws.at(c, d, 1);
        }
    const double mx = mean_of(xs), my = mean_of(ys);
    for (std::size_t i = 0; i < total; ++i) products[i] = (xs[i] - mx) * (ys[i] - my);

    // MCSE of each moment via the ESS of its draw sequence.
    const auto mcse = [&](const std::vector<double>& seq) {
        std::vector<std::vector<double>> chains;
        for (std::size_t c = 0; c < draws.chain_count(); ++c)
            chains.emplace_back(seq.begin() + c * draws.per_chain,
                                seq.begin() + (c + 1) * draws.per_chain);
        return sd_of(seq) / std::sqrt(ess(chains));
    };
    CHECK(std::abs(mean_of(products) - cov) < 3.0 * mcse(products));

    std::vector<double> sq_x(total), sq_y(total);
    for (std::size_t i = 0; i < total; ++i) {
        sq_x[i] = (xs[i] - mx) * (xs[i] - mx);
        sq_y[i] = (ys[i] - my) * (ys[i] - my);
    }
    CHECK(std::abs(mean_of(sq_x) - var_x) < 3.0 * mcse(sq_x));
    CHECK(std::abs(mean_of(sq_y) - var_y) < 3.0 * mcse(sq_y));
}

TEST_CASE("config validation rejects nonsense") {
    GaussianTarget target(1);
    SamplerConfig config;
    config.warmup = 100;
    config.iterations = 100;
    CHECK_THROWS_AS(run_chains(target, config), Error);
    config.iterations = 200;
    config.target_accept = 1.5;
    CHECK_THROWS_AS(run_chains(target, config), Error);
}

TEST_CASE("fallback random-walk sampler also hits the gaussian target") {
    GaussianTarget target(1);
    SamplerConfig config;
    config.chains = 2;
    config.iterations = 6000;
    config.warmup = 2000;
    config.seed = 31;
    const auto draws = run_chains_rw(target, config);
    const auto table = summarize(draws);
    CHECK(std::abs(table.rows[0].mean) < 3.0 * table.rows[0].se_mean);
    CHECK(table.rows[0].sd == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("non-centered posterior sampling agrees with the centered chain") {
    auto ds = test::tiny_dataset(3, 30, 77);
    auto config = ModelConfig::preset("M3");
    const auto design = build_design(ds, config);
    HierarchicalLogit model(design, PriorConfig{});

    SamplerConfig sampler;
    sampler.chains = 2;
    sampler.iterations = 3000;
    sampler.warmup = 1500;
    sampler.seed = 99;
    sampler.target_accept = 0.9;
    const auto centered = run_chains(model, sampler);
    const auto noncentered = sample_posterior(model, sampler);
    REQUIRE(centered.names == noncentered.names);

    const auto tc = summarize(centered);
    const auto tn = summarize(noncentered);
    // Same posterior: compare a fixed coefficient and sigma_v.
    for (std::size_t p : {std::size_t{0}, model.dim() - 1}) {
        const double tol =
            3.0 * (tc.rows[p].se_mean + tn.rows[p].se_mean) + 1e-6;
        CHECK(std::abs(tc.rows[p].mean - tn.rows[p].mean) < tol);
    }
    // Determinism holds through the transform.
    const auto again = sample_posterior(model, sampler);
    CHECK(again.values == noncentered.values);
}
