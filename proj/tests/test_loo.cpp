#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "sae/diagnostics.hpp"
#include "sae/loo.hpp"
#include "sae/rng.hpp"
#include "sae/sampler.hpp"
#include "sae/util.hpp"

using namespace sae;

namespace {

// Tiny 2-parameter logistic regression used for the refit oracle: one
// intercept and one slope, Normal(0, 5^2) priors.
class TinyLogit final : public LogDensityModel {
  public:
    TinyLogit(std::vector<double> x, std::vector<int> y, std::vector<bool> keep)
        : x_(std::move(x)), y_(std::move(y)), keep_(std::move(keep)) {}

    std::size_t dim() const override { return 2; }
    std::vector<std::string> param_names() const override { return {"b0", "b1"}; }
    double value_and_grad(std::span<const double> q, std::span<double> grad) const override {
        const double b0 = q[0], b1 = q[1];
        double value = -0.5 * (b0 * b0 + b1 * b1) / 25.0;
        grad[0] = -b0 / 25.0;
        grad[1] = -b1 / 25.0;
        for (std::size_t k = 0; k < x_.size(); ++k) {
            if (!keep_[k]) continue;
            const double eta = b0 + b1 * x_[k];
            const double theta = 1.0 / (1.0 + std::exp(-eta));
            value += y_[k] ? (eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta)))
                           : (eta >= 0 ? -eta - std::log1p(std::exp(-eta))
                                       : -std::log1p(std::exp(eta)));
            const double g = y_[k] - theta;
            grad[0] += g;
            grad[1] += g * x_[k];
        }
        return value;
    }

    double loglik_at(std::size_t k, double b0, double b1) const {
        const double eta = b0 + b1 * x_[k];
        return y_[k] ? (eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta)))
                     : (eta >= 0 ? -eta - std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta)));
    }
    std::size_t n() const { return x_.size(); }

  private:
    std::vector<double> x_;
    std::vector<int> y_;
    std::vector<bool> keep_;
};

struct TinyData {
    std::vector<double> x;
    std::vector<int> y;
};

TinyData make_tiny_data(std::size_t n, std::uint64_t seed) {
    TinyData data;
    Philox rng(seed, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = rng.normal();
        const double theta = 1.0 / (1.0 + std::exp(-(0.3 + 0.9 * x)));
        data.x.push_back(x);
        data.y.push_back(rng.uniform() < theta ? 1 : 0);
    }
    return data;
}

LogLikMatrix loglik_from_fit(const TinyLogit& model, const DrawsMatrix& draws) {
    LogLikMatrix out;
    out.draws = draws.total_draws();
    out.obs = model.n();
    out.values.resize(out.draws * out.obs);
    for (std::size_t r = 0; r < out.draws; ++r) {
        const auto q = draws.draw(r);
        for (std::size_t k = 0; k < out.obs; ++k)
            out.values[r * out.obs + k] = model.loglik_at(k, q[0], q[1]);
    }
    return out;
}

SamplerConfig fast_sampler(std::uint64_t seed, unsigned iters = 3000, unsigned warmup = 1000) {
    SamplerConfig config;
    config.chains = 2;
    config.iterations = iters;
    config.warmup = warmup;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("gpd_fit recovers known tail shapes") {
    Philox rng(1234, 0);
    // Exponential(1) exceedances: shape 0.
    std::vector<double> expo(5000);
    for (double& x : expo) x = -std::log(rng.uniform());
    const auto fit0 = gpd_fit(expo);
    CHECK(fit0.k > -0.1);
    CHECK(fit0.k < 0.1);

    // GPD(k = 0.3, sigma = 1) via inverse cdf.
    std::vector<double> heavy(5000);
    for (double& x : heavy) x = (std::pow(1.0 - rng.uniform(), -0.3) - 1.0) / 0.3;
    const auto fit3 = gpd_fit(heavy);
    CHECK(fit3.k > 0.2);
    CHECK(fit3.k < 0.4);
    CHECK(fit3.sigma > 0.7);
    CHECK(fit3.sigma < 1.3);
}

TEST_CASE("gpd_fit needs at least five exceedances") {
    CHECK_THROWS_AS(gpd_fit({1.0, 2.0, 3.0}), Error);
}

TEST_CASE("psis smoothing: degenerate, equivariant and tamed tails") {
    // All ratios equal: uniform weights, tail fit not applicable.
    std::vector<double> flat(500, 1.3);
    const auto uniform = psis_smooth(flat);
    for (double lw : uniform.log_weights)
        CHECK(lw == doctest::Approx(-std::log(500.0)).epsilon(1e-12));
    CHECK(std::isinf(uniform.khat));

    // Permutation equivariance.
    Philox rng(9, 0);
    std::vector<double> ratios(400);
    for (double& r : ratios) r = rng.normal();
    const auto base = psis_smooth(ratios);
    std::vector<std::size_t> perm(ratios.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_below(i)]);
    std::vector<double> shuffled(ratios.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = ratios[perm[i]];
    const auto permuted = psis_smooth(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(permuted.log_weights[i] ==
              doctest::Approx(base.log_weights[perm[i]]).epsilon(1e-10));

    // Heavy synthetic tail: the largest smoothed weight drops below the
    // largest raw normalized weight.
    std::vector<double> heavy(1000);
    for (double& r : heavy) r = 3.0 * rng.normal();
    heavy[17] = 25.0;  // an extreme raw ratio
    const auto smoothed = psis_smooth(heavy);
    const double raw_norm = heavy[17] - logsumexp(heavy);
    CHECK(smoothed.log_weights[17] < raw_norm);

    // Weights always sum to one.
    std::vector<double> expw;
    for (double lw : smoothed.log_weights) expw.push_back(std::exp(lw));
    CHECK(std::accumulate(expw.begin(), expw.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("identical loglik across draws gives that constant pointwise elpd") {
    LogLikMatrix loglik;
    loglik.draws = 200;
    loglik.obs = 3;
    loglik.values.resize(600);
    for (std::size_t r = 0; r < 200; ++r) {
        loglik.values[r * 3 + 0] = -0.2;
        loglik.values[r * 3 + 1] = -0.9;
        loglik.values[r * 3 + 2] = -1.7;
    }
    const auto report = elpd_loo(loglik);
    CHECK(report.pointwise[0] == doctest::Approx(-0.2).epsilon(1e-10));
    CHECK(report.pointwise[1] == doctest::Approx(-0.9).epsilon(1e-10));
    CHECK(report.elpd_loo == doctest::Approx(-2.8).epsilon(1e-9));
    const double sd = sd_of(report.pointwise);
    CHECK(report.se == doctest::Approx(std::sqrt(3.0) * sd));
}

TEST_CASE("permuting observations permutes pointwise elpd, totals unchanged") {
    const auto data = make_tiny_data(40, 999);
    TinyLogit model(data.x, data.y, std::vector<bool>(40, true));
    const auto draws = run_chains(model, fast_sampler(1));
    const auto loglik = loglik_from_fit(model, draws);
    const auto report = elpd_loo(loglik);

    LogLikMatrix reversed = loglik;
    for (std::size_t r = 0; r < loglik.draws; ++r)
        for (std::size_t k = 0; k < loglik.obs; ++k)
            reversed.values[r * loglik.obs + k] = loglik.at(r, loglik.obs - 1 - k);
    const auto report2 = elpd_loo(reversed);
    CHECK(report2.elpd_loo == doctest::Approx(report.elpd_loo).epsilon(1e-10));
    CHECK(report2.se == doctest::Approx(report.se).epsilon(1e-10));
    for (std::size_t k = 0; k < loglik.obs; ++k)
        CHECK(report2.pointwise[k] ==
              doctest::Approx(report.pointwise[loglik.obs - 1 - k]).epsilon(1e-10));
}

TEST_CASE("psis-loo tracks exact refit loo on a tiny problem") {
    const std::size_t n = 30;
    const auto data = make_tiny_data(n, 314);
    TinyLogit full(data.x, data.y, std::vector<bool>(n, true));
    const auto draws = run_chains(full, fast_sampler(100, 6000, 2000));
    const auto report = elpd_loo(loglik_from_fit(full, draws));

    // Exact: refit without observation k, long chains, then
    // log mean_r p(y_k | theta_r).
    std::vector<double> exact_pointwise(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto keep = std::vector<bool>(n, true);
        keep[k] = false;
        TinyLogit holdout(data.x, data.y, keep);
        const auto refit = run_chains(holdout, fast_sampler(200 + k, 6000, 2000));
        std::vector<double> ll(refit.total_draws());
        for (std::size_t r = 0; r < refit.total_draws(); ++r) {
            const auto q = refit.draw(r);
            ll[r] = holdout.loglik_at(k, q[0], q[1]);
        }
        exact_pointwise[k] = logsumexp(ll) - std::log(static_cast<double>(ll.size()));
    }
    const double exact = std::accumulate(exact_pointwise.begin(), exact_pointwise.end(), 0.0);

    std::vector<double> diff(n);
    for (std::size_t k = 0; k < n; ++k) diff[k] = report.pointwise[k] - exact_pointwise[k];
    const double se_diff = std::sqrt(static_cast<double>(n)) * sd_of(diff);
    CHECK(std::abs(report.elpd_loo - exact) < 2.0 * std::max(se_diff, 0.05));
}

TEST_CASE("compare: identity gives (0,0) and mismatched sizes throw") {
    const auto data = make_tiny_data(25, 2024);
    TinyLogit model(data.x, data.y, std::vector<bool>(25, true));
    const auto draws = run_chains(model, fast_sampler(7));
    const auto report = elpd_loo(loglik_from_fit(model, draws));
    const auto self = compare(report, report);
    CHECK(self.elpd_diff == 0.0);
    CHECK(self.se_diff == 0.0);

    ElpdReport other = report;
    other.pointwise.pop_back();
    CHECK_THROWS_AS(compare(report, other), Error);
}

TEST_CASE("comparison table puts the best model first at zero") {
    ElpdReport a, b, c;
    a.elpd_loo = -10.0;
    a.pointwise = {-5.0, -5.0};
    b.elpd_loo = -12.0;
    b.pointwise = {-6.5, -5.5};
    c.elpd_loo = -11.0;
    c.pointwise = {-6.0, -5.0};
    const auto table = compare_table({"M1", "M2", "M3"}, {a, b, c});
    REQUIRE(table.size() == 3);
    CHECK(table[0].model == "M1");
    CHECK(table[0].elpd_diff == 0.0);
    CHECK(table[0].se_diff == 0.0);
    CHECK(table[1].model == "M3");
    CHECK(table[1].elpd_diff == doctest::Approx(-1.0));
    CHECK(table[2].model == "M2");
    CHECK(table[2].elpd_diff == doctest::Approx(-2.0));
}

TEST_CASE("adding a pure-noise covariate stays within noise of zero elpd_diff") {
    // One generating process, two fits: the real model and the same model on
    // label-shuffled covariates. The informative model should not lose.
    const auto data = make_tiny_data(60, 5150);
    TinyLogit real(data.x, data.y, std::vector<bool>(60, true));
    const auto real_report =
        elpd_loo(loglik_from_fit(real, run_chains(real, fast_sampler(21))));

    auto shuffled_x = data.x;
    Philox rng(91, 0);
    for (std::size_t i = shuffled_x.size(); i > 1; --i)
        std::swap(shuffled_x[i - 1], shuffled_x[rng.next_below(i)]);
    TinyLogit noise(shuffled_x, data.y, std::vector<bool>(60, true));
    const auto noise_report =
        elpd_loo(loglik_from_fit(noise, run_chains(noise, fast_sampler(22))));

    const auto d = compare(real_report, noise_report);
    CHECK(d.elpd_diff > -2.0 * std::max(d.se_diff, 0.1));
}

TEST_CASE("loo never beats the in-sample lpd on repeated fits") {
    // Statistical check: across 20 simulated fits, elpd_loo <= lpd should
    // hold essentially always.
    std::size_t hold = 0;
    const std::size_t trials = 20;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto data = make_tiny_data(30, 7000 + t);
        TinyLogit model(data.x, data.y, std::vector<bool>(30, true));
        const auto draws = run_chains(model, fast_sampler(500 + t, 1500, 500));
        const auto loglik = loglik_from_fit(model, draws);
        const auto report = elpd_loo(loglik);
        double lpd = 0.0;
        std::vector<double> col(loglik.draws);
        for (std::size_t k = 0; k < loglik.obs; ++k) {
            for (std::size_t r = 0; r < loglik.draws; ++r) col[r] = loglik.at(r, k);
            lpd += logsumexp(col) - std::log(static_cast<double>(loglik.draws));
        }
        if (report.elpd_loo <= lpd + 1e-8) ++hold;
    }
    CHECK(hold >= 19);
}

TEST_CASE("pointwise loglik rows sum to the model's total log likelihood") {
    auto ds = test::tiny_dataset(3, 10);
    auto config = ModelConfig::preset("M3");
    const auto design = build_design(ds, config);
    HierarchicalLogit model(design, PriorConfig{});
    SamplerConfig sampler = fast_sampler(3, 600, 300);
    const auto draws = run_chains(model, sampler);
    const auto loglik = pointwise_loglik(draws, model);
    CHECK(loglik.obs == ds.n);
    CHECK(loglik.draws == draws.total_draws());
    for (std::size_t r = 0; r < loglik.draws; r += 97) {
        double sum = 0.0;
        for (std::size_t k = 0; k < loglik.obs; ++k) sum += loglik.at(r, k);
        CHECK(sum == doctest::Approx(log_likelihood(draws.draw(r), model.design())).epsilon(1e-8));
    }
}
