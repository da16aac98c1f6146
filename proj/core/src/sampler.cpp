#include "sae/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "sae/rng.hpp"
#include "sae/util.hpp"

namespace sae {

void SamplerConfig::validate() const {
    if (chains < 1) throw Error(errc::config_error, "chains must be >= 1");
    if (warmup >= iterations)
        throw Error(errc::config_error, "warmup must be smaller than iterations");
    if (!(target_accept > 0.0 && target_accept < 1.0))
        throw Error(errc::config_error, "target_accept must lie in (0,1)");
    if (max_leapfrog < 1) throw Error(errc::config_error, "max_leapfrog must be >= 1");
}

std::vector<double> DrawsMatrix::column(std::size_t chain, std::size_t param) const {
    std::vector<double> out(per_chain);
    for (std::size_t d = 0; d < per_chain; ++d) out[d] = at(chain, d, param);
    return out;
}

namespace {

constexpr double kLogHalf = -0.6931471805599453;

// Dual averaging of log step size (Hoffman & Gelman 2014 defaults).
struct DualAveraging {
    double mu = 0.0;
    double log_eps = 0.0;
    double log_eps_avg = 0.0;
    double h_bar = 0.0;
    double gamma = 0.05;
    double t0 = 10.0;
    double kappa = 0.75;
    double count = 0.0;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        log_eps = std::log(eps);
        log_eps_avg = std::log(eps);
        h_bar = 0.0;
        count = 0.0;
    }
    void update(double target, double accept_prob) {
        count += 1.0;
        const double frac = 1.0 / (count + t0);
        h_bar = (1.0 - frac) * h_bar + frac * (target - accept_prob);
        log_eps = mu - std::sqrt(count) / gamma * h_bar;
        const double weight = std::pow(count, -kappa);
        log_eps_avg = weight * log_eps + (1.0 - weight) * log_eps_avg;
    }
    double current() const { return std::exp(log_eps); }
    double averaged() const { return std::exp(log_eps_avg); }
};

class ChainRunner {
  public:
    ChainRunner(const LogDensityModel& model, const SamplerConfig& config, unsigned chain_index)
        : model_(model),
          config_(config),
          rng_(config.seed, chain_index),
          dim_(model.dim()),
          position_(dim_, 0.0),
          grad_(dim_, 0.0),
          inv_mass_(dim_, 1.0) {}

    ChainStats run(std::span<double> out);

  private:
    struct TrajectoryResult {
        double accept_prob = 0.0;
        bool divergent = false;
    };

    void initialize();
    double find_initial_step();
    // One momentum refresh + leapfrog trajectory + Metropolis step; updates
    // position_/grad_/value_ on acceptance.
    TrajectoryResult transition(double eps, unsigned steps);
    void update_mass_from_window();

    const LogDensityModel& model_;
    const SamplerConfig& config_;
    Philox rng_;
    std::size_t dim_;
    std::vector<double> position_;
    std::vector<double> grad_;
    double value_ = 0.0;
    std::vector<double> inv_mass_;
    std::vector<double> momentum_;
    std::vector<double> q_scratch_;
    std::vector<double> g_scratch_;
    std::vector<double> window_;
    std::size_t window_rows_ = 0;
};

void ChainRunner::initialize() {
    for (double& q : position_) q = (rng_.uniform() * 2.0 - 1.0) * config_.init_radius;
    value_ = model_.value_and_grad(position_, grad_);
    if (!std::isfinite(value_))
        throw Error(errc::non_finite_start, "log density not finite at the initial point");
}

ChainRunner::TrajectoryResult ChainRunner::transition(double eps, unsigned steps) {
    TrajectoryResult result;
    momentum_.resize(dim_);
    double kinetic0 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        // p ~ N(0, M) with diagonal M = 1 / inv_mass.
        const double p = rng_.normal() / std::sqrt(inv_mass_[i]);
        momentum_[i] = p;
        kinetic0 += 0.5 * p * p * inv_mass_[i];
    }
    const double h0 = -value_ + kinetic0;

    q_scratch_ = position_;
    g_scratch_ = grad_;
    double v_new = value_;
    bool bad = false;
    for (unsigned s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < dim_; ++i) momentum_[i] += 0.5 * eps * g_scratch_[i];
        for (std::size_t i = 0; i < dim_; ++i) q_scratch_[i] += eps * momentum_[i] * inv_mass_[i];
        try {
            v_new = model_.value_and_grad(q_scratch_, g_scratch_);
        } catch (const Error&) {
            bad = true;
            break;
        }
        if (!std::isfinite(v_new)) {
            bad = true;
            break;
        }
        for (std::size_t i = 0; i < dim_; ++i) momentum_[i] += 0.5 * eps * g_scratch_[i];
    }
    if (bad) {
        result.divergent = true;
        return result;
    }

    double kinetic1 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        kinetic1 += 0.5 * momentum_[i] * momentum_[i] * inv_mass_[i];
    const double energy_error = (-v_new + kinetic1) - h0;
    if (!std::isfinite(energy_error) || energy_error > 1000.0) {
        result.divergent = true;
        return result;
    }
    result.accept_prob = std::min(1.0, std::exp(-energy_error));
    if (rng_.uniform() < result.accept_prob) {
        position_.swap(q_scratch_);
        grad_.swap(g_scratch_);
        value_ = v_new;
    }
    return result;
}

double ChainRunner::find_initial_step() {
    const double v0 = value_;
    const auto energy_error_at = [&](double step) {
        std::vector<double> q = position_;
        std::vector<double> g = grad_;
        momentum_.resize(dim_);
        double kinetic0 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double p = rng_.normal() / std::sqrt(inv_mass_[i]);
            momentum_[i] = p;
            kinetic0 += 0.5 * p * p * inv_mass_[i];
        }
        for (std::size_t i = 0; i < dim_; ++i) momentum_[i] += 0.5 * step * g[i];
        for (std::size_t i = 0; i < dim_; ++i) q[i] += step * momentum_[i] * inv_mass_[i];
        double v_new;
        try {
            v_new = model_.value_and_grad(q, g);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(v_new)) return std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < dim_; ++i) momentum_[i] += 0.5 * step * g[i];
        double kinetic1 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            kinetic1 += 0.5 * momentum_[i] * momentum_[i] * inv_mass_[i];
        return (-v_new + kinetic1) - (-v0 + kinetic0);
    };

    double eps = 0.1;
    double err = energy_error_at(eps);
    const bool shrink = !(err < -kLogHalf);
    for (int it = 0; it < 50; ++it) {
        eps = shrink ? eps * 0.5 : eps * 2.0;
        err = energy_error_at(eps);
        const bool keep_going = shrink ? !(err < -kLogHalf) : (err < -kLogHalf);
        if (!keep_going) break;
        if (eps < 1e-8 || eps > 10.0) break;
    }
    return std::clamp(eps, 1e-8, 10.0);
}

void ChainRunner::update_mass_from_window() {
    if (window_rows_ < 10) return;
    const double n = static_cast<double>(window_rows_);
    for (std::size_t i = 0; i < dim_; ++i) {
        double mean = 0.0;
        for (std::size_t r = 0; r < window_rows_; ++r) mean += window_[r * dim_ + i];
        mean /= n;
        double ss = 0.0;
        for (std::size_t r = 0; r < window_rows_; ++r) {
            const double d = window_[r * dim_ + i] - mean;
            ss += d * d;
        }
        const double var = ss / (n - 1.0);
        inv_mass_[i] = std::max(1e-8, var * (n / (n + 5.0)) + 1e-3 * (5.0 / (n + 5.0)));
    }
    window_rows_ = 0;
}

ChainStats ChainRunner::run(std::span<double> out) {
    initialize();
    double eps = find_initial_step();
    DualAveraging adapt;
    adapt.restart(eps);

    const unsigned warmup = config_.warmup;
    const unsigned phase1 = std::max(1u, static_cast<unsigned>(warmup * 0.15));
    const unsigned phase3 = std::max(1u, static_cast<unsigned>(warmup * 0.10));
    const unsigned phase2_end = warmup > phase1 + phase3 ? warmup - phase3 : phase1;
    unsigned window_size = 25;
    unsigned window_end = std::min(phase1 + window_size, phase2_end);
    if (phase2_end > phase1) window_.assign(std::size_t(phase2_end - phase1) * dim_, 0.0);

    ChainStats stats;
    double accept_sum = 0.0;
    unsigned accept_count = 0;
    const std::size_t retained = config_.retained();

    for (unsigned iter = 0; iter < config_.iterations; ++iter) {
        const bool in_warmup = iter < warmup;
        const double cur_eps = in_warmup ? adapt.current() : eps;
        const unsigned target_steps = static_cast<unsigned>(std::clamp(
            config_.int_time / cur_eps, 1.0, static_cast<double>(config_.max_leapfrog)));
        const unsigned steps = 1 + static_cast<unsigned>(rng_.next_below(target_steps));

        const auto result = transition(cur_eps, steps);

        if (in_warmup) {
            adapt.update(config_.target_accept, result.accept_prob);
            if (iter >= phase1 && iter < phase2_end) {
                std::copy(position_.begin(), position_.end(),
                          window_.begin() + static_cast<std::ptrdiff_t>(window_rows_ * dim_));
                ++window_rows_;
                if (iter + 1 == window_end) {
                    update_mass_from_window();
                    window_size *= 2;
                    window_end = std::min(iter + 1 + window_size, phase2_end);
                    eps = adapt.averaged();
                    adapt.restart(eps);
                }
            }
            if (iter + 1 == warmup) eps = adapt.averaged();
        } else {
            accept_sum += result.accept_prob;
            ++accept_count;
            if (result.divergent) ++stats.divergences;
            const std::size_t d = iter - warmup;
            std::copy(position_.begin(), position_.end(),
                      out.begin() + static_cast<std::ptrdiff_t>(d * dim_));
        }
    }

    stats.accept_rate = accept_count ? accept_sum / accept_count : 0.0;
    stats.step_size = eps;
    if (retained > 0 &&
        static_cast<double>(stats.divergences) >
            config_.max_divergence_rate * static_cast<double>(retained))
        throw Error(errc::divergence_rate_exceeded,
                    format_int(stats.divergences) + " of " + format_int(std::int64_t(retained)) +
                        " post-warmup iterations diverged");
    return stats;
}

}  // namespace

DrawsMatrix run_chains(const LogDensityModel& model, const SamplerConfig& config) {
    config.validate();
    if (model.dim() < 1) throw Error(errc::dimension_mismatch, "model has no parameters");

    DrawsMatrix draws;
    draws.names = model.param_names();
    draws.n_chains = config.chains;
    draws.per_chain = config.retained();
    draws.values.assign(draws.n_chains * draws.per_chain * draws.dim(), 0.0);
    draws.stats.resize(config.chains);

    const auto run_one = [&](unsigned c) {
        std::span<double> out(
            draws.values.data() + std::size_t(c) * draws.per_chain * draws.dim(),
            draws.per_chain * draws.dim());
        draws.stats[c] = ChainRunner(model, config, c).run(out);
    };

    const unsigned workers = std::min<unsigned>(thread_count(), config.chains);
    if (workers > 1) {
        std::vector<std::thread> pool;
        std::mutex error_mutex;
        std::exception_ptr first_error;
        for (unsigned c = 0; c < config.chains; ++c)
            pool.emplace_back([&, c] {
                try {
                    run_one(c);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    } else {
        for (unsigned c = 0; c < config.chains; ++c) run_one(c);
    }
    return draws;
}

namespace {

// The hierarchical density under v = sigma_v * z, including the exp(m s)
// Jacobian. Stateless so chains can share it across threads.
class NonCenteredDensity final : public LogDensityModel {
  public:
    explicit NonCenteredDensity(const HierarchicalLogit& inner) : inner_(inner) {}

    std::size_t dim() const override { return inner_.dim(); }
    std::vector<std::string> param_names() const override { return inner_.param_names(); }

    double value_and_grad(std::span<const double> position,
                          std::span<double> grad) const override {
        const ParamLayout& layout = inner_.design().layout;
        const double s = position[layout.log_sigma_v()];
        const double sigma = std::exp(s);

        std::vector<double> centered(position.begin(), position.end());
        for (std::size_t a = 0; a < layout.m; ++a)
            centered[layout.v(a)] = sigma * position[layout.v(a)];

        double value = inner_.value_and_grad(centered, grad);
        value += static_cast<double>(layout.m) * s;

        double dot = 0.0;
        for (std::size_t a = 0; a < layout.m; ++a) {
            dot += grad[layout.v(a)] * position[layout.v(a)];
            grad[layout.v(a)] *= sigma;
        }
        grad[layout.log_sigma_v()] += sigma * dot + static_cast<double>(layout.m);
        return value;
    }

  private:
    const HierarchicalLogit& inner_;
};

}  // namespace

DrawsMatrix sample_posterior(const HierarchicalLogit& model, const SamplerConfig& config) {
    const NonCenteredDensity density(model);
    DrawsMatrix draws = run_chains(density, config);
    const ParamLayout& layout = model.design().layout;
    for (std::size_t c = 0; c < draws.n_chains; ++c)
        for (std::size_t d = 0; d < draws.per_chain; ++d) {
            double* row = draws.values.data() + (c * draws.per_chain + d) * draws.dim();
            const double sigma = std::exp(row[layout.log_sigma_v()]);
            for (std::size_t a = 0; a < layout.m; ++a) row[layout.v(a)] *= sigma;
        }
    return draws;
}

DrawsMatrix run_chains_rw(const LogDensityModel& model, const SamplerConfig& config) {
    config.validate();
    if (model.dim() < 1) throw Error(errc::dimension_mismatch, "model has no parameters");
    DrawsMatrix draws;
    draws.names = model.param_names();
    draws.n_chains = config.chains;
    draws.per_chain = config.retained();
    draws.values.assign(draws.n_chains * draws.per_chain * draws.dim(), 0.0);
    draws.stats.resize(config.chains);

    const std::size_t dim = model.dim();
    std::vector<double> grad(dim);
    for (unsigned c = 0; c < config.chains; ++c) {
        Philox rng(config.seed, c);
        std::vector<double> q(dim);
        for (double& x : q) x = (rng.uniform() * 2.0 - 1.0) * config.init_radius;
        double value = model.value_and_grad(q, grad);
        if (!std::isfinite(value))
            throw Error(errc::non_finite_start, "log density not finite at the initial point");
        double scale = 0.5;
        double accept_sum = 0.0;
        unsigned accepted_recent = 0;
        std::vector<double> proposal(dim);
        for (unsigned iter = 0; iter < config.iterations; ++iter) {
            for (std::size_t i = 0; i < dim; ++i) proposal[i] = q[i] + scale * rng.normal();
            double v_new;
            try {
                v_new = model.value_and_grad(proposal, grad);
            } catch (const Error&) {
                v_new = -std::numeric_limits<double>::infinity();
            }
            const bool accept = std::log(rng.uniform()) < v_new - value;
            if (accept) {
                q = proposal;
                value = v_new;
                ++accepted_recent;
            }
            if (iter < config.warmup) {
                if ((iter + 1) % 50 == 0) {
                    const double rate = accepted_recent / 50.0;
                    scale *= std::exp(rate - 0.35);
                    accepted_recent = 0;
                }
            } else {
                accept_sum += accept ? 1.0 : 0.0;
                const std::size_t d = iter - config.warmup;
                std::copy(q.begin(), q.end(),
                          draws.values.begin() +
                              static_cast<std::ptrdiff_t>(
                                  (std::size_t(c) * draws.per_chain + d) * dim));
            }
        }
        draws.stats[c].accept_rate = config.retained() ? accept_sum / config.retained() : 0.0;
        draws.stats[c].step_size = scale;
    }
    return draws;
}

}  // namespace sae
