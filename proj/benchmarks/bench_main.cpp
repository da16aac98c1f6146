#include <benchmark/benchmark.h>

#include <cmath>

#include "sae/aggregate.hpp"
#include "sae/loo.hpp"
#include "sae/model.hpp"
#include "sae/rng.hpp"
#include "sae/sampler.hpp"
#include "sae/simulate.hpp"

namespace {

using namespace sae;

SimConfig bench_sim(std::size_t areas) {
    SimConfig config = SimConfig::defaults();
    config.areas = areas;
    config.count_min = 50;
    config.count_max = 200;
    config.target_n = {40, 80, 120};
    config.seed = 17;
    return config;
}

struct BenchFixture {
    LinkedDataset dataset;
    DesignMatrix design;
    BenchFixture(std::size_t areas) {
        const SimConfig config = bench_sim(areas);
        const Population pop = gen_population(config, 0);
        auto records = draw_sample(pop, config, 0);
        dataset = link(std::move(records), pop.cells, pop.covariates);
        design = build_design(dataset, config.fit_model);
    }
};

void BM_LogPosteriorGrad(benchmark::State& state) {
    static BenchFixture fixture(static_cast<std::size_t>(state.range(0)));
    const PriorConfig prior;
    Philox rng(1, 0);
    std::vector<double> params(fixture.design.dim());
    for (double& p : params) p = 0.2 * rng.normal();
    std::vector<double> grad(params.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            log_posterior_grad(params, fixture.design, prior, grad));
    }
    state.counters["records"] = static_cast<double>(fixture.design.n());
}
BENCHMARK(BM_LogPosteriorGrad)->Arg(20);

void BM_ShortChain(benchmark::State& state) {
    static BenchFixture fixture(10);
    HierarchicalLogit model(fixture.design, PriorConfig{});
    for (auto _ : state) {
        SamplerConfig config;
        config.chains = 1;
        config.iterations = 200;
        config.warmup = 100;
        config.seed = 3;
        benchmark::DoNotOptimize(run_chains(model, config));
    }
}
BENCHMARK(BM_ShortChain)->Unit(benchmark::kMillisecond);

void BM_PsisSmooth(benchmark::State& state) {
    Philox rng(9, 0);
    std::vector<double> ratios(static_cast<std::size_t>(state.range(0)));
    for (double& r : ratios) r = rng.normal() * 2.0;
    for (auto _ : state) benchmark::DoNotOptimize(psis_smooth(ratios));
}
BENCHMARK(BM_PsisSmooth)->Arg(2000);

void BM_PerDrawAggregation(benchmark::State& state) {
    static BenchFixture fixture(20);
    const CellPartition part = partition_cells(fixture.dataset);
    const CoverageShares shares = coverage_shares(fixture.dataset.cells, part);
    Philox rng(5, 0);
    std::vector<double> theta(fixture.dataset.n);
    for (double& t : theta) t = 0.2 + 0.6 * rng.uniform();
    for (auto _ : state)
        benchmark::DoNotOptimize(
            per_draw_area_proportions(fixture.dataset, part, shares, theta));
}
BENCHMARK(BM_PerDrawAggregation);

}  // namespace

BENCHMARK_MAIN();
