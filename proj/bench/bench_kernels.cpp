// Serial reference against parallel kernels. Args: {d, m, parallel}.

#include <benchmark/benchmark.h>

#include <vector>

#include "simlab/estimators.hpp"
#include "simlab/kernels.hpp"
#include "simlab/rng.hpp"

using namespace simlab;

namespace {

struct Data {
    int d;
    std::vector<double> z, w;
    SampleView view() const { return {z.data(), w.size(), d}; }
};

Data make_data(int d, std::size_t m) {
    Rng rng = make_rng(1);
    std::normal_distribution<double> g;
    Data s{d, {}, {}};
    s.z.reserve(m * d);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec z = random_unit(d, rng);
        s.z.insert(s.z.end(), z.data(), z.data() + d);
        s.w.push_back(g(rng));
    }
    return s;
}

Exec exec_of(const benchmark::State& st) { return st.range(2) ? Exec::parallel : Exec::serial; }

void BM_UnfoldedApply(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0));
    const Data s = make_data(d, static_cast<std::size_t>(st.range(1)));
    const UnfoldingPlan plan(d, 3, 1, 2);
    const Vec v = Vec::Random(d * d);
    for (auto _ : st) benchmark::DoNotOptimize(unfolded_apply(plan, s.view(), s.w.data(), v, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_Spectral2Apply(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0));
    const Data s = make_data(d, static_cast<std::size_t>(st.range(1)));
    const Vec v = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
    for (auto _ : st) benchmark::DoNotOptimize(spectral2_apply(s.view(), s.w.data(), v, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_BoostSum(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0));
    const Data s = make_data(d, static_cast<std::size_t>(st.range(1)));
    const Vec v = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
    for (auto _ : st) benchmark::DoNotOptimize(boost_sum(s.view(), s.w.data(), v, 3, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_AssembleHarmonicSum(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0));
    const Data s = make_data(d, static_cast<std::size_t>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(assemble_harmonic_sum(s.view(), s.w.data(), 3, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

}  // namespace

BENCHMARK(BM_UnfoldedApply)->ArgsProduct({{16, 32}, {20000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spectral2Apply)->ArgsProduct({{100, 400}, {50000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BoostSum)->ArgsProduct({{50, 200}, {50000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleHarmonicSum)->ArgsProduct({{16, 32}, {20000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
