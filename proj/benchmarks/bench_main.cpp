#include <benchmark/benchmark.h>

#include "spiked/lss.hpp"
#include "spiked/models.hpp"
#include "spiked/noise.hpp"
#include "spiked/spectral.hpp"
#include "spiked/transform.hpp"

namespace {

using namespace spiked;

Matrix noise_matrix(Eigen::Index m, Eigen::Index n, const NoiseModel& g = gaussian_noise()) {
    Rng rng(42);
    return sample_noise(g, m, n, rng);
}

void BM_GramProduct(benchmark::State& state) {
    const Eigen::Index m = state.range(0);
    const Matrix y = noise_matrix(m, 2 * m);
    for (auto _ : state) benchmark::DoNotOptimize(gram(y, true).data());
    state.SetComplexityN(m);
}
BENCHMARK(BM_GramProduct)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);

void BM_SymEigenvalues(benchmark::State& state) {
    const Eigen::Index m = state.range(0);
    const Matrix s = gram(noise_matrix(m, 2 * m));
    for (auto _ : state) benchmark::DoNotOptimize(sym_eigenvalues(s).front());
}
BENCHMARK(BM_SymEigenvalues)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);

void BM_TopEigenpair(benchmark::State& state) {
    const Eigen::Index m = state.range(0);
    const Matrix y = noise_matrix(m, 2 * m);
    for (auto _ : state) benchmark::DoNotOptimize(gram_top_eigenpair(y).value);
}
BENCHMARK(BM_TopEigenpair)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_BimodalTransform(benchmark::State& state) {
    const Eigen::Index m = state.range(0);
    const NoiseModel g = bimodal_noise();
    const Matrix y = noise_matrix(m, 2 * m, g);
    const TransformSpec spec{0.0, g};
    for (auto _ : state) benchmark::DoNotOptimize(entrywise_transform(y, spec).values.data());
    state.SetItemsProcessed(state.iterations() * y.size());
}
BENCHMARK(BM_BimodalTransform)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_LssTrial(benchmark::State& state) {
    const TestParams p(0.45, Ratio(0.5), 3.0);
    ModelSpec spec;
    spec.kind = ModelKind::Additive;
    spec.rows = 256;
    spec.cols = 512;
    spec.snr = 0.45;
    std::uint64_t trial = 0;
    for (auto _ : state) {
        Rng rng = Rng::child(7, trial++);
        benchmark::DoNotOptimize(lss_statistic(generate(spec, rng).values, p));
    }
}
BENCHMARK(BM_LssTrial)->Unit(benchmark::kMillisecond);

void BM_KdeFit(benchmark::State& state) {
    const Matrix y = noise_matrix(512, 1024, bimodal_noise());
    std::vector<double> samples(y.data(), y.data() + y.size());
    for (double& s : samples) s *= std::sqrt(1024.0);
    for (auto _ : state) benchmark::DoNotOptimize(kde_fit(samples).fisher());
}
BENCHMARK(BM_KdeFit)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
