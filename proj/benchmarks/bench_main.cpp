#include <benchmark/benchmark.h>

#include <memory>

#include "mbdoa/array_model.hpp"
#include "mbdoa/encoder.hpp"
#include "mbdoa/estimators.hpp"
#include "mbdoa/linalg.hpp"
#include "mbdoa/objective.hpp"
#include "mbdoa/training.hpp"

using namespace mbdoa;

namespace {

const ArrayGeometry kGeo;

SnapshotBatch batch_for(std::size_t sources, std::uint64_t seed) {
    Rng rng = make_stream(seed);
    ScenarioConfig sc;
    sc.sources = sources;
    sc.correlation = CorrelationMode::uniform;
    return sample_snapshots(kGeo, draw_scenario(sc, rng), 100, rng);
}

void BM_HermitianEig(benchmark::State& state) {
    const CMatrix c = batch_for(3, 1).sample_covariance;
    for (auto _ : state) benchmark::DoNotOptimize(hermitian_eig(c));
}
BENCHMARK(BM_HermitianEig);

void BM_LossAndGrad(benchmark::State& state) {
    const auto kind = state.range(0) == 0 ? LossKind::sml : LossKind::covmatch;
    const auto mode = state.range(1) == 0 ? CovarianceMode::diag : CovarianceMode::full;
    Rng rng = make_stream(2);
    ScenarioConfig sc;
    const Scenario s = draw_scenario(sc, rng);
    const CMatrix c = sample_snapshots(kGeo, s, 100, rng).sample_covariance;
    const LatentParams p{s.angles, s.powers, CMatrix::Identity(3, 3), 0.5};
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(kind, kGeo, p, c, mode));
}
BENCHMARK(BM_LossAndGrad)->ArgsProduct({{0, 1}, {0, 1}})->ArgNames({"cov", "full"});

EncoderArchitecture arch_for(int64_t preset) {
    return preset == 0 ? EncoderArchitecture::desk(3, CovarianceMode::full)
                       : EncoderArchitecture::reference(3, CovarianceMode::full);
}

void BM_EncoderForward(benchmark::State& state) {
    Rng rng = make_stream(3);
    const EncoderModel m = init_params(arch_for(state.range(0)), rng);
    const CMatrix c = batch_for(3, 4).sample_covariance;
    for (auto _ : state) benchmark::DoNotOptimize(encoder_forward(m, c));
}
BENCHMARK(BM_EncoderForward)->Arg(0)->Arg(1)->ArgName("reference");

void BM_EncoderForwardBackward(benchmark::State& state) {
    Rng rng = make_stream(5);
    const EncoderModel m = init_params(arch_for(state.range(0)), rng);
    const CMatrix c = batch_for(3, 6).sample_covariance;
    std::vector<double> grad(m.parameters().size(), 0.0);
    for (auto _ : state) {
        const EncoderOutput out = encoder_forward(m, c);
        const auto lg = loss_and_grad(LossKind::sml, kGeo, out.latent, c, CovarianceMode::full);
        encoder_backward_accumulate(m, out.cache, lg.gradient.flatten(), grad);
        benchmark::DoNotOptimize(grad.data());
    }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(0)->Arg(1)->ArgName("reference");

void BM_TrainBatch(benchmark::State& state) {
    TrainConfig tc;
    tc.batch_size = 64;
    tc.batches = 1;
    const EncoderArchitecture a = EncoderArchitecture::desk(3, CovarianceMode::diag);
    for (auto _ : state) benchmark::DoNotOptimize(train(tc, a, kGeo));
}
BENCHMARK(BM_TrainBatch)->Unit(benchmark::kMillisecond);

void BM_Music(benchmark::State& state) {
    const AngularGrid grid = AngularGrid::uniform(kGeo, static_cast<std::size_t>(state.range(0)));
    const CMatrix c = batch_for(3, 7).sample_covariance;
    for (auto _ : state) benchmark::DoNotOptimize(music_estimate(c, grid, 3));
}
BENCHMARK(BM_Music)->Arg(360)->Arg(1200)->ArgName("grid");

void BM_Spice(benchmark::State& state) {
    const AngularGrid grid = AngularGrid::uniform(kGeo, static_cast<std::size_t>(state.range(0)));
    const CMatrix c = batch_for(3, 8).sample_covariance;
    for (auto _ : state) benchmark::DoNotOptimize(spice_estimate(c, grid, 3));
}
BENCHMARK(BM_Spice)->Arg(360)->Arg(1200)->ArgName("grid")->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
