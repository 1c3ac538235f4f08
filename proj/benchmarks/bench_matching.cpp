#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <opencv2/core.hpp>

#include "wildreid/features.hpp"
#include "wildreid/geomverify.hpp"
#include "wildreid/synthgen.hpp"

using namespace wildreid;

namespace {

EncounterFactors plain_factors(const SynthConfig& c) {
  EncounterFactors f;
  f.date = c.date_start;
  return f;
}

cv::Mat render(std::uint64_t seed, int image_seed) {
  SynthConfig c;
  c.image_size = 256;
  const IndividualPattern p = make_individual_pattern("bench", seed, c);
  return render_individual(p, plain_factors(c), image_seed, c);
}

FeatureSet features_of(std::uint64_t seed, int image_seed, const char* id) {
  FeatureSet fs = extract_features(render(seed, image_seed));
  fs.image_id = id;
  return fs;
}

std::vector<Correspondence> random_correspondences(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(0.0f, 1000.0f);
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    Correspondence c;
    c.a = Keypoint{coord(rng), coord(rng), 1.0f, 0.0f};
    c.b = Keypoint{c.a.x + 5.0f, c.a.y - 3.0f, 1.0f, 0.0f};
    out.push_back(c);
  }
  return out;
}

}  // namespace

static void BM_extract_features(benchmark::State& state) {
  const cv::Mat image = render(1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(image));
}
BENCHMARK(BM_extract_features)->Unit(benchmark::kMillisecond);

static void BM_match_descriptors(benchmark::State& state) {
  const FeatureSet a = features_of(1, 1, "a");
  const FeatureSet b = features_of(1, 2, "b");
  for (auto _ : state)
    benchmark::DoNotOptimize(match_descriptors(a, b, int(state.range(0))));
  state.counters["keypoints_a"] = double(a.size());
  state.counters["keypoints_b"] = double(b.size());
}
BENCHMARK(BM_match_descriptors)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_fit_projective(benchmark::State& state) {
  const std::vector<Correspondence> cs =
      random_correspondences(int(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(fit_projective(cs));
}
BENCHMARK(BM_fit_projective)->Arg(4)->Arg(10)->Arg(50);

static void BM_verify_pair_same(benchmark::State& state) {
  const FeatureSet a = features_of(1, 1, "a");
  const FeatureSet b = features_of(1, 2, "b");
  for (auto _ : state) benchmark::DoNotOptimize(verify_pair(a, b));
}
BENCHMARK(BM_verify_pair_same)->Unit(benchmark::kMillisecond);

static void BM_verify_pair_different(benchmark::State& state) {
  const FeatureSet a = features_of(1, 1, "a");
  const FeatureSet b = features_of(2, 1, "b");
  for (auto _ : state) benchmark::DoNotOptimize(verify_pair(a, b));
}
BENCHMARK(BM_verify_pair_different)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
