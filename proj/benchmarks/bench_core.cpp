// Microbenchmarks for the hot paths: the GEMM-bound convolutions, the NCA
// update, the encoder, the mixture likelihood, and a whole optimizer step.
// FLOP-counted benches report items/s, i.e. FLOP/s.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "vnca/dataset.hpp"
#include "vnca/distributions.hpp"
#include "vnca/model.hpp"
#include "vnca/rng.hpp"
#include "vnca/synth.hpp"
#include "vnca/tensor.hpp"
#include "vnca/training.hpp"

namespace {

using namespace vnca;

Tensor rnd(Shape s, std::uint64_t seed, bool rg = false) {
  Rng r(seed, "bench");
  return randn(std::move(s), r, rg);
}

ModelConfig desk_config(int latent) {
  ModelConfig mc;
  mc.variant = Variant::doubling;
  mc.likelihood = Likelihood::bernoulli;
  mc.latent = latent;
  mc.width = latent;
  mc.k_doublings = 4;
  mc.steps_per_phase = 8;
  mc.img_h = mc.img_w = 32;
  return mc;
}

void BM_Conv1x1Gemm(benchmark::State& st) {
  NoGradGuard ng;
  int c = int(st.range(0));
  Tensor x = rnd({8, c, 16, 16}, 1);
  Tensor w = rnd({c, c, 1, 1}, 2);
  Tensor none;  // biasless: the timing is one sgemm plus graph overhead
  for (auto _ : st) {
    Tensor y = conv2d(x, w, none, 1, 0);
    benchmark::DoNotOptimize(y);
  }
  st.SetItemsProcessed(st.iterations() * 2ll * 8 * c * c * 16 * 16);
}
BENCHMARK(BM_Conv1x1Gemm)->Arg(256)->Arg(512);

void BM_Conv3x3Forward(benchmark::State& st) {
  NoGradGuard ng;
  int c = int(st.range(0));
  Tensor x = rnd({8, c, 32, 32}, 1);
  Tensor w = rnd({c, c, 3, 3}, 2);
  Tensor b = rnd({c}, 3);
  for (auto _ : st) {
    Tensor y = conv2d(x, w, b, 1, 1);
    benchmark::DoNotOptimize(y);
  }
  st.SetItemsProcessed(st.iterations() * 2ll * 8 * c * c * 9 * 32 * 32);
}
BENCHMARK(BM_Conv3x3Forward)->Arg(64)->Arg(256);

void BM_Conv3x3ForwardBackward(benchmark::State& st) {
  int c = int(st.range(0));
  Tensor x = rnd({8, c, 32, 32}, 1, true);
  Tensor w = rnd({c, c, 3, 3}, 2, true);
  Tensor b = rnd({c}, 3, true);
  for (auto _ : st) {
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    backward(sum_all(conv2d(x, w, b, 1, 1)));
    benchmark::DoNotOptimize(w.grad());
  }
  // dx and dw each cost another forward's worth of GEMM.
  st.SetItemsProcessed(st.iterations() * 6ll * 8 * c * c * 9 * 32 * 32);
}
BENCHMARK(BM_Conv3x3ForwardBackward)->Arg(64)->Arg(256);

void BM_NcaStepResidual(benchmark::State& st) {
  NoGradGuard ng;
  VncaModel model = VncaModel::create(desk_config(int(st.range(0))), 1);
  Tensor state = rnd({8, int(st.range(0)), 32, 32}, 4);
  for (auto _ : st) {
    Tensor next = model.nca_step(state);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_NcaStepResidual)->Arg(64)->Arg(256);

void BM_EncoderForward(benchmark::State& st) {
  NoGradGuard ng;
  VncaModel model = VncaModel::create(desk_config(64), 1);
  Tensor x = rnd({8, 1, 32, 32}, 5);
  for (auto _ : st) {
    GaussianPosterior q = model.encode(x);
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(BM_EncoderForward);

void BM_MixtureLogpx(benchmark::State& st) {
  NoGradGuard ng;
  Rng rng(6, "bench");
  std::vector<float> xv(size_t(4) * 3 * 16 * 16);
  for (auto& v : xv)
    v = float(2.0 * double(rng.uniform_int(0, 255)) / 255.0 - 1.0);
  Tensor x = Tensor::from_data({4, 3, 16, 16}, std::move(xv));
  Tensor p = rnd({4, 30, 16, 16}, 7);
  for (auto _ : st) {
    Tensor lp = logistic_mixture_logpx(x, p, 3);
    benchmark::DoNotOptimize(lp);
  }
}
BENCHMARK(BM_MixtureLogpx);

void BM_TrainStepDoubling(benchmark::State& st) {
  VncaModel model = VncaModel::create(desk_config(32), 1);
  TrainConfig tc;
  tc.batch = 8;
  Adam opt(model.parameters(), tc.adam);
  Dataset ds = pad_center(synth_digits(8, 1), 32, 32);
  std::vector<std::int64_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<float> bx = gather(ds, idx);
  Rng rng(1, "train");
  for (auto _ : st) {
    StepMetrics m = train_step(model, bx, 8, opt, tc, rng);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_TrainStepDoubling)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
