#include <benchmark/benchmark.h>

#include "mxfr/evalx.hpp"
#include "mxfr/model.hpp"
#include "mxfr/tape.hpp"

namespace {

mxfr::Tensor random_tensor(std::vector<int> shape, mxfr::Rng& rng) {
  mxfr::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_MatVec(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  mxfr::Rng rng(1);
  mxfr::ParamStore store;
  store.add("W", random_tensor({n, n}, rng));
  store.add("x", random_tensor({n}, rng));
  for (auto _ : state) {
    mxfr::Tape tape;
    mxfr::NodeId y = tape.matvec(tape.param(store, "W"), tape.param(store, "x"));
    benchmark::DoNotOptimize(tape.value(y).data[0]);
  }
}
BENCHMARK(BM_MatVec)->Arg(100)->Arg(300);

void BM_GruStepForwardBackward(benchmark::State& state) {
  int h = static_cast<int>(state.range(0));
  mxfr::ModelConfig mc;
  mc.hidden_size = h;
  mc.embedding_size = h;
  mc.input_vocab_size = 30;
  mc.output_vocab_size = 20;
  mxfr::Seq2SeqModel model(mc);
  model.init(1);
  mxfr::Rng rng(2);
  mxfr::Tensor x = random_tensor({h}, rng);
  mxfr::Tensor h0 = random_tensor({h}, rng);
  for (auto _ : state) {
    mxfr::Tape tape;
    mxfr::NodeId hn = model.gru_cell(tape, tape.constant(x),
                                     tape.constant(h0), "enc_fwd");
    mxfr::NodeId loss = tape.dot(hn, hn);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.value(loss).data[0]);
  }
}
BENCHMARK(BM_GruStepForwardBackward)->Arg(50)->Arg(100);

void BM_EditDistance(benchmark::State& state) {
  std::string a(static_cast<size_t>(state.range(0)), 'a');
  std::string b(static_cast<size_t>(state.range(0)), 'b');
  for (size_t i = 0; i < b.size(); i += 3) b[i] = 'a';
  for (auto _ : state)
    benchmark::DoNotOptimize(mxfr::edit_distance(a, b));
}
BENCHMARK(BM_EditDistance)->Arg(10)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
