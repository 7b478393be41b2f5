#include <benchmark/benchmark.h>

#include <random>

#include "tapeq/softmin.hpp"

using namespace tapeq;

namespace {

// Bidirectional k x k grid with an OD pair from every vertex on the left
// column to every vertex on the right column.
struct GridCase {
  LevelGraph g;
  std::vector<double> w, d;
};

GridCase grid(int k) {
  GridCase c;
  c.g.num_vertices = k * k;
  std::mt19937_64 rng(k);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  auto id = [k](int r, int col) { return r * k + col; };
  auto add = [&](int a, int b) {
    Edge e;
    e.tail = a;
    e.head = b;
    e.cost = EdgeCostModel::bpr(1.0, 1.0, 0.15, 4.0);
    c.g.edges.push_back(e);
    c.w.push_back(u(rng));
  };
  for (int r = 0; r < k; ++r)
    for (int col = 0; col < k; ++col) {
      if (col + 1 < k) {
        add(id(r, col), id(r, col + 1));
        add(id(r, col + 1), id(r, col));
      }
      if (r + 1 < k) {
        add(id(r, col), id(r + 1, col));
        add(id(r + 1, col), id(r, col));
      }
    }
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      c.g.ods.push_back({id(a, 0), id(b, k - 1), 1.0});
      c.d.push_back(1.0);
    }
  c.g.hops = 3 * k;
  return c;
}

void BM_SoftminSerial(benchmark::State& state) {
  const auto c = grid(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::softmin_flows_serial(c.g, c.w, c.d, 1.0, c.g.hops));
}

void BM_SoftminParallel(benchmark::State& state) {
  const auto c = grid(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(softmin_flows(c.g, c.w, c.d, 1.0, c.g.hops, Execution::parallel));
}

}  // namespace

BENCHMARK(BM_SoftminSerial)->Arg(8)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SoftminParallel)->Arg(8)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
