// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rsit/geometry.hpp"

using namespace rsit;

namespace {

std::vector<geom::OrientedBox> make_quads(std::size_t count) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> c(80.0, 200.0), r(10.0, 60.0), a(0.0, 6.28);
    std::vector<geom::OrientedBox> quads;
    for (std::size_t i = 0; i < count; ++i) {
        const double cx = c(rng), cy = c(rng), ax = r(rng), bx = r(rng), rot = a(rng);
        std::array<geom::Point, 4> pts{};
        const double angles[4] = {0.3, 1.7, 3.3, 4.9};
        for (int k = 0; k < 4; ++k) {
            const double ex = ax * std::cos(angles[k]);
            const double ey = bx * std::sin(angles[k]);
            pts[k] = {cx + std::cos(rot) * ex - std::sin(rot) * ey,
                      cy + std::sin(rot) * ex + std::cos(rot) * ey};
        }
        quads.push_back(geom::canonicalize_obb(pts));
    }
    return quads;
}

}  // namespace

static void BM_HbbIou(benchmark::State& state) {
    const auto a = geom::make_hbb(10, 10, 120, 90);
    const auto b = geom::make_hbb(40, 30, 160, 140);
    for (auto _ : state) {
        benchmark::DoNotOptimize(geom::hbb_iou(a, b));
    }
}
BENCHMARK(BM_HbbIou);

static void BM_ObbIou(benchmark::State& state) {
    const auto quads = make_quads(64);
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& a = quads[i % quads.size()];
        const auto& b = quads[(i + 1) % quads.size()];
        benchmark::DoNotOptimize(geom::obb_iou(a, b));
        ++i;
    }
}
BENCHMARK(BM_ObbIou);

static void BM_CanonicalizeObb(benchmark::State& state) {
    const auto quads = make_quads(64);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(geom::canonicalize_obb(quads[i % quads.size()].corners));
        ++i;
    }
}
BENCHMARK(BM_CanonicalizeObb);

BENCHMARK_MAIN();
