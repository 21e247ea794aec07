// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "rsit/text_metrics.hpp"

using namespace rsit;

namespace {

metrics::CaptionEvalSet demo_set() {
    metrics::CaptionEvalSet set;
    const char* candidates[] = {
        "an airport with two runways and several parked airplanes",
        "many boats are docked in the harbor near the pier",
        "a bridge crosses the wide river between two districts",
        "dense residential area with red rooftops and narrow streets",
    };
    const char* references[] = {
        "a large airport seen from above with planes near the terminal",
        "several boats docked in neat rows at the marina",
        "cars drive across a long bridge over the river",
        "small houses packed closely together with red roofs",
    };
    for (int i = 0; i < 4; ++i) {
        for (int copy = 0; copy < 8; ++copy) {
            set.push_back({candidates[i], {references[i], candidates[(i + 1) % 4]}});
        }
    }
    return set;
}

}  // namespace

static void BM_TokenizeCaption(benchmark::State& state) {
    const std::string text = "A dense residential area, with red rooftops; and narrow streets.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::tokenize_caption(text));
    }
}
BENCHMARK(BM_TokenizeCaption);

static void BM_PorterStem(benchmark::State& state) {
    const char* words[] = {"generalizations", "oscillators", "relational", "hopefulness"};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::porter_stem(words[i++ % 4]));
    }
}
BENCHMARK(BM_PorterStem);

static void BM_Bleu4(benchmark::State& state) {
    const auto set = demo_set();
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::bleu(set, 4));
    }
}
BENCHMARK(BM_Bleu4);

static void BM_RougeL(benchmark::State& state) {
    const auto set = demo_set();
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::rouge_l(set));
    }
}
BENCHMARK(BM_RougeL);

static void BM_MeteorLite(benchmark::State& state) {
    const auto set = demo_set();
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::meteor_lite(set));
    }
}
BENCHMARK(BM_MeteorLite);

static void BM_CiderD(benchmark::State& state) {
    const auto set = demo_set();
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::cider_d(set));
    }
}
BENCHMARK(BM_CiderD);

BENCHMARK_MAIN();
