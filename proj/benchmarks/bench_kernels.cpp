// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "rsit/model.hpp"
#include "rsit/optim.hpp"

using namespace rsit;

namespace {

kernels::KernelConfig bench_config(kernels::Stage stage) {
    kernels::KernelConfig config;
    config.stage = stage;
    config.num_blocks = 2;
    config.model_width = 16;
    config.vocab_size = 32;
    config.ffn_width = 32;
    config.init_seed = 5;
    return config;
}

}  // namespace

static void BM_ModelForward(benchmark::State& state) {
    auto config = bench_config(kernels::Stage::cross_modal);
    kernels::LanguageModel model(config);
    const auto stack = kernels::make_feature_stack(config, 9);
    const std::vector<int> tokens = {3, 19, 30, 6};
    const auto targets = kernels::make_next_token_targets(config.visual_tokens(), tokens);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(stack, tokens, targets));
    }
}
BENCHMARK(BM_ModelForward);

static void BM_ModelForwardBackward(benchmark::State& state) {
    auto config = bench_config(kernels::Stage::instruction_tuning);
    kernels::LanguageModel model(config);
    const auto stack = kernels::make_feature_stack(config, 9);
    const std::vector<int> tokens = {3, 19, 30, 6};
    const auto targets = kernels::make_next_token_targets(config.visual_tokens(), tokens);
    for (auto _ : state) {
        model.forward(stack, tokens, targets);
        benchmark::DoNotOptimize(model.backward());
    }
}
BENCHMARK(BM_ModelForwardBackward);

static void BM_AdamWStep(benchmark::State& state) {
    auto config = bench_config(kernels::Stage::cross_modal);
    kernels::LanguageModel model(config);
    const auto stack = kernels::make_feature_stack(config, 9);
    const std::vector<int> tokens = {3, 19, 30, 6};
    const auto targets = kernels::make_next_token_targets(config.visual_tokens(), tokens);
    const auto trainable = kernels::stage_trainable_set(config);
    model.forward(stack, tokens, targets);
    auto grads = model.backward();
    for (auto it = grads.begin(); it != grads.end();) {
        it = trainable.count(it->first) ? std::next(it) : grads.erase(it);
    }
    kernels::AdamW opt(kernels::AdamWConfig{});
    for (auto _ : state) {
        opt.step(model.params(), grads);
    }
}
BENCHMARK(BM_AdamWStep);

BENCHMARK_MAIN();
