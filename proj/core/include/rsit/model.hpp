// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale language-model fragment wiring the kernel ops end to end:
// fused visual features -> projection -> multimodal concatenation -> L
// pre-norm transformer blocks -> final RMSNorm -> vocabulary head ->
// next-token cross-entropy. Stage 3 adds bias-tune (alpha, beta) pairs to
// every transformer/head linear; the per-stage trainable sets mirror the
// staged training recipe (1: projection; 2: attention + norms +
// projection; 3: alpha/beta only).

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rsit/kernels.hpp"
#include "rsit/params.hpp"

namespace rsit::kernels {

enum class Stage {
    alignment_pretrain = 1,
    cross_modal = 2,
    instruction_tuning = 3,
};

struct KernelConfig {
    std::size_t num_blocks = 2;   // L
    std::size_t model_width = 8;  // d
    std::size_t vocab_size = 16;  // V
    std::size_t ffn_width = 0;    // 0 -> 4 * model_width
    Stage stage = Stage::cross_modal;
    std::uint64_t init_seed = 0;

    // Visual geometry; the last scale grid (h*w) must equal the layer
    // features' token count.
    std::vector<std::size_t> layer_channels = {2, 3};
    std::vector<std::array<std::size_t, 3>> scale_shapes = {{4, 4, 3}, {2, 2, 2}};

    std::size_t ffn_width_or_default() const {
        return ffn_width > 0 ? ffn_width : 4 * model_width;
    }
    std::size_t visual_tokens() const {
        return scale_shapes.back()[0] * scale_shapes.back()[1];
    }
    std::size_t projection_input_width() const;
};

// Parameter names trainable in the config's stage.
std::set<std::string> stage_trainable_set(const KernelConfig& config);

using GradMap = std::map<std::string, Tensor>;

class LanguageModel {
public:
    explicit LanguageModel(KernelConfig config);

    const KernelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    // Runs the full pipeline and returns the mean cross-entropy loss.
    // `targets` holds one vocab index (or -1) per position of the combined
    // visual+language sequence.
    double forward(const FeatureStack& stack, std::span<const int> language_tokens,
                   std::span<const int> targets);

    // Gradients of the last forward's loss for every parameter.
    GradMap backward();

    const Tensor& last_logits() const { return logits_; }

private:
    struct BlockState {
        BlockParams params;
        BlockCache cache;
    };

    BlockParams block_params(std::size_t block_index);
    LinearSpec linear_spec(const std::string& prefix, bool base_bias);

    KernelConfig config_;
    ParameterStore params_;

    // forward caches
    Tensor fused_;
    LinearCache proj_cache_;
    std::vector<int> language_tokens_;
    std::vector<int> targets_;
    std::size_t visual_count_ = 0;
    std::vector<BlockState> blocks_;
    RmsNormCache final_norm_cache_;
    LinearCache head_cache_;
    Tensor logits_;
    bool has_forward_ = false;
};

// Deterministic pseudo-random feature stack matching the config geometry.
FeatureStack make_feature_stack(const KernelConfig& config, std::uint64_t seed);

// Whitespace tokens hashed into the vocabulary (toy demo tokenizer).
std::vector<int> toy_tokenize(std::string_view text, std::size_t vocab_size);

// Targets for next-token supervision: position i of the combined sequence
// predicts language token i+1; visual positions and the final position are
// unsupervised (-1).
std::vector<int> make_next_token_targets(std::size_t visual_tokens,
                                         std::span<const int> language_tokens);

}  // namespace rsit::kernels
