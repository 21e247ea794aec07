// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale model math with hand-written backward passes: visual feature
// fusion, multimodal concatenation, a pre-norm transformer block
// (single-head causal attention + RMSNorm + SiLU FFN), bias-tuned linear
// layers, and next-token cross-entropy. Everything is double precision so
// central-difference gradient checks are meaningful at 1e-4.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rsit/tensor.hpp"

namespace rsit::kernels {

// --- visual fusion ---------------------------------------------------------

struct FeatureStack {
    std::vector<Tensor> layer_features;  // each [N_tokens x C_i], shared N_tokens
    std::vector<Tensor> scale_features;  // each [h_i, w_i, C'_i]; last is coarsest
    int base_height = 0;                 // H
    int base_width = 0;                  // W
};

// Channel concatenation of the layer features: [N_tokens x sum(C_i)].
Tensor fuse_layers(const FeatureStack& stack);

// Average-pools every scale feature to the coarsest grid (the last one),
// concatenates channels, and flattens to tokens: [(h_m*w_m) x sum(C'_i)].
// Grids must divide evenly down to the coarsest grid.
Tensor fuse_scales(const FeatureStack& stack);

// Channel concatenation of two token matrices with equal row counts.
Tensor concat_channels(const Tensor& a, const Tensor& b);

struct ProjectionParams {
    const Tensor* weight = nullptr;  // [d x (sum C_i + sum C'_i)]
    const Tensor* bias = nullptr;    // [d]
};

// Channel-concatenates the fused layer and scale features (token counts
// must match) and applies one affine map to the model width.
Tensor project_visual(const Tensor& fused_layers, const Tensor& fused_scales,
                      const ProjectionParams& params);

struct TokenSequence {
    Tensor embeddings;  // [N x d]
    std::size_t visual_tokens = 0;
    std::size_t language_tokens = 0;

    std::size_t total_tokens() const { return visual_tokens + language_tokens; }
};

// Visual tokens first, language tokens after.
TokenSequence concat_multimodal(const Tensor& visual, const Tensor& language);

// --- linear layers ---------------------------------------------------------

// View of one linear layer's parameters. weight [out x in]; bias and the
// bias-tune pair are optional ([out] each). With alpha/beta present the
// layer computes alpha * (x W^T + bias + beta) elementwise per column.
struct LinearSpec {
    const Tensor* weight = nullptr;
    const Tensor* bias = nullptr;
    const Tensor* alpha = nullptr;
    const Tensor* beta = nullptr;
};

struct LinearCache {
    Tensor input;
    Tensor pre_scale;  // x W^T + bias + beta, needed for d(alpha)
};

Tensor linear_apply(const Tensor& x, const LinearSpec& spec, LinearCache* cache = nullptr);

struct LinearGrads {
    Tensor dx;
    Tensor dweight;
    std::optional<Tensor> dbias;
    std::optional<Tensor> dalpha;
    std::optional<Tensor> dbeta;
};

LinearGrads linear_backward(const LinearSpec& spec, const LinearCache& cache, const Tensor& dy);

// y = alpha * (W x + beta) on row-major token matrices: convenience entry
// point matching the bias-tuning formulation; alpha/beta are required here.
Tensor bias_tuned_linear(const Tensor& x, const Tensor& weight, const Tensor& alpha,
                         const Tensor& beta);

// --- rmsnorm -----------------------------------------------------------------

struct RmsNormParams {
    const Tensor* gamma = nullptr;  // [d]
    double epsilon = 1e-6;
};

struct RmsNormCache {
    Tensor input;
    std::vector<double> inv_rms;  // per row: 1/sqrt(mean(x^2) + eps)
};

// y = x / sqrt(mean(x^2) + eps) * gamma, per row.
Tensor rmsnorm(const Tensor& x, const RmsNormParams& params, RmsNormCache* cache = nullptr);

struct RmsNormGrads {
    Tensor dx;
    Tensor dgamma;
};

RmsNormGrads rmsnorm_backward(const RmsNormParams& params, const RmsNormCache& cache,
                              const Tensor& dy);

// --- transformer block -------------------------------------------------------

struct BlockParams {
    RmsNormParams attn_norm;
    LinearSpec q, k, v;
    RmsNormParams ffn_norm;
    LinearSpec up, down;
};

struct BlockCache {
    RmsNormCache attn_norm;
    LinearCache q, k, v;
    Tensor query_rows;    // Q(x)
    Tensor key_rows;      // K(x)
    Tensor value_rows;    // V(x)
    Tensor attn_weights;  // softmax(QK^T/sqrt(d)), masked entries zero
    Tensor after_attn;    // x + attention output
    RmsNormCache ffn_norm;
    LinearCache up;
    Tensor silu_input;    // up projection before SiLU
    LinearCache down;
};

// Pre-norm residual block: x + Attn(RMSNorm(x)), then + FFN(RMSNorm(.)).
// Attention is softmax(Q K^T / sqrt(d)) V, single head, causally masked.
Tensor attention_block(const Tensor& x, const BlockParams& params, BlockCache* cache = nullptr);

struct BlockGrads {
    Tensor dx;
    LinearGrads q, k, v, up, down;
    RmsNormGrads attn_norm, ffn_norm;
};

BlockGrads attention_block_backward(const BlockParams& params, const BlockCache& cache,
                                    const Tensor& dout);

// --- loss --------------------------------------------------------------------

// Mean of -log softmax(logits)[target] over supervised positions; target -1
// marks an unsupervised position. The autoregressive shift (position i
// predicts token i+1) is the caller's responsibility when building targets.
double next_token_cross_entropy(const Tensor& logits, std::span<const int> targets);

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor dlogits;
    std::size_t supervised = 0;
};

CrossEntropyResult next_token_cross_entropy_with_grad(const Tensor& logits,
                                                      std::span<const int> targets);

}  // namespace rsit::kernels
