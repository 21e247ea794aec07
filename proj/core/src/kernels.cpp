// SPDX-License-Identifier: Apache-2.0

#include "rsit/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace rsit::kernels {

Tensor fuse_layers(const FeatureStack& stack) {
    if (stack.layer_features.empty()) throw KernelError("fuse_layers: no layer features");
    const std::size_t tokens = stack.layer_features.front().rows();
    std::size_t total_channels = 0;
    for (const auto& f : stack.layer_features) {
        if (f.rows() != tokens) throw KernelError("fuse_layers: token count mismatch");
        total_channels += f.cols();
    }
    Tensor out({tokens, total_channels});
    std::size_t offset = 0;
    for (const auto& f : stack.layer_features) {
        for (std::size_t i = 0; i < tokens; ++i) {
            for (std::size_t c = 0; c < f.cols(); ++c) out.at(i, offset + c) = f.at(i, c);
        }
        offset += f.cols();
    }
    return out;
}

Tensor fuse_scales(const FeatureStack& stack) {
    if (stack.scale_features.empty()) throw KernelError("fuse_scales: no scale features");
    for (const auto& f : stack.scale_features) {
        if (f.ndim() != 3) throw KernelError("fuse_scales: scale features must be h x w x c");
    }
    const auto& coarsest = stack.scale_features.back().shape();
    const std::size_t gh = coarsest[0], gw = coarsest[1];

    std::size_t total_channels = 0;
    for (const auto& f : stack.scale_features) total_channels += f.shape()[2];

    Tensor out({gh * gw, total_channels});
    std::size_t offset = 0;
    for (const auto& f : stack.scale_features) {
        const std::size_t h = f.shape()[0], w = f.shape()[1], c = f.shape()[2];
        if (h % gh != 0 || w % gw != 0)
            throw KernelError("fuse_scales: grid not divisible by the coarsest grid");
        const std::size_t bh = h / gh, bw = w / gw;
        const double block = static_cast<double>(bh * bw);
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (std::size_t y = gy * bh; y < (gy + 1) * bh; ++y) {
                        for (std::size_t x = gx * bw; x < (gx + 1) * bw; ++x) {
                            acc += f.data()[(y * w + x) * c + ch];
                        }
                    }
                    out.at(gy * gw + gx, offset + ch) = acc / block;
                }
            }
        }
        offset += c;
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw KernelError("concat_channels: row count mismatch");
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(i, c) = a.at(i, c);
        for (std::size_t c = 0; c < b.cols(); ++c) out.at(i, a.cols() + c) = b.at(i, c);
    }
    return out;
}

Tensor project_visual(const Tensor& fused_layers, const Tensor& fused_scales,
                      const ProjectionParams& params) {
    if (!params.weight) throw KernelError("project_visual: missing weight");
    const Tensor combined = concat_channels(fused_layers, fused_scales);
    if (combined.cols() != params.weight->cols())
        throw KernelError("project_visual: fused width does not match projection input");
    LinearSpec spec{params.weight, params.bias, nullptr, nullptr};
    return linear_apply(combined, spec);
}

TokenSequence concat_multimodal(const Tensor& visual, const Tensor& language) {
    if (language.numel() > 0 && visual.cols() != language.cols())
        throw KernelError("concat_multimodal: embedding width mismatch");
    const std::size_t n_l = language.numel() > 0 ? language.rows() : 0;
    TokenSequence seq;
    seq.visual_tokens = visual.rows();
    seq.language_tokens = n_l;
    seq.embeddings = Tensor({visual.rows() + n_l, visual.cols()});
    for (std::size_t i = 0; i < visual.rows(); ++i) {
        for (std::size_t c = 0; c < visual.cols(); ++c)
            seq.embeddings.at(i, c) = visual.at(i, c);
    }
    for (std::size_t i = 0; i < n_l; ++i) {
        for (std::size_t c = 0; c < visual.cols(); ++c)
            seq.embeddings.at(visual.rows() + i, c) = language.at(i, c);
    }
    return seq;
}

Tensor linear_apply(const Tensor& x, const LinearSpec& spec, LinearCache* cache) {
    if (!spec.weight) throw KernelError("linear_apply: missing weight");
    Tensor t = matmul_nt(x, *spec.weight);
    if (spec.bias) add_row_vector(t, *spec.bias);
    if (spec.beta) add_row_vector(t, *spec.beta);
    if (cache) {
        cache->input = x;
        cache->pre_scale = t;
    }
    if (spec.alpha) {
        const Tensor& alpha = *spec.alpha;
        if (alpha.numel() != t.cols()) throw KernelError("linear_apply: alpha extent mismatch");
        for (std::size_t i = 0; i < t.rows(); ++i) {
            for (std::size_t o = 0; o < t.cols(); ++o) t.at(i, o) = alpha[o] * t.at(i, o);
        }
    }
    return t;
}

LinearGrads linear_backward(const LinearSpec& spec, const LinearCache& cache, const Tensor& dy) {
    LinearGrads grads;
    Tensor dt = dy;
    if (spec.alpha) {
        const Tensor& alpha = *spec.alpha;
        Tensor dalpha({alpha.numel()});
        for (std::size_t i = 0; i < dy.rows(); ++i) {
            for (std::size_t o = 0; o < dy.cols(); ++o) {
                dalpha[o] += dy.at(i, o) * cache.pre_scale.at(i, o);
                dt.at(i, o) = dy.at(i, o) * alpha[o];
            }
        }
        grads.dalpha = std::move(dalpha);
    }
    if (spec.beta) grads.dbeta = column_sums(dt);
    if (spec.bias) grads.dbias = column_sums(dt);
    grads.dweight = matmul_tn(dt, cache.input);
    grads.dx = matmul(dt, *spec.weight);
    return grads;
}

Tensor bias_tuned_linear(const Tensor& x, const Tensor& weight, const Tensor& alpha,
                         const Tensor& beta) {
    LinearSpec spec{&weight, nullptr, &alpha, &beta};
    return linear_apply(x, spec);
}

Tensor rmsnorm(const Tensor& x, const RmsNormParams& params, RmsNormCache* cache) {
    if (!params.gamma) throw KernelError("rmsnorm: missing gamma");
    const Tensor& gamma = *params.gamma;
    if (gamma.numel() != x.cols()) throw KernelError("rmsnorm: gamma extent mismatch");
    if (!(params.epsilon > 0.0)) throw KernelError("rmsnorm: epsilon must be positive");

    Tensor out({x.rows(), x.cols()});
    std::vector<double> inv(x.rows());
    const double n = static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mean_sq = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean_sq += x.at(i, c) * x.at(i, c);
        mean_sq /= n;
        inv[i] = 1.0 / std::sqrt(mean_sq + params.epsilon);
        for (std::size_t c = 0; c < x.cols(); ++c) out.at(i, c) = x.at(i, c) * inv[i] * gamma[c];
    }
    if (cache) {
        cache->input = x;
        cache->inv_rms = std::move(inv);
    }
    return out;
}

RmsNormGrads rmsnorm_backward(const RmsNormParams& params, const RmsNormCache& cache,
                              const Tensor& dy) {
    const Tensor& x = cache.input;
    const Tensor& gamma = *params.gamma;
    const double n = static_cast<double>(x.cols());

    RmsNormGrads grads;
    grads.dx = Tensor({x.rows(), x.cols()});
    grads.dgamma = Tensor({gamma.numel()});
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double inv = cache.inv_rms[i];
        double dot = 0.0;  // sum_j (dy_j * gamma_j) * x_j
        for (std::size_t c = 0; c < x.cols(); ++c) {
            grads.dgamma[c] += dy.at(i, c) * x.at(i, c) * inv;
            dot += dy.at(i, c) * gamma[c] * x.at(i, c);
        }
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double g = dy.at(i, c) * gamma[c];
            grads.dx.at(i, c) = inv * g - x.at(i, c) * inv * inv * inv * dot / n;
        }
    }
    return grads;
}

namespace {

double silu(double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return v * s;
}

double silu_grad(double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
}

// Row softmax over the causal prefix; masked entries are exactly zero.
Tensor causal_softmax(const Tensor& scores) {
    Tensor out({scores.rows(), scores.cols()});
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double max_v = scores.at(i, 0);
        for (std::size_t j = 1; j <= i; ++j) max_v = std::max(max_v, scores.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j <= i; ++j) denom += std::exp(scores.at(i, j) - max_v);
        for (std::size_t j = 0; j <= i; ++j)
            out.at(i, j) = std::exp(scores.at(i, j) - max_v) / denom;
    }
    return out;
}

}  // namespace

Tensor attention_block(const Tensor& x, const BlockParams& params, BlockCache* cache) {
    const std::size_t d = x.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    BlockCache local;
    BlockCache* c = cache ? cache : &local;

    const Tensor normed = rmsnorm(x, params.attn_norm, &c->attn_norm);
    c->query_rows = linear_apply(normed, params.q, &c->q);
    c->key_rows = linear_apply(normed, params.k, &c->k);
    c->value_rows = linear_apply(normed, params.v, &c->v);

    Tensor scores = matmul_nt(c->query_rows, c->key_rows);  // [N x N]
    for (double& s : scores.values()) s *= scale;
    c->attn_weights = causal_softmax(scores);

    const Tensor attended = matmul(c->attn_weights, c->value_rows);
    Tensor after_attn = x;
    for (std::size_t i = 0; i < after_attn.numel(); ++i) after_attn[i] += attended[i];
    c->after_attn = after_attn;

    const Tensor ffn_in = rmsnorm(after_attn, params.ffn_norm, &c->ffn_norm);
    c->silu_input = linear_apply(ffn_in, params.up, &c->up);
    Tensor activated = c->silu_input;
    for (double& u : activated.values()) u = silu(u);
    const Tensor down = linear_apply(activated, params.down, &c->down);

    Tensor out = after_attn;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += down[i];
    return out;
}

BlockGrads attention_block_backward(const BlockParams& params, const BlockCache& cache,
                                    const Tensor& dout) {
    const std::size_t d = cache.attn_norm.input.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    BlockGrads grads;

    // FFN branch: out = after_attn + down(silu(up(rms(after_attn))))
    grads.down = linear_backward(params.down, cache.down, dout);
    Tensor dsilu_in = grads.down.dx;
    for (std::size_t i = 0; i < dsilu_in.numel(); ++i)
        dsilu_in[i] *= silu_grad(cache.silu_input[i]);
    grads.up = linear_backward(params.up, cache.up, dsilu_in);
    grads.ffn_norm = rmsnorm_backward(params.ffn_norm, cache.ffn_norm, grads.up.dx);

    Tensor dafter = dout;  // residual path
    for (std::size_t i = 0; i < dafter.numel(); ++i) dafter[i] += grads.ffn_norm.dx[i];

    // Attention branch: after_attn = x + A V
    const Tensor& a = cache.attn_weights;
    const Tensor dv = matmul_tn(a, dafter);
    Tensor da = matmul_nt(dafter, cache.value_rows);

    // Softmax backward per causal row.
    Tensor dscores({a.rows(), a.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double weighted = 0.0;
        for (std::size_t j = 0; j <= i; ++j) weighted += a.at(i, j) * da.at(i, j);
        for (std::size_t j = 0; j <= i; ++j)
            dscores.at(i, j) = a.at(i, j) * (da.at(i, j) - weighted);
    }
    for (double& s : dscores.values()) s *= scale;

    const Tensor dq = matmul(dscores, cache.key_rows);
    const Tensor dk = matmul_tn(dscores, cache.query_rows);

    grads.q = linear_backward(params.q, cache.q, dq);
    grads.k = linear_backward(params.k, cache.k, dk);
    grads.v = linear_backward(params.v, cache.v, dv);

    Tensor dnormed = grads.q.dx;
    for (std::size_t i = 0; i < dnormed.numel(); ++i)
        dnormed[i] += grads.k.dx[i] + grads.v.dx[i];
    grads.attn_norm = rmsnorm_backward(params.attn_norm, cache.attn_norm, dnormed);

    grads.dx = dafter;
    for (std::size_t i = 0; i < grads.dx.numel(); ++i) grads.dx[i] += grads.attn_norm.dx[i];
    return grads;
}

double next_token_cross_entropy(const Tensor& logits, std::span<const int> targets) {
    return next_token_cross_entropy_with_grad(logits, targets).loss;
}

CrossEntropyResult next_token_cross_entropy_with_grad(const Tensor& logits,
                                                      std::span<const int> targets) {
    if (targets.size() != logits.rows())
        throw KernelError("cross entropy: one target per position required");
    const std::size_t v = logits.cols();

    CrossEntropyResult result;
    result.dlogits = Tensor::zeros_like(logits);

    for (const int t : targets) {
        if (t >= 0) ++result.supervised;
        if (t >= static_cast<int>(v)) throw KernelError("cross entropy: target out of vocab");
    }
    if (result.supervised == 0) throw KernelError("cross entropy: no supervised positions");
    const double inv_count = 1.0 / static_cast<double>(result.supervised);

    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (targets[i] < 0) continue;
        double max_v = logits.at(i, 0);
        for (std::size_t j = 1; j < v; ++j) max_v = std::max(max_v, logits.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < v; ++j) denom += std::exp(logits.at(i, j) - max_v);
        const double log_denom = std::log(denom);
        const double log_p =
            logits.at(i, static_cast<std::size_t>(targets[i])) - max_v - log_denom;
        result.loss -= log_p * inv_count;
        for (std::size_t j = 0; j < v; ++j) {
            const double p = std::exp(logits.at(i, j) - max_v) / denom;
            result.dlogits.at(i, j) =
                (p - (j == static_cast<std::size_t>(targets[i]) ? 1.0 : 0.0)) * inv_count;
        }
    }
    return result;
}

}  // namespace rsit::kernels
