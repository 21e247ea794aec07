// SPDX-License-Identifier: Apache-2.0

#include "rsit/model.hpp"

#include <cmath>
#include <random>

namespace rsit::kernels {

std::size_t KernelConfig::projection_input_width() const {
    std::size_t total = 0;
    for (const std::size_t c : layer_channels) total += c;
    for (const auto& s : scale_shapes) total += s[2];
    return total;
}

std::set<std::string> stage_trainable_set(const KernelConfig& config) {
    std::set<std::string> names;
    switch (config.stage) {
        case Stage::alignment_pretrain:
            names.insert("proj.weight");
            names.insert("proj.bias");
            break;
        case Stage::cross_modal:
            names.insert("proj.weight");
            names.insert("proj.bias");
            for (std::size_t i = 0; i < config.num_blocks; ++i) {
                const std::string b = "blocks." + std::to_string(i) + ".";
                for (const char* l : {"attn.q", "attn.k", "attn.v"}) {
                    names.insert(b + l + ".weight");
                    names.insert(b + l + ".bias");
                }
                names.insert(b + "attn_norm.gamma");
                names.insert(b + "ffn_norm.gamma");
            }
            names.insert("final_norm.gamma");
            break;
        case Stage::instruction_tuning:
            for (std::size_t i = 0; i < config.num_blocks; ++i) {
                const std::string b = "blocks." + std::to_string(i) + ".";
                for (const char* l : {"attn.q", "attn.k", "attn.v", "ffn.up", "ffn.down"}) {
                    names.insert(b + l + ".alpha");
                    names.insert(b + l + ".beta");
                }
            }
            names.insert("head.alpha");
            names.insert("head.beta");
            break;
        default: throw KernelError("unknown stage");
    }
    return names;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev,
                     double mean = 0.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

Tensor const_tensor(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = value;
    return t;
}

}  // namespace

LanguageModel::LanguageModel(KernelConfig config) : config_(std::move(config)) {
    const std::size_t d = config_.model_width;
    const std::size_t dff = config_.ffn_width_or_default();
    const std::size_t v = config_.vocab_size;
    const std::size_t c_in = config_.projection_input_width();
    const bool tuned = config_.stage == Stage::instruction_tuning;

    std::mt19937_64 rng(config_.init_seed);
    const double w_std = 0.2;

    params_.add("proj.weight", random_tensor({d, c_in}, rng, w_std));
    params_.add("proj.bias", Tensor({d}));
    params_.add("embed.weight", random_tensor({v, d}, rng, 0.5));

    auto add_bias_tune = [&](const std::string& prefix, std::size_t out) {
        // alpha starts near identity so the frozen model's behavior is
        // preserved at step zero; beta starts at zero.
        params_.add(prefix + ".alpha", random_tensor({out}, rng, 0.02, 1.0));
        params_.add(prefix + ".beta", Tensor({out}));
    };

    for (std::size_t i = 0; i < config_.num_blocks; ++i) {
        const std::string b = "blocks." + std::to_string(i) + ".";
        params_.add(b + "attn_norm.gamma", const_tensor({d}, 1.0));
        for (const char* l : {"attn.q", "attn.k", "attn.v"}) {
            params_.add(b + l + ".weight", random_tensor({d, d}, rng, w_std));
            params_.add(b + l + ".bias", Tensor({d}));
            if (tuned) add_bias_tune(b + l, d);
        }
        params_.add(b + "ffn_norm.gamma", const_tensor({d}, 1.0));
        params_.add(b + "ffn.up.weight", random_tensor({dff, d}, rng, w_std));
        if (tuned) add_bias_tune(b + "ffn.up", dff);
        params_.add(b + "ffn.down.weight", random_tensor({d, dff}, rng, w_std));
        if (tuned) add_bias_tune(b + "ffn.down", d);
    }
    params_.add("final_norm.gamma", const_tensor({d}, 1.0));
    params_.add("head.weight", random_tensor({v, d}, rng, w_std));
    if (tuned) add_bias_tune("head", v);

    const auto trainable = stage_trainable_set(config_);
    for (auto& p : params_.items()) p.trainable = trainable.count(p.name) > 0;
}

LinearSpec LanguageModel::linear_spec(const std::string& prefix, bool base_bias) {
    LinearSpec spec;
    spec.weight = &params_.get(prefix + ".weight").tensor;
    if (base_bias) spec.bias = &params_.get(prefix + ".bias").tensor;
    if (params_.contains(prefix + ".alpha")) {
        spec.alpha = &params_.get(prefix + ".alpha").tensor;
        spec.beta = &params_.get(prefix + ".beta").tensor;
    }
    return spec;
}

BlockParams LanguageModel::block_params(std::size_t block_index) {
    const std::string b = "blocks." + std::to_string(block_index) + ".";
    BlockParams p;
    p.attn_norm = {&params_.get(b + "attn_norm.gamma").tensor, 1e-6};
    p.q = linear_spec(b + "attn.q", true);
    p.k = linear_spec(b + "attn.k", true);
    p.v = linear_spec(b + "attn.v", true);
    p.ffn_norm = {&params_.get(b + "ffn_norm.gamma").tensor, 1e-6};
    p.up = linear_spec(b + "ffn.up", false);
    p.down = linear_spec(b + "ffn.down", false);
    return p;
}

double LanguageModel::forward(const FeatureStack& stack, std::span<const int> language_tokens,
                              std::span<const int> targets) {
    const std::size_t d = config_.model_width;

    const Tensor layer_part = fuse_layers(stack);
    const Tensor scale_part = fuse_scales(stack);
    fused_ = concat_channels(layer_part, scale_part);
    if (fused_.cols() != config_.projection_input_width())
        throw KernelError("forward: fused width does not match projection input");

    LinearSpec proj{&params_.get("proj.weight").tensor, &params_.get("proj.bias").tensor,
                    nullptr, nullptr};
    const Tensor visual = linear_apply(fused_, proj, &proj_cache_);

    language_tokens_.assign(language_tokens.begin(), language_tokens.end());
    TokenSequence seq;
    if (language_tokens.empty()) {
        seq.embeddings = visual;
        seq.visual_tokens = visual.rows();
        seq.language_tokens = 0;
    } else {
        const Tensor& embed = params_.get("embed.weight").tensor;
        Tensor language({language_tokens.size(), d});
        for (std::size_t i = 0; i < language_tokens.size(); ++i) {
            const int id = language_tokens[i];
            if (id < 0 || id >= static_cast<int>(config_.vocab_size))
                throw KernelError("forward: language token out of vocab");
            for (std::size_t c = 0; c < d; ++c)
                language.at(i, c) = embed.at(static_cast<std::size_t>(id), c);
        }
        seq = concat_multimodal(visual, language);
    }
    visual_count_ = seq.visual_tokens;

    blocks_.clear();
    blocks_.resize(config_.num_blocks);
    Tensor x = seq.embeddings;
    for (std::size_t i = 0; i < config_.num_blocks; ++i) {
        blocks_[i].params = block_params(i);
        x = attention_block(x, blocks_[i].params, &blocks_[i].cache);
    }

    RmsNormParams final_norm{&params_.get("final_norm.gamma").tensor, 1e-6};
    const Tensor final_out = rmsnorm(x, final_norm, &final_norm_cache_);
    logits_ = linear_apply(final_out, linear_spec("head", false), &head_cache_);

    targets_.assign(targets.begin(), targets.end());
    has_forward_ = true;
    return next_token_cross_entropy(logits_, targets_);
}

GradMap LanguageModel::backward() {
    if (!has_forward_) throw KernelError("backward called before forward");
    GradMap grads;
    auto put = [&](const std::string& name, Tensor g) { grads[name] = std::move(g); };

    const auto ce = next_token_cross_entropy_with_grad(logits_, targets_);

    const LinearSpec head = linear_spec("head", false);
    const LinearGrads head_grads = linear_backward(head, head_cache_, ce.dlogits);
    put("head.weight", head_grads.dweight);
    if (head_grads.dalpha) put("head.alpha", *head_grads.dalpha);
    if (head_grads.dbeta) put("head.beta", *head_grads.dbeta);

    RmsNormParams final_norm{&params_.get("final_norm.gamma").tensor, 1e-6};
    const RmsNormGrads fn = rmsnorm_backward(final_norm, final_norm_cache_, head_grads.dx);
    put("final_norm.gamma", fn.dgamma);

    Tensor dx = fn.dx;
    for (std::size_t i = config_.num_blocks; i-- > 0;) {
        const std::string b = "blocks." + std::to_string(i) + ".";
        const BlockGrads bg =
            attention_block_backward(blocks_[i].params, blocks_[i].cache, dx);
        auto put_linear = [&](const std::string& prefix, const LinearGrads& g, bool base_bias) {
            put(prefix + ".weight", g.dweight);
            if (base_bias && g.dbias) put(prefix + ".bias", *g.dbias);
            if (g.dalpha) put(prefix + ".alpha", *g.dalpha);
            if (g.dbeta) put(prefix + ".beta", *g.dbeta);
        };
        put_linear(b + "attn.q", bg.q, true);
        put_linear(b + "attn.k", bg.k, true);
        put_linear(b + "attn.v", bg.v, true);
        put_linear(b + "ffn.up", bg.up, false);
        put_linear(b + "ffn.down", bg.down, false);
        put(b + "attn_norm.gamma", bg.attn_norm.dgamma);
        put(b + "ffn_norm.gamma", bg.ffn_norm.dgamma);
        dx = bg.dx;
    }

    // Split the sequence gradient into the visual (projection) part and the
    // language (embedding) part.
    const std::size_t d = config_.model_width;
    Tensor dvisual({visual_count_, d});
    for (std::size_t i = 0; i < visual_count_; ++i)
        for (std::size_t c = 0; c < d; ++c) dvisual.at(i, c) = dx.at(i, c);

    LinearSpec proj{&params_.get("proj.weight").tensor, &params_.get("proj.bias").tensor,
                    nullptr, nullptr};
    const LinearGrads proj_grads = linear_backward(proj, proj_cache_, dvisual);
    put("proj.weight", proj_grads.dweight);
    put("proj.bias", *proj_grads.dbias);

    Tensor dembed({config_.vocab_size, d});
    for (std::size_t i = 0; i < language_tokens_.size(); ++i) {
        const auto row = static_cast<std::size_t>(language_tokens_[i]);
        for (std::size_t c = 0; c < d; ++c)
            dembed.at(row, c) += dx.at(visual_count_ + i, c);
    }
    put("embed.weight", dembed);
    return grads;
}

FeatureStack make_feature_stack(const KernelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    FeatureStack stack;
    const std::size_t tokens = config.visual_tokens();
    for (const std::size_t c : config.layer_channels) {
        Tensor t({tokens, c});
        for (double& v : t.values()) v = dist(rng);
        stack.layer_features.push_back(std::move(t));
    }
    for (const auto& s : config.scale_shapes) {
        Tensor t({s[0], s[1], s[2]});
        for (double& v : t.values()) v = dist(rng);
        stack.scale_features.push_back(std::move(t));
    }
    stack.base_height = static_cast<int>(config.scale_shapes.front()[0] * 4);
    stack.base_width = static_cast<int>(config.scale_shapes.front()[1] * 4);
    return stack;
}

std::vector<int> toy_tokenize(std::string_view text, std::size_t vocab_size) {
    std::vector<int> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        if (j > i) {
            std::uint64_t h = 1469598103934665603ull;
            for (std::size_t k = i; k < j; ++k) {
                h ^= static_cast<unsigned char>(text[k]);
                h *= 1099511628211ull;
            }
            ids.push_back(static_cast<int>(h % vocab_size));
        }
        i = j;
    }
    return ids;
}

std::vector<int> make_next_token_targets(std::size_t visual_tokens,
                                         std::span<const int> language_tokens) {
    std::vector<int> targets(visual_tokens + language_tokens.size(), -1);
    for (std::size_t i = 0; i + 1 < language_tokens.size(); ++i) {
        targets[visual_tokens + i] = language_tokens[i + 1];
    }
    return targets;
}

}  // namespace rsit::kernels
