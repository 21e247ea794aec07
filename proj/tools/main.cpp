// SPDX-License-Identifier: Apache-2.0
//
// rsit command line: compile annotation sources into instruction records,
// validate corpora, emit stats tables, evaluate prediction files, and run
// the kernel verification harness.
//
// Exit codes: 0 success, 1 domain errors (failed strict compile, alignment
// or metric errors, failed kernel checks), 2 I/O or usage errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rsit/compiler.hpp"
#include "rsit/eval_io.hpp"
#include "rsit/eval_report.hpp"
#include "rsit/gradcheck.hpp"
#include "rsit/ingest.hpp"
#include "rsit/model.hpp"
#include "rsit/optim.hpp"

namespace {

using namespace rsit;

constexpr int kExitOk = 0;
constexpr int kExitDomainError = 1;
constexpr int kExitIoError = 2;

struct CommonFlags {
    std::string manifest;
    bool strict = false;
    bool lenient = false;
    std::optional<std::uint64_t> seed;
};

void add_mode_flags(CLI::App* cmd, CommonFlags& flags) {
    auto* strict = cmd->add_flag("--strict", flags.strict, "reject out-of-bounds boxes, abort on errors");
    cmd->add_flag("--lenient", flags.lenient, "clamp out-of-bounds boxes, skip bad samples")
        ->excludes(strict);
}

// Manifest options patched with whatever flags the user passed explicitly.
compiler::CorpusManifest load_with_overrides(const CLI::App* cmd, const CommonFlags& flags,
                                             std::optional<std::string> box_format,
                                             std::optional<bool> referring) {
    auto manifest = compiler::load_manifest(flags.manifest);
    if (flags.strict) manifest.options.strict = true;
    if (flags.lenient) manifest.options.strict = false;
    if (flags.seed) manifest.options.seed = *flags.seed;
    const auto* shuffle = cmd->get_option_no_throw("--shuffle-rounds");
    if (shuffle && shuffle->count() > 0) manifest.options.shuffle_rounds = true;
    if (box_format) {
        const auto fmt = *box_format == "obb" ? compiler::BoxFormat::obb : compiler::BoxFormat::hbb;
        for (auto& e : manifest.entries) e.box_format = fmt;
    }
    if (referring) {
        for (auto& e : manifest.entries) e.referring = *referring;
    }
    return manifest;
}

void print_diagnostics(const std::vector<ingest::Diagnostic>& diagnostics) {
    for (const auto& d : diagnostics) std::cerr << ingest::format_diagnostic(d) << "\n";
}

int cmd_compile(const CLI::App* cmd, const CommonFlags& flags, const std::string& out,
                std::string stats_out, std::optional<std::string> box_format,
                std::optional<bool> referring) {
    auto manifest = load_with_overrides(cmd, flags, box_format, referring);
    const auto corpus = compiler::compile_corpus(manifest);
    print_diagnostics(corpus.diagnostics);
    if (manifest.options.strict && corpus.has_errors()) {
        std::cerr << "compile failed: errors in strict mode\n";
        return kExitDomainError;
    }
    if (stats_out.empty()) stats_out = out + ".stats.tsv";
    compiler::write_records_file(out, corpus.records);
    compiler::write_stats_file(stats_out, corpus.stats);
    std::cout << "wrote " << corpus.records.size() << " records to " << out << "\n";
    return kExitOk;
}

int cmd_validate(const CLI::App* cmd, const CommonFlags& flags) {
    auto manifest = load_with_overrides(cmd, flags, std::nullopt, std::nullopt);
    const auto corpus = compiler::compile_corpus(manifest);
    print_diagnostics(corpus.diagnostics);
    std::cout << corpus.records.size() << " records, " << corpus.diagnostics.size()
              << " diagnostics\n";
    return corpus.has_errors() ? kExitDomainError : kExitOk;
}

int cmd_stats(const CLI::App* cmd, const CommonFlags& flags, const std::string& out) {
    auto manifest = load_with_overrides(cmd, flags, std::nullopt, std::nullopt);
    const auto corpus = compiler::compile_corpus(manifest);
    print_diagnostics(corpus.diagnostics);
    if (manifest.options.strict && corpus.has_errors()) return kExitDomainError;
    if (out.empty()) {
        std::cout << compiler::stats_to_string(corpus.stats);
    } else {
        compiler::write_stats_file(out, corpus.stats);
    }
    return kExitOk;
}

enum class EvalKind { caption, vqa, cls, ground, det };

int cmd_eval(EvalKind kind, const std::string& truth, const std::string& pred,
             const std::string& out, std::uint64_t seed,
             const evalio::DetectionEvalOptions& det_options) {
    const auto records = compiler::read_records_file(truth);
    metrics::EvalReport report;
    switch (kind) {
        case EvalKind::caption: report = evalio::eval_caption(records, pred); break;
        case EvalKind::vqa: report = evalio::eval_vqa(records, pred); break;
        case EvalKind::cls: report = evalio::eval_classification(records, pred); break;
        case EvalKind::ground: report = evalio::eval_grounding(records, pred); break;
        case EvalKind::det: report = evalio::eval_detection(records, pred, det_options); break;
    }
    report.seed = seed;
    if (out.empty()) {
        std::cout << metrics::report_to_string(report);
    } else {
        metrics::write_report(out, report);
        std::cout << metrics::report_to_string(report);
    }
    return kExitOk;
}

int cmd_kernel_check(int stage, std::uint64_t seed, const std::string& out, bool corrupt) {
    if (stage != 2 && stage != 3) {
        std::cerr << "kernel-check: --stage must be 2 or 3\n";
        return kExitIoError;
    }
    kernels::KernelConfig config;
    config.stage = stage == 2 ? kernels::Stage::cross_modal : kernels::Stage::instruction_tuning;
    config.num_blocks = 2;
    config.model_width = 8;
    config.vocab_size = 16;
    config.ffn_width = 12;
    config.init_seed = seed;

    kernels::LanguageModel model(config);
    const auto stack = kernels::make_feature_stack(config, seed + 1);
    // 4 visual + 4 language tokens
    const auto tokens = kernels::toy_tokenize("detect all the objects", config.vocab_size);
    const auto targets = kernels::make_next_token_targets(config.visual_tokens(), tokens);
    const auto names = kernels::stage_trainable_set(config);

    kernels::GradcheckOptions options;
    options.corrupt = corrupt;
    const auto report = kernels::gradcheck(model, stack, tokens, targets, names, options);

    // Freeze invariance: a short optimization run must leave every frozen
    // parameter bit-identical.
    std::map<std::string, kernels::Tensor> initial;
    for (const auto& p : model.params().items()) initial[p.name] = p.tensor;
    kernels::AdamWConfig adamw;
    adamw.learning_rate = 1e-3;
    kernels::AdamW opt(adamw);
    for (int step = 0; step < 25; ++step) {
        model.forward(stack, tokens, targets);
        auto grads = model.backward();
        for (auto it = grads.begin(); it != grads.end();) {
            it = names.count(it->first) ? std::next(it) : grads.erase(it);
        }
        opt.step(model.params(), grads);
    }
    bool freeze_ok = true;
    for (const auto& p : model.params().items()) {
        if (names.count(p.name)) continue;
        const auto& before = initial.at(p.name);
        if (!(before == p.tensor)) freeze_ok = false;
    }

    std::string text = kernels::gradcheck_report_to_string(report);
    text.insert(0, "# stage: " + std::to_string(stage) + "\n# seed: " + std::to_string(seed) +
                       "\n# freeze_invariance: " + (freeze_ok ? "pass" : "FAIL") + "\n");
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) {
            std::cerr << "cannot write report: " << out << "\n";
            return kExitIoError;
        }
        f << text;
        std::cout << text;
    }
    const bool pass = report.all_pass() && freeze_ok;
    std::cout << (pass ? "kernel-check: all checks passed\n"
                       : "kernel-check: FAILURES detected\n");
    return pass ? kExitOk : kExitDomainError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"remote-sensing instruction-tuning toolkit"};
    app.require_subcommand(1);

    // compile
    CommonFlags compile_flags;
    std::string compile_out, compile_stats_out;
    std::string compile_box_format;
    bool compile_referring = false;
    bool compile_shuffle = false;
    auto* compile = app.add_subcommand("compile", "compile sources into instruction records");
    compile->add_option("--manifest", compile_flags.manifest, "corpus manifest (json)")
        ->required();
    compile->add_option("--out", compile_out, "output records file (jsonl)")->required();
    compile->add_option("--stats-out", compile_stats_out,
                        "stats table file (default: <out>.stats.tsv)");
    add_mode_flags(compile, compile_flags);
    compile->add_option("--box-format", compile_box_format, "force hbb or obb for all entries")
        ->check(CLI::IsMember({"hbb", "obb"}));
    compile->add_flag("--referring", compile_referring, "force referring-detection rounds");
    compile->add_option("--seed", compile_flags.seed, "corpus seed (default 0)");
    compile->add_flag("--shuffle-rounds", compile_shuffle, "shuffle round order using the seed");

    // validate
    CommonFlags validate_flags;
    auto* validate = app.add_subcommand("validate", "parse sources and report diagnostics");
    validate->add_option("--manifest", validate_flags.manifest, "corpus manifest (json)")
        ->required();
    add_mode_flags(validate, validate_flags);

    // stats
    CommonFlags stats_flags;
    std::string stats_out;
    auto* stats = app.add_subcommand("stats", "emit the per-(task,source,modality) stats table");
    stats->add_option("--manifest", stats_flags.manifest, "corpus manifest (json)")->required();
    stats->add_option("--out", stats_out, "stats file (default: stdout)");
    add_mode_flags(stats, stats_flags);
    stats->add_option("--seed", stats_flags.seed, "corpus seed (default 0)");

    // eval-*
    struct EvalArgs {
        std::string truth, pred, out;
        std::uint64_t seed = 0;
    };
    auto add_eval = [&](const char* name, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        auto args = std::make_shared<EvalArgs>();
        cmd->add_option("--truth", args->truth, "compiled ground-truth records (jsonl)")
            ->required();
        cmd->add_option("--pred", args->pred, "prediction file (jsonl)")->required();
        cmd->add_option("--out", args->out, "report file (default: stdout)");
        cmd->add_option("--seed", args->seed, "echoed into the report");
        return std::make_pair(cmd, args);
    };
    auto [eval_caption, caption_args] = add_eval("eval-caption", "caption metrics");
    auto [eval_vqa, vqa_args] = add_eval("eval-vqa", "vqa answer accuracy");
    auto [eval_cls, cls_args] = add_eval("eval-cls", "classification accuracy");
    auto [eval_ground, ground_args] = add_eval("eval-ground", "grounding Pr@t / mIoU / cIoU");
    auto [eval_det, det_args] = add_eval("eval-det", "detection average precision");

    std::string det_box_format = "hbb";
    std::optional<double> det_threshold;
    std::string det_score_file;
    std::optional<double> det_score_threshold;
    std::string det_category;
    bool det_strict = false, det_lenient = false;
    eval_det->add_option("--box-format", det_box_format, "hbb or obb comparison")
        ->check(CLI::IsMember({"hbb", "obb"}));
    eval_det->add_option("--iou-threshold", det_threshold,
                         "extra AP threshold beside ap@40/ap@50");
    eval_det->add_option("--score-file", det_score_file, "external confidence scores");
    eval_det->add_option("--score-threshold", det_score_threshold,
                         "drop predictions scoring below the threshold");
    eval_det->add_option("--category", det_category, "restrict to one category");
    auto* det_strict_flag =
        eval_det->add_flag("--strict", det_strict, "require a score for every prediction");
    eval_det->add_flag("--lenient", det_lenient, "missing scores become 0")
        ->excludes(det_strict_flag);

    // kernel-check
    int kernel_stage = 2;
    std::uint64_t kernel_seed = 0;
    std::string kernel_out;
    bool kernel_corrupt = false;
    auto* kernel = app.add_subcommand("kernel-check", "gradient and freeze verification");
    kernel->add_option("--stage", kernel_stage, "training stage (2 or 3)")->required();
    kernel->add_option("--seed", kernel_seed, "init seed (default 0)");
    kernel->add_option("--out", kernel_out, "report file (default: stdout)");
    kernel->add_flag("--corrupt-grad", kernel_corrupt,
                     "debug: corrupt one analytic gradient (must fail)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (compile->parsed()) {
            return cmd_compile(compile, compile_flags, compile_out, compile_stats_out,
                               compile->count("--box-format")
                                   ? std::optional<std::string>(compile_box_format)
                                   : std::nullopt,
                               compile->count("--referring") ? std::optional<bool>(true)
                                                             : std::nullopt);
        }
        if (validate->parsed()) return cmd_validate(validate, validate_flags);
        if (stats->parsed()) return cmd_stats(stats, stats_flags, stats_out);
        if (eval_caption->parsed())
            return cmd_eval(EvalKind::caption, caption_args->truth, caption_args->pred,
                            caption_args->out, caption_args->seed, {});
        if (eval_vqa->parsed())
            return cmd_eval(EvalKind::vqa, vqa_args->truth, vqa_args->pred, vqa_args->out,
                            vqa_args->seed, {});
        if (eval_cls->parsed())
            return cmd_eval(EvalKind::cls, cls_args->truth, cls_args->pred, cls_args->out,
                            cls_args->seed, {});
        if (eval_ground->parsed())
            return cmd_eval(EvalKind::ground, ground_args->truth, ground_args->pred,
                            ground_args->out, ground_args->seed, {});
        if (eval_det->parsed()) {
            evalio::DetectionEvalOptions options;
            options.kind =
                det_box_format == "obb" ? geom::BoxKind::obb : geom::BoxKind::hbb;
            options.extra_threshold = det_threshold;
            if (!det_score_file.empty()) options.score_file = det_score_file;
            options.score_threshold = det_score_threshold;
            options.strict = !det_lenient;
            if (!det_category.empty()) options.category = det_category;
            return cmd_eval(EvalKind::det, det_args->truth, det_args->pred, det_args->out,
                            det_args->seed, options);
        }
        if (kernel->parsed())
            return cmd_kernel_check(kernel_stage, kernel_seed, kernel_out, kernel_corrupt);
    } catch (const evalio::AlignmentError& e) {
        std::cerr << "error: " << e.what() << " (first offending id: " << e.id() << ")\n";
        return kExitDomainError;
    } catch (const ingest::IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    } catch (const compiler::CompileError& e) {
        // File-level problems (unreadable manifest/records) are I/O errors.
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        return what.find("cannot open") != std::string::npos ||
                       what.find("cannot write") != std::string::npos ||
                       what.find("manifest") != std::string::npos
                   ? kExitIoError
                   : kExitDomainError;
    } catch (const metrics::MetricsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        return what.find("cannot open") != std::string::npos ? kExitIoError : kExitDomainError;
    } catch (const kernels::KernelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIoError;
    }
    return kExitIoError;
}
