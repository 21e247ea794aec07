// SPDX-License-Identifier: Apache-2.0

#include "rsit/text_metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "rsit/strings.hpp"

namespace rsit::metrics {

namespace {

constexpr int kMaxNgram = 4;
constexpr double kCiderSigma = 6.0;
constexpr double kRougeBeta = 1.2;

using Tokens = std::vector<std::string>;

void validate_set(const CaptionEvalSet& set) {
    if (set.empty()) throw MetricsError("empty caption eval set");
    for (const auto& item : set) {
        if (item.references.empty())
            throw MetricsError("caption eval item without references");
    }
}

// N-grams as separator-joined keys; token text never contains blanks.
using NgramCounts = std::unordered_map<std::string, int>;

NgramCounts ngram_counts(const Tokens& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < n; ++k) {
            key += ' ';
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::vector<std::string> tokenize_caption(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (const char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u)) {
            cleaned += ' ';
        } else if (c >= 'A' && c <= 'Z') {
            cleaned += static_cast<char>(c - 'A' + 'a');
        } else {
            cleaned += c;
        }
    }
    return strings::split_ws(cleaned);
}

double bleu(const CaptionEvalSet& set, int n) {
    validate_set(set);
    if (n < 1 || n > kMaxNgram) throw MetricsError("bleu order must be in 1..4");

    std::array<long long, kMaxNgram> correct{}, guess{};
    long long test_len = 0, ref_len = 0;

    for (const auto& item : set) {
        const Tokens cand = tokenize_caption(item.candidate);
        std::vector<Tokens> refs;
        for (const auto& r : item.references) refs.push_back(tokenize_caption(r));

        test_len += static_cast<long long>(cand.size());
        // Closest reference length; ties resolved to the shorter one.
        long long best = static_cast<long long>(refs[0].size());
        for (const auto& r : refs) {
            const long long len = static_cast<long long>(r.size());
            const auto diff = [&](long long l) {
                return std::llabs(l - static_cast<long long>(cand.size()));
            };
            if (diff(len) < diff(best) || (diff(len) == diff(best) && len < best)) best = len;
        }
        ref_len += best;

        for (int k = 1; k <= n; ++k) {
            const NgramCounts cand_counts = ngram_counts(cand, k);
            NgramCounts max_ref;
            for (const auto& r : refs) {
                for (const auto& [gram, count] : ngram_counts(r, k)) {
                    max_ref[gram] = std::max(max_ref[gram], count);
                }
            }
            for (const auto& [gram, count] : cand_counts) {
                const auto it = max_ref.find(gram);
                correct[k - 1] += std::min(count, it == max_ref.end() ? 0 : it->second);
            }
            const long long total = static_cast<long long>(cand.size()) - k + 1;
            guess[k - 1] += std::max<long long>(0, total);
        }
    }

    double score = 1.0;
    for (int k = 1; k <= n; ++k) {
        if (guess[k - 1] == 0) return 0.0;
        const double p = static_cast<double>(correct[k - 1]) / static_cast<double>(guess[k - 1]);
        score *= std::pow(p, 1.0 / n);
    }
    if (test_len == 0) return 0.0;
    if (test_len <= ref_len) {
        score *= std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(test_len));
    }
    return score;
}

double rouge_l(const CaptionEvalSet& set) {
    validate_set(set);
    double total = 0.0;
    for (const auto& item : set) {
        const Tokens cand = tokenize_caption(item.candidate);
        double best = 0.0;
        for (const auto& r : item.references) {
            const Tokens ref = tokenize_caption(r);
            const double lcs = static_cast<double>(lcs_length(cand, ref));
            if (lcs == 0.0 || cand.empty() || ref.empty()) continue;
            const double prec = lcs / static_cast<double>(cand.size());
            const double rec = lcs / static_cast<double>(ref.size());
            const double b2 = kRougeBeta * kRougeBeta;
            const double f = (1.0 + b2) * rec * prec / (rec + b2 * prec);
            best = std::max(best, f);
        }
        total += best;
    }
    return total / static_cast<double>(set.size());
}

namespace {

struct Alignment {
    int matches = 0;
    int chunks = 0;
};

// Two-stage greedy alignment: exact surface matches first, Porter-stem
// matches second; each candidate token takes the first unmatched reference
// token, scanning left to right.
Alignment align_meteor(const Tokens& cand, const Tokens& ref) {
    std::vector<int> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);

    auto run_stage = [&](auto&& key) {
        std::vector<std::string> ref_keys(ref.size());
        for (std::size_t j = 0; j < ref.size(); ++j) ref_keys[j] = key(ref[j]);
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (cand_to_ref[i] >= 0) continue;
            const std::string k = key(cand[i]);
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!ref_used[j] && ref_keys[j] == k) {
                    cand_to_ref[i] = static_cast<int>(j);
                    ref_used[j] = true;
                    break;
                }
            }
        }
    };
    run_stage([](const std::string& w) { return w; });
    run_stage([](const std::string& w) { return porter_stem(w); });

    Alignment out;
    int prev_cand = -2, prev_ref = -2;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (cand_to_ref[i] < 0) continue;
        ++out.matches;
        const bool contiguous =
            static_cast<int>(i) == prev_cand + 1 && cand_to_ref[i] == prev_ref + 1;
        if (!contiguous) ++out.chunks;
        prev_cand = static_cast<int>(i);
        prev_ref = cand_to_ref[i];
    }
    return out;
}

}  // namespace

double meteor_lite(const CaptionEvalSet& set) {
    validate_set(set);
    double total = 0.0;
    for (const auto& item : set) {
        const Tokens cand = tokenize_caption(item.candidate);
        double best = 0.0;
        for (const auto& r : item.references) {
            const Tokens ref = tokenize_caption(r);
            if (cand.empty() || ref.empty()) continue;
            const Alignment a = align_meteor(cand, ref);
            if (a.matches == 0) continue;
            const double m = a.matches;
            const double precision = m / static_cast<double>(cand.size());
            const double recall = m / static_cast<double>(ref.size());
            const double f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
            const double frag = static_cast<double>(a.chunks) / m;
            const double penalty = 0.5 * frag * frag * frag;
            best = std::max(best, f_mean * (1.0 - penalty));
        }
        total += best;
    }
    return total / static_cast<double>(set.size());
}

namespace {

struct CiderVec {
    std::array<std::unordered_map<std::string, double>, kMaxNgram> weights;
    std::array<double, kMaxNgram> norm{};
    long long bigram_length = 0;
};

CiderVec cider_vec(const Tokens& tokens,
                   const std::unordered_map<std::string, int>& doc_freq, double log_num_images) {
    CiderVec vec;
    for (int n = 1; n <= kMaxNgram; ++n) {
        for (const auto& [gram, tf] : ngram_counts(tokens, n)) {
            const auto it = doc_freq.find(gram);
            const double df = std::log(std::max(1.0, it == doc_freq.end()
                                                         ? 0.0
                                                         : static_cast<double>(it->second)));
            const double w = static_cast<double>(tf) * (log_num_images - df);
            vec.weights[n - 1][gram] = w;
            vec.norm[n - 1] += w * w;
            if (n == 2) vec.bigram_length += tf;
        }
        // norm finalized below
    }
    for (double& v : vec.norm) v = std::sqrt(v);
    return vec;
}

std::array<double, kMaxNgram> cider_sim(const CiderVec& hyp, const CiderVec& ref) {
    std::array<double, kMaxNgram> val{};
    const double delta = static_cast<double>(hyp.bigram_length - ref.bigram_length);
    for (int n = 0; n < kMaxNgram; ++n) {
        for (const auto& [gram, w_hyp] : hyp.weights[n]) {
            const auto it = ref.weights[n].find(gram);
            if (it == ref.weights[n].end()) continue;
            val[n] += std::min(w_hyp, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val[n] /= hyp.norm[n] * ref.norm[n];
        val[n] *= std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
    }
    return val;
}

}  // namespace

double cider_d(const CaptionEvalSet& set) {
    validate_set(set);

    // Document frequency over the corpus's reference sets: number of images
    // whose references contain the n-gram at least once.
    std::unordered_map<std::string, int> doc_freq;
    for (const auto& item : set) {
        std::unordered_map<std::string, int> seen;
        for (const auto& r : item.references) {
            const Tokens ref = tokenize_caption(r);
            for (int n = 1; n <= kMaxNgram; ++n) {
                for (const auto& [gram, tf] : ngram_counts(ref, n)) seen[gram] = 1;
            }
        }
        for (const auto& [gram, one] : seen) doc_freq[gram] += one;
    }
    const double log_num_images = std::log(static_cast<double>(set.size()));

    double total = 0.0;
    for (const auto& item : set) {
        const CiderVec hyp = cider_vec(tokenize_caption(item.candidate), doc_freq, log_num_images);
        std::array<double, kMaxNgram> sum{};
        for (const auto& r : item.references) {
            const CiderVec ref = cider_vec(tokenize_caption(r), doc_freq, log_num_images);
            const auto val = cider_sim(hyp, ref);
            for (int n = 0; n < kMaxNgram; ++n) sum[n] += val[n];
        }
        double score = 0.0;
        for (int n = 0; n < kMaxNgram; ++n) score += sum[n];
        score /= static_cast<double>(kMaxNgram);
        score /= static_cast<double>(item.references.size());
        total += 10.0 * score;
    }
    return total / static_cast<double>(set.size());
}

std::string normalize_answer(std::string_view text) {
    std::string out = strings::to_lower_ascii(strings::trim(text));
    if (!out.empty() && out.back() == '.') out.pop_back();
    return strings::trim(out);
}

double answer_accuracy(std::span<const std::string> predictions,
                       std::span<const std::string> truths, AccuracyMode mode) {
    if (predictions.size() != truths.size())
        throw MetricsError("prediction/truth length mismatch");
    if (predictions.empty()) throw MetricsError("empty accuracy input");

    auto underscores_to_spaces = [](std::string s) {
        for (char& c : s) {
            if (c == '_') c = ' ';
        }
        return s;
    };

    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const std::string p = normalize_answer(predictions[i]);
        const std::string t = normalize_answer(truths[i]);
        bool match = p == t;
        if (!match && mode == AccuracyMode::classification) {
            match = underscores_to_spaces(p) == underscores_to_spaces(t);
        }
        if (match) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace rsit::metrics
