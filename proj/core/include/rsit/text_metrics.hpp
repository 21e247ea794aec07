// SPDX-License-Identifier: Apache-2.0
//
// Caption and answer metrics. Caption scorers operate corpus-level on a
// CaptionEvalSet (one candidate + one or more references per image):
//
//   bleu        cumulative corpus BLEU-n: clipped modified n-gram precision,
//               geometric mean over orders 1..n, brevity penalty against the
//               closest reference length (ties to the shorter).
//   rouge_l     LCS F-measure (beta = 1.2), max over references, mean over
//               images.
//   meteor_lite unigram alignment, exact matches first and Porter-stem
//               matches second, F_mean = 10PR/(R+9P), fragmentation penalty
//               0.5*(chunks/matches)^3. No synonym matching: scores are not
//               comparable with full METEOR.
//   cider_d     TF-IDF n-gram cosine (n = 1..4) with length penalty
//               sigma = 6, document frequencies from this corpus's
//               references; raw range [0, 10].

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rsit::metrics {

class MetricsError : public std::runtime_error {
public:
    explicit MetricsError(const std::string& what) : std::runtime_error(what) {}
};

// Lowercases ASCII, turns ASCII punctuation into spaces, splits on blanks.
// Bytes outside ASCII pass through unchanged.
std::vector<std::string> tokenize_caption(std::string_view text);

// Porter (1980) suffix stripping; input is expected lowercase.
std::string porter_stem(std::string_view word);

struct CaptionEvalItem {
    std::string candidate;
    std::vector<std::string> references;  // at least one
};
using CaptionEvalSet = std::vector<CaptionEvalItem>;

double bleu(const CaptionEvalSet& set, int n);
double rouge_l(const CaptionEvalSet& set);
double meteor_lite(const CaptionEvalSet& set);
double cider_d(const CaptionEvalSet& set);

enum class AccuracyMode { vqa, classification };

// Exact match after normalization: trim, ASCII lowercase, strip one
// trailing period. Classification mode additionally matches when the two
// sides agree after underscores are read as spaces (reference-category
// form). No fuzzy matching.
double answer_accuracy(std::span<const std::string> predictions,
                       std::span<const std::string> truths, AccuracyMode mode);

std::string normalize_answer(std::string_view text);

}  // namespace rsit::metrics
