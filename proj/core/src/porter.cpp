// SPDX-License-Identifier: Apache-2.0
//
// Porter suffix-stripping algorithm, original 1980 rule set.

#include <string>
#include <string_view>

#include "rsit/text_metrics.hpp"

namespace rsit::metrics {

namespace {

bool is_vowel_letter(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Consonant test with the positional y rule: y is a consonant at the start
// of the word or after a vowel, a vowel after a consonant.
bool is_consonant(const std::string& w, std::size_t i) {
    const char c = w[i];
    if (is_vowel_letter(c)) return false;
    if (c == 'y') return i == 0 ? true : !is_consonant(w, i - 1);
    return true;
}

// The measure m of [C](VC)^m[V].
int measure(const std::string& w) {
    int m = 0;
    std::size_t i = 0;
    const std::size_t n = w.size();
    while (i < n && is_consonant(w, i)) ++i;
    for (;;) {
        if (i == n) return m;
        while (i < n && !is_consonant(w, i)) ++i;
        if (i == n) return m;
        while (i < n && is_consonant(w, i)) ++i;
        ++m;
    }
}

bool contains_vowel(const std::string& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!is_consonant(w, i)) return true;
    }
    return false;
}

bool double_consonant(const std::string& w) {
    const std::size_t n = w.size();
    if (n < 2 || w[n - 1] != w[n - 2]) return false;
    return is_consonant(w, n - 1);
}

// *o: stem ends cvc where the final c is not w, x or y.
bool ends_cvc(const std::string& w) {
    const std::size_t n = w.size();
    if (n < 3) return false;
    if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1))
        return false;
    const char c = w[n - 1];
    return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() &&
           std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

std::string stem_part(const std::string& w, std::size_t suffix_len) {
    return w.substr(0, w.size() - suffix_len);
}

// Applies the first matching rule from a (suffix, replacement) table when
// the stem measure passes `min_m`; returns true if any suffix matched.
struct Rule {
    std::string_view suffix;
    std::string_view replacement;
};

bool apply_rules(std::string& w, std::initializer_list<Rule> rules, int min_m) {
    for (const Rule& r : rules) {
        if (!ends_with(w, r.suffix)) continue;
        std::string stem = stem_part(w, r.suffix.size());
        if (measure(stem) > min_m) {
            stem += r.replacement;
            w = std::move(stem);
        }
        return true;
    }
    return false;
}

}  // namespace

std::string porter_stem(std::string_view word) {
    std::string w(word);
    if (w.size() <= 2) return w;

    // Step 1a
    if (ends_with(w, "sses")) {
        w = stem_part(w, 2);
    } else if (ends_with(w, "ies")) {
        w = stem_part(w, 2);
    } else if (!ends_with(w, "ss") && ends_with(w, "s")) {
        w = stem_part(w, 1);
    }

    // Step 1b
    bool cleanup = false;
    if (ends_with(w, "eed")) {
        if (measure(stem_part(w, 3)) > 0) w = stem_part(w, 1);
    } else if (ends_with(w, "ed") && contains_vowel(stem_part(w, 2))) {
        w = stem_part(w, 2);
        cleanup = true;
    } else if (ends_with(w, "ing") && contains_vowel(stem_part(w, 3))) {
        w = stem_part(w, 3);
        cleanup = true;
    }
    if (cleanup) {
        if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
            w += 'e';
        } else if (double_consonant(w) && !ends_with(w, "l") && !ends_with(w, "s") &&
                   !ends_with(w, "z")) {
            w = stem_part(w, 1);
        } else if (measure(w) == 1 && ends_cvc(w)) {
            w += 'e';
        }
    }

    // Step 1c
    if (ends_with(w, "y") && contains_vowel(stem_part(w, 1))) {
        w.back() = 'i';
    }

    // Step 2 (m > 0)
    apply_rules(w,
                {{"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
                 {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
                 {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
                 {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
                 {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"}},
                0);

    // Step 3 (m > 0)
    apply_rules(w,
                {{"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
                 {"ical", "ic"},  {"ful", ""},   {"ness", ""}},
                0);

    // Step 4 (m > 1); "ion" additionally needs the stem to end in s or t.
    for (const Rule& r : std::initializer_list<Rule>{
             {"al", ""},   {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},
             {"able", ""}, {"ible", ""}, {"ant", ""},  {"ement", ""}, {"ment", ""},
             {"ent", ""},  {"ion", ""},  {"ou", ""},   {"ism", ""}, {"ate", ""},
             {"iti", ""},  {"ous", ""},  {"ive", ""},  {"ize", ""}}) {
        if (!ends_with(w, r.suffix)) continue;
        std::string stem = stem_part(w, r.suffix.size());
        if (r.suffix == "ion" && !(ends_with(stem, "s") || ends_with(stem, "t"))) break;
        if (measure(stem) > 1) w = std::move(stem);
        break;
    }

    // Step 5a
    if (ends_with(w, "e")) {
        const std::string stem = stem_part(w, 1);
        const int m = measure(stem);
        if (m > 1 || (m == 1 && !ends_cvc(stem))) w = stem;
    }
    // Step 5b
    if (measure(w) > 1 && double_consonant(w) && ends_with(w, "l")) {
        w = stem_part(w, 1);
    }
    return w;
}

}  // namespace rsit::metrics
