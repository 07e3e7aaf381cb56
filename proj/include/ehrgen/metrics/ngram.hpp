#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/stats.hpp"

namespace ehrgen::metrics {

enum class NGramKind { unigram, bigram, trigram, sequential_bigram };

const char* to_string(NGramKind kind);

using NGram = std::vector<std::string>;
// n-gram -> occurrence count / number of patients.
using NGramTable = std::map<NGram, double>;

// Uni-, bi- and trigrams are contiguous windows over each visit's codes in
// stored order. Sequential bigrams are every pair (code of visit j, code of
// visit j + 1).
NGramTable ngram_table(const Cohort& cohort, NGramKind kind);

// Pearson r between the n_top most probable train n-grams (ties broken
// lexicographically) and their probabilities in `other` (0 when absent).
// Throws PreconditionError when train has fewer than 2 distinct n-grams.
Pearson ngram_correlation(const NGramTable& train, const NGramTable& other, std::size_t n_top = 1000);

struct NGramFidelity {
  Pearson unigram, bigram, trigram, sequential_bigram;
  nlohmann::json to_json() const;
};

NGramFidelity ngram_fidelity(const Cohort& train, const Cohort& other, std::size_t n_top = 1000);

}  // namespace ehrgen::metrics
