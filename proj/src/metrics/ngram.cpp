#include "ehrgen/metrics/ngram.hpp"

#include <algorithm>

#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

const char* to_string(NGramKind kind) {
  switch (kind) {
    case NGramKind::unigram: return "unigram";
    case NGramKind::bigram: return "bigram";
    case NGramKind::trigram: return "trigram";
    case NGramKind::sequential_bigram: return "sequential_bigram";
  }
  return "?";
}

NGramTable ngram_table(const Cohort& cohort, NGramKind kind) {
  std::map<NGram, std::size_t> counts;
  for (const auto& p : cohort.patients) {
    if (kind == NGramKind::sequential_bigram) {
      for (std::size_t j = 0; j + 1 < p.visits.size(); ++j) {
        for (const auto& a : p.visits[j].events) {
          for (const auto& b : p.visits[j + 1].events) ++counts[{a.code, b.code}];
        }
      }
      continue;
    }
    const std::size_t n = kind == NGramKind::unigram ? 1 : kind == NGramKind::bigram ? 2 : 3;
    for (const auto& v : p.visits) {
      for (std::size_t i = 0; i + n <= v.events.size(); ++i) {
        NGram g;
        for (std::size_t k = 0; k < n; ++k) g.push_back(v.events[i + k].code);
        ++counts[std::move(g)];
      }
    }
  }
  NGramTable table;
  const double patients = static_cast<double>(cohort.size());
  for (auto& [g, c] : counts) table.emplace(g, static_cast<double>(c) / patients);
  return table;
}

Pearson ngram_correlation(const NGramTable& train, const NGramTable& other, std::size_t n_top) {
  if (train.size() < 2) throw PreconditionError("ngram: fewer than 2 distinct n-grams in train");
  std::vector<const NGramTable::value_type*> ranked;
  for (const auto& e : train) ranked.push_back(&e);
  // The map is already in lexicographic order, so a stable sort by
  // probability breaks ties lexicographically.
  std::stable_sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->second > b->second; });
  if (n_top < 2) throw PreconditionError("ngram: n_top must be >= 2");
  ranked.resize(std::min(ranked.size(), n_top));
  std::vector<double> x, y;
  for (const auto* e : ranked) {
    x.push_back(e->second);
    const auto it = other.find(e->first);
    y.push_back(it == other.end() ? 0.0 : it->second);
  }
  return pearson(x, y);
}

NGramFidelity ngram_fidelity(const Cohort& train, const Cohort& other, std::size_t n_top) {
  auto one = [&](NGramKind k) { return ngram_correlation(ngram_table(train, k), ngram_table(other, k), n_top); };
  return {one(NGramKind::unigram), one(NGramKind::bigram), one(NGramKind::trigram),
          one(NGramKind::sequential_bigram)};
}

nlohmann::json NGramFidelity::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* name, const Pearson& p) { j[name] = {{"r", p.r}, {"degenerate", p.degenerate}}; };
  put("unigram", unigram);
  put("bigram", bigram);
  put("trigram", trigram);
  put("sequential_bigram", sequential_bigram);
  return j;
}

}  // namespace ehrgen::metrics
