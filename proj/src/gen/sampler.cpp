#include "ehrgen/gen/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehrgen/util/error.hpp"

namespace ehrgen::gen {

namespace {

// Ids of the k largest logits, in descending order, lower id first on ties.
std::vector<std::size_t> top_ids(std::span<const float> logits, std::size_t k) {
  std::vector<std::size_t> ids(logits.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  k = std::min(k, ids.size());
  auto before = [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), before);
  ids.resize(k);
  return ids;
}

}  // namespace

void check_sampling(const SamplingConfig& c) {
  if (!c.greedy && !(c.temperature > 0.0 && std::isfinite(c.temperature))) {
    throw PreconditionError("sampling: temperature must be > 0");
  }
  if (c.top_k < 1) throw PreconditionError("sampling: top_k must be >= 1");
}

std::vector<double> sampling_distribution(std::span<const float> logits, const SamplingConfig& c) {
  check_sampling(c);
  if (logits.empty()) throw PreconditionError("sampling: empty logits");
  std::vector<double> p(logits.size(), 0.0);
  const auto kept = top_ids(logits, c.greedy ? 1 : c.top_k);
  if (c.greedy || kept.size() == 1) {
    p[kept.front()] = 1.0;
    return p;
  }
  const double top = logits[kept.front()] / c.temperature;
  double total = 0.0;
  for (auto id : kept) total += p[id] = std::exp(logits[id] / c.temperature - top);
  for (auto id : kept) p[id] /= total;
  return p;
}

lm::Token sample_token(std::span<const float> logits, const SamplingConfig& c, Rng& rng) {
  check_sampling(c);
  if (logits.empty()) throw PreconditionError("sampling: empty logits");
  const auto kept = top_ids(logits, c.greedy ? 1 : c.top_k);
  if (kept.size() == 1) return static_cast<lm::Token>(kept.front());
  const double top = logits[kept.front()] / c.temperature;
  std::vector<double> w(kept.size());
  double total = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) total += w[i] = std::exp(logits[kept[i]] / c.temperature - top);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (u < w[i]) return static_cast<lm::Token>(kept[i]);
    u -= w[i];
  }
  return static_cast<lm::Token>(kept.back());
}

}  // namespace ehrgen::gen
