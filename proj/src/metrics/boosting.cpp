#include "ehrgen/metrics/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehrgen/util/error.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen::metrics {

namespace {

double sigmoid(double z) {
  return 1.0 / (1.0 + std::exp(-z));
}

// Candidate thresholds: midpoints between consecutive distinct quantiles.
std::vector<std::vector<double>> candidate_thresholds(const Matrix& x, std::size_t max_bins) {
  std::vector<std::vector<double>> out(x.cols);
  std::vector<double> col(x.rows);
  for (std::size_t f = 0; f < x.cols; ++f) {
    for (std::size_t r = 0; r < x.rows; ++r) col[r] = x(r, f);
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
    std::vector<double> cuts;
    if (col.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < col.size(); ++i) cuts.push_back((col[i] + col[i + 1]) / 2);
    } else {
      for (std::size_t b = 1; b < max_bins; ++b) {
        const std::size_t i = b * col.size() / max_bins;
        cuts.push_back((col[i - 1] + col[i]) / 2);
      }
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    out[f] = std::move(cuts);
  }
  return out;
}

}  // namespace

nlohmann::json BoostingConfig::to_json() const {
  return {{"learner", "gradient_boosted_trees"},
          {"rounds", rounds},
          {"depth", depth},
          {"learning_rate", learning_rate},
          {"max_bins", max_bins},
          {"min_leaf", min_leaf},
          {"l2", l2},
          {"subsample", subsample},
          {"seed", seed}};
}

GradientBoosting::GradientBoosting(BoostingConfig config) : config_(config) {
  if (config_.depth < 1 || config_.max_bins < 2 || !(config_.learning_rate > 0) || !(config_.subsample > 0) ||
      config_.subsample > 1 || config_.min_leaf < 1) {
    throw PreconditionError("boosting: invalid config");
  }
}

void GradientBoosting::fit(const Matrix& x, const std::vector<bool>& y) {
  if (x.rows != y.size()) throw PreconditionError("boosting: size mismatch");
  const auto pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), true));
  if (pos == 0 || pos == y.size()) throw PreconditionError("boosting: single-class labels");
  const std::size_t n = x.rows;
  const double prior = static_cast<double>(pos) / static_cast<double>(n);
  base_ = std::log(prior / (1 - prior));
  trees_.clear();

  const auto cuts = candidate_thresholds(x, config_.max_bins);
  // Bin index of every value, so split search is a histogram pass.
  std::vector<std::vector<std::uint16_t>> bin(x.cols, std::vector<std::uint16_t>(n));
  for (std::size_t f = 0; f < x.cols; ++f) {
    for (std::size_t r = 0; r < n; ++r) {
      bin[f][r] = static_cast<std::uint16_t>(std::upper_bound(cuts[f].begin(), cuts[f].end(), x(r, f)) -
                                             cuts[f].begin());
    }
  }

  std::vector<double> margin(n, base_), g(n), h(n);
  Rng rng = make_rng(config_.seed, 0xB0057);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double lambda = config_.l2;

  for (std::size_t round = 0; round < config_.rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(margin[r]);
      g[r] = p - (y[r] ? 1.0 : 0.0);
      h[r] = std::max(p * (1 - p), 1e-12);
    }
    std::vector<std::size_t> rows;
    if (config_.subsample < 1.0) {
      for (std::size_t r = 0; r < n; ++r) {
        if (uniform01(rng) < config_.subsample) rows.push_back(r);
      }
    } else {
      rows = all;
    }

    Tree tree;
    // Frontier of (node index, rows) at the current depth.
    std::vector<std::pair<int, std::vector<std::size_t>>> frontier;
    tree.push_back({});
    frontier.emplace_back(0, std::move(rows));
    for (std::size_t d = 0; d <= config_.depth; ++d) {
      std::vector<std::pair<int, std::vector<std::size_t>>> next;
      for (auto& [node, idx] : frontier) {
        double G = 0, H = 0;
        for (auto r : idx) {
          G += g[r];
          H += h[r];
        }
        tree[node].value = -G / (H + lambda) * config_.learning_rate;
        if (d == config_.depth || idx.size() < 2 * config_.min_leaf) continue;

        const double parent = G * G / (H + lambda);
        double best_gain = 1e-12;
        int best_f = -1;
        std::size_t best_b = 0;
        std::vector<double> hg, hh;
        std::vector<std::size_t> hc;
        for (std::size_t f = 0; f < x.cols; ++f) {
          const std::size_t nb = cuts[f].size() + 1;
          if (nb < 2) continue;
          hg.assign(nb, 0);
          hh.assign(nb, 0);
          hc.assign(nb, 0);
          for (auto r : idx) {
            const auto b = bin[f][r];
            hg[b] += g[r];
            hh[b] += h[r];
            ++hc[b];
          }
          double gl = 0, hl = 0;
          std::size_t cl = 0;
          for (std::size_t b = 0; b + 1 < nb; ++b) {
            gl += hg[b];
            hl += hh[b];
            cl += hc[b];
            if (cl < config_.min_leaf) continue;
            if (idx.size() - cl < config_.min_leaf) break;
            const double gr = G - gl, hr = H - hl;
            const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
            if (gain > best_gain) {
              best_gain = gain;
              best_f = static_cast<int>(f);
              best_b = b;
            }
          }
        }
        if (best_f < 0) continue;
        const double threshold = cuts[static_cast<std::size_t>(best_f)][best_b];
        std::vector<std::size_t> left, right;
        for (auto r : idx) (bin[static_cast<std::size_t>(best_f)][r] <= best_b ? left : right).push_back(r);
        const int li = static_cast<int>(tree.size()), ri = li + 1;
        tree[node].feature = best_f;
        tree[node].threshold = threshold;
        tree[node].split_bin = best_b;
        tree[node].left = li;
        tree[node].right = ri;
        tree.push_back({});
        tree.push_back({});
        next.emplace_back(li, std::move(left));
        next.emplace_back(ri, std::move(right));
      }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }

    for (std::size_t r = 0; r < n; ++r) {
      int node = 0;
      while (tree[node].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(node)];
        node = bin[static_cast<std::size_t>(nd.feature)][r] <= nd.split_bin ? nd.left : nd.right;
      }
      margin[r] += tree[node].value;
    }
    trees_.push_back(std::move(tree));
  }
}

std::vector<double> GradientBoosting::predict(const Matrix& x) const {
  std::vector<double> out(x.rows, base_);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (const auto& tree : trees_) {
      int node = 0;
      while (tree[node].feature >= 0) {
        node = x(r, static_cast<std::size_t>(tree[node].feature)) < tree[node].threshold ? tree[node].left
                                                                                           : tree[node].right;
      }
      out[r] += tree[node].value;
    }
  }
  return out;
}

std::unique_ptr<BinaryClassifier> make_default_classifier(const BoostingConfig& config) {
  return std::make_unique<GradientBoosting>(config);
}

}  // namespace ehrgen::metrics
