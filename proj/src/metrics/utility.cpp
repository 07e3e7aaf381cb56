#include "ehrgen/metrics/utility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehrgen/metrics/stats.hpp"
#include "ehrgen/metrics/ts_embedding.hpp"
#include "ehrgen/util/error.hpp"
#include "ehrgen/util/hash.hpp"

namespace ehrgen::metrics {

namespace {

struct Task {
  Matrix x;
  std::vector<std::vector<bool>> y;  // [label slot][patient]; slot 0 is mortality
};

Task make_task(const Cohort& c, const TSEmbedder& embedder) {
  Task t;
  t.x = embedder.embed(c);
  const std::size_t width = c.schema.label_width() + 1;
  t.y.assign(width, std::vector<bool>(c.size(), false));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.patients[i];
    if (p.visits.empty()) continue;
    const auto& l = p.visits.front().labels;
    t.y[0][i] = l.mortality;
    for (std::size_t k = 0; k < l.phenotypes.size() && k + 1 < width; ++k) t.y[k + 1][i] = l.phenotypes[k];
  }
  return t;
}

Task concat(const Task& a, const std::vector<std::size_t>& rows, const Task* b) {
  Task t;
  const std::size_t cols = a.x.cols;
  const std::size_t n = rows.size() + (b ? b->x.rows : 0);
  t.x = Matrix(n, cols);
  t.y.assign(a.y.size(), std::vector<bool>(n, false));
  std::size_t out = 0;
  for (auto r : rows) {
    std::copy(a.x.row(r), a.x.row(r) + cols, t.x.row(out));
    for (std::size_t k = 0; k < a.y.size(); ++k) t.y[k][out] = a.y[k][r];
    ++out;
  }
  if (b) {
    for (std::size_t r = 0; r < b->x.rows; ++r, ++out) {
      std::copy(b->x.row(r), b->x.row(r) + cols, t.x.row(out));
      for (std::size_t k = 0; k < a.y.size(); ++k) t.y[k][out] = b->y[k][r];
    }
  }
  return t;
}

bool two_classes(const std::vector<bool>& y) {
  const auto pos = std::count(y.begin(), y.end(), true);
  return pos > 0 && static_cast<std::size_t>(pos) < y.size();
}

UtilityRow evaluate_row(std::string setting, std::optional<double> ratio, const Task& train_set,
                        std::size_t real_rows, std::size_t synth_rows, const Task& test,
                        const UtilityConfig& config) {
  if (train_set.x.rows == 0) throw PreconditionError("utility: empty training set for " + setting);
  UtilityRow row;
  row.setting = std::move(setting);
  row.ratio = ratio;
  row.real_rows = real_rows;
  row.synthetic_rows = synth_rows;
  double sum = 0;
  std::size_t defined = 0;
  for (std::size_t k = 0; k < train_set.y.size(); ++k) {
    std::optional<double> score;
    if (two_classes(train_set.y[k]) && two_classes(test.y[k])) {
      auto learner = make_default_classifier(config.learner);
      learner->fit(train_set.x, train_set.y[k]);
      score = auroc(learner->predict(test.x), test.y[k]);
    }
    if (k == 0) {
      row.mortality = score;
    } else {
      row.phenotypes.push_back(score);
      if (score) {
        sum += *score;
        ++defined;
      }
    }
  }
  if (defined > 0) row.phenotype_macro = sum / static_cast<double>(defined);
  return row;
}

std::string ratio_name(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ratio=%g", r);
  return buf;
}

}  // namespace

UtilityResult utility_eval(const Cohort& train, const Cohort& test, const Cohort& synth,
                           const UtilityConfig& config) {
  if (test.size() == 0) throw PreconditionError("utility: empty test cohort");
  for (double r : config.ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw PreconditionError("utility: ratios must lie in [0, 1]");
  }
  const TSEmbedder embedder(train);
  const Task real = make_task(train, embedder);
  const Task fake = make_task(synth, embedder);
  const Task held = make_task(test, embedder);

  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  // The subsample order is keyed on patient ids, not positions, so the result
  // does not depend on how the cohort is ordered.
  std::vector<std::pair<std::string, std::size_t>> keyed;
  for (std::size_t i = 0; i < train.size(); ++i) {
    keyed.emplace_back(sha256_hex(std::to_string(config.seed) + ":" + train.patients[i].patient_id), i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> shuffled;
  for (const auto& k : keyed) shuffled.push_back(k.second);

  UtilityResult out;
  out.rows.push_back(evaluate_row("TRTR", std::nullopt, concat(real, all, nullptr), train.size(), 0, held, config));
  out.rows.push_back(
      evaluate_row("TSTR", std::nullopt, concat(real, {}, &fake), 0, synth.size(), held, config));
  for (double r : config.ratios) {
    const auto take = static_cast<std::size_t>(std::floor(r * static_cast<double>(train.size()) + 0.5));
    std::vector<std::size_t> rows(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(rows.begin(), rows.end());
    out.rows.push_back(evaluate_row(ratio_name(r), r, concat(real, rows, &fake), take, synth.size(), held, config));
  }
  return out;
}

nlohmann::json UtilityResult::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json ph = nlohmann::json::array();
    for (const auto& p : r.phenotypes) ph.push_back(opt(p));
    arr.push_back({{"setting", r.setting},
                   {"ratio", opt(r.ratio)},
                   {"real_rows", r.real_rows},
                   {"synthetic_rows", r.synthetic_rows},
                   {"mortality_auroc", opt(r.mortality)},
                   {"phenotype_auroc", ph},
                   {"phenotype_macro_auroc", opt(r.phenotype_macro)}});
  }
  return arr;
}

}  // namespace ehrgen::metrics
