#include "ehrgen/metrics/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ehrgen/core/cohort_io.hpp"
#include "ehrgen/metrics/ngram.hpp"
#include "ehrgen/metrics/prdc.hpp"
#include "ehrgen/metrics/privacy.hpp"
#include "ehrgen/metrics/ts_embedding.hpp"
#include "ehrgen/util/error.hpp"
#include "ehrgen/util/hash.hpp"

namespace ehrgen::metrics {

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<double>(m.row(r), m.row(r) + m.cols));
  return rows;
}

nlohmann::json corr_json(const CorrelationMatrix& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t a = 0; a < c.r.rows; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t b = 0; b < c.r.cols; ++b) row.push_back(c.defined[a][b] ? nlohmann::json(c.r(a, b)) : nlohmann::json(nullptr));
    rows.push_back(row);
  }
  return rows;
}

Matrix masked(const CorrelationMatrix& c) {
  Matrix m = c.r;
  for (std::size_t a = 0; a < m.rows; ++a) {
    for (std::size_t b = 0; b < m.cols; ++b) {
      if (!c.defined[a][b]) m(a, b) = std::nan("");
    }
  }
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string format_cell(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

nlohmann::json EvaluationConfig::to_json() const {
  return {{"n_top", n_top},
          {"prdc_k", prdc_k},
          {"min_corr_support", min_corr_support},
          {"utility", utility},
          {"privacy", privacy},
          {"utility_ratios", utility_config.ratios},
          {"utility_seed", utility_config.seed},
          {"learner", utility_config.learner.to_json()}};
}

EvaluationConfig evaluation_config_from_json(const nlohmann::json& j) {
  EvaluationConfig c;
  c.n_top = j.value("n_top", c.n_top);
  c.prdc_k = j.value("prdc_k", c.prdc_k);
  c.min_corr_support = j.value("min_corr_support", c.min_corr_support);
  c.utility = j.value("utility", c.utility);
  c.privacy = j.value("privacy", c.privacy);
  c.utility_config.ratios = j.value("utility_ratios", c.utility_config.ratios);
  c.utility_config.seed = j.value("utility_seed", c.utility_config.seed);
  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    auto& b = c.utility_config.learner;
    b.rounds = l.value("rounds", b.rounds);
    b.depth = l.value("depth", b.depth);
    b.learning_rate = l.value("learning_rate", b.learning_rate);
    b.max_bins = l.value("max_bins", b.max_bins);
    b.min_leaf = l.value("min_leaf", b.min_leaf);
    b.l2 = l.value("l2", b.l2);
    b.subsample = l.value("subsample", b.subsample);
    b.seed = l.value("seed", b.seed);
  }
  return c;
}

std::string cohort_hash(const Cohort& cohort) {
  return sha256_hex(serialize_cohort(cohort));
}

EvaluationReport evaluate(const Cohort& train, const Cohort& test, const Cohort& synth,
                          const EvaluationConfig& config, const nlohmann::json& provenance) {
  if (!(train.schema == test.schema) || !(train.schema == synth.schema)) {
    throw PreconditionError("evaluate: cohorts use different schemas");
  }
  EvaluationReport report;
  auto& j = report.json;
  j["format"] = "ehrgen-evaluation-report";
  j["version"] = kReportFormatVersion;
  auto& prov = j["provenance"];
  prov = provenance.is_null() ? nlohmann::json::object() : provenance;
  prov["config"] = config.to_json();
  for (const auto& [name, c] : {std::pair<const char*, const Cohort*>{"train", &train}, {"test", &test},
                                {"synthetic", &synth}}) {
    prov["cohorts"][name] = {{"patients", c->size()}, {"sha256", cohort_hash(*c)}};
  }

  auto& fid = j["fidelity"];
  try {
    fid["ngram"] = ngram_fidelity(train, synth, config.n_top).to_json();
  } catch (const PreconditionError& e) {
    fid["ngram"] = {{"error", e.what()}};
  }

  const TSEmbedder embedder(train);
  try {
    const Matrix real = embedder.embed(train);
    const auto z = Standardizer::fit(real);
    fid["prdc"] = prdc(z.apply(real), z.apply(embedder.embed(synth)), config.prdc_k).to_json();
  } catch (const PreconditionError& e) {
    fid["prdc"] = {{"error", e.what()}};
  }

  auto& t = report.tables;
  for (const auto& v : train.schema.variables()) t.variables.push_back(v.name);
  t.real_corr = temporal_correlation(train, config.min_corr_support);
  t.synth_corr = temporal_correlation(synth, config.min_corr_support);
  t.confusion = corr_confusion(t.real_corr, t.synth_corr);
  const auto mse = mse_corr(t.real_corr, t.synth_corr);
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : t.confusion) confusion.push_back(row);
  fid["temporal_correlation"] = {{"variables", t.variables},
                                 {"mse_corr", mse.value},
                                 {"entries", mse.entries},
                                 {"confusion", confusion},
                                 {"confusion_levels", {"[-1,-0.5)", "[-0.5,-0.2)", "[-0.2,0.2)", "[0.2,0.5)", "[0.5,1]"}},
                                 {"diagonal_fraction", diagonal_fraction(t.confusion)},
                                 {"real", corr_json(t.real_corr)},
                                 {"synthetic", corr_json(t.synth_corr)}};
  t.real_cooccurrence = co_occurrence(train);
  t.synth_cooccurrence = co_occurrence(synth);
  fid["co_occurrence"] = {{"real", matrix_json(t.real_cooccurrence)},
                          {"synthetic", matrix_json(t.synth_cooccurrence)},
                          {"frobenius_difference", frobenius_distance(t.real_cooccurrence, t.synth_cooccurrence)}};

  if (config.utility) {
    try {
      j["utility"] = utility_eval(train, test, synth, config.utility_config).to_json();
    } catch (const PreconditionError& e) {
      j["utility"] = {{"error", e.what()}};
    }
  }
  if (config.privacy) {
    j["privacy"] = mia_privacy(train, test, synth).to_json();
    j["privacy"]["notes"] = "WD and AUROC on raw nearest-synthetic distances (train = member); "
                            "JSD between fitted Gaussians, base 2, 4096-point grid";
  }
  return report;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& row_names,
                       const std::vector<std::string>& col_names) {
  if (row_names.size() != m.rows || col_names.size() != m.cols) throw PreconditionError("csv: name count mismatch");
  std::ostringstream out;
  for (const auto& c : col_names) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    out << row_names[r];
    for (std::size_t c = 0; c < m.cols; ++c) out << ',' << format_cell(m(r, c));
    out << '\n';
  }
  return out.str();
}

std::string confusion_csv(const Confusion& c) {
  const std::vector<std::string> levels = {"high_neg", "medium_neg", "low", "medium_pos", "high_pos"};
  Matrix m(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t k = 0; k < 5; ++k) m(i, k) = static_cast<double>(c[i][k]);
  }
  return matrix_csv(m, levels, levels);
}

std::vector<std::string> write_report(const std::string& dir, const EvaluationReport& report) {
  const std::filesystem::path d(dir);
  std::filesystem::create_directories(d);
  const auto& t = report.tables;
  std::vector<std::pair<std::string, std::string>> files = {
      {"report.json", report.json.dump(2) + "\n"},
      {"correlation_real.csv", matrix_csv(masked(t.real_corr), t.variables, t.variables)},
      {"correlation_synthetic.csv", matrix_csv(masked(t.synth_corr), t.variables, t.variables)},
      {"correlation_confusion.csv", confusion_csv(t.confusion)},
      {"cooccurrence_real.csv", matrix_csv(t.real_cooccurrence, t.variables, t.variables)},
      {"cooccurrence_synthetic.csv", matrix_csv(t.synth_cooccurrence, t.variables, t.variables)},
  };
  std::vector<std::string> names;
  for (const auto& [name, text] : files) {
    write_text(d / name, text);
    names.push_back(name);
  }
  return names;
}

void write_heatmap_ppm(const std::string& path, const Matrix& m, double lo, double hi, std::size_t cell) {
  if (m.rows == 0 || m.cols == 0 || cell == 0 || !(hi > lo)) throw PreconditionError("heatmap: bad arguments");
  const std::size_t w = m.cols * cell, h = m.rows * cell;
  std::string pixels(w * h * 3, '\0');
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      unsigned char rgb[3] = {160, 160, 160};
      const double v = m(r, c);
      if (!std::isnan(v)) {
        const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * 2 - 1;  // -1 blue, 0 white, 1 red
        const auto fade = static_cast<unsigned char>(std::lround(255 * (1 - std::abs(u))));
        rgb[0] = u < 0 ? fade : 255;
        rgb[1] = fade;
        rgb[2] = u > 0 ? fade : 255;
      }
      for (std::size_t y = r * cell; y < (r + 1) * cell; ++y) {
        for (std::size_t x = c * cell; x < (c + 1) * cell; ++x) {
          // One-pixel grid lines between cells.
          const bool edge = (y % cell == 0) || (x % cell == 0);
          for (int k = 0; k < 3; ++k) pixels[(y * w + x) * 3 + k] = static_cast<char>(edge ? 255 : rgb[k]);
        }
      }
    }
  }
  std::ostringstream out;
  out << "P6\n" << w << ' ' << h << "\n255\n" << pixels;
  write_text(path, out.str());
}

}  // namespace ehrgen::metrics
