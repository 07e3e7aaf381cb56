#include "ehrgen/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "ehrgen/util/error.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen::pipeline {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw PreconditionError("config: section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw PreconditionError("config: unknown key '" + section + key + "'");
  }
}

std::set<std::string> keys_of(const json& j, std::initializer_list<const char*> drop = {}) {
  std::set<std::string> out;
  for (const auto& [key, _] : j.items()) out.insert(key);
  for (const char* d : drop) out.erase(d);
  return out;
}

}  // namespace

std::uint64_t stage_seed(const PipelineConfig& config, SeedStream stream) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stream));
}

json tokenizer_to_json(const tok::VocabularyConfig& c, tok::EncodeMode mode) {
  return {{"value_bins", c.value_bins},
          {"time_delta_bins", c.time_delta_bins},
          {"age_bins", c.age_bins},
          {"value_bins_override", c.value_bins_override},
          {"mode", tok::to_string(mode)}};
}

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.model.context = 512;
  c.model.layers = 2;
  c.model.heads = 4;
  c.model.dim = 128;
  c.model.dropout = 0.1;
  c.train.epochs = 10;
  c.train.learning_rate = 1e-3;
  c.train.batch_size = 16;
  c.train.grad_accum = 1;
  c.generate.count = 3500;
  return c;
}

json to_json(const PipelineConfig& c) {
  json model = lm::to_json(c.model);
  model.erase("vocab_size");
  model.erase("seed");
  json train = lm::to_json(c.train);
  train.erase("seed");
  json generate = gen::to_json(c.generate);
  generate.erase("seed");
  json evaluate = c.evaluate.to_json();
  evaluate.erase("utility_seed");
  json simulate = {{"patients", c.patients}};
  simulate["spec"] = c.sim_spec ? json(c.sim_spec->generic_string()) : json(nullptr);
  return {{"seed", c.seed},
          {"work_dir", c.work_dir.generic_string()},
          {"deterministic", c.deterministic},
          {"simulate", simulate},
          {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
          {"tokenizer", tokenizer_to_json(c.tokenizer, c.encode_mode)},
          {"model", model},
          {"train", train},
          {"generate", generate},
          {"evaluate", evaluate},
          {"reference_report", c.reference_report}};
}

PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  const PipelineConfig defaults = default_pipeline_config();
  const json d = to_json(defaults);
  check_keys(j, keys_of(d), "");
  PipelineConfig c = defaults;
  try {
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.reference_report = j.value("reference_report", c.reference_report);
    if (j.contains("work_dir")) c.work_dir = base_dir / j.at("work_dir").get<std::string>();
    else c.work_dir = base_dir / c.work_dir;

    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      check_keys(s, keys_of(d.at("simulate")), "simulate.");
      c.patients = s.value("patients", c.patients);
      if (s.contains("spec") && !s.at("spec").is_null()) c.sim_spec = base_dir / s.at("spec").get<std::string>();
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, keys_of(d.at("split")), "split.");
      c.split.train = s.value("train", c.split.train);
      c.split.validation = s.value("validation", c.split.validation);
      c.split.test = s.value("test", c.split.test);
    }
    if (j.contains("tokenizer")) {
      const auto& t = j.at("tokenizer");
      check_keys(t, keys_of(d.at("tokenizer")), "tokenizer.");
      c.tokenizer.value_bins = t.value("value_bins", c.tokenizer.value_bins);
      c.tokenizer.time_delta_bins = t.value("time_delta_bins", c.tokenizer.time_delta_bins);
      c.tokenizer.age_bins = t.value("age_bins", c.tokenizer.age_bins);
      c.tokenizer.value_bins_override = t.value("value_bins_override", c.tokenizer.value_bins_override);
      if (t.contains("mode")) c.encode_mode = tok::encode_mode_from_string(t.at("mode").get<std::string>());
    }
    c.tokenizer.digit_text = c.encode_mode == tok::EncodeMode::digit_text;
    if (j.contains("model")) {
      check_keys(j.at("model"), keys_of(d.at("model")), "model.");
      json merged = d.at("model");
      merged.update(j.at("model"));
      c.model = lm::model_config_from_json(merged);
    }
    if (j.contains("train")) {
      check_keys(j.at("train"), keys_of(d.at("train")), "train.");
      json merged = d.at("train");
      merged.update(j.at("train"));
      c.train = lm::train_config_from_json(merged);
    }
    if (j.contains("generate")) {
      check_keys(j.at("generate"), keys_of(d.at("generate")), "generate.");
      json merged = d.at("generate");
      merged.update(j.at("generate"));
      c.generate = gen::gen_config_from_json(merged);
    }
    if (j.contains("evaluate")) {
      check_keys(j.at("evaluate"), keys_of(d.at("evaluate")), "evaluate.");
      json merged = d.at("evaluate");
      merged.update(j.at("evaluate"));
      c.evaluate = metrics::evaluation_config_from_json(merged);
    }
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("config: ") + e.what());
  }
  c.model.vocab_size = 1;  // placeholder until the vocabulary exists
  lm::check_config(c.model);
  lm::check_train_config(c.train);
  gen::check_gen_config(c.generate);
  c.model.vocab_size = 0;
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

void apply_overrides(json& j, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw PreconditionError("override must look like key.path=value: " + a);
    const std::string path = a.substr(0, eq), text = a.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (key.empty()) throw PreconditionError("override has an empty key: " + a);
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
}

}  // namespace ehrgen::pipeline
