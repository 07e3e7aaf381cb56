#include "ehrgen/pipeline/pipeline.hpp"

#include <fstream>
#include <ostream>

#include "ehrgen/core/cohort_io.hpp"
#include "ehrgen/core/split.hpp"
#include "ehrgen/lm/checkpoint.hpp"
#include "ehrgen/sim/simulator.hpp"
#include "ehrgen/tok/token_io.hpp"
#include "ehrgen/util/error.hpp"
#include "ehrgen/util/hash.hpp"

namespace ehrgen::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

Cohort read_split(const fs::path& path, const CohortSchema& schema, Split tag) {
  Cohort c = ingest_cohort(path.string(), schema);
  c.splits.assign(c.size(), tag);
  return c;
}

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << std::endl;
}

}  // namespace

std::string canonical_hash(const json& j) {
  return sha256_hex(j.dump());
}

json provenance(const std::string& stage, const json& stage_config, std::uint64_t seed) {
  return {{"tool", kToolName},
          {"tool_version", kToolVersion},
          {"stage", stage},
          {"seed", seed},
          {"config_sha256", canonical_hash(stage_config)}};
}

TokenizedCohort tokenize_cohort(const Cohort& cohort, const tok::Vocabulary& vocab, tok::EncodeMode mode,
                                std::size_t context) {
  TokenizedCohort out;
  for (const auto& p : cohort.patients) {
    auto seq = tok::encode(p, vocab, mode);
    if (context > 0 && seq.size() > context) {
      auto fitted = tok::fit_to_context(seq, vocab, context);
      if (!fitted) {
        ++out.dropped;
        continue;
      }
      ++out.shortened;
      seq = std::move(*fitted);
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

TrainedModel train_model(const tok::Vocabulary& vocab, const std::vector<tok::TokenSequence>& train,
                         const std::vector<tok::TokenSequence>& validation, lm::ModelConfig model_config,
                         const lm::TrainConfig& train_config, std::ostream* log) {
  model_config.vocab_size = vocab.size();
  std::vector<std::vector<lm::Token>> corpus, held;
  for (const auto& s : train) corpus.push_back(s.ids);
  for (const auto& s : validation) held.push_back(s.ids);

  TrainedModel out{lm::Model(model_config), {}, {}};
  note(log, "[train] " + std::to_string(lm::parameter_count(model_config)) + " parameters, " +
                std::to_string(corpus.size()) + " sequences");
  lm::TrainCallbacks cb;
  cb.on_epoch_end = [&](std::size_t epoch, const lm::Model& m) {
    std::string line = "[train] epoch " + std::to_string(epoch) + "/" + std::to_string(train_config.epochs);
    if (!held.empty()) {
      const double v = lm::evaluate_loss(m, held);
      out.validation_loss.push_back(v);
      line += " validation loss " + std::to_string(v);
    }
    note(log, line);
  };
  cb.on_step = [&](const lm::StepRecord& r) {
    if (log && r.step % 50 == 0) {
      *log << "[train] step " << r.step << " loss " << r.loss << " lr " << r.learning_rate << " "
           << static_cast<long>(r.tokens_per_sec) << " tok/s" << std::endl;
    }
  };
  out.result = lm::train(out.model, corpus, train_config, cb);
  return out;
}

json training_history(const TrainedModel& t, bool deterministic) {
  json steps = json::array();
  for (const auto& r : t.result.history) {
    json s = {{"step", r.step},       {"epoch", r.epoch},         {"loss", r.loss},
              {"lr", r.learning_rate}, {"grad_norm", r.grad_norm}, {"tokens", r.tokens}};
    if (!deterministic) s["tokens_per_sec"] = r.tokens_per_sec;
    steps.push_back(std::move(s));
  }
  return {{"epoch_loss", t.result.epoch_loss}, {"validation_loss", t.validation_loss}, {"steps", steps}};
}

StageCache::StageCache(fs::path dir, std::string stage, json key_material)
    : dir_(std::move(dir)), stage_(std::move(stage)) {
  key_material["stage"] = stage_;
  key_material["tool_version"] = kToolVersion;
  key_ = canonical_hash(key_material);
}

std::string StageCache::output_hash(const std::string& name) const {
  return sha256_file(file(name));
}

bool StageCache::valid(bool force) const {
  const fs::path manifest = file(kManifest);
  if (!fs::exists(manifest)) return false;
  if (force) {
    fs::remove(manifest);
    return false;
  }
  const json m = read_json(manifest);
  if (m.value("key", "") != key_) return false;
  for (const auto& [name, hash] : m.at("outputs").items()) {
    if (!fs::exists(file(name))) return false;
    if (output_hash(name) != hash.get<std::string>()) {
      throw Error("hash conflict: " + stage_ + "/" + name +
                  " changed since the stage produced it; rerun with --force to rebuild");
    }
  }
  return true;
}

void StageCache::commit(const std::vector<std::string>& outputs) const {
  json out = json::object();
  for (const auto& name : outputs) out[name] = output_hash(name);
  write_json(file(kManifest), {{"stage", stage_}, {"key", key_}, {"outputs", out}});
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineOptions& options) {
  std::ostream* log = options.log;
  const fs::path work = config.work_dir;
  fs::create_directories(work);
  {
    json effective = to_json(config);
    effective["work_dir"] = ".";
    write_json(work / "effective_config.json", effective);
  }
  PipelineResult result;
  auto run = [&](StageCache& cache, const std::function<std::vector<std::string>()>& body) {
    fs::create_directories(cache.dir());
    const std::string name = cache.dir().filename().string();
    if (cache.valid(options.force)) {
      note(log, "[" + name + "] cached");
      result.stages.push_back({name, true});
      return;
    }
    note(log, "[" + name + "] running");
    cache.commit(body());
    result.stages.push_back({name, false});
  };

  // simulate
  sim::SimSpec spec = config.sim_spec ? sim::read_spec(config.sim_spec->string()) : sim::default_spec();
  spec.patients = config.patients;
  spec.seed = stage_seed(config, SeedStream::simulate);
  const json sim_json = sim::spec_to_json(spec);
  StageCache sim_stage(work / "simulate", "simulate", {{"spec", sim_json}});
  run(sim_stage, [&] {
    const Cohort cohort = sim::simulate(spec);
    write_schema(sim_stage.file("schema.json").string(), cohort.schema);
    write_cohort(sim_stage.file("cohort.jsonl").string(), cohort, provenance("simulate", sim_json, spec.seed));
    return std::vector<std::string>{"schema.json", "cohort.jsonl"};
  });
  const CohortSchema schema = read_schema(sim_stage.file("schema.json").string());

  // split
  const std::uint64_t split_seed = stage_seed(config, SeedStream::split);
  const json split_json = {{"train", config.split.train},
                           {"validation", config.split.validation},
                           {"test", config.split.test},
                           {"seed", split_seed}};
  StageCache split_stage(work / "split", "split",
                         {{"config", split_json}, {"cohort", sim_stage.output_hash("cohort.jsonl")}});
  run(split_stage, [&] {
    const Cohort tagged = split_cohort(ingest_cohort(sim_stage.file("cohort.jsonl").string(), schema),
                                       config.split, split_seed);
    const json prov = provenance("split", split_json, split_seed);
    write_cohort(split_stage.file("train.jsonl").string(), tagged.subset(Split::train), prov);
    write_cohort(split_stage.file("validation.jsonl").string(), tagged.subset(Split::validation), prov);
    write_cohort(split_stage.file("test.jsonl").string(), tagged.subset(Split::test), prov);
    return std::vector<std::string>{"train.jsonl", "validation.jsonl", "test.jsonl"};
  });
  auto load_split = [&](const char* name, Split tag) { return read_split(split_stage.file(name), schema, tag); };

  // build-vocab
  const json tok_json = tokenizer_to_json(config.tokenizer, config.encode_mode);
  StageCache vocab_stage(work / "vocab", "vocab",
                         {{"config", tok_json}, {"train", split_stage.output_hash("train.jsonl")}});
  run(vocab_stage, [&] {
    const auto vocab = tok::build_vocabulary(load_split("train.jsonl", Split::train), config.tokenizer);
    tok::save_vocabulary(vocab_stage.file("vocab.json").string(), vocab, provenance("vocab", tok_json, 0));
    return std::vector<std::string>{"vocab.json"};
  });
  const tok::Vocabulary vocab = tok::load_vocabulary(vocab_stage.file("vocab.json").string());

  // tokenize
  const json tokenize_json = {{"mode", tok::to_string(config.encode_mode)}, {"context", config.model.context}};
  StageCache tokenize_stage(work / "tokenize", "tokenize",
                            {{"config", tokenize_json},
                             {"vocab", vocab_stage.output_hash("vocab.json")},
                             {"train", split_stage.output_hash("train.jsonl")},
                             {"validation", split_stage.output_hash("validation.jsonl")}});
  run(tokenize_stage, [&] {
    json stats = json::object();
    for (const auto& [name, tag] : {std::pair<std::string, Split>{"train", Split::train},
                                    {"validation", Split::validation}}) {
      const auto t = tokenize_cohort(load_split((name + ".jsonl").c_str(), tag), vocab, config.encode_mode,
                                     config.model.context);
      json header = provenance("tokenize", tokenize_json, 0);
      header["shortened"] = t.shortened;
      header["dropped"] = t.dropped;
      tok::write_token_text(tokenize_stage.file(name + ".tokens").string(), t.sequences, vocab, header);
      stats[name] = {{"sequences", t.sequences.size()}, {"shortened", t.shortened}, {"dropped", t.dropped}};
      note(log, "[tokenize] " + name + ": " + stats[name].dump());
    }
    return std::vector<std::string>{"train.tokens", "validation.tokens"};
  });

  // train
  lm::ModelConfig model_config = config.model;
  model_config.seed = stage_seed(config, SeedStream::model_init);
  lm::TrainConfig train_config = config.train;
  train_config.seed = stage_seed(config, SeedStream::train);
  json model_json = lm::to_json(model_config);
  model_json.erase("vocab_size");
  const json train_json = {{"model", model_json}, {"train", lm::to_json(train_config)}};
  StageCache train_stage(work / "train", "train",
                         {{"config", train_json},
                          {"vocab", vocab_stage.output_hash("vocab.json")},
                          {"train", tokenize_stage.output_hash("train.tokens")},
                          {"validation", tokenize_stage.output_hash("validation.tokens")}});
  run(train_stage, [&] {
    const auto trained =
        train_model(vocab, tok::read_token_text(tokenize_stage.file("train.tokens").string(), vocab),
                    tok::read_token_text(tokenize_stage.file("validation.tokens").string(), vocab), model_config,
                    train_config, log);
    lm::save_checkpoint(train_stage.file("model.ckpt").string(), trained.model,
                        provenance("train", train_json, train_config.seed));
    write_json(train_stage.file("history.json"), training_history(trained, config.deterministic));
    return std::vector<std::string>{"model.ckpt", "history.json"};
  });

  // generate
  gen::GenConfig gen_config = config.generate;
  gen_config.seed = stage_seed(config, SeedStream::generate);
  const json gen_json = gen::to_json(gen_config);
  StageCache gen_stage(work / "generate", "generate",
                       {{"config", gen_json},
                        {"vocab", vocab_stage.output_hash("vocab.json")},
                        {"model", train_stage.output_hash("model.ckpt")}});
  run(gen_stage, [&] {
    const auto model = lm::load_checkpoint(train_stage.file("model.ckpt").string(), vocab.size());
    const auto generated = gen::generate_cohort(model, vocab, gen_config);
    const json prov = provenance("generate", gen_json, gen_config.seed);
    write_cohort(gen_stage.file("synthetic.jsonl").string(), generated.cohort, prov);
    json stats = generated.stats.to_json();
    stats["provenance"] = prov;
    write_json(gen_stage.file("stats.json"), stats);
    note(log, "[generate] " + generated.stats.to_json().dump());
    return std::vector<std::string>{"synthetic.jsonl", "stats.json"};
  });

  // evaluate
  metrics::EvaluationConfig eval_config = config.evaluate;
  eval_config.utility_config.seed = stage_seed(config, SeedStream::evaluate);
  const json eval_json = {{"evaluate", eval_config.to_json()}, {"reference", config.reference_report}};
  StageCache eval_stage(work / "evaluate", "evaluate",
                        {{"config", eval_json},
                         {"train", split_stage.output_hash("train.jsonl")},
                         {"test", split_stage.output_hash("test.jsonl")},
                         {"synthetic", gen_stage.output_hash("synthetic.jsonl")}});
  run(eval_stage, [&] {
    const Cohort train = load_split("train.jsonl", Split::train);
    const Cohort test = load_split("test.jsonl", Split::test);
    const Cohort synth = read_split(gen_stage.file("synthetic.jsonl"), schema, Split::synthetic);
    const json prov = provenance("evaluate", eval_json, eval_config.utility_config.seed);
    std::vector<std::string> outputs;
    auto emit = [&](const std::string& sub, const Cohort& other, const char* role) {
      json p = prov;
      p["synthetic_source"] = role;
      const auto report = metrics::evaluate(train, test, other, eval_config, p);
      for (const auto& f : metrics::write_report(eval_stage.file(sub).string(), report)) outputs.push_back(sub + "/" + f);
    };
    emit("report", synth, "generated");
    if (config.reference_report) emit("reference", test, "test split");
    return outputs;
  });
  result.report_dir = eval_stage.file("report");
  if (config.reference_report) result.reference_report_dir = eval_stage.file("reference");
  return result;
}

}  // namespace ehrgen::pipeline
