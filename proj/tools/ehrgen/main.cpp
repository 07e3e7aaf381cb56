#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ehrgen/core/cohort_io.hpp"
#include "ehrgen/core/split.hpp"
#include "ehrgen/lm/checkpoint.hpp"
#include "ehrgen/metrics/report.hpp"
#include "ehrgen/pipeline/pipeline.hpp"
#include "ehrgen/sim/simulator.hpp"
#include "ehrgen/tok/token_io.hpp"
#include "ehrgen/util/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ehrgen;
using pipeline::PipelineConfig;
using pipeline::SeedStream;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kValidation = 2, kVersion = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  bool deterministic = false;
  bool quiet = false;
};

PipelineConfig effective_config(const Globals& g) {
  json j = json::object();
  fs::path base;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw Error("cannot open config " + g.config_path);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    base = fs::path(g.config_path).parent_path();
  }
  pipeline::apply_overrides(j, g.overrides);
  if (g.seed) j["seed"] = *g.seed;
  if (g.deterministic) j["deterministic"] = true;
  PipelineConfig c = pipeline::pipeline_config_from_json(j, base);
  if (const char* env = std::getenv("EHRGEN_WORK_DIR"); env && *env) c.work_dir = env;
  return c;
}

fs::path default_schema(const std::string& cohort_path) {
  return fs::path(cohort_path).parent_path() / "schema.json";
}

CohortSchema schema_for(const std::string& schema_path, const std::string& cohort_path) {
  return read_schema(schema_path.empty() ? default_schema(cohort_path).string() : schema_path);
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ostream* log_stream(const Globals& g) {
  return g.quiet ? nullptr : &std::cerr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ehrgen: synthetic EHR generation with a decoder-only transformer"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(pipeline::kToolVersion));

  Globals g;
  app.add_option("--seed", g.seed, "Global seed; every stage seed is derived from it");
  app.add_option("--config", g.config_path, "Pipeline config file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a config field, e.g. --set train.epochs=3");
  app.add_flag("--deterministic", g.deterministic, "Leave wall-clock fields out of every artifact");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated cohort and its schema");
  std::string sim_spec, sim_out, sim_schema_out, sim_spec_out;
  std::optional<std::size_t> sim_patients;
  sim_cmd->add_option("--spec", sim_spec, "Simulator spec (JSON); default is the built-in spec")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--patients", sim_patients, "Number of patients");
  sim_cmd->add_option("--out", sim_out, "Cohort file (JSON lines)")->required();
  sim_cmd->add_option("--schema-out", sim_schema_out, "Schema file; default schema.json next to --out");
  sim_cmd->add_option("--spec-out", sim_spec_out, "Also write the effective simulator spec");
  sim_cmd->callback([&] {
    const auto cfg = effective_config(g);
    sim::SimSpec spec = !sim_spec.empty() ? sim::read_spec(sim_spec)
                        : cfg.sim_spec   ? sim::read_spec(cfg.sim_spec->string())
                                         : sim::default_spec();
    spec.patients = sim_patients.value_or(cfg.patients);
    spec.seed = pipeline::stage_seed(cfg, SeedStream::simulate);
    const Cohort cohort = sim::simulate(spec);
    ensure_parent(sim_out);
    if (!sim_spec_out.empty()) sim::write_spec(sim_spec_out, spec);
    const fs::path schema_path = sim_schema_out.empty() ? default_schema(sim_out) : fs::path(sim_schema_out);
    write_schema(schema_path.string(), cohort.schema);
    write_cohort(sim_out, cohort, pipeline::provenance("simulate", sim::spec_to_json(spec), spec.seed));
    std::cout << "wrote " << cohort.size() << " patients to " << sim_out << "\n";
  });

  // split
  auto* split_cmd = app.add_subcommand("split", "Split a cohort into train/validation/test files");
  std::string split_cohort_path, split_schema, split_out, split_fractions;
  split_cmd->add_option("--cohort", split_cohort_path, "Cohort file")->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--schema", split_schema, "Schema file; default schema.json next to the cohort");
  split_cmd->add_option("--fractions", split_fractions, "train,validation,test (default 0.7,0.15,0.15)");
  split_cmd->add_option("--out-dir", split_out, "Output directory")->required();
  split_cmd->callback([&] {
    auto cfg = effective_config(g);
    if (!split_fractions.empty()) {
      std::vector<double> f;
      std::stringstream ss(split_fractions);
      for (std::string part; std::getline(ss, part, ',');) f.push_back(std::stod(part));
      if (f.size() != 3) throw PreconditionError("--fractions needs three comma-separated values");
      cfg.split = {f[0], f[1], f[2]};
    }
    const auto schema = schema_for(split_schema, split_cohort_path);
    const std::uint64_t seed = pipeline::stage_seed(cfg, SeedStream::split);
    const Cohort tagged = split_cohort(ingest_cohort(split_cohort_path, schema), cfg.split, seed);
    const json prov = pipeline::provenance(
        "split", {{"train", cfg.split.train}, {"validation", cfg.split.validation}, {"test", cfg.split.test},
                  {"seed", seed}},
        seed);
    fs::create_directories(split_out);
    const fs::path dir(split_out);
    write_schema((dir / "schema.json").string(), schema);
    for (const auto& [name, tag] : {std::pair<const char*, Split>{"train", Split::train},
                                    {"validation", Split::validation}, {"test", Split::test}}) {
      const Cohort part = tagged.subset(tag);
      write_cohort((dir / (std::string(name) + ".jsonl")).string(), part, prov);
      std::cout << name << ": " << part.size() << " patients\n";
    }
  });

  // build-vocab
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Fit bins on the training split and freeze the vocabulary");
  vocab_cmd->alias("build_vocab");
  std::string vocab_train, vocab_schema, vocab_out, vocab_mode;
  std::optional<std::size_t> vocab_value_bins, vocab_dt_bins, vocab_age_bins;
  vocab_cmd->add_option("--train", vocab_train, "Training cohort")->required()->check(CLI::ExistingFile);
  vocab_cmd->add_option("--schema", vocab_schema, "Schema file; default schema.json next to the cohort");
  vocab_cmd->add_option("--out", vocab_out, "Vocabulary file (JSON)")->required();
  vocab_cmd->add_option("--value-bins", vocab_value_bins, "Bins per numeric variable");
  vocab_cmd->add_option("--time-delta-bins", vocab_dt_bins, "Time-delta bins");
  vocab_cmd->add_option("--age-bins", vocab_age_bins, "Age bins");
  vocab_cmd->add_option("--mode", vocab_mode, "binned or digit-text (adds digit tokens)");
  vocab_cmd->callback([&] {
    auto cfg = effective_config(g);
    if (vocab_value_bins) cfg.tokenizer.value_bins = *vocab_value_bins;
    if (vocab_dt_bins) cfg.tokenizer.time_delta_bins = *vocab_dt_bins;
    if (vocab_age_bins) cfg.tokenizer.age_bins = *vocab_age_bins;
    if (!vocab_mode.empty()) cfg.encode_mode = tok::encode_mode_from_string(vocab_mode);
    cfg.tokenizer.digit_text = cfg.encode_mode == tok::EncodeMode::digit_text;
    const auto train = ingest_cohort(vocab_train, schema_for(vocab_schema, vocab_train));
    const auto vocab = tok::build_vocabulary(train, cfg.tokenizer);
    ensure_parent(vocab_out);
    tok::save_vocabulary(vocab_out, vocab,
                         pipeline::provenance("vocab", pipeline::tokenizer_to_json(cfg.tokenizer, cfg.encode_mode), 0));
    std::cout << "vocabulary: " << vocab.size() << " tokens\n";
  });

  // tokenize
  auto* tok_cmd = app.add_subcommand("tokenize", "Encode a cohort as token sequences");
  std::string tok_cohort, tok_vocab, tok_mode, tok_out, tok_binary;
  std::optional<std::size_t> tok_context;
  tok_cmd->add_option("--cohort", tok_cohort, "Cohort file")->required()->check(CLI::ExistingFile);
  tok_cmd->add_option("--vocab", tok_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  tok_cmd->add_option("--mode", tok_mode, "binned or digit-text");
  tok_cmd->add_option("--out", tok_out, "Token text file")->required();
  tok_cmd->add_option("--binary", tok_binary, "Also write the binary id file");
  tok_cmd->add_option("--context", tok_context, "Fit sequences to this many tokens (0: leave whole)");
  tok_cmd->callback([&] {
    auto cfg = effective_config(g);
    if (!tok_mode.empty()) cfg.encode_mode = tok::encode_mode_from_string(tok_mode);
    const auto vocab = tok::load_vocabulary(tok_vocab);
    const auto cohort = ingest_cohort(tok_cohort, vocab.schema());
    const std::size_t context = tok_context.value_or(cfg.model.context);
    const auto t = pipeline::tokenize_cohort(cohort, vocab, cfg.encode_mode, context);
    json header = pipeline::provenance("tokenize", {{"mode", tok::to_string(cfg.encode_mode)}, {"context", context}}, 0);
    header["shortened"] = t.shortened;
    header["dropped"] = t.dropped;
    ensure_parent(tok_out);
    tok::write_token_text(tok_out, t.sequences, vocab, header);
    if (!tok_binary.empty()) tok::write_token_binary(tok_binary, t.sequences);
    std::size_t tokens = 0;
    for (const auto& s : t.sequences) tokens += s.size();
    std::cout << t.sequences.size() << " sequences, " << tokens << " tokens (" << t.shortened << " shortened, "
              << t.dropped << " dropped)\n";
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the language model on a token file");
  std::string train_tokens, train_vocab, train_validation, train_dir;
  std::optional<std::size_t> t_epochs, t_batch, t_accum, t_layers, t_dim, t_heads, t_context;
  std::optional<double> t_lr, t_dropout;
  train_cmd->add_option("--tokens", train_tokens, "Training token file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", train_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--validation-tokens", train_validation, "Validation token file")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint-dir", train_dir, "Output directory")->required();
  train_cmd->add_option("--epochs", t_epochs);
  train_cmd->add_option("--lr", t_lr);
  train_cmd->add_option("--batch-size", t_batch);
  train_cmd->add_option("--grad-accum", t_accum);
  train_cmd->add_option("--layers", t_layers);
  train_cmd->add_option("--dim", t_dim);
  train_cmd->add_option("--heads", t_heads);
  train_cmd->add_option("--context", t_context);
  train_cmd->add_option("--dropout", t_dropout);
  train_cmd->callback([&] {
    auto cfg = effective_config(g);
    if (t_epochs) cfg.train.epochs = *t_epochs;
    if (t_lr) cfg.train.learning_rate = *t_lr;
    if (t_batch) cfg.train.batch_size = *t_batch;
    if (t_accum) cfg.train.grad_accum = *t_accum;
    if (t_layers) cfg.model.layers = *t_layers;
    if (t_dim) cfg.model.dim = *t_dim;
    if (t_heads) cfg.model.heads = *t_heads;
    if (t_context) cfg.model.context = *t_context;
    if (t_dropout) cfg.model.dropout = *t_dropout;
    cfg.model.seed = pipeline::stage_seed(cfg, SeedStream::model_init);
    cfg.train.seed = pipeline::stage_seed(cfg, SeedStream::train);
    const auto vocab = tok::load_vocabulary(train_vocab);
    const auto train = tok::read_token_text(train_tokens, vocab);
    const auto validation =
        train_validation.empty() ? std::vector<tok::TokenSequence>{} : tok::read_token_text(train_validation, vocab);
    const auto trained = pipeline::train_model(vocab, train, validation, cfg.model, cfg.train, log_stream(g));
    fs::create_directories(train_dir);
    json model_json = lm::to_json(trained.model.config());
    const json stage = {{"model", model_json}, {"train", lm::to_json(cfg.train)}};
    lm::save_checkpoint((fs::path(train_dir) / "model.ckpt").string(), trained.model,
                        pipeline::provenance("train", stage, cfg.train.seed));
    write_json_file(fs::path(train_dir) / "history.json", pipeline::training_history(trained, cfg.deterministic));
    std::cout << "final epoch loss " << trained.result.epoch_loss.back() << "\n";
  });

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Sample synthetic patients from a checkpoint");
  std::string gen_ckpt, gen_vocab, gen_out, gen_stats, gen_tokens_out, gen_value_mode;
  std::optional<std::size_t> g_count, g_topk, g_max_tokens, g_retries;
  std::optional<double> g_temperature;
  bool g_greedy = false;
  gen_cmd->add_option("--checkpoint", gen_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--vocab", gen_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--count", g_count, "Patients to generate");
  gen_cmd->add_option("--temperature", g_temperature);
  gen_cmd->add_option("--top-k", g_topk);
  gen_cmd->add_option("--max-tokens", g_max_tokens, "Sequence cap (0: model context)");
  gen_cmd->add_option("--max-retries", g_retries, "Extra attempts per malformed sample");
  gen_cmd->add_option("--value-mode", gen_value_mode, "uniform-sample or midpoint");
  gen_cmd->add_flag("--greedy", g_greedy, "Argmax decoding");
  gen_cmd->add_option("--out", gen_out, "Synthetic cohort file")->required();
  gen_cmd->add_option("--stats", gen_stats, "Generation statistics (JSON); default stats.json next to --out");
  gen_cmd->add_option("--tokens-out", gen_tokens_out, "Also write the accepted token sequences");
  gen_cmd->callback([&] {
    auto cfg = effective_config(g);
    auto& gc = cfg.generate;
    if (g_count) gc.count = *g_count;
    if (g_temperature) gc.temperature = *g_temperature;
    if (g_topk) gc.top_k = *g_topk;
    if (g_max_tokens) gc.max_tokens = *g_max_tokens;
    if (g_retries) gc.max_retries = *g_retries;
    if (!gen_value_mode.empty()) gc.value_mode = tok::value_mode_from_string(gen_value_mode);
    if (g_greedy) gc.greedy = true;
    gc.seed = pipeline::stage_seed(cfg, SeedStream::generate);
    gen::check_gen_config(gc);
    const auto vocab = tok::load_vocabulary(gen_vocab);
    const auto model = lm::load_checkpoint(gen_ckpt, vocab.size());
    const auto result = gen::generate_cohort(model, vocab, gc);
    const json prov = pipeline::provenance("generate", gen::to_json(gc), gc.seed);
    ensure_parent(gen_out);
    write_cohort(gen_out, result.cohort, prov);
    json stats = result.stats.to_json();
    stats["provenance"] = prov;
    write_json_file(gen_stats.empty() ? fs::path(gen_out).parent_path() / "stats.json" : fs::path(gen_stats), stats);
    if (!gen_tokens_out.empty()) tok::write_token_text(gen_tokens_out, result.sequences, vocab, prov);
    std::cout << result.stats.to_json().dump() << "\n";
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Fidelity, utility and privacy report");
  std::string e_train, e_test, e_synth, e_schema, e_out;
  bool e_no_utility = false, e_no_privacy = false;
  eval_cmd->add_option("--train", e_train, "Real training cohort")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", e_test, "Real test cohort")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--synth", e_synth, "Synthetic cohort")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--schema", e_schema, "Schema file; default schema.json next to --train");
  eval_cmd->add_option("--out-dir", e_out, "Report directory")->required();
  eval_cmd->add_flag("--no-utility", e_no_utility, "Skip the utility battery");
  eval_cmd->add_flag("--no-privacy", e_no_privacy, "Skip membership inference");
  eval_cmd->callback([&] {
    auto cfg = effective_config(g);
    auto ec = cfg.evaluate;
    if (e_no_utility) ec.utility = false;
    if (e_no_privacy) ec.privacy = false;
    ec.utility_config.seed = pipeline::stage_seed(cfg, SeedStream::evaluate);
    const auto schema = schema_for(e_schema, e_train);
    const auto train = ingest_cohort(e_train, schema);
    const auto test = ingest_cohort(e_test, schema);
    const auto synth = ingest_cohort(e_synth, schema);
    const json prov = pipeline::provenance("evaluate", ec.to_json(), ec.utility_config.seed);
    const auto report = metrics::evaluate(train, test, synth, ec, prov);
    metrics::write_report(e_out, report);
    std::cout << report.json["fidelity"]["ngram"].dump() << "\n";
  });

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage with content-hash caching");
  bool p_force = false;
  std::string p_work;
  pipe_cmd->add_flag("--force", p_force, "Rebuild every stage");
  pipe_cmd->add_option("--work-dir", p_work, "Work directory (overrides the config and EHRGEN_WORK_DIR)");
  pipe_cmd->callback([&] {
    auto cfg = effective_config(g);
    if (!p_work.empty()) cfg.work_dir = p_work;
    const auto result = pipeline::run_pipeline(cfg, {p_force, log_stream(g)});
    for (const auto& s : result.stages) std::cout << s.stage << ": " << (s.cached ? "cached" : "built") << "\n";
    std::cout << "report: " << result.report_dir.string() << "\n";
  });

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render correlation and co-occurrence heatmaps (PPM)");
  std::string plot_dir, plot_out;
  plot_cmd->add_option("--report-dir", plot_dir, "Directory holding report.json")->required()->check(CLI::ExistingDirectory);
  plot_cmd->add_option("--out-dir", plot_out, "Image directory; default: the report directory");
  plot_cmd->callback([&] {
    const json r = read_json_file(fs::path(plot_dir) / "report.json");
    const fs::path out = plot_out.empty() ? fs::path(plot_dir) : fs::path(plot_out);
    fs::create_directories(out);
    auto to_matrix = [](const json& rows) {
      metrics::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t k = 0; k < m.cols; ++k) m(i, k) = rows[i][k].is_null() ? std::nan("") : rows[i][k].get<double>();
      }
      return m;
    };
    const auto& tc = r.at("fidelity").at("temporal_correlation");
    const auto& co = r.at("fidelity").at("co_occurrence");
    metrics::Matrix conf = to_matrix(tc.at("confusion"));
    double peak = 1;
    for (double v : conf.data) peak = std::max(peak, v);
    const std::vector<std::tuple<std::string, metrics::Matrix, double, double>> plots = {
        {"correlation_real.ppm", to_matrix(tc.at("real")), -1.0, 1.0},
        {"correlation_synthetic.ppm", to_matrix(tc.at("synthetic")), -1.0, 1.0},
        {"correlation_confusion.ppm", conf, -peak, peak},
        {"cooccurrence_real.ppm", to_matrix(co.at("real")), -1.0, 1.0},
        {"cooccurrence_synthetic.ppm", to_matrix(co.at("synthetic")), -1.0, 1.0},
    };
    for (const auto& [name, m, lo, hi] : plots) {
      metrics::write_heatmap_ppm((out / name).string(), m, lo, hi);
      std::cout << "wrote " << (out / name).string() << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  } catch (const VersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVersion;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
