#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "sef/checkpoint.hpp"
#include "sef/corpus.hpp"
#include "sef/evaluation.hpp"
#include "sef/noise_filter.hpp"
#include "sef/self_ensemble.hpp"
#include "sef/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sef::DataError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::uint64_t fnv1a_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sef::DataError("cannot write " + path);
  out << text;
}

struct TrainArgs {
  std::string corpus_path;
  std::string schema_path;
  std::string out_dir;
  std::string config_path;
  sef::TrainConfig config;
};

json decision_to_json(const sef::FilterDecision& d, const sef::RelationSchema& schema,
                      const std::optional<bool>& noise_truth) {
  json top = json::array();
  for (const auto& r : d.teacher_top) {
    top.push_back({schema.name(r.relation), r.prob});
  }
  json j{{"id", d.id},
         {"kept", d.kept},
         {"reason", sef::filter_reason_name(d.reason)},
         {"teacher_top", top}};
  if (noise_truth.has_value()) j["noise_truth"] = *noise_truth;
  return j;
}

int cmd_train(const TrainArgs& args) {
  const sef::RelationSchema schema = sef::RelationSchema::load(args.schema_path);
  const auto samples = sef::load_corpus(args.corpus_path, schema);
  const auto split =
      sef::split_train_valid(samples, args.config.split_ratio, args.config.seed);

  const std::string config_json = sef::train_config_to_json(args.config);
  const std::string corpus_hash = hex64(fnv1a_file(args.corpus_path));
  const std::string schema_hash = hex64(fnv1a_file(args.schema_path));
  const std::string manifest_id =
      hex64(fnv1a_text(config_json + corpus_hash + schema_hash));

  fs::create_directories(args.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const sef::TrainResult result = sef::train(args.config, split, schema);
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Training log: one record per epoch, plus the manifest reference.
  {
    std::ofstream log(fs::path(args.out_dir) / "train_log.jsonl", std::ios::binary);
    for (const auto& r : result.log) {
      json j{{"epoch", r.epoch},
             {"val_precision", r.val_precision},
             {"val_recall", r.val_recall},
             {"val_f1", r.val_f1},
             {"active_size", r.active_size},
             {"filtered_none", r.filtered_none},
             {"filtered_valid", r.filtered_valid},
             {"alpha_end", r.alpha_end},
             {"manifest_id", manifest_id}};
      log << j.dump() << "\n";
    }
  }

  const sef::Checkpoint ckpt =
      sef::checkpoint_from_result(args.config, schema, result, manifest_id);
  sef::save_checkpoint((fs::path(args.out_dir) / "checkpoint.bin").string(), ckpt);

  // The held-out split, so `eval --corpus validation.jsonl` reproduces the
  // in-loop numbers.
  sef::save_corpus((fs::path(args.out_dir) / "validation.jsonl").string(),
                   split.validation, schema);

  if (!result.final_decisions.empty()) {
    std::ofstream rep(fs::path(args.out_dir) / "filter_report.jsonl",
                      std::ios::binary);
    for (std::size_t i = 0; i < result.final_decisions.size(); ++i) {
      rep << decision_to_json(result.final_decisions[i], schema,
                              split.train[i].noise_truth)
                 .dump()
          << "\n";
    }
  }

  {
    json epochs = json::array();
    for (const auto& r : result.log) {
      epochs.push_back({{"epoch", r.epoch}, {"seconds", r.seconds}});
    }
    json manifest{{"manifest_id", manifest_id},
                  {"tool_version", kToolVersion},
                  {"seed", args.config.seed},
                  {"config", json::parse(config_json)},
                  {"corpus", {{"path", args.corpus_path}, {"fnv64", corpus_hash}}},
                  {"schema", {{"path", args.schema_path}, {"fnv64", schema_hash}}},
                  {"epoch_timings", epochs},
                  {"total_seconds", total_seconds},
                  {"artifacts", {"checkpoint.bin", "train_log.jsonl",
                                 "filter_report.jsonl", "validation.jsonl",
                                 "manifest.json"}}};
    write_text((fs::path(args.out_dir) / "manifest.json").string(),
               manifest.dump(2) + "\n");
  }

  std::cout << "best epoch " << result.best_epoch << ": val F1 "
            << result.best_eval.f1 << " (P " << result.best_eval.precision << ", R "
            << result.best_eval.recall << ") at threshold "
            << result.best_threshold << "\n";
  return 0;
}

json eval_to_json(const sef::EvalResult& r, const sef::RelationSchema& schema,
                  const std::string& manifest_id) {
  json per = json::object();
  for (int c = 0; c < schema.size(); ++c) {
    if (c == schema.none_index()) continue;
    per[schema.name(c)] = {{"tp", r.per_relation[c].tp},
                           {"fp", r.per_relation[c].fp},
                           {"fn", r.per_relation[c].fn}};
  }
  return json{{"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"threshold", r.threshold},
              {"tp", r.tp},
              {"fp", r.fp},
              {"fn", r.fn},
              {"per_relation", per},
              {"manifest_id", manifest_id}};
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             std::optional<double> threshold, const std::string& validation_path,
             const std::string& report_path) {
  const sef::Checkpoint ckpt = sef::load_checkpoint(ckpt_path);
  const auto samples = sef::load_corpus(corpus_path, ckpt.schema);
  std::vector<sef::EncodedSample> encoded(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    encoded[i] = sef::encode_sample(samples[i], ckpt.vocab);
  }

  double t = 0.0;
  if (threshold.has_value()) {
    t = *threshold;
    if (t < 0.0 || t > 1.0) throw sef::ConfigError("threshold must be in [0,1]");
  } else if (!validation_path.empty()) {
    const auto vsamples = sef::load_corpus(validation_path, ckpt.schema);
    std::vector<sef::EncodedSample> venc(vsamples.size());
    for (std::size_t i = 0; i < vsamples.size(); ++i) {
      venc[i] = sef::encode_sample(vsamples[i], ckpt.vocab);
    }
    t = sef::select_threshold_model(ckpt.teacher, venc, ckpt.schema.none_index())
            .first;
  } else {
    t = ckpt.best_threshold;  // recorded at the best validation epoch
  }

  const sef::EvalResult r =
      sef::evaluate_model(ckpt.teacher, encoded, ckpt.schema.none_index(), t);
  const std::string text =
      eval_to_json(r, ckpt.schema, ckpt.manifest_id).dump(2) + "\n";
  if (report_path.empty() || report_path == "-") {
    std::cout << text;
  } else {
    write_text(report_path, text);
    std::cout << "P " << r.precision << " R " << r.recall << " F1 " << r.f1
              << " at threshold " << t << "\n";
  }
  return 0;
}

int cmd_synth(const sef::SynthConfig& config, std::uint64_t seed,
              const std::string& out_dir) {
  const sef::SynthCorpus corpus = sef::generate_synthetic(config, seed);
  fs::create_directories(out_dir);
  const auto corpus_path = (fs::path(out_dir) / "corpus.jsonl").string();
  const auto schema_path = (fs::path(out_dir) / "schema.json").string();
  sef::save_corpus(corpus_path, corpus.samples, corpus.schema);
  corpus.schema.save(schema_path);

  long long noisy = 0, none_count = 0;
  for (const auto& s : corpus.samples) {
    noisy += (s.noise_truth.has_value() && *s.noise_truth) ? 1 : 0;
    none_count += s.ds_label == corpus.schema.none_index() ? 1 : 0;
  }
  json manifest{{"tool_version", kToolVersion},
                {"seed", seed},
                {"samples", corpus.samples.size()},
                {"none_samples", none_count},
                {"valid_samples",
                 static_cast<long long>(corpus.samples.size()) - none_count},
                {"noisy_samples", noisy},
                {"config",
                 {{"relations", config.valid_relations},
                  {"vocab", config.vocab_size},
                  {"entity_pool", config.entity_pool},
                  {"samples_per_class", config.samples_per_class},
                  {"pos_noise", config.pos_noise_rate},
                  {"neg_noise", config.neg_noise_rate},
                  {"none_ratio", config.none_ratio},
                  {"min_tokens", config.min_tokens},
                  {"max_tokens", config.max_tokens},
                  {"cues_per_relation", config.cues_per_relation}}},
                {"corpus", {{"path", corpus_path}, {"fnv64", hex64(fnv1a_file(corpus_path))}}},
                {"schema", {{"path", schema_path}, {"fnv64", hex64(fnv1a_file(schema_path))}}}};
  write_text((fs::path(out_dir) / "synth_manifest.json").string(),
             manifest.dump(2) + "\n");
  std::cout << "wrote " << corpus.samples.size() << " samples (" << none_count
            << " None, " << noisy << " noisy) to " << out_dir << "\n";
  return 0;
}

int cmd_filter_report(const std::string& ckpt_path, const std::string& corpus_path,
                      int k, const std::string& out_dir) {
  const sef::Checkpoint ckpt = sef::load_checkpoint(ckpt_path);
  if (k == 0) {
    k = ckpt.config.top_k;  // not supplied
  } else if (k < 0) {
    throw sef::ConfigError("k must be >= 1");
  }
  const auto samples = sef::load_corpus(corpus_path, ckpt.schema);
  std::vector<sef::EncodedSample> encoded(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    encoded[i] = sef::encode_sample(samples[i], ckpt.vocab);
  }
  const auto decisions = sef::filter_report(ckpt.teacher, samples, encoded,
                                            ckpt.schema.none_index(), k);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "filter_decisions.jsonl",
                      std::ios::binary);
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      out << decision_to_json(decisions[i], ckpt.schema, samples[i].noise_truth)
                 .dump()
          << "\n";
    }
  }

  long long dropped = 0, kept = 0, dropped_noisy = 0, truly_noisy = 0;
  bool have_truth = true;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!samples[i].noise_truth.has_value()) have_truth = false;
    const bool noisy = samples[i].noise_truth.value_or(false);
    truly_noisy += noisy ? 1 : 0;
    if (decisions[i].kept) {
      ++kept;
    } else {
      ++dropped;
      dropped_noisy += noisy ? 1 : 0;
    }
  }
  json summary{{"k", k},
               {"kept", kept},
               {"dropped", dropped},
               {"manifest_id", ckpt.manifest_id}};
  if (have_truth && !decisions.empty()) {
    summary["filter_precision"] =
        dropped > 0 ? static_cast<double>(dropped_noisy) / dropped : 0.0;
    summary["filter_recall"] =
        truly_noisy > 0 ? static_cast<double>(dropped_noisy) / truly_noisy : 0.0;
  }
  write_text((fs::path(out_dir) / "filter_summary.json").string(),
             summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-ensemble filtering for distantly supervised relation extraction"};
  app.require_subcommand(1);

  // train
  TrainArgs targs;
  std::string arch_name = "cnn";
  bool no_filter = false;
  auto* train_cmd = app.add_subcommand("train", "train a student-teacher model");
  train_cmd->add_option("--corpus", targs.corpus_path, "training corpus (JSONL)");
  train_cmd->add_option("--schema", targs.schema_path, "relation schema (JSON)");
  train_cmd->add_option("--out", targs.out_dir, "output directory");
  train_cmd->add_option("--config", targs.config_path,
                        "JSON config file; flags override its values");
  auto* arch_opt = train_cmd->add_option("--arch", arch_name,
                                         "architecture: cnn|pcnn|ea|bgwa");
  auto* k_opt = train_cmd->add_option("--k", targs.config.top_k,
                                      "top-k for valid-relation filtering");
  auto* amax_opt = train_cmd->add_option("--alpha-max", targs.config.alpha_max,
                                         "EMA decay ceiling");
  auto* ramp_opt = train_cmd->add_option("--ramp-epochs", targs.config.ramp_epochs,
                                         "epochs to ramp alpha to alpha-max");
  auto* batch_opt = train_cmd->add_option("--batch", targs.config.batch_size,
                                          "mini-batch size");
  auto* lr_opt = train_cmd->add_option("--lr", targs.config.learning_rate,
                                       "Adagrad learning rate");
  auto* seed_opt = train_cmd->add_option("--seed", targs.config.seed, "root seed");
  auto* emb_opt = train_cmd->add_option("--embeddings", targs.config.embeddings_path,
                                        "pretrained word embeddings (text)");
  auto* nofilter_opt = train_cmd->add_flag("--no-filter", no_filter,
                                           "self-ensemble only, no noise filtering");
  auto* epochs_opt = train_cmd->add_option("--max-epochs", targs.config.max_epochs,
                                           "epoch cap");
  auto* patience_opt = train_cmd->add_option("--patience", targs.config.patience,
                                             "early-stop patience (validation F1)");
  auto* split_opt = train_cmd->add_option("--split-ratio", targs.config.split_ratio,
                                          "train fraction of the corpus");
  auto* dropout_opt = train_cmd->add_option("--dropout", targs.config.dims.dropout,
                                            "dropout rate on the feature vector");
  auto* dw_opt = train_cmd->add_option("--word-dim", targs.config.dims.word_dim,
                                       "word embedding width");
  auto* du_opt = train_cmd->add_option("--pos-dim", targs.config.dims.pos_dim,
                                       "position embedding width");
  auto* pmax_opt = train_cmd->add_option("--pos-max", targs.config.dims.pos_max,
                                         "position distance clip radius");
  auto* fk_opt = train_cmd->add_option("--filters", targs.config.dims.filters,
                                       "convolution filter count");
  auto* kern_opt = train_cmd->add_option("--kernel", targs.config.dims.kernel,
                                         "convolution kernel width");
  auto* gru_opt = train_cmd->add_option("--gru-hidden", targs.config.dims.gru_hidden,
                                        "GRU hidden size per direction");
  auto* att_opt = train_cmd->add_option("--att-hidden", targs.config.dims.att_hidden,
                                        "attention scorer hidden width");

  // eval
  std::string eval_ckpt, eval_corpus, eval_validation, eval_report;
  double eval_threshold = 0.0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "evaluation corpus (JSONL)")
      ->required();
  auto* thr_opt = eval_cmd->add_option("--threshold", eval_threshold,
                                       "confidence threshold in [0,1]");
  eval_cmd->add_option("--validation", eval_validation,
                       "corpus to re-derive the threshold from");
  eval_cmd->add_option("--report", eval_report, "report path ('-' for stdout)");

  // synth
  sef::SynthConfig synth_config;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic noisy corpus");
  synth_cmd->add_option("--relations", synth_config.valid_relations,
                        "number of valid relations");
  synth_cmd->add_option("--vocab", synth_config.vocab_size, "filler vocabulary size");
  synth_cmd->add_option("--entity-pool", synth_config.entity_pool, "entity pool size");
  synth_cmd->add_option("--samples-per-class", synth_config.samples_per_class,
                        "positive samples per relation");
  synth_cmd->add_option("--pos-noise", synth_config.pos_noise_rate,
                        "positive-noise rate in [0,1]");
  synth_cmd->add_option("--neg-noise", synth_config.neg_noise_rate,
                        "negative-noise rate in [0,1]");
  synth_cmd->add_option("--none-ratio", synth_config.none_ratio,
                        "None-to-valid sample ratio");
  synth_cmd->add_option("--min-tokens", synth_config.min_tokens, "min sentence length");
  synth_cmd->add_option("--max-tokens", synth_config.max_tokens, "max sentence length");
  synth_cmd->add_option("--cues", synth_config.cues_per_relation,
                        "cue phrases per relation");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  // filter-report
  std::string fr_ckpt, fr_corpus, fr_out;
  int fr_k = 0;
  auto* fr_cmd = app.add_subcommand("filter-report",
                                    "audit the filter over a corpus");
  fr_cmd->add_option("--checkpoint", fr_ckpt, "checkpoint file")->required();
  fr_cmd->add_option("--corpus", fr_corpus, "corpus to filter (JSONL)")->required();
  auto* fr_k_opt =
      fr_cmd->add_option("--k", fr_k, "top-k override (default: checkpoint setting)");
  fr_cmd->add_option("--out", fr_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help is success, everything else usage error
  }

  try {
    if (train_cmd->parsed()) {
      // Config file first, then flags override whatever they set.
      if (!targs.config_path.empty()) {
        std::ifstream in(targs.config_path);
        if (!in) throw sef::ConfigError("cannot open config: " + targs.config_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        const sef::TrainConfig file_config = sef::train_config_from_json(text);
        const json j = json::parse(text);
        sef::TrainConfig merged = file_config;
        if (arch_opt->count() > 0) merged.arch = sef::architecture_from_string(arch_name);
        if (k_opt->count() > 0) merged.top_k = targs.config.top_k;
        if (amax_opt->count() > 0) merged.alpha_max = targs.config.alpha_max;
        if (ramp_opt->count() > 0) merged.ramp_epochs = targs.config.ramp_epochs;
        if (batch_opt->count() > 0) merged.batch_size = targs.config.batch_size;
        if (lr_opt->count() > 0) merged.learning_rate = targs.config.learning_rate;
        if (seed_opt->count() > 0) merged.seed = targs.config.seed;
        if (emb_opt->count() > 0) merged.embeddings_path = targs.config.embeddings_path;
        if (nofilter_opt->count() > 0) merged.filtering = !no_filter;
        if (epochs_opt->count() > 0) merged.max_epochs = targs.config.max_epochs;
        if (patience_opt->count() > 0) merged.patience = targs.config.patience;
        if (split_opt->count() > 0) merged.split_ratio = targs.config.split_ratio;
        if (dropout_opt->count() > 0) merged.dims.dropout = targs.config.dims.dropout;
        if (dw_opt->count() > 0) merged.dims.word_dim = targs.config.dims.word_dim;
        if (du_opt->count() > 0) merged.dims.pos_dim = targs.config.dims.pos_dim;
        if (pmax_opt->count() > 0) merged.dims.pos_max = targs.config.dims.pos_max;
        if (fk_opt->count() > 0) merged.dims.filters = targs.config.dims.filters;
        if (kern_opt->count() > 0) merged.dims.kernel = targs.config.dims.kernel;
        if (gru_opt->count() > 0) merged.dims.gru_hidden = targs.config.dims.gru_hidden;
        if (att_opt->count() > 0) merged.dims.att_hidden = targs.config.dims.att_hidden;
        if (targs.corpus_path.empty()) targs.corpus_path = j.value("corpus", "");
        if (targs.schema_path.empty()) targs.schema_path = j.value("schema", "");
        if (targs.out_dir.empty()) targs.out_dir = j.value("out", "");
        targs.config = merged;
      } else {
        targs.config.arch = sef::architecture_from_string(arch_name);
        targs.config.filtering = !no_filter;
      }
      if (targs.corpus_path.empty() || targs.schema_path.empty() ||
          targs.out_dir.empty()) {
        throw sef::ConfigError("train needs --corpus, --schema, and --out");
      }
      return cmd_train(targs);
    }
    if (eval_cmd->parsed()) {
      std::optional<double> threshold;
      if (thr_opt->count() > 0) threshold = eval_threshold;
      return cmd_eval(eval_ckpt, eval_corpus, threshold, eval_validation,
                      eval_report);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_config, synth_seed, synth_out);
    }
    if (fr_cmd->parsed()) {
      return cmd_filter_report(fr_ckpt, fr_corpus,
                               fr_k_opt->count() > 0 ? fr_k : 0, fr_out);
    }
  } catch (const sef::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
