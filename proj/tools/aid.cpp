// Command-line entry point for the accent-identification workbench.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include "aid/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace aid;

ExperimentSpec load_spec(const std::string& config_path, std::uint64_t seed_override,
                         bool has_seed, const std::string& out_override) {
  auto kv = parse_config_file(config_path);
  if (has_seed) kv["seed"] = std::to_string(seed_override);
  ExperimentSpec spec = spec_from_config(kv);
  if (!out_override.empty()) spec.out_dir = out_override;
  // re-derive seed-dependent substreams after an override
  if (has_seed) {
    kv["seed"] = std::to_string(seed_override);
    spec = spec_from_config(kv);
    if (!out_override.empty()) spec.out_dir = out_override;
  }
  return spec;
}

void print_eval(const std::string& title, const EvalReport& rep,
                const std::vector<std::string>& names) {
  std::cout << "== " << title << " ==\n" << render_eval_report(rep, names);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accent-identification workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest_path, store_path, checkpoint_path;
  std::vector<std::string> matrix_configs;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string engine_override;
  int k_override = -1, versions_override = -1;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config file");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override top-level seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  add_common(gen);

  auto* ing = app.add_subcommand("ingest", "validate and summarize an ingested corpus");
  ing->add_option("--manifest", manifest_path, "manifest file")->required();
  ing->add_option("--store", store_path, "feature store file")->required();

  auto* spl = app.add_subcommand("split", "compute a speaker-disjoint split");
  add_common(spl);

  auto* aug = app.add_subcommand("augment", "write an augmented corpus");
  add_common(aug);
  aug->add_option("--engine", engine_override, "knn|oracle");
  aug->add_option("--k", k_override, "neighbor count");
  aug->add_option("--versions", versions_override, "converted versions per utterance");

  auto* trn = app.add_subcommand("train", "train a classifier and save a checkpoint");
  add_common(trn);

  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on the unseen test split");
  add_common(evl);
  evl->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();

  auto* ana = app.add_subcommand("analyze-vc", "speaker similarity / accent preservation");
  add_common(ana);

  auto* run = app.add_subcommand("run", "run one experiment end to end");
  add_common(run);

  auto* mat = app.add_subcommand("run-matrix", "run several experiments, print one table");
  mat->add_option("--config", matrix_configs, "experiment config files")->required();
  mat->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage problems share the config-error exit code; --help stays 0
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      if (!spec.synthetic) throw aid::ConfigError("gen-corpus requires corpus.source=synthetic");
      Corpus corpus = generate_synthetic(*spec.synthetic);
      if (spec.out_dir.empty()) throw aid::ConfigError("gen-corpus requires --out");
      write_corpus(corpus, spec.out_dir);
      std::cout << "wrote " << corpus.utterances.size() << " utterances to " << spec.out_dir
                << "\n";
    } else if (ing->parsed()) {
      Corpus corpus = ingest(manifest_path, store_path);
      std::cout << "ingested " << corpus.utterances.size() << " utterances, "
                << corpus.label_index.n_accents() << " accents, "
                << corpus.label_index.n_speakers() << " speakers\n";
    } else if (spl->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      PreparedExperiment prep = prepare_corpus_and_split(spec);
      const std::string path =
          (spec.out_dir.empty() ? std::string("split.json")
                                : (std::filesystem::path(spec.out_dir) / "split.json").string());
      write_file_atomic(path, split_to_json(prep.split).dump(2) + "\n");
      std::cout << "train/val/test utterances: " << prep.split.train.size() << "/"
                << prep.split.val.size() << "/" << prep.split.test.size() << " -> " << path
                << "\n";
    } else if (aug->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      if (!engine_override.empty())
        spec.augment = engine_override == "knn"
                           ? AugmentMode::knn
                           : (engine_override == "oracle"
                                  ? AugmentMode::oracle
                                  : throw aid::ConfigError("bad --engine " + engine_override));
      if (spec.augment == AugmentMode::none)
        throw aid::ConfigError("augment: set augment.engine or --engine");
      if (k_override > 0) spec.vc.k = k_override;
      if (versions_override >= 0) spec.vc.versions_per_utterance = versions_override;
      PreparedExperiment prep = prepare_corpus_and_split(spec);
      VcConfig vc = spec.vc;
      if (vc.target_pool.empty()) vc.target_pool = prep.train_speakers;
      AugmentResult result = augment_corpus(
          prep.corpus, prep.split, vc,
          spec.augment == AugmentMode::oracle ? VcEngine::oracle : VcEngine::knn);
      if (spec.out_dir.empty()) throw aid::ConfigError("augment requires --out");
      write_corpus(result.corpus, spec.out_dir);
      write_file_atomic(std::filesystem::path(spec.out_dir) / "split.json",
                        split_to_json(result.split).dump(2) + "\n");
      std::cout << "augmented corpus: " << result.corpus.utterances.size() << " utterances ("
                << result.split.train.size() << " train) -> " << spec.out_dir << "\n";
    } else if (trn->parsed() || run->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      if (spec.out_dir.empty()) spec.out_dir = "runs";
      RunRecord record = run_experiment(spec);
      persist_run_record(record, spec.out_dir);
      print_eval("seen-speaker validation", record.val_report, {});
      print_eval("unseen-speaker test", record.test_report, {});
      std::cout << "run record: "
                << (std::filesystem::path(spec.out_dir) / (record.name + ".json")).string()
                << "\n";
    } else if (evl->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      auto [model, train_cfg] = load_checkpoint(checkpoint_path);
      PreparedExperiment prep = prepare_corpus_and_split(spec);
      Dataset test_set =
          make_dataset(prep.corpus, prep.split.test, model.labels, spec.variant);
      EvalReport rep = evaluate(model, test_set, prep.split.unseen_speakers.size());
      print_eval("unseen-speaker test", rep, model.labels.accents);
    } else if (ana->parsed()) {
      ExperimentSpec spec = load_spec(config_path, seed, seed_given, out_dir);
      RunRecord record = run_vc_analysis(spec);
      std::cout << render_vc_analysis(*record.vc_analysis);
      if (!spec.out_dir.empty()) persist_run_record(record, spec.out_dir);
    } else if (mat->parsed()) {
      std::vector<ExperimentSpec> specs;
      for (const auto& path : matrix_configs) {
        ExperimentSpec spec = load_spec(path, seed, seed_given, out_dir);
        if (spec.name == "experiment")
          spec.name = std::filesystem::path(path).stem().string();
        specs.push_back(std::move(spec));
      }
      std::vector<RunRecord> records = run_matrix(specs);
      std::cout << render_matrix_table(records);
      if (!out_dir.empty())
        for (const auto& record : records) persist_run_record(record, out_dir);
    }
  } catch (const aid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const aid::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const aid::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
