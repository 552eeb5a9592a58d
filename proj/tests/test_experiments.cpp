#include "aid/experiments.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace aid;

namespace {

std::string small_synth_config(std::uint64_t seed) {
  return "seed = " + std::to_string(seed) + R"(
corpus.source = synthetic
corpus.synthetic.n_accents = 3
corpus.synthetic.speakers_per_accent = 5
corpus.synthetic.utterances_per_speaker = 4
corpus.synthetic.frame_dim = 8
corpus.synthetic.accent_scale = 2.0
corpus.synthetic.noise_scale = 0.1
split.train_fraction = 0.5
split.val_fraction = 0.25
train.epochs = 5
train.lr_accent = 0.05
train.lr_speaker = 0.005
train.batch_size = 8
)";
}

}  // namespace

TEST_CASE("config parser: key=value with comments") {
  auto kv = parse_config_text("a.b = 1 # comment\n\n# full comment\nc = hello\n");
  CHECK(kv.at("a.b") == "1");
  CHECK(kv.at("c") == "hello");
  CHECK_THROWS_AS(parse_config_text("no_equals_here\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), ConfigError);
}

TEST_CASE("spec_from_config rejects unknown keys") {
  auto kv = parse_config_text(small_synth_config(1) + "totally.unknown = 1\n");
  CHECK_THROWS_AS(spec_from_config(kv), ConfigError);
}

TEST_CASE("spec_from_config validates enums and numbers") {
  CHECK_THROWS_AS(spec_from_config(parse_config_text("embedding.variant = bogus\n")),
                  ConfigError);
  CHECK_THROWS_AS(spec_from_config(parse_config_text("augment.engine = bogus\n")), ConfigError);
  CHECK_THROWS_AS(spec_from_config(parse_config_text("train.lambda = not_a_number\n")),
                  ConfigError);
  CHECK_THROWS_AS(spec_from_config(parse_config_text("corpus.source = other\n")), ConfigError);
}

TEST_CASE("spec defaults mirror the documented training recipe") {
  ExperimentSpec spec = spec_from_config(parse_config_text(""));
  CHECK(spec.training.epochs == 10);
  CHECK(spec.training.lr_accent == 1e-4);
  CHECK(spec.training.lr_speaker == 1e-5);
  CHECK(spec.training.lambda == 0.1);
  CHECK(spec.vc.k == 4);
  CHECK(spec.vc.versions_per_utterance == 2);
  CHECK(spec.vc.targets_per_source_analysis == 4);
}

TEST_CASE("embedding variants are projections of the speaker direction") {
  SynthConfig sc;
  sc.n_accents = 2;
  sc.speakers_per_accent = 3;
  sc.utterances_per_speaker = 2;
  sc.frame_dim = 6;
  sc.seed = 30;
  Corpus corpus = generate_synthetic(sc);
  const auto& u = corpus.utterances.front();
  Vec raw = variant_embedding(corpus, u, EmbeddingVariant::raw);
  Vec lid = variant_embedding(corpus, u, EmbeddingVariant::lid_like);
  Vec wnta = variant_embedding(corpus, u, EmbeddingVariant::wnta64_like);
  Vec h = corpus.factor_table->speaker_factors.at(u.speaker).normalized();
  CHECK(std::abs(wnta.dot(h)) < 1e-9);                        // speaker direction removed
  CHECK(lid.dot(h) == Catch::Approx(0.5 * raw.dot(h)).margin(1e-9));  // halved
  CHECK((raw - mean_pool(*u.frames)).cwiseAbs().maxCoeff() == 0.0);

  Corpus stripped = corpus;
  stripped.factor_table.reset();
  CHECK_THROWS_AS(variant_embedding(stripped, u, EmbeddingVariant::wnta64_like), DataError);
}

TEST_CASE("run_experiment produces a usable record on a separable corpus") {
  ExperimentSpec spec = spec_from_config(parse_config_text(small_synth_config(2)));
  RunRecord record = run_experiment(spec);
  CHECK(record.test_report.accuracy >= 0.9);
  CHECK(record.train_log.epochs.size() == 5);
  CHECK(record.test_report.n_unseen_speakers > 0);
  CHECK(record.spec_hash.size() == 16);
}

TEST_CASE("identical specs give identical metrics") {
  ExperimentSpec spec = spec_from_config(parse_config_text(small_synth_config(3)));
  RunRecord a = run_experiment(spec);
  RunRecord b = run_experiment(spec);
  CHECK(a.test_report.accuracy == b.test_report.accuracy);
  CHECK(a.test_report.macro_f1 == b.test_report.macro_f1);
  CHECK(a.val_report.macro_precision == b.val_report.macro_precision);
  for (std::size_t e = 0; e < a.train_log.epochs.size(); ++e)
    CHECK(a.train_log.epochs[e].train_loss.total == b.train_log.epochs[e].train_loss.total);
  CHECK(a.spec_hash == b.spec_hash);
}

TEST_CASE("run_matrix keeps input order and marks column maxima") {
  auto mk = [](std::uint64_t seed, const std::string& name) {
    ExperimentSpec spec = spec_from_config(parse_config_text(small_synth_config(seed)));
    spec.name = name;
    return spec;
  };
  std::vector<ExperimentSpec> specs{mk(4, "sys_b"), mk(5, "sys_a")};
  auto records = run_matrix(specs);
  REQUIRE(records.size() == 2);
  CHECK(records[0].name == "sys_b");
  CHECK(records[1].name == "sys_a");
  std::string table = render_matrix_table(records);
  CHECK(table.find("sys_b") < table.find("sys_a"));
  CHECK(table.find("**") != std::string::npos);

  CHECK_THROWS_AS(run_matrix({}), ConfigError);
}

TEST_CASE("run_vc_analysis: oracle engine on a speaker-only noiseless corpus") {
  auto kv = parse_config_text(small_synth_config(6));
  kv["corpus.synthetic.noise_scale"] = "0.0";
  // accent component off: with sigma=0 every converted utterance then sits
  // exactly on the target speaker centroid
  kv["corpus.synthetic.accent_scale"] = "0.0";
  kv["augment.engine"] = "oracle";
  kv["analysis.targets_per_source"] = "2";
  ExperimentSpec spec = spec_from_config(kv);
  RunRecord record = run_vc_analysis(spec);
  REQUIRE(record.vc_analysis.has_value());
  const auto& a = *record.vc_analysis;
  CHECK(a.engine == "oracle");
  CHECK(a.n_conversions > 0);
  CHECK(a.sim_target.mean == Catch::Approx(1.0).margin(1e-6));
  CHECK(a.sim_target.mean > a.sim_source.mean);
  std::string rendered = render_vc_analysis(a);
  CHECK(rendered.find("oracle") != std::string::npos);
}

TEST_CASE("run record JSON and atomic persistence") {
  ExperimentSpec spec = spec_from_config(parse_config_text(small_synth_config(7)));
  spec.name = "persist_test";
  RunRecord record = run_experiment(spec);
  auto dir = std::filesystem::temp_directory_path() / "aid_runs_test";
  std::filesystem::remove_all(dir);
  persist_run_record(record, dir);
  std::ifstream is(dir / "persist_test.json");
  REQUIRE(is.good());
  json j = json::parse(is);
  CHECK(j["test"]["accuracy"].get<double>() == record.test_report.accuracy);
  CHECK(j["epochs"].size() == record.train_log.epochs.size());
}

TEST_CASE("split JSON round-trip") {
  SynthConfig sc;
  sc.n_accents = 3;
  sc.speakers_per_accent = 4;
  sc.utterances_per_speaker = 2;
  sc.frame_dim = 4;
  sc.seed = 8;
  Corpus corpus = generate_synthetic(sc);
  SplitSpec split = split_speaker_disjoint(corpus, 0.5, 0.25, 8);
  SplitSpec back = split_from_json(split_to_json(split));
  CHECK(back.train == split.train);
  CHECK(back.val == split.val);
  CHECK(back.test == split.test);
  CHECK(back.seen_speakers == split.seen_speakers);
  CHECK(back.unseen_speakers == split.unseen_speakers);
}
