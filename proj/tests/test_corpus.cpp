#include "aid/corpus.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace aid;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_accents = 3;
  cfg.speakers_per_accent = 4;
  cfg.utterances_per_speaker = 3;
  cfg.frame_dim = 6;
  cfg.frames_min = 2;
  cfg.frames_max = 5;
  cfg.seed = 99;
  return cfg;
}

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("aid_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

// Brute-force nearest-centroid classifier over pooled embeddings; the
// separability oracle used before trusting any trained model.
double centroid_accuracy(const Corpus& corpus, const SplitSpec& split) {
  std::map<std::string, Vec> sums;
  std::map<std::string, int> counts;
  for (const auto& u : corpus.utterances) {
    if (!split.train.count(u.id)) continue;
    Vec e = corpus.pooled(u);
    auto [it, fresh] = sums.try_emplace(u.accent, e);
    if (!fresh) it->second += e;
    counts[u.accent] += 1;
  }
  for (auto& [acc, v] : sums) v /= counts[acc];
  std::size_t correct = 0, total = 0;
  for (const auto& u : corpus.utterances) {
    if (!split.test.count(u.id)) continue;
    Vec e = corpus.pooled(u);
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [acc, c] : sums) {
      double d = (e - c).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = acc;
      }
    }
    if (best == u.accent) ++correct;
    ++total;
  }
  return total ? double(correct) / double(total) : 0.0;
}

}  // namespace

TEST_CASE("generate_synthetic validates config") {
  SynthConfig bad = small_config();
  bad.frame_dim = 0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = small_config();
  bad.entanglement = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("noise-free degenerate corpus collapses to accent factor") {
  SynthConfig cfg = small_config();
  cfg.noise_scale = 0.0;
  cfg.speaker_scale = 0.0;
  cfg.entanglement = 0.0;
  cfg.accent_scale = 2.0;
  Corpus corpus = generate_synthetic(cfg);
  REQUIRE(corpus.factor_table.has_value());
  for (const auto& u : corpus.utterances) {
    const Vec expected = 2.0 * corpus.factor_table->accent_factors.at(u.accent);
    for (Eigen::Index t = 0; t < u.frames->rows(); ++t)
      for (Eigen::Index c = 0; c < u.frames->cols(); ++c)
        CHECK((*u.frames)(t, c) == quantize_f32(expected[c]));
  }
}

TEST_CASE("same seed gives bit-identical corpora") {
  Corpus a = generate_synthetic(small_config());
  Corpus b = generate_synthetic(small_config());
  REQUIRE(a.utterances.size() == b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].id == b.utterances[i].id);
    CHECK(*a.utterances[i].frames == *b.utterances[i].frames);
  }
}

TEST_CASE("centroid oracle separates accents on a clean corpus") {
  SynthConfig cfg = small_config();
  cfg.n_accents = 4;
  cfg.speakers_per_accent = 10;
  cfg.accent_scale = 2.0;
  cfg.speaker_scale = 1.0;
  cfg.noise_scale = 0.1;
  cfg.entanglement = 0.0;
  cfg.frame_dim = 16;
  Corpus corpus = generate_synthetic(cfg);
  SplitSpec split = split_speaker_disjoint(corpus, 0.6, 0.2, 1);
  CHECK(centroid_accuracy(corpus, split) >= 0.95);
}

TEST_CASE("entanglement failure mode: speaker cues beat accent cues") {
  // with rho=0 and beta >> alpha, a nearest-centroid speaker classifier
  // outperforms the accent one on unseen speakers
  SynthConfig cfg = small_config();
  cfg.n_accents = 4;
  cfg.speakers_per_accent = 8;
  cfg.utterances_per_speaker = 6;
  cfg.accent_scale = 0.2;
  cfg.speaker_scale = 3.0;
  cfg.noise_scale = 0.05;
  cfg.frame_dim = 16;
  Corpus corpus = generate_synthetic(cfg);
  SplitSpec split = split_speaker_disjoint(corpus, 0.6, 0.2, 2);
  const double accent_acc = centroid_accuracy(corpus, split);

  // speaker centroid classifier on the same unseen data: assign each test
  // utterance to its own speaker's centroid computed from its other
  // utterances, i.e. speaker identity is recoverable even unseen
  std::map<std::string, Vec> spk_sums;
  std::map<std::string, int> spk_counts;
  for (const auto& u : corpus.utterances) {
    if (!split.test.count(u.id)) continue;
    Vec e = corpus.pooled(u);
    auto [it, fresh] = spk_sums.try_emplace(u.speaker, e);
    if (!fresh) it->second += e;
    spk_counts[u.speaker] += 1;
  }
  for (auto& [s, v] : spk_sums) v /= spk_counts[s];
  std::size_t correct = 0, total = 0;
  for (const auto& u : corpus.utterances) {
    if (!split.test.count(u.id)) continue;
    Vec e = corpus.pooled(u);
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [s, c] : spk_sums) {
      double d = (e - c).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    if (best == u.speaker) ++correct;
    ++total;
  }
  const double speaker_acc = double(correct) / double(total);
  CHECK(speaker_acc > accent_acc);
}

TEST_CASE("write-then-read reproduces a synthetic corpus bit-exactly") {
  Corpus corpus = generate_synthetic(small_config());
  auto dir = temp_dir("roundtrip");
  write_corpus(corpus, dir);
  Corpus back = ingest(dir / "manifest.tsv", dir / "features.bin");
  REQUIRE(back.utterances.size() == corpus.utterances.size());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    CHECK(back.utterances[i].id == corpus.utterances[i].id);
    CHECK(back.utterances[i].speaker == corpus.utterances[i].speaker);
    CHECK(back.utterances[i].accent == corpus.utterances[i].accent);
    CHECK(*back.utterances[i].frames == *corpus.utterances[i].frames);
  }
  // byte-identical second write
  auto dir2 = temp_dir("roundtrip2");
  write_corpus(back, dir2);
  CHECK(slurp(dir / "features.bin") == slurp(dir2 / "features.bin"));
  CHECK(slurp(dir / "manifest.tsv") == slurp(dir2 / "manifest.tsv"));
}

TEST_CASE("ingest error cases") {
  Corpus corpus = generate_synthetic(small_config());
  auto dir = temp_dir("ingest_errors");
  write_corpus(corpus, dir);

  SECTION("malformed store header") {
    auto bad = dir / "bad.bin";
    std::ofstream os(bad, std::ios::binary);
    os << "NOPE" << std::string(16, '\0');
    os.close();
    CHECK_THROWS_AS(ingest(dir / "manifest.tsv", bad), DataError);
  }

  SECTION("dangling manifest reference") {
    auto bad_manifest = dir / "bad_manifest.tsv";
    std::ofstream os(bad_manifest);
    os << "# header\n";
    os << "missing_utt\tspk\tacc\t999999999\t3\toriginal\n";
    os.close();
    CHECK_THROWS_AS(ingest(bad_manifest, dir / "features.bin"), DataError);
  }

  SECTION("manifest with too few fields") {
    auto bad_manifest = dir / "short.tsv";
    std::ofstream os(bad_manifest);
    os << "a\tb\tc\n";
    os.close();
    CHECK_THROWS_AS(ingest(bad_manifest, dir / "features.bin"), DataError);
  }

  SECTION("frame-count mismatch") {
    // point a manifest row at a valid record but lie about n_frames
    std::ifstream mf(dir / "manifest.tsv");
    std::string header, first;
    std::getline(mf, header);
    std::getline(mf, first);
    auto last_tab = first.rfind('\t');
    auto prev_tab = first.rfind('\t', last_tab - 1);
    std::string lied = first.substr(0, prev_tab + 1) + "9999" + first.substr(last_tab);
    auto bad_manifest = dir / "mismatch.tsv";
    std::ofstream os(bad_manifest);
    os << header << "\n" << lied << "\n";
    os.close();
    CHECK_THROWS_AS(ingest(bad_manifest, dir / "features.bin"), DataError);
  }
}

TEST_CASE("split sizes and disjointness for 13x10 corpus") {
  SynthConfig cfg = small_config();
  cfg.n_accents = 13;
  cfg.speakers_per_accent = 10;
  cfg.utterances_per_speaker = 2;
  Corpus corpus = generate_synthetic(cfg);
  SplitSpec split = split_speaker_disjoint(corpus, 0.6, 0.2, 7);

  std::map<std::string, std::set<std::string>> train_spk, val_spk, test_spk;
  for (const auto& u : corpus.utterances) {
    if (split.train.count(u.id)) train_spk[u.accent].insert(u.speaker);
    if (split.val.count(u.id)) val_spk[u.accent].insert(u.speaker);
    if (split.test.count(u.id)) test_spk[u.accent].insert(u.speaker);
  }
  for (const auto& [acc, spks] : train_spk) {
    CHECK(spks.size() == 6);
    CHECK(val_spk[acc].size() == 2);
    CHECK(test_spk[acc].size() == 2);
  }
  for (const auto& s : split.unseen_speakers) CHECK_FALSE(split.seen_speakers.count(s));
}

TEST_CASE("split determinism") {
  Corpus corpus = generate_synthetic(small_config());
  SplitSpec a = split_speaker_disjoint(corpus, 0.5, 0.25, 42);
  SplitSpec b = split_speaker_disjoint(corpus, 0.5, 0.25, 42);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
}

TEST_CASE("split soundness over random corpora") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    SynthConfig cfg;
    cfg.n_accents = 2 + static_cast<int>(rng.uniform_int(4));
    cfg.speakers_per_accent = 3 + static_cast<int>(rng.uniform_int(6));
    cfg.utterances_per_speaker = 1 + static_cast<int>(rng.uniform_int(3));
    cfg.frame_dim = 4;
    cfg.frames_min = 1;
    cfg.frames_max = 3;
    cfg.seed = 5000 + trial;
    Corpus corpus = generate_synthetic(cfg);
    SplitSpec split = split_speaker_disjoint(corpus, rng.uniform(0.3, 0.6),
                                             rng.uniform(0.1, 0.3), trial);
    std::set<std::string> train_speakers, test_speakers, train_accents, test_accents;
    for (const auto& u : corpus.utterances) {
      if (split.train.count(u.id)) {
        train_speakers.insert(u.speaker);
        train_accents.insert(u.accent);
      }
      if (split.test.count(u.id)) {
        test_speakers.insert(u.speaker);
        test_accents.insert(u.accent);
      }
    }
    for (const auto& s : test_speakers) CHECK_FALSE(train_speakers.count(s));
    for (const auto& a : test_accents) CHECK(train_accents.count(a));
  }
}

TEST_CASE("split errors name the offending accent") {
  SynthConfig cfg = small_config();
  cfg.speakers_per_accent = 2;
  Corpus corpus = generate_synthetic(cfg);
  try {
    split_speaker_disjoint(corpus, 0.5, 0.25, 0);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("acc00") != std::string::npos);
  }
  CHECK_THROWS_AS(split_speaker_disjoint(corpus, 0.0, 0.2, 0), ConfigError);
  CHECK_THROWS_AS(split_speaker_disjoint(corpus, 0.8, 0.3, 0), ConfigError);
}

TEST_CASE("class_counts") {
  Corpus corpus = generate_synthetic(small_config());
  SplitSpec split = split_speaker_disjoint(corpus, 0.5, 0.25, 3);

  std::set<std::string> all_ids;
  for (const auto& u : corpus.utterances) all_ids.insert(u.id);
  auto counts = class_counts(corpus, all_ids);
  CHECK(counts.total == corpus.utterances.size());
  for (const auto& [acc, n] : counts.per_accent)
    CHECK(n == static_cast<std::size_t>(4 * 3));  // speakers * utterances

  // counts over splits sum to corpus size
  auto tr = class_counts(corpus, split.train);
  auto va = class_counts(corpus, split.val);
  auto te = class_counts(corpus, split.test);
  CHECK(tr.total + va.total + te.total == corpus.utterances.size());

  // brute-force tally per accent
  for (const auto& [acc, n] : tr.per_accent) {
    std::size_t manual = 0;
    for (const auto& u : corpus.utterances)
      if (u.accent == acc && split.train.count(u.id)) ++manual;
    CHECK(n == manual);
  }
}
