#pragma once

// Synthetic embedding-corpus generation, ingestion of precomputed features,
// and speaker-disjoint train/val/test splitting.

#include "aid/core.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace aid {

struct SynthConfig {
  int n_accents = 13;
  int speakers_per_accent = 10;
  int utterances_per_speaker = 10;
  int frame_dim = 16;
  int frames_min = 5;
  int frames_max = 20;
  double accent_scale = 1.0;     // alpha
  double speaker_scale = 1.0;    // beta
  double noise_scale = 0.1;      // sigma
  double entanglement = 0.0;     // rho in [0,1]
  std::uint64_t seed = 0;

  void validate() const {
    if (n_accents < 1 || speakers_per_accent < 1 || utterances_per_speaker < 1)
      throw ConfigError("SynthConfig: all counts must be >= 1");
    if (frame_dim < 1) throw ConfigError("SynthConfig: frame_dim must be >= 1");
    if (frames_min < 1 || frames_max < frames_min)
      throw ConfigError("SynthConfig: invalid frame count range");
    if (!(accent_scale >= 0) || !(speaker_scale >= 0) || !(noise_scale >= 0))
      throw ConfigError("SynthConfig: scales must be finite and nonnegative");
    if (!(entanglement >= 0.0 && entanglement <= 1.0))
      throw ConfigError("SynthConfig: entanglement must be in [0,1]");
  }
};

// Latent generator factors, kept for oracle checks and the oracle converter.
struct FactorTable {
  std::map<std::string, Vec> accent_factors;   // g_a
  std::map<std::string, Vec> speaker_factors;  // h_s
};

struct Corpus {
  std::vector<Utterance> utterances;  // ordered by id
  LabelIndex label_index;
  std::optional<FactorTable> factor_table;   // synthetic corpora only
  std::optional<SynthConfig> synth_config;   // synthetic corpora only

  const Utterance& by_id(const std::string& id) const {
    auto it = std::lower_bound(utterances.begin(), utterances.end(), id,
                               [](const Utterance& u, const std::string& s) { return u.id < s; });
    if (it == utterances.end() || it->id != id)
      throw DataError("unknown utterance id: " + id);
    return *it;
  }

  // Pooled embedding: explicit embedding if present, else mean over frames.
  Vec pooled(const Utterance& u) const {
    if (u.embedding) return *u.embedding;
    if (u.frames) return mean_pool(*u.frames);
    throw DataError("utterance " + u.id + " has neither frames nor embedding");
  }

  void rebuild_label_index() {
    std::vector<std::string> acc, spk;
    for (const auto& u : utterances) {
      acc.push_back(u.accent);
      spk.push_back(u.speaker);
    }
    label_index = LabelIndex::from_sorted_unique(std::move(acc), std::move(spk));
  }
};

struct SplitSpec {
  std::set<std::string> train, val, test;            // utterance ids
  std::set<std::string> seen_speakers, unseen_speakers;
};

// ---------------------------------------------------------------------------
// Synthetic generation.
//
// Frame model: alpha*g_a + beta*h_s + rho*(h_s .* g_a) + sigma*eps, with g/h
// standard-normal latents per accent/speaker and eps per-frame noise. The
// element-wise product term entangles speaker and accent when rho > 0.

inline std::string accent_label(int a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "acc%02d", a);
  return buf;
}
inline std::string speaker_label(int a, int s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "acc%02d_spk%02d", a, s);
  return buf;
}

inline Corpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  FactorTable factors;

  Rng accent_rng(cfg.seed, "accent_factors");
  Rng speaker_rng(cfg.seed, "speaker_factors");
  for (int a = 0; a < cfg.n_accents; ++a)
    factors.accent_factors[accent_label(a)] = accent_rng.normal_vec(cfg.frame_dim);
  for (int a = 0; a < cfg.n_accents; ++a)
    for (int s = 0; s < cfg.speakers_per_accent; ++s)
      factors.speaker_factors[speaker_label(a, s)] = speaker_rng.normal_vec(cfg.frame_dim);

  for (int a = 0; a < cfg.n_accents; ++a) {
    const std::string acc = accent_label(a);
    const Vec& g = factors.accent_factors.at(acc);
    for (int s = 0; s < cfg.speakers_per_accent; ++s) {
      const std::string spk = speaker_label(a, s);
      const Vec& h = factors.speaker_factors.at(spk);
      const Vec base = cfg.accent_scale * g + cfg.speaker_scale * h +
                       cfg.entanglement * (h.array() * g.array()).matrix();
      for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%s_utt%03d", spk.c_str(), u);
        Utterance utt;
        utt.id = buf;
        utt.speaker = spk;
        utt.accent = acc;
        Rng frame_rng(cfg.seed, std::string("frames:") + utt.id);
        const int t_range = cfg.frames_max - cfg.frames_min + 1;
        const int T = cfg.frames_min + static_cast<int>(frame_rng.uniform_int(t_range));
        Mat frames(T, cfg.frame_dim);
        for (int t = 0; t < T; ++t)
          frames.row(t) =
              (base + cfg.noise_scale * frame_rng.normal_vec(cfg.frame_dim)).transpose();
        quantize_f32(frames);
        utt.frames = std::move(frames);
        corpus.utterances.push_back(std::move(utt));
      }
    }
  }
  std::sort(corpus.utterances.begin(), corpus.utterances.end(),
            [](const Utterance& x, const Utterance& y) { return x.id < y.id; });
  corpus.rebuild_label_index();
  corpus.factor_table = std::move(factors);
  corpus.synth_config = cfg;
  return corpus;
}

// ---------------------------------------------------------------------------
// Manifest + feature-store serialization.
//
// Manifest: UTF-8, one record per line, tab-separated
//   id, speaker, accent, store_offset, n_frames [, provenance]
// header lines start with '#'. Provenance column is "original" or
// "converted:<source_id>:<target_speaker>".
//
// Feature store: little-endian binary. Header = magic "AIDF", version u32,
// dim u32, record count u64; per record: id length u16, id bytes, T u32,
// T x D float32 row-major.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw DataError("feature store: truncated read");
  return v;
}

}  // namespace detail

constexpr std::uint32_t kStoreVersion = 1;

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / "manifest.tsv";
  const auto store_path = dir / "features.bin";

  std::ofstream store(store_path, std::ios::binary | std::ios::trunc);
  if (!store) throw DataError("cannot open feature store for writing: " + store_path.string());
  store.write("AIDF", 4);
  detail::write_le<std::uint32_t>(store, kStoreVersion);
  int dim = 0;
  for (const auto& u : corpus.utterances) {
    const Mat m = u.frames ? *u.frames : Mat(u.embedding->transpose());
    dim = static_cast<int>(m.cols());
    break;
  }
  detail::write_le<std::uint32_t>(store, static_cast<std::uint32_t>(dim));
  detail::write_le<std::uint64_t>(store, corpus.utterances.size());

  std::ostringstream manifest;
  manifest << "# id\tspeaker\taccent\tstore_offset\tn_frames\tprovenance\n";
  for (const auto& u : corpus.utterances) {
    const Mat m = u.frames ? *u.frames : Mat(u.embedding->transpose());
    if (m.cols() != dim)
      throw DataError("write_corpus: inconsistent feature dimension at " + u.id);
    const auto offset = static_cast<std::uint64_t>(store.tellp());
    detail::write_le<std::uint16_t>(store, static_cast<std::uint16_t>(u.id.size()));
    store.write(u.id.data(), static_cast<std::streamsize>(u.id.size()));
    detail::write_le<std::uint32_t>(store, static_cast<std::uint32_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        detail::write_le<float>(store, static_cast<float>(m(r, c)));

    manifest << u.id << '\t' << u.speaker << '\t' << u.accent << '\t' << offset << '\t'
             << m.rows() << '\t';
    if (u.provenance.kind == ProvenanceKind::converted)
      manifest << "converted:" << u.provenance.source_id << ':' << u.provenance.target_speaker;
    else
      manifest << "original";
    manifest << '\n';
  }
  store.close();

  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw DataError("cannot open manifest for writing: " + manifest_path.string());
  mf << manifest.str();
}

inline Corpus ingest(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& store_path) {
  std::ifstream store(store_path, std::ios::binary);
  if (!store) throw DataError("cannot open feature store: " + store_path.string());
  char magic[4];
  store.read(magic, 4);
  if (!store || std::string(magic, 4) != "AIDF")
    throw DataError("feature store: bad magic (expected AIDF)");
  const auto version = detail::read_le<std::uint32_t>(store);
  if (version != kStoreVersion)
    throw DataError("feature store: unsupported version " + std::to_string(version));
  const auto dim = detail::read_le<std::uint32_t>(store);
  detail::read_le<std::uint64_t>(store);  // record count, informational
  if (dim == 0) throw DataError("feature store: zero feature dimension");

  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot open manifest: " + manifest_path.string());

  Corpus corpus;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 5)
      throw DataError("manifest line " + std::to_string(lineno) + ": expected >= 5 fields");

    Utterance u;
    u.id = fields[0];
    u.speaker = fields[1];
    u.accent = fields[2];
    std::uint64_t offset = 0;
    std::uint64_t n_frames = 0;
    try {
      offset = std::stoull(fields[3]);
      n_frames = std::stoull(fields[4]);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": malformed numeric field");
    }
    if (!seen_ids.insert(u.id).second)
      throw DataError("manifest: duplicate utterance id " + u.id);
    if (fields.size() >= 6 && fields[5] != "original" && !fields[5].empty()) {
      const std::string& p = fields[5];
      if (p.rfind("converted:", 0) != 0)
        throw DataError("manifest line " + std::to_string(lineno) + ": bad provenance " + p);
      auto rest = p.substr(10);
      auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw DataError("manifest line " + std::to_string(lineno) + ": bad provenance " + p);
      u.provenance.kind = ProvenanceKind::converted;
      u.provenance.source_id = rest.substr(0, colon);
      u.provenance.target_speaker = rest.substr(colon + 1);
    }

    store.clear();
    store.seekg(static_cast<std::streamoff>(offset));
    if (!store)
      throw DataError("manifest: dangling reference for " + u.id + " (bad offset)");
    std::uint16_t id_len;
    try {
      id_len = detail::read_le<std::uint16_t>(store);
    } catch (const DataError&) {
      throw DataError("manifest: dangling reference for " + u.id + " (offset past end)");
    }
    std::string stored_id(id_len, '\0');
    store.read(stored_id.data(), id_len);
    if (!store || stored_id != u.id)
      throw DataError("manifest: dangling reference for " + u.id +
                      " (store record id mismatch)");
    const auto T = detail::read_le<std::uint32_t>(store);
    if (T != n_frames)
      throw DataError("manifest: frame count mismatch for " + u.id);
    Mat frames(T, dim);
    for (std::uint32_t r = 0; r < T; ++r)
      for (std::uint32_t c = 0; c < dim; ++c)
        frames(r, c) = static_cast<double>(detail::read_le<float>(store));
    if (!frames.allFinite())
      throw DataError("feature store: non-finite values in record " + u.id);
    u.frames = std::move(frames);
    corpus.utterances.push_back(std::move(u));
  }
  std::sort(corpus.utterances.begin(), corpus.utterances.end(),
            [](const Utterance& x, const Utterance& y) { return x.id < y.id; });
  corpus.rebuild_label_index();
  return corpus;
}

// ---------------------------------------------------------------------------
// Speaker-disjoint splitting: speakers (not utterances) are partitioned per
// accent, so every accent survives into every split and no test speaker is
// ever seen in training.

inline SplitSpec split_speaker_disjoint(const Corpus& corpus, double train_fraction,
                                        double val_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1) || !(val_fraction > 0 && val_fraction < 1) ||
      !(train_fraction + val_fraction < 1))
    throw ConfigError("split: fractions must be in (0,1) and sum to < 1");

  // accent -> sorted distinct speakers
  std::map<std::string, std::vector<std::string>> speakers_of;
  for (const auto& u : corpus.utterances) {
    auto& v = speakers_of[u.accent];
    if (std::find(v.begin(), v.end(), u.speaker) == v.end()) v.push_back(u.speaker);
  }

  std::map<std::string, int> split_of_speaker;  // 0 train, 1 val, 2 test
  for (auto& [accent, speakers] : speakers_of) {
    if (speakers.size() < 3)
      throw DataError("split: accent " + accent + " has fewer than 3 speakers");
    std::sort(speakers.begin(), speakers.end());
    Rng rng(seed, "split:" + accent);
    rng.shuffle(speakers);
    const int n = static_cast<int>(speakers.size());
    int n_train = std::max(1, static_cast<int>(train_fraction * n));
    int n_val = std::max(1, static_cast<int>(val_fraction * n));
    while (n_train + n_val >= n) (n_train > 1 ? n_train : n_val) -= 1;
    for (int i = 0; i < n; ++i)
      split_of_speaker[speakers[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }

  SplitSpec split;
  for (const auto& u : corpus.utterances) {
    switch (split_of_speaker.at(u.speaker)) {
      case 0:
        split.train.insert(u.id);
        split.seen_speakers.insert(u.speaker);
        break;
      case 1:
        split.val.insert(u.id);
        split.seen_speakers.insert(u.speaker);
        break;
      default:
        split.test.insert(u.id);
        split.unseen_speakers.insert(u.speaker);
        break;
    }
  }
  return split;
}

struct ClassCounts {
  std::map<std::string, std::size_t> per_accent;
  std::map<std::string, std::size_t> per_speaker;
  std::size_t total = 0;
};

inline ClassCounts class_counts(const Corpus& corpus, const std::set<std::string>& split_ids) {
  ClassCounts counts;
  for (const auto& u : corpus.utterances) {
    if (!split_ids.count(u.id)) continue;
    counts.per_accent[u.accent] += 1;
    counts.per_speaker[u.speaker] += 1;
    counts.total += 1;
  }
  return counts;
}

}  // namespace aid
