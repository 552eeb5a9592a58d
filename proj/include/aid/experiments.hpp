#pragma once

// Config-driven experiment harness: corpus -> split -> optional augmentation
// -> training -> evaluation, with run records persisted to disk and a
// comparison-table renderer for experiment matrices.

#include "aid/classifier.hpp"
#include "aid/core.hpp"
#include "aid/corpus.hpp"
#include "aid/metrics.hpp"
#include "aid/vc.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace aid {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config file: key = value with dotted keys, '#' comments, unknown keys are
// errors.

inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const char* ws = " \t\r\n";
      auto b = s.find_first_not_of(ws);
      if (b == std::string::npos) return std::string();
      auto e = s.find_last_not_of(ws);
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key))
      throw ConfigError("config: duplicate key " + key);
    kv[key] = value;
  }
  return kv;
}

inline std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

enum class EmbeddingVariant { raw, lid_like, wnta64_like };
enum class AugmentMode { none, knn, oracle };

struct ExperimentSpec {
  std::optional<SynthConfig> synthetic;
  std::optional<std::pair<std::string, std::string>> ingest_paths;  // manifest, store
  EmbeddingVariant variant = EmbeddingVariant::raw;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  AugmentMode augment = AugmentMode::none;
  VcConfig vc;
  TrainingConfig training;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string name = "experiment";
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) {
    consumed_.insert(key);
    return kv_.count(key) > 0;
  }
  std::string str(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + " has non-numeric value '" + it->second + "'");
    }
  }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      return std::stoull(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + " has non-integer value '" + it->second + "'");
    }
  }
  void reject_unknown() const {
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key)) throw ConfigError("config: unknown key " + key);
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
};

}  // namespace detail

inline ExperimentSpec spec_from_config(const std::map<std::string, std::string>& kv) {
  detail::ConfigReader cfg(kv);
  ExperimentSpec spec;
  spec.name = cfg.str("name", spec.name);
  spec.seed = cfg.integer("seed", 0);
  spec.out_dir = cfg.str("out_dir", "");

  const std::string source = cfg.str("corpus.source", "synthetic");
  if (source == "synthetic") {
    SynthConfig sc;
    sc.n_accents = static_cast<int>(cfg.integer("corpus.synthetic.n_accents", sc.n_accents));
    sc.speakers_per_accent =
        static_cast<int>(cfg.integer("corpus.synthetic.speakers_per_accent", sc.speakers_per_accent));
    sc.utterances_per_speaker = static_cast<int>(
        cfg.integer("corpus.synthetic.utterances_per_speaker", sc.utterances_per_speaker));
    sc.frame_dim = static_cast<int>(cfg.integer("corpus.synthetic.frame_dim", sc.frame_dim));
    sc.frames_min = static_cast<int>(cfg.integer("corpus.synthetic.frames_min", sc.frames_min));
    sc.frames_max = static_cast<int>(cfg.integer("corpus.synthetic.frames_max", sc.frames_max));
    sc.accent_scale = cfg.num("corpus.synthetic.accent_scale", sc.accent_scale);
    sc.speaker_scale = cfg.num("corpus.synthetic.speaker_scale", sc.speaker_scale);
    sc.noise_scale = cfg.num("corpus.synthetic.noise_scale", sc.noise_scale);
    sc.entanglement = cfg.num("corpus.synthetic.entanglement", sc.entanglement);
    sc.seed = substream_seed(spec.seed, "corpus");
    spec.synthetic = sc;
  } else if (source == "ingest") {
    std::string manifest = cfg.str("corpus.ingest.manifest", "");
    std::string store = cfg.str("corpus.ingest.store", "");
    if (manifest.empty() || store.empty())
      throw ConfigError("config: corpus.ingest.manifest and corpus.ingest.store required");
    spec.ingest_paths = {manifest, store};
  } else {
    throw ConfigError("config: corpus.source must be synthetic or ingest, got " + source);
  }

  const std::string variant = cfg.str("embedding.variant", "raw");
  if (variant == "raw")
    spec.variant = EmbeddingVariant::raw;
  else if (variant == "lid")
    spec.variant = EmbeddingVariant::lid_like;
  else if (variant == "wnta64")
    spec.variant = EmbeddingVariant::wnta64_like;
  else
    throw ConfigError("config: embedding.variant must be raw|lid|wnta64, got " + variant);

  spec.train_fraction = cfg.num("split.train_fraction", spec.train_fraction);
  spec.val_fraction = cfg.num("split.val_fraction", spec.val_fraction);

  const std::string engine = cfg.str("augment.engine", "none");
  if (engine == "none")
    spec.augment = AugmentMode::none;
  else if (engine == "knn")
    spec.augment = AugmentMode::knn;
  else if (engine == "oracle")
    spec.augment = AugmentMode::oracle;
  else
    throw ConfigError("config: augment.engine must be none|knn|oracle, got " + engine);
  spec.vc.k = static_cast<int>(cfg.integer("augment.k", spec.vc.k));
  spec.vc.versions_per_utterance = static_cast<int>(
      cfg.integer("augment.versions_per_utterance", spec.vc.versions_per_utterance));
  const std::string distance = cfg.str("augment.distance", "cosine");
  if (distance == "cosine")
    spec.vc.distance = VcDistance::cosine;
  else if (distance == "euclidean")
    spec.vc.distance = VcDistance::euclidean;
  else
    throw ConfigError("config: augment.distance must be cosine|euclidean, got " + distance);
  spec.vc.targets_per_source_analysis = static_cast<int>(
      cfg.integer("analysis.targets_per_source", spec.vc.targets_per_source_analysis));
  spec.vc.seed = substream_seed(spec.seed, "augment");

  spec.training.epochs = static_cast<int>(cfg.integer("train.epochs", spec.training.epochs));
  spec.training.lr_accent = cfg.num("train.lr_accent", spec.training.lr_accent);
  spec.training.lr_speaker = cfg.num("train.lr_speaker", spec.training.lr_speaker);
  spec.training.lambda = cfg.num("train.lambda", spec.training.lambda);
  spec.training.batch_size =
      static_cast<int>(cfg.integer("train.batch_size", spec.training.batch_size));
  spec.training.batchnorm_momentum =
      cfg.num("train.batchnorm_momentum", spec.training.batchnorm_momentum);
  spec.training.weight_init_scale =
      cfg.num("train.weight_init_scale", spec.training.weight_init_scale);
  spec.training.seed = substream_seed(spec.seed, "training");

  cfg.reject_unknown();
  return spec;
}

inline std::string canonical_spec_string(const ExperimentSpec& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "name=" << s.name << ";seed=" << s.seed << ";variant=" << static_cast<int>(s.variant)
     << ";train_frac=" << s.train_fraction << ";val_frac=" << s.val_fraction
     << ";augment=" << static_cast<int>(s.augment) << ";k=" << s.vc.k
     << ";versions=" << s.vc.versions_per_utterance
     << ";distance=" << static_cast<int>(s.vc.distance)
     << ";targets=" << s.vc.targets_per_source_analysis << ";epochs=" << s.training.epochs
     << ";lr_a=" << s.training.lr_accent << ";lr_s=" << s.training.lr_speaker
     << ";lambda=" << s.training.lambda << ";batch=" << s.training.batch_size
     << ";bn_mom=" << s.training.batchnorm_momentum
     << ";init=" << s.training.weight_init_scale;
  if (s.synthetic) {
    const auto& c = *s.synthetic;
    os << ";synth=" << c.n_accents << "," << c.speakers_per_accent << ","
       << c.utterances_per_speaker << "," << c.frame_dim << "," << c.frames_min << ","
       << c.frames_max << "," << c.accent_scale << "," << c.speaker_scale << ","
       << c.noise_scale << "," << c.entanglement << "," << c.seed;
  }
  if (s.ingest_paths)
    os << ";ingest=" << s.ingest_paths->first << "," << s.ingest_paths->second;
  return os.str();
}

inline std::string spec_hash(const ExperimentSpec& s) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_spec_string(s));
  return os.str();
}

// ---------------------------------------------------------------------------
// Embedding variants.
//
// For synthetic corpora the variants are linear projections of the pooled
// frames built from the known speaker latent: "LID-like" halves the
// component along the utterance's speaker direction, "WNTA64-like" removes
// it entirely. Raw is plain mean pooling and works for any corpus.

inline Vec variant_embedding(const Corpus& corpus, const Utterance& u,
                             EmbeddingVariant variant) {
  Vec x = corpus.pooled(u);
  if (variant == EmbeddingVariant::raw) return x;
  if (!corpus.factor_table)
    throw DataError("embedding variant requires a synthetic corpus with factor table");
  auto it = corpus.factor_table->speaker_factors.find(u.speaker);
  if (it == corpus.factor_table->speaker_factors.end())
    throw DataError("variant_embedding: no speaker factor for " + u.speaker);
  Vec h = it->second.normalized();
  const double coeff = variant == EmbeddingVariant::wnta64_like ? 1.0 : 0.5;
  return x - coeff * x.dot(h) * h;
}

inline Dataset make_dataset(const Corpus& corpus, const std::set<std::string>& ids,
                            const LabelIndex& labels, EmbeddingVariant variant) {
  Dataset ds;
  std::vector<Vec> rows;
  for (const auto& u : corpus.utterances) {
    if (!ids.count(u.id)) continue;
    rows.push_back(variant_embedding(corpus, u, variant));
    ds.accent_ids.push_back(labels.accent_id(u.accent));
    ds.speaker_ids.push_back(labels.speaker_id(u.speaker));
  }
  if (rows.empty()) throw DataError("make_dataset: empty split");
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) ds.X.row(static_cast<Eigen::Index>(i)) = rows[i];
  return ds;
}

// ---------------------------------------------------------------------------
// Run records

struct RunRecord {
  std::string spec_hash;
  std::string name;
  TrainLog train_log;
  EvalReport val_report;   // seen speakers
  EvalReport test_report;  // unseen speakers
  std::optional<VcAnalysisReport> vc_analysis;
  double duration_seconds = 0.0;
};

inline EvalReport evaluate(AidModel& model, const Dataset& set, std::size_t n_unseen) {
  ForwardResult res = forward(model, set.X);
  std::vector<int> pred(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    pred[i] = argmax(res.accent_logits.row(static_cast<Eigen::Index>(i)).transpose());
  EvalReport rep = macro_metrics(confusion(pred, set.accent_ids, model.labels.n_accents()));
  rep.n_unseen_speakers = n_unseen;
  return rep;
}

struct PreparedExperiment {
  Corpus corpus;
  SplitSpec split;
  std::set<std::string> train_speakers;
};

inline PreparedExperiment prepare_corpus_and_split(const ExperimentSpec& spec) {
  PreparedExperiment prep;
  if (spec.synthetic)
    prep.corpus = generate_synthetic(*spec.synthetic);
  else if (spec.ingest_paths)
    prep.corpus = ingest(spec.ingest_paths->first, spec.ingest_paths->second);
  else
    throw ConfigError("experiment spec has no corpus source");
  prep.split = split_speaker_disjoint(prep.corpus, spec.train_fraction, spec.val_fraction,
                                      substream_seed(spec.seed, "split"));
  for (const auto& u : prep.corpus.utterances)
    if (prep.split.train.count(u.id)) prep.train_speakers.insert(u.speaker);
  return prep;
}

inline RunRecord run_experiment(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.spec_hash = spec_hash(spec);
  record.name = spec.name;

  auto fail = [](const char* stage, const std::exception& e) -> std::runtime_error {
    return std::runtime_error(std::string("stage ") + stage + ": " + e.what());
  };

  PreparedExperiment prep = prepare_corpus_and_split(spec);
  Corpus corpus = std::move(prep.corpus);
  SplitSpec split = std::move(prep.split);

  if (spec.augment != AugmentMode::none && spec.vc.versions_per_utterance > 0) {
    VcConfig vc = spec.vc;
    // Target pool defaults to train-split speakers, the desk-scale analog of
    // an external held-out speaker pool; disjoint from test by construction.
    if (vc.target_pool.empty()) vc.target_pool = prep.train_speakers;
    try {
      AugmentResult aug = augment_corpus(
          corpus, split, vc,
          spec.augment == AugmentMode::oracle ? VcEngine::oracle : VcEngine::knn);
      corpus = std::move(aug.corpus);
      split = std::move(aug.split);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail("augment", e);
    }
  }

  // Label index for the classifier comes from the (possibly augmented)
  // corpus so converted utterances' target speakers have ids.
  const LabelIndex& labels = corpus.label_index;
  Dataset train_set = make_dataset(corpus, split.train, labels, spec.variant);
  Dataset val_set = make_dataset(corpus, split.val, labels, spec.variant);
  Dataset test_set = make_dataset(corpus, split.test, labels, spec.variant);

  AidModel model = AidModel::init(static_cast<int>(train_set.X.cols()), labels, spec.training);
  try {
    record.train_log = train(model, train_set, val_set, spec.training);
  } catch (const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) throw;
    throw fail("train", e);
  }

  record.val_report = evaluate(model, val_set, 0);
  record.test_report = evaluate(model, test_set, split.unseen_speakers.size());
  record.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    save_checkpoint(model, spec.training,
                    std::filesystem::path(spec.out_dir) / (spec.name + ".aidm"));
  }
  return record;
}

// ---------------------------------------------------------------------------
// Persistence (JSON, written atomically via temp file + rename)

inline json eval_report_to_json(const EvalReport& rep) {
  json j;
  j["macro_precision"] = rep.macro_precision;
  j["macro_recall"] = rep.macro_recall;
  j["macro_f1"] = rep.macro_f1;
  j["accuracy"] = rep.accuracy;
  j["n_utterances"] = rep.n_utterances;
  j["n_unseen_speakers"] = rep.n_unseen_speakers;
  j["per_class_precision"] = rep.precision;
  j["per_class_recall"] = rep.recall;
  j["per_class_f1"] = rep.f1;
  j["confusion"] = rep.cm.counts;
  return j;
}

inline json run_record_to_json(const RunRecord& record) {
  json j;
  j["spec_hash"] = record.spec_hash;
  j["name"] = record.name;
  j["duration_seconds"] = record.duration_seconds;
  j["val"] = eval_report_to_json(record.val_report);
  j["test"] = eval_report_to_json(record.test_report);
  json epochs = json::array();
  for (const auto& e : record.train_log.epochs) {
    epochs.push_back({{"train_total", e.train_loss.total},
                      {"train_accent_ce", e.train_loss.accent_ce},
                      {"train_kl_term", e.train_loss.kl_term},
                      {"train_speaker_ce", e.train_loss.speaker_ce},
                      {"val_accuracy", e.val_accuracy},
                      {"val_kl_term", e.val_kl_term},
                      {"val_accent_ce", e.val_accent_ce}});
  }
  j["epochs"] = epochs;
  if (record.vc_analysis) {
    const auto& a = *record.vc_analysis;
    j["vc_analysis"] = {{"engine", a.engine},
                        {"n_conversions", a.n_conversions},
                        {"sim_source_mean", a.sim_source.mean},
                        {"sim_source_std", a.sim_source.stddev},
                        {"sim_target_mean", a.sim_target.mean},
                        {"sim_target_std", a.sim_target.stddev},
                        {"accent_accuracy", a.accent_accuracy},
                        {"aecs_mean", a.aecs.mean},
                        {"aecs_std", a.aecs.stddev},
                        {"aecs_random_baseline", a.aecs_random_baseline}};
  }
  return j;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp);
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

inline void persist_run_record(const RunRecord& record, const std::filesystem::path& dir) {
  write_file_atomic(dir / (record.name + ".json"), run_record_to_json(record).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Matrix rendering: one row per spec, bold-marking the per-column maximum.

inline std::string render_matrix_table(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "system\tprec\trec\tf1\tacc\n";
  auto field = [](const EvalReport& r, int c) {
    switch (c) {
      case 0: return r.macro_precision;
      case 1: return r.macro_recall;
      case 2: return r.macro_f1;
      default: return r.accuracy;
    }
  };
  double best[4] = {-1, -1, -1, -1};
  for (const auto& rec : records)
    for (int c = 0; c < 4; ++c) best[c] = std::max(best[c], field(rec.test_report, c));
  os << std::fixed << std::setprecision(2);
  for (const auto& rec : records) {
    os << rec.name;
    for (int c = 0; c < 4; ++c) {
      const double v = field(rec.test_report, c);
      os << '\t';
      if (v == best[c]) os << "**";
      os << v;
      if (v == best[c]) os << "**";
    }
    os << '\n';
  }
  return os.str();
}

inline std::vector<RunRecord> run_matrix(const std::vector<ExperimentSpec>& specs) {
  if (specs.empty()) throw ConfigError("run_matrix: no specs given");
  std::vector<RunRecord> records;
  for (const auto& spec : specs) records.push_back(run_experiment(spec));
  return records;
}

// ---------------------------------------------------------------------------
// VC analysis runner (trains a model on originals, then scores conversions
// of the unseen test split).

inline RunRecord run_vc_analysis(const ExperimentSpec& spec) {
  ExperimentSpec base = spec;
  base.augment = AugmentMode::none;
  PreparedExperiment prep = prepare_corpus_and_split(base);
  const LabelIndex& labels = prep.corpus.label_index;
  Dataset train_set = make_dataset(prep.corpus, prep.split.train, labels, spec.variant);
  Dataset val_set = make_dataset(prep.corpus, prep.split.val, labels, spec.variant);
  AidModel model = AidModel::init(static_cast<int>(train_set.X.cols()), labels, spec.training);
  RunRecord record;
  record.spec_hash = spec_hash(spec);
  record.name = spec.name;
  record.train_log = train(model, train_set, val_set, spec.training);
  record.val_report = evaluate(model, val_set, 0);

  VcConfig vc = spec.vc;
  if (vc.target_pool.empty()) vc.target_pool = prep.train_speakers;
  const VcEngine engine = spec.augment == AugmentMode::knn ? VcEngine::knn : VcEngine::oracle;
  auto centroids = speaker_centroids(prep.corpus);
  record.vc_analysis = analyze_vc(prep.corpus, prep.split, engine, vc, model, centroids);
  Dataset test_set = make_dataset(prep.corpus, prep.split.test, labels, spec.variant);
  record.test_report = evaluate(model, test_set, prep.split.unseen_speakers.size());
  return record;
}

inline std::string render_vc_analysis(const VcAnalysisReport& a) {
  std::ostringstream os;
  os << "engine\tsim_source\tsim_target\taccent_acc\taecs\taecs_random_baseline\n";
  os << a.engine << '\t' << format_mean_std(a.sim_source.mean, a.sim_source.stddev) << '\t'
     << format_mean_std(a.sim_target.mean, a.sim_target.stddev) << '\t' << std::fixed
     << std::setprecision(2) << a.accent_accuracy << '\t'
     << format_mean_std(a.aecs.mean, a.aecs.stddev) << '\t' << a.aecs_random_baseline << '\n';
  return os.str();
}

// Split serialization for the CLI `split` stage.
inline json split_to_json(const SplitSpec& split) {
  json j;
  j["train"] = std::vector<std::string>(split.train.begin(), split.train.end());
  j["val"] = std::vector<std::string>(split.val.begin(), split.val.end());
  j["test"] = std::vector<std::string>(split.test.begin(), split.test.end());
  j["seen_speakers"] =
      std::vector<std::string>(split.seen_speakers.begin(), split.seen_speakers.end());
  j["unseen_speakers"] =
      std::vector<std::string>(split.unseen_speakers.begin(), split.unseen_speakers.end());
  return j;
}

inline SplitSpec split_from_json(const json& j) {
  SplitSpec s;
  for (const auto& x : j.at("train")) s.train.insert(x.get<std::string>());
  for (const auto& x : j.at("val")) s.val.insert(x.get<std::string>());
  for (const auto& x : j.at("test")) s.test.insert(x.get<std::string>());
  for (const auto& x : j.at("seen_speakers")) s.seen_speakers.insert(x.get<std::string>());
  for (const auto& x : j.at("unseen_speakers")) s.unseen_speakers.insert(x.get<std::string>());
  return s;
}

}  // namespace aid
