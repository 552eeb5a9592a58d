#pragma once

// Feature-space speaker augmentation: kNN frame matching against a target
// speaker's matching set, plus a synthetic-oracle converter that swaps the
// speaker latent while keeping accent factor and noise realization.

#include "aid/classifier.hpp"
#include "aid/core.hpp"
#include "aid/corpus.hpp"

#include <map>
#include <numeric>
#include <set>

namespace aid {

struct MatchingSet {
  std::string speaker;
  Mat pool;  // N x D, frames concatenated in (utterance id, frame index) order
};

enum class VcDistance { cosine, euclidean };
enum class VcEngine { knn, oracle };

struct VcConfig {
  int k = 4;
  VcDistance distance = VcDistance::cosine;
  int versions_per_utterance = 2;
  int targets_per_source_analysis = 4;
  std::set<std::string> target_pool;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw ConfigError("VcConfig: k must be >= 1");
    if (versions_per_utterance < 0)
      throw ConfigError("VcConfig: versions_per_utterance must be >= 0");
    if (targets_per_source_analysis < 1)
      throw ConfigError("VcConfig: targets_per_source_analysis must be >= 1");
  }
};

inline MatchingSet build_matching_set(const Corpus& corpus, const std::string& speaker) {
  std::vector<const Mat*> parts;
  Eigen::Index n_rows = 0, dim = 0;
  bool speaker_seen = false;
  for (const auto& u : corpus.utterances) {  // already ordered by id
    if (u.speaker != speaker) continue;
    speaker_seen = true;
    if (!u.frames) continue;
    parts.push_back(&*u.frames);
    n_rows += u.frames->rows();
    dim = u.frames->cols();
  }
  if (!speaker_seen) throw DataError("build_matching_set: unknown speaker " + speaker);
  if (parts.empty())
    throw DataError("build_matching_set: speaker " + speaker +
                    " has no utterances with frames");
  MatchingSet ms;
  ms.speaker = speaker;
  ms.pool.resize(n_rows, dim);
  Eigen::Index row = 0;
  for (const Mat* m : parts) {
    ms.pool.middleRows(row, m->rows()) = *m;
    row += m->rows();
  }
  return ms;
}

// Output frame t = mean of the k pool rows nearest to source frame t.
// Ties broken by lowest pool row index; output is the exact O(T*N) scan.
inline Mat knn_convert(const Mat& source, const MatchingSet& target, const VcConfig& cfg) {
  cfg.validate();
  if (source.cols() != target.pool.cols())
    throw DataError("knn_convert: dimension mismatch");
  const Eigen::Index N = target.pool.rows();
  if (N < cfg.k)
    throw DataError("knn_convert: pool of " + std::to_string(N) + " rows smaller than k=" +
                    std::to_string(cfg.k));

  Vec pool_norms;
  if (cfg.distance == VcDistance::cosine) {
    pool_norms = target.pool.rowwise().norm();
    for (Eigen::Index i = 0; i < N; ++i)
      if (pool_norms[i] == 0.0)
        throw NumericError("knn_convert: zero-norm pool row under cosine distance");
  }

  Mat out(source.rows(), source.cols());
  std::vector<Eigen::Index> idx(N);
  Vec dist(N);
  for (Eigen::Index t = 0; t < source.rows(); ++t) {
    const Vec q = source.row(t).transpose();
    if (cfg.distance == VcDistance::euclidean) {
      dist = (target.pool.rowwise() - q.transpose()).rowwise().squaredNorm();
    } else {
      const double qn = q.norm();
      if (qn == 0.0) throw NumericError("knn_convert: zero-norm query under cosine distance");
      dist = Vec::Ones(N) - (target.pool * q).cwiseQuotient(pool_norms * qn);
    }
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::partial_sort(idx.begin(), idx.begin() + cfg.k, idx.end(),
                      [&dist](Eigen::Index a, Eigen::Index b) {
                        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                      });
    Vec acc = Vec::Zero(source.cols());
    for (int j = 0; j < cfg.k; ++j) acc += target.pool.row(idx[j]).transpose();
    out.row(t) = (acc / cfg.k).transpose();
  }
  return out;
}

// Ground-truth converter for synthetic corpora: subtract the source speaker's
// contribution and add the target's, leaving accent term and noise untouched.
inline Utterance oracle_convert(const Utterance& source, const std::string& target_speaker,
                                const Corpus& corpus) {
  if (!corpus.factor_table || !corpus.synth_config)
    throw DataError("oracle_convert: corpus has no factor table (not synthetic)");
  if (!source.frames) throw DataError("oracle_convert: source has no frames");
  const auto& factors = *corpus.factor_table;
  auto h_src_it = factors.speaker_factors.find(source.speaker);
  auto h_tgt_it = factors.speaker_factors.find(target_speaker);
  auto g_it = factors.accent_factors.find(source.accent);
  if (h_src_it == factors.speaker_factors.end() || h_tgt_it == factors.speaker_factors.end() ||
      g_it == factors.accent_factors.end())
    throw DataError("oracle_convert: label missing from factor table");
  const SynthConfig& cfg = *corpus.synth_config;
  const Vec& h_src = h_src_it->second;
  const Vec& h_tgt = h_tgt_it->second;
  const Vec& g = g_it->second;
  const Vec delta = cfg.speaker_scale * (h_tgt - h_src) +
                    cfg.entanglement * ((h_tgt - h_src).array() * g.array()).matrix();

  Utterance out;
  out.id = source.id + "~" + target_speaker;
  out.speaker = target_speaker;
  out.accent = source.accent;
  Mat frames = source.frames->rowwise() + delta.transpose();
  quantize_f32(frames);
  out.frames = std::move(frames);
  out.provenance = {ProvenanceKind::converted, source.id, target_speaker};
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation: enlarge the train split with converted copies of every train
// utterance; val/test untouched. Target choice is seeded per utterance so
// parallel scheduling cannot change outputs.

struct AugmentResult {
  Corpus corpus;
  SplitSpec split;
};

inline std::vector<std::string> pick_targets(const std::vector<std::string>& pool,
                                             const std::string& own_speaker, int n,
                                             std::uint64_t seed, const std::string& utt_id) {
  std::vector<std::string> candidates;
  for (const auto& s : pool)
    if (s != own_speaker) candidates.push_back(s);
  if (candidates.empty())
    throw DataError("augment: no eligible target speakers for " + utt_id);
  Rng rng(seed, "augment:" + utt_id);
  rng.shuffle(candidates);
  // distinct targets by default; wrap around only if the pool is too small
  std::vector<std::string> targets;
  for (int i = 0; i < n; ++i) targets.push_back(candidates[i % candidates.size()]);
  return targets;
}

inline AugmentResult augment_corpus(const Corpus& corpus, const SplitSpec& split,
                                    const VcConfig& cfg, VcEngine engine) {
  cfg.validate();
  for (const auto& s : cfg.target_pool)
    if (split.unseen_speakers.count(s))
      throw DataError("augment: target pool contains test speaker " + s +
                      " (would breach speaker disjointness)");
  if (cfg.target_pool.empty()) throw ConfigError("augment: empty target pool");

  AugmentResult result{corpus, split};
  if (cfg.versions_per_utterance == 0) return result;

  const std::vector<std::string> pool(cfg.target_pool.begin(), cfg.target_pool.end());
  std::map<std::string, MatchingSet> matching_sets;
  auto matching_set_for = [&](const std::string& spk) -> const MatchingSet& {
    auto it = matching_sets.find(spk);
    if (it == matching_sets.end())
      it = matching_sets.emplace(spk, build_matching_set(corpus, spk)).first;
    return it->second;
  };

  std::vector<Utterance> converted;
  for (const auto& u : corpus.utterances) {
    if (!split.train.count(u.id)) continue;
    const auto targets =
        pick_targets(pool, u.speaker, cfg.versions_per_utterance, cfg.seed, u.id);
    for (std::size_t v = 0; v < targets.size(); ++v) {
      Utterance conv;
      if (engine == VcEngine::oracle) {
        conv = oracle_convert(u, targets[v], corpus);
      } else {
        if (!u.frames) throw DataError("augment: utterance " + u.id + " has no frames");
        conv.id = u.id + "~" + targets[v];
        conv.speaker = targets[v];
        conv.accent = u.accent;
        Mat frames = knn_convert(*u.frames, matching_set_for(targets[v]), cfg);
        quantize_f32(frames);
        conv.frames = std::move(frames);
        conv.provenance = {ProvenanceKind::converted, u.id, targets[v]};
      }
      if (v > 0) conv.id += "#" + std::to_string(v);  // same target picked twice
      converted.push_back(std::move(conv));
    }
  }
  for (auto& c : converted) {
    result.split.train.insert(c.id);
    result.corpus.utterances.push_back(std::move(c));
  }
  std::sort(result.corpus.utterances.begin(), result.corpus.utterances.end(),
            [](const Utterance& x, const Utterance& y) { return x.id < y.id; });
  result.corpus.rebuild_label_index();
  return result;
}

// ---------------------------------------------------------------------------
// VC analysis (speaker similarity, accent preservation, AECS)

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - ms.mean) * (x - ms.mean);
  ms.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return ms;
}

struct VcAnalysisReport {
  std::string engine;
  std::size_t n_conversions = 0;
  MeanStd sim_source;  // pooled converted embedding vs source speaker centroid
  MeanStd sim_target;  // vs target speaker centroid
  double accent_accuracy = 0.0;  // predicted accent == source accent
  MeanStd aecs;                  // accent-embedding cosine source vs converted
  double aecs_random_baseline = 0.0;
  // per-accent aggregation alongside the global one
  std::map<std::string, MeanStd> sim_source_per_accent;
  std::map<std::string, MeanStd> sim_target_per_accent;
  MeanStd sim_source_accent_averaged;
  MeanStd sim_target_accent_averaged;
};

// Speaker centroids over original (unconverted) utterances only.
inline std::map<std::string, Vec> speaker_centroids(const Corpus& corpus) {
  std::map<std::string, Vec> sums;
  std::map<std::string, int> counts;
  for (const auto& u : corpus.utterances) {
    if (u.provenance.kind != ProvenanceKind::original) continue;
    Vec e = corpus.pooled(u);
    auto [it, inserted] = sums.try_emplace(u.speaker, e);
    if (!inserted) it->second += e;
    counts[u.speaker] += 1;
  }
  for (auto& [spk, v] : sums) v /= static_cast<double>(counts[spk]);
  return sums;
}

// Converts each selected source utterance to several random targets and
// scores timbre shift plus accent retention with a trained model.
inline VcAnalysisReport analyze_vc(const Corpus& corpus, const SplitSpec& split,
                                   VcEngine engine, const VcConfig& cfg, AidModel& model,
                                   const std::map<std::string, Vec>& centroids) {
  cfg.validate();
  if (model.mode != Mode::eval)
    throw DataError("analyze_vc: model must be trained (eval mode)");
  if (cfg.target_pool.empty()) throw ConfigError("analyze_vc: empty target pool");

  const std::vector<std::string> pool(cfg.target_pool.begin(), cfg.target_pool.end());
  std::map<std::string, MatchingSet> matching_sets;

  VcAnalysisReport report;
  report.engine = engine == VcEngine::oracle ? "oracle" : "knn";
  std::vector<double> sims_src, sims_tgt, aecs_vals;
  std::map<std::string, std::vector<double>> src_by_accent, tgt_by_accent;
  std::size_t correct = 0;

  for (const auto& u : corpus.utterances) {
    if (!split.test.count(u.id) || !u.frames) continue;
    const Vec e_src = corpus.pooled(u);
    const Vec emb_src = accent_embedding(model, e_src);
    const auto targets = pick_targets(pool, u.speaker, cfg.targets_per_source_analysis,
                                      cfg.seed, "analyze:" + u.id);
    for (const auto& target : targets) {
      Vec e_conv;
      if (engine == VcEngine::oracle) {
        e_conv = corpus.pooled(oracle_convert(u, target, corpus));
      } else {
        auto it = matching_sets.find(target);
        if (it == matching_sets.end())
          it = matching_sets.emplace(target, build_matching_set(corpus, target)).first;
        e_conv = mean_pool(knn_convert(*u.frames, it->second, cfg));
      }
      auto c_src = centroids.find(u.speaker);
      auto c_tgt = centroids.find(target);
      if (c_src == centroids.end() || c_tgt == centroids.end())
        throw DataError("analyze_vc: missing speaker centroid");
      const double s_src = cosine_similarity(e_conv, c_src->second);
      const double s_tgt = cosine_similarity(e_conv, c_tgt->second);
      sims_src.push_back(s_src);
      sims_tgt.push_back(s_tgt);
      src_by_accent[u.accent].push_back(s_src);
      tgt_by_accent[u.accent].push_back(s_tgt);
      if (model.labels.accents[predict_accent(model, e_conv)] == u.accent) ++correct;
      aecs_vals.push_back(cosine_similarity(emb_src, accent_embedding(model, e_conv)));
      ++report.n_conversions;
    }
  }
  if (report.n_conversions == 0) throw DataError("analyze_vc: no test utterances with frames");

  report.sim_source = mean_std(sims_src);
  report.sim_target = mean_std(sims_tgt);
  report.accent_accuracy = static_cast<double>(correct) / report.n_conversions;
  report.aecs = mean_std(aecs_vals);

  std::vector<double> per_acc_src, per_acc_tgt;
  for (const auto& [acc, vals] : src_by_accent) {
    report.sim_source_per_accent[acc] = mean_std(vals);
    per_acc_src.push_back(report.sim_source_per_accent[acc].mean);
  }
  for (const auto& [acc, vals] : tgt_by_accent) {
    report.sim_target_per_accent[acc] = mean_std(vals);
    per_acc_tgt.push_back(report.sim_target_per_accent[acc].mean);
  }
  report.sim_source_accent_averaged = mean_std(per_acc_src);
  report.sim_target_accent_averaged = mean_std(per_acc_tgt);

  // random-pair AECS baseline over original test utterances
  std::vector<const Utterance*> originals;
  for (const auto& u : corpus.utterances)
    if (split.test.count(u.id) && u.provenance.kind == ProvenanceKind::original)
      originals.push_back(&u);
  if (originals.size() >= 2) {
    Rng rng(cfg.seed, "aecs_baseline");
    const int n_pairs = 200;
    double sum = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
      std::size_t a = rng.uniform_int(originals.size());
      std::size_t b = rng.uniform_int(originals.size() - 1);
      if (b >= a) ++b;
      sum += cosine_similarity(accent_embedding(model, corpus.pooled(*originals[a])),
                               accent_embedding(model, corpus.pooled(*originals[b])));
    }
    report.aecs_random_baseline = sum / n_pairs;
  }
  return report;
}

}  // namespace aid
