#pragma once

// Confusion-matrix metrics (macro averaging), AECS, and speaker-similarity
// statistics.

#include "aid/core.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace aid {

struct ConfusionMatrix {
  // rows = true class, columns = predicted
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(int n_classes = 0)
      : counts(n_classes, std::vector<std::size_t>(n_classes, 0)) {}

  int n_classes() const { return static_cast<int>(counts.size()); }
  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& predicted,
                                 const std::vector<int>& truth, int n_classes) {
  if (predicted.size() != truth.size())
    throw DataError("confusion: predictions and labels differ in length");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes)
      throw DataError("confusion: label out of range at index " + std::to_string(i));
    cm.counts[truth[i]][predicted[i]] += 1;
  }
  return cm;
}

struct EvalReport {
  std::vector<double> precision, recall, f1;  // per class
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix cm{0};
  std::size_t n_utterances = 0;
  std::size_t n_unseen_speakers = 0;
};

// Macro (unweighted) averaging; zero-support classes contribute zeros.
inline EvalReport macro_metrics(const ConfusionMatrix& cm) {
  const int C = cm.n_classes();
  if (C == 0 || cm.total() == 0) throw DataError("macro_metrics: empty confusion matrix");
  EvalReport rep;
  rep.cm = cm;
  rep.n_utterances = cm.total();
  std::size_t trace = 0;
  for (int c = 0; c < C; ++c) {
    std::size_t tp = cm.counts[c][c];
    std::size_t fp = 0, fn = 0;
    for (int o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += cm.counts[o][c];
      fn += cm.counts[c][o];
    }
    trace += tp;
    const double prec = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 = (prec + rec > 0.0) ? 2.0 * prec * rec / (prec + rec) : 0.0;
    rep.precision.push_back(prec);
    rep.recall.push_back(rec);
    rep.f1.push_back(f1);
    rep.macro_precision += prec;
    rep.macro_recall += rec;
    rep.macro_f1 += f1;
  }
  rep.macro_precision /= C;
  rep.macro_recall /= C;
  rep.macro_f1 /= C;
  rep.accuracy = static_cast<double>(trace) / static_cast<double>(cm.total());
  return rep;
}

// Cosine similarity between two accent embeddings from the same model.
inline double aecs(const Vec& a, const Vec& b) { return cosine_similarity(a, b); }

struct SpeakerSimilarityStats {
  double source_mean = 0.0, source_std = 0.0;
  double target_mean = 0.0, target_std = 0.0;
  std::size_t n = 0;
};

struct ConversionRecord {
  Vec embedding;  // pooled converted embedding
  std::string source_speaker;
  std::string target_speaker;
};

inline SpeakerSimilarityStats speaker_similarity_stats(
    const std::vector<ConversionRecord>& conversions,
    const std::map<std::string, Vec>& centroids) {
  SpeakerSimilarityStats stats;
  std::vector<double> src, tgt;
  for (const auto& conv : conversions) {
    auto cs = centroids.find(conv.source_speaker);
    auto ct = centroids.find(conv.target_speaker);
    if (cs == centroids.end())
      throw DataError("speaker_similarity_stats: no centroid for " + conv.source_speaker);
    if (ct == centroids.end())
      throw DataError("speaker_similarity_stats: no centroid for " + conv.target_speaker);
    src.push_back(cosine_similarity(conv.embedding, cs->second));
    tgt.push_back(cosine_similarity(conv.embedding, ct->second));
  }
  auto fill = [](const std::vector<double>& xs, double& mean, double& sd) {
    if (xs.empty()) return;
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(xs.size()));
  };
  fill(src, stats.source_mean, stats.source_std);
  fill(tgt, stats.target_mean, stats.target_std);
  stats.n = conversions.size();
  return stats;
}

// "0.18 ± 0.10" style formatting used in the rendered tables.
inline std::string format_mean_std(double mean, double sd) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << mean << " ± " << sd;
  return os.str();
}

inline std::string render_eval_report(const EvalReport& rep,
                                      const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "# averaging: macro (unweighted); zero-support classes contribute zeros\n";
  os << "class\tprecision\trecall\tf1\n";
  for (std::size_t c = 0; c < rep.precision.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    os << name << '\t' << rep.precision[c] << '\t' << rep.recall[c] << '\t' << rep.f1[c]
       << '\n';
  }
  os << "macro\t" << rep.macro_precision << '\t' << rep.macro_recall << '\t' << rep.macro_f1
     << '\n';
  os << "accuracy\t" << rep.accuracy << '\n';
  os << "n_utterances\t" << rep.n_utterances << '\n';
  return os.str();
}

}  // namespace aid
