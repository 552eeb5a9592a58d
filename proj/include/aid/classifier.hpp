#pragma once

// Feed-forward accent classifier with an adversarial speaker head.
//
// Trunk: three affine layers (output sizes 256, 128, 64), each followed by
// batch normalization and ReLU. Two heads on the 64-dim trunk embedding:
// accent (64 -> C_a) and speaker (64 -> C_s).
//
// Training loss: L_total = accent_CE + lambda * mean KL(p_speaker || uniform).
// Gradient topology: the speaker head is updated from its own cross-entropy
// with the trunk embedding detached; the KL term backpropagates through the
// frozen speaker-head weights into the trunk. No gradient-reversal layer.

#include "aid/core.hpp"
#include "aid/corpus.hpp"

#include <array>
#include <filesystem>
#include <fstream>

namespace aid {

constexpr double kBnEps = 1e-5;
constexpr std::array<int, 3> kDefaultTrunkDims = {256, 128, 64};

struct Affine {
  Mat W;  // out x in
  Vec b;  // out

  void init(int in, int out, double scale, Rng& rng) {
    const double s = scale / std::sqrt(static_cast<double>(in));
    W.resize(out, in);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform(-s, s);
    b = Vec::Zero(out);
  }
};

struct BatchNorm {
  Vec gamma, beta, running_mean, running_var;

  void init(int dim) {
    gamma = Vec::Ones(dim);
    beta = Vec::Zero(dim);
    running_mean = Vec::Zero(dim);
    running_var = Vec::Ones(dim);
  }
};

enum class Mode { train, eval };

struct TrainingConfig {
  int epochs = 10;
  double lr_accent = 1e-4;
  double lr_speaker = 1e-5;
  double lambda = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double batchnorm_momentum = 0.1;
  double weight_init_scale = 1.0;

  void validate() const {
    if (epochs < 0) throw ConfigError("TrainingConfig: epochs must be >= 0");
    if (!(lr_accent > 0) || !(lr_speaker > 0))
      throw ConfigError("TrainingConfig: learning rates must be > 0");
    if (!(lambda >= 0)) throw ConfigError("TrainingConfig: lambda must be >= 0");
    if (batch_size < 2) throw ConfigError("TrainingConfig: batch_size must be >= 2");
  }
};

struct AidModel {
  int input_dim = 0;
  std::array<int, 3> trunk_dims = kDefaultTrunkDims;
  std::array<Affine, 3> trunk_affine;
  std::array<BatchNorm, 3> trunk_bn;
  Affine accent_head;
  Affine speaker_head;
  Mode mode = Mode::train;
  LabelIndex labels;

  static AidModel init(int input_dim, const LabelIndex& labels, const TrainingConfig& cfg,
                       std::array<int, 3> trunk_dims = kDefaultTrunkDims) {
    AidModel m;
    m.input_dim = input_dim;
    m.trunk_dims = trunk_dims;
    m.labels = labels;
    Rng rng(cfg.seed, "init");
    int in = input_dim;
    for (int l = 0; l < 3; ++l) {
      m.trunk_affine[l].init(in, trunk_dims[l], cfg.weight_init_scale, rng);
      m.trunk_bn[l].init(trunk_dims[l]);
      in = trunk_dims[l];
    }
    m.accent_head.init(trunk_dims[2], labels.n_accents(), cfg.weight_init_scale, rng);
    m.speaker_head.init(trunk_dims[2], labels.n_speakers(), cfg.weight_init_scale, rng);
    return m;
  }
};

// Per-layer activations cached for the backward pass.
struct LayerCache {
  Mat input;    // B x in
  Mat mu;        // 1 x dim (batch mean)
  Mat var;       // 1 x dim (biased batch variance)
  Mat centered;  // affine output minus batch mean (train mode only)
  Mat xhat;      // normalized pre-scale
  Mat relu_in;   // post-affine-bn, pre-relu
};

struct ForwardResult {
  Mat trunk;           // B x 64, the accent embedding
  Mat accent_logits;   // B x C_a
  Mat speaker_logits;  // B x C_s
  std::array<LayerCache, 3> cache;
};

inline ForwardResult forward(AidModel& model, const Mat& batch) {
  if (batch.cols() != model.input_dim)
    throw DataError("forward: input dim " + std::to_string(batch.cols()) + " != model dim " +
                    std::to_string(model.input_dim));
  if (model.mode == Mode::train && batch.rows() < 2)
    throw DataError("forward: train mode requires batch size >= 2");

  ForwardResult res;
  Mat x = batch;
  for (int l = 0; l < 3; ++l) {
    auto& cache = res.cache[l];
    cache.input = x;
    Mat a = (x * model.trunk_affine[l].W.transpose()).rowwise() +
            model.trunk_affine[l].b.transpose();
    const BatchNorm& bn = model.trunk_bn[l];
    Mat xhat;
    if (model.mode == Mode::train) {
      cache.mu = a.colwise().mean();
      Mat centered = a.rowwise() - cache.mu.row(0);
      cache.var = centered.array().square().colwise().mean();
      Eigen::RowVectorXd inv_std = (cache.var.row(0).array() + kBnEps).sqrt().inverse();
      xhat = centered.array().rowwise() * inv_std.array();
      cache.centered = std::move(centered);
    } else {
      Mat centered = a.rowwise() - bn.running_mean.transpose();
      Eigen::RowVectorXd inv_std =
          (bn.running_var.transpose().array() + kBnEps).sqrt().inverse();
      xhat = centered.array().rowwise() * inv_std.array();
    }
    cache.xhat = xhat;
    Mat y = (xhat.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
            bn.beta.transpose().array();
    cache.relu_in = y;
    x = y.cwiseMax(0.0);
  }
  res.trunk = x;
  res.accent_logits =
      (x * model.accent_head.W.transpose()).rowwise() + model.accent_head.b.transpose();
  res.speaker_logits =
      (x * model.speaker_head.W.transpose()).rowwise() + model.speaker_head.b.transpose();
  return res;
}

// Running-stat update is separated from forward so gradient checks can rerun
// the forward pass without drifting the statistics.
inline void update_running_stats(AidModel& model, const ForwardResult& res, double momentum) {
  for (int l = 0; l < 3; ++l) {
    BatchNorm& bn = model.trunk_bn[l];
    bn.running_mean =
        (1.0 - momentum) * bn.running_mean + momentum * res.cache[l].mu.row(0).transpose();
    bn.running_var =
        (1.0 - momentum) * bn.running_var + momentum * res.cache[l].var.row(0).transpose();
  }
}

// ---------------------------------------------------------------------------
// Loss

// KL(p || uniform over C classes) = sum_i p_i log(p_i * C), with 0 log 0 = 0.
inline double kl_to_uniform(const Vec& p) {
  const int C = static_cast<int>(p.size());
  if (C < 1) throw DataError("kl_to_uniform: empty distribution");
  double sum = 0.0;
  for (int i = 0; i < C; ++i) {
    if (!(p[i] >= 0.0)) throw NumericError("kl_to_uniform: negative probability");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw NumericError("kl_to_uniform: probabilities sum to " + std::to_string(sum));
  double kl = 0.0;
  for (int i = 0; i < C; ++i)
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] * C);
  return std::max(0.0, kl);
}

struct LossBreakdown {
  double total = 0.0;
  double accent_ce = 0.0;
  double kl_term = 0.0;     // pre-lambda
  double speaker_ce = 0.0;  // diagnostic only, not part of L_total
};

inline double mean_cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw DataError("cross_entropy: logits/labels size mismatch");
  double ce = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.cols())
      throw DataError("cross_entropy: label id out of range: " + std::to_string(y));
    const Vec row = logits.row(i).transpose();
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    ce += lse - row[y];
  }
  return ce / static_cast<double>(logits.rows());
}

inline LossBreakdown loss(const ForwardResult& res, const std::vector<int>& accent_labels,
                          const std::vector<int>& speaker_labels, const TrainingConfig& cfg) {
  LossBreakdown lb;
  lb.accent_ce = mean_cross_entropy(res.accent_logits, accent_labels);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < res.speaker_logits.rows(); ++i)
    kl += kl_to_uniform(softmax(res.speaker_logits.row(i).transpose()));
  lb.kl_term = kl / static_cast<double>(res.speaker_logits.rows());
  lb.total = lb.accent_ce + cfg.lambda * lb.kl_term;
  if (!speaker_labels.empty())
    lb.speaker_ce = mean_cross_entropy(res.speaker_logits, speaker_labels);
  if (!std::isfinite(lb.total)) throw NumericError("loss: non-finite total");
  return lb;
}

// ---------------------------------------------------------------------------
// Backward

struct TrunkGrads {
  std::array<Mat, 3> dW;
  std::array<Vec, 3> db;
  std::array<Vec, 3> dgamma;
  std::array<Vec, 3> dbeta;
  Mat dW_accent;
  Vec db_accent;
};

struct SpeakerHeadGrads {
  Mat dW;
  Vec db;
};

struct Gradients {
  TrunkGrads main;          // d L_total / d (trunk + accent head)
  SpeakerHeadGrads speaker; // d speaker_CE / d speaker_head, trunk detached
};

namespace detail {

// Backprop a gradient w.r.t. the trunk embedding down through the three
// affine+bn+relu layers, accumulating parameter gradients.
inline void backprop_trunk(const AidModel& model, const ForwardResult& res, Mat d_trunk,
                           TrunkGrads& grads) {
  const double B = static_cast<double>(res.trunk.rows());
  Mat dy = std::move(d_trunk);
  for (int l = 2; l >= 0; --l) {
    const LayerCache& cache = res.cache[l];
    const BatchNorm& bn = model.trunk_bn[l];
    // relu
    dy = (cache.relu_in.array() > 0.0).select(dy, 0.0);
    // bn scale/shift
    grads.dgamma[l] = (dy.array() * cache.xhat.array()).colwise().sum().transpose();
    grads.dbeta[l] = dy.colwise().sum().transpose();
    Mat dxhat = dy.array().rowwise() * bn.gamma.transpose().array();
    // bn normalization (train-mode batch statistics)
    Eigen::RowVectorXd inv_std = (cache.var.row(0).array() + kBnEps).sqrt().inverse();
    const Mat& centered = cache.centered;
    Eigen::RowVectorXd dvar =
        ((dxhat.array() * centered.array()).colwise().sum().array() * (-0.5) *
         inv_std.array().cube())
            .matrix();
    Eigen::RowVectorXd dmu =
        ((dxhat.array().rowwise() * (-inv_std.array())).colwise().sum().array() +
         dvar.array() * (-2.0 / B) * centered.colwise().sum().array())
            .matrix();
    Mat da = ((dxhat.array().rowwise() * inv_std.array()) +
              (centered.array().rowwise() * (dvar.array() * (2.0 / B))))
                 .matrix()
                 .rowwise() +
             dmu / B;
    // affine
    grads.dW[l] = da.transpose() * cache.input;
    grads.db[l] = da.colwise().sum().transpose();
    dy = da * model.trunk_affine[l].W;
  }
}

}  // namespace detail

inline Gradients backward(const AidModel& model, const ForwardResult& res,
                          const std::vector<int>& accent_labels,
                          const std::vector<int>& speaker_labels, const TrainingConfig& cfg) {
  const auto B = res.trunk.rows();
  const double Bd = static_cast<double>(B);
  Gradients grads;

  // accent head: softmax cross-entropy
  Mat d_accent_logits(B, model.labels.n_accents());
  for (Eigen::Index i = 0; i < B; ++i) {
    Vec p = softmax(res.accent_logits.row(i).transpose());
    p[accent_labels[i]] -= 1.0;
    d_accent_logits.row(i) = p.transpose() / Bd;
  }
  grads.main.dW_accent = d_accent_logits.transpose() * res.trunk;
  grads.main.db_accent = d_accent_logits.colwise().sum().transpose();
  Mat d_trunk = d_accent_logits * model.accent_head.W;

  // KL-to-uniform path: gradient flows through the frozen speaker head into
  // the trunk. dKL/dz_j = p_j (log(p_j C) - KL).
  if (cfg.lambda != 0.0) {
    const int Cs = model.labels.n_speakers();
    Mat d_speaker_logits(B, Cs);
    for (Eigen::Index i = 0; i < B; ++i) {
      Vec p = softmax(res.speaker_logits.row(i).transpose());
      double kl = 0.0;
      for (int j = 0; j < Cs; ++j)
        if (p[j] > 0.0) kl += p[j] * std::log(p[j] * Cs);
      Vec dz(Cs);
      for (int j = 0; j < Cs; ++j)
        dz[j] = p[j] * ((p[j] > 0.0 ? std::log(p[j] * Cs) : 0.0) - kl);
      d_speaker_logits.row(i) = dz.transpose() * (cfg.lambda / Bd);
    }
    d_trunk += d_speaker_logits * model.speaker_head.W;
  }

  detail::backprop_trunk(model, res, std::move(d_trunk), grads.main);

  // speaker head: its own cross-entropy, trunk embedding detached
  Mat d_sp(B, model.labels.n_speakers());
  for (Eigen::Index i = 0; i < B; ++i) {
    Vec p = softmax(res.speaker_logits.row(i).transpose());
    const int y = speaker_labels[i];
    if (y < 0 || y >= p.size())
      throw DataError("backward: speaker label out of range");
    p[y] -= 1.0;
    d_sp.row(i) = p.transpose() / Bd;
  }
  grads.speaker.dW = d_sp.transpose() * res.trunk;
  grads.speaker.db = d_sp.colwise().sum().transpose();
  return grads;
}

inline void sgd_step(AidModel& model, const Gradients& grads, const TrainingConfig& cfg) {
  for (int l = 0; l < 3; ++l) {
    model.trunk_affine[l].W -= cfg.lr_accent * grads.main.dW[l];
    model.trunk_affine[l].b -= cfg.lr_accent * grads.main.db[l];
    model.trunk_bn[l].gamma -= cfg.lr_accent * grads.main.dgamma[l];
    model.trunk_bn[l].beta -= cfg.lr_accent * grads.main.dbeta[l];
  }
  model.accent_head.W -= cfg.lr_accent * grads.main.dW_accent;
  model.accent_head.b -= cfg.lr_accent * grads.main.db_accent;
  model.speaker_head.W -= cfg.lr_speaker * grads.speaker.dW;
  model.speaker_head.b -= cfg.lr_speaker * grads.speaker.db;
}

// ---------------------------------------------------------------------------
// Training

struct Dataset {
  Mat X;  // N x D
  std::vector<int> accent_ids;
  std::vector<int> speaker_ids;
  std::size_t size() const { return accent_ids.size(); }
};

struct EpochLog {
  LossBreakdown train_loss;  // averaged over batches
  double val_accuracy = 0.0;
  double val_kl_term = 0.0;
  double val_accent_ce = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

inline int predict_accent(AidModel& model, const Vec& embedding) {
  Mat batch = embedding.transpose();
  const Mode saved = model.mode;
  model.mode = Mode::eval;
  ForwardResult res = forward(model, batch);
  model.mode = saved;
  return argmax(res.accent_logits.row(0).transpose());
}

inline Vec accent_embedding(AidModel& model, const Vec& input) {
  Mat batch = input.transpose();
  const Mode saved = model.mode;
  model.mode = Mode::eval;
  ForwardResult res = forward(model, batch);
  model.mode = saved;
  return res.trunk.row(0).transpose();
}

inline TrainLog train(AidModel& model, const Dataset& train_set, const Dataset& val_set,
                      const TrainingConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw DataError("train: empty training set");
  TrainLog log;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(cfg.seed, "shuffle:epoch" + std::to_string(epoch));
    shuffle_rng.shuffle(order);

    model.mode = Mode::train;
    LossBreakdown epoch_loss;
    int n_batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      if (bsz < 2) break;  // batch norm needs batch statistics
      Mat X(bsz, model.input_dim);
      std::vector<int> ya(bsz), ys(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        X.row(i) = train_set.X.row(static_cast<Eigen::Index>(order[start + i]));
        ya[i] = train_set.accent_ids[order[start + i]];
        ys[i] = train_set.speaker_ids[order[start + i]];
      }
      ForwardResult res = forward(model, X);
      LossBreakdown lb = loss(res, ya, ys, cfg);
      if (!std::isfinite(lb.total))
        throw NumericError("train: NaN loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(n_batches));
      Gradients grads = backward(model, res, ya, ys, cfg);
      sgd_step(model, grads, cfg);
      update_running_stats(model, res, cfg.batchnorm_momentum);
      epoch_loss.total += lb.total;
      epoch_loss.accent_ce += lb.accent_ce;
      epoch_loss.kl_term += lb.kl_term;
      epoch_loss.speaker_ce += lb.speaker_ce;
      ++n_batches;
    }
    if (n_batches > 0) {
      epoch_loss.total /= n_batches;
      epoch_loss.accent_ce /= n_batches;
      epoch_loss.kl_term /= n_batches;
      epoch_loss.speaker_ce /= n_batches;
    }

    EpochLog el;
    el.train_loss = epoch_loss;
    if (val_set.size() > 0) {
      model.mode = Mode::eval;
      ForwardResult res = forward(model, val_set.X);
      LossBreakdown lb = loss(res, val_set.accent_ids, val_set.speaker_ids, cfg);
      el.val_accent_ce = lb.accent_ce;
      el.val_kl_term = lb.kl_term;
      int correct = 0;
      for (Eigen::Index i = 0; i < res.accent_logits.rows(); ++i)
        if (argmax(res.accent_logits.row(i).transpose()) == val_set.accent_ids[i]) ++correct;
      el.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_set.size());
    }
    log.epochs.push_back(el);
  }
  model.mode = Mode::eval;
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoint: versioned little-endian binary, float32 tensors on disk.

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor(std::ostream& os, const Mat& m) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_le<float>(os, static_cast<float>(m(r, c)));
}

inline Mat read_tensor(std::istream& is) {
  const auto rows = read_le<std::uint32_t>(is);
  const auto cols = read_le<std::uint32_t>(is);
  Mat m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(read_le<float>(is));
  return m;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_le<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("checkpoint: truncated string");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const AidModel& model, const TrainingConfig& cfg,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os.write("AIDM", 4);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.input_dim));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.labels.n_accents()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.labels.n_speakers()));
  for (const auto& s : model.labels.accents) detail::write_string(os, s);
  for (const auto& s : model.labels.speakers) detail::write_string(os, s);
  for (int l = 0; l < 3; ++l) {
    detail::write_tensor(os, model.trunk_affine[l].W);
    detail::write_tensor(os, model.trunk_affine[l].b);
    detail::write_tensor(os, model.trunk_bn[l].gamma);
    detail::write_tensor(os, model.trunk_bn[l].beta);
    detail::write_tensor(os, model.trunk_bn[l].running_mean);
    detail::write_tensor(os, model.trunk_bn[l].running_var);
  }
  detail::write_tensor(os, model.accent_head.W);
  detail::write_tensor(os, model.accent_head.b);
  detail::write_tensor(os, model.speaker_head.W);
  detail::write_tensor(os, model.speaker_head.b);
  // training config snapshot
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.epochs));
  detail::write_le<double>(os, cfg.lr_accent);
  detail::write_le<double>(os, cfg.lr_speaker);
  detail::write_le<double>(os, cfg.lambda);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.batch_size));
  detail::write_le<std::uint64_t>(os, cfg.seed);
  detail::write_le<double>(os, cfg.batchnorm_momentum);
  detail::write_le<double>(os, cfg.weight_init_scale);
}

inline std::pair<AidModel, TrainingConfig> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "AIDM") throw DataError("checkpoint: bad magic");
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  AidModel m;
  m.input_dim = static_cast<int>(detail::read_le<std::uint32_t>(is));
  const auto n_acc = detail::read_le<std::uint32_t>(is);
  const auto n_spk = detail::read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_acc; ++i) m.labels.accents.push_back(detail::read_string(is));
  for (std::uint32_t i = 0; i < n_spk; ++i) m.labels.speakers.push_back(detail::read_string(is));
  auto read_vec = [&is]() { return Vec(detail::read_tensor(is).reshaped()); };
  for (int l = 0; l < 3; ++l) {
    m.trunk_affine[l].W = detail::read_tensor(is);
    m.trunk_dims[l] = static_cast<int>(m.trunk_affine[l].W.rows());
    m.trunk_affine[l].b = read_vec();
    m.trunk_bn[l].gamma = read_vec();
    m.trunk_bn[l].beta = read_vec();
    m.trunk_bn[l].running_mean = read_vec();
    m.trunk_bn[l].running_var = read_vec();
  }
  m.accent_head.W = detail::read_tensor(is);
  m.accent_head.b = read_vec();
  m.speaker_head.W = detail::read_tensor(is);
  m.speaker_head.b = read_vec();
  TrainingConfig cfg;
  cfg.epochs = static_cast<int>(detail::read_le<std::uint32_t>(is));
  cfg.lr_accent = detail::read_le<double>(is);
  cfg.lr_speaker = detail::read_le<double>(is);
  cfg.lambda = detail::read_le<double>(is);
  cfg.batch_size = static_cast<int>(detail::read_le<std::uint32_t>(is));
  cfg.seed = detail::read_le<std::uint64_t>(is);
  cfg.batchnorm_momentum = detail::read_le<double>(is);
  cfg.weight_init_scale = detail::read_le<double>(is);
  m.mode = Mode::eval;
  return {std::move(m), cfg};
}

}  // namespace aid
