#pragma once

// Core domain types and numeric primitives shared by every other module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;  // rows = frames / batch items

// Error taxonomy, mapped to CLI exit codes (2/3/4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Domain types

struct FrameSequence {
  Mat frames;  // T x D
  std::optional<double> frame_rate_hint;
};

enum class ProvenanceKind { original, converted };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::original;
  std::string source_id;       // set when converted
  std::string target_speaker;  // set when converted
};

struct Utterance {
  std::string id;
  std::string speaker;
  std::string accent;
  std::optional<Mat> frames;   // T x D
  std::optional<Vec> embedding;
  Provenance provenance;

  bool has_features() const { return frames.has_value() || embedding.has_value(); }
};

// Deterministic class-id assignment: labels sorted lexicographically.
struct LabelIndex {
  std::vector<std::string> accents;
  std::vector<std::string> speakers;

  static LabelIndex from_sorted_unique(std::vector<std::string> accent_labels,
                                       std::vector<std::string> speaker_labels) {
    std::sort(accent_labels.begin(), accent_labels.end());
    accent_labels.erase(std::unique(accent_labels.begin(), accent_labels.end()),
                        accent_labels.end());
    std::sort(speaker_labels.begin(), speaker_labels.end());
    speaker_labels.erase(std::unique(speaker_labels.begin(), speaker_labels.end()),
                         speaker_labels.end());
    return LabelIndex{std::move(accent_labels), std::move(speaker_labels)};
  }

  int accent_id(const std::string& label) const {
    auto it = std::lower_bound(accents.begin(), accents.end(), label);
    if (it == accents.end() || *it != label)
      throw DataError("unknown accent label: " + label);
    return static_cast<int>(it - accents.begin());
  }
  int speaker_id(const std::string& label) const {
    auto it = std::lower_bound(speakers.begin(), speakers.end(), label);
    if (it == speakers.end() || *it != label)
      throw DataError("unknown speaker label: " + label);
    return static_cast<int>(it - speakers.begin());
  }
  int n_accents() const { return static_cast<int>(accents.size()); }
  int n_speakers() const { return static_cast<int>(speakers.size()); }
};

// ---------------------------------------------------------------------------
// Numeric primitives

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

inline double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw DataError("cosine_similarity: dimension mismatch (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  require_finite(a, "cosine_similarity lhs");
  require_finite(b, "cosine_similarity rhs");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw NumericError("cosine_similarity: zero-norm input");
  return a.dot(b) / (na * nb);
}

inline Vec mean_pool(const Mat& frames) {
  if (frames.rows() < 1) throw DataError("mean_pool: empty frame sequence");
  if (!frames.allFinite()) throw NumericError("mean_pool: non-finite frames");
  return frames.colwise().mean().transpose();
}

// Max-subtracted softmax; shift-invariant and overflow-safe.
inline Vec softmax(const Vec& logits) {
  if (logits.size() < 1) throw DataError("softmax: empty logits");
  require_finite(logits, "softmax logits");
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

// Ties broken by lowest index.
inline int argmax(const Vec& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Seeded RNG with named substreams.
//
// All randomness flows from one top-level seed through named substreams so
// each pipeline stage is reproducible independently of the others. The
// normal sampler is a pinned Box-Muller so streams are identical across
// standard libraries.

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t substream_seed(std::uint64_t seed, const std::string& name) {
  std::uint64_t z = seed ^ fnv1a(name);
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t seed, const std::string& stream) : gen_(substream_seed(seed, stream)) {}

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Round a double through float32; file formats store float32 and generated
// data is quantized at the source so serialization round-trips are exact.
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

inline void quantize_f32(Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = quantize_f32(m.data()[i]);
}

}  // namespace aid
