#pragma once

// Two-stream coherence: fuse the semantic and motion stream probabilities,
// compose the baseline RNN order and materialise the pairwise coherence
// matrix consumed by the story ranker.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vstory/binary_io.hpp"
#include "vstory/error.hpp"
#include "vstory/features.hpp"
#include "vstory/rnn.hpp"

namespace vstory {

/// A composed story: a permutation of clip indices.
using Ordering = std::vector<std::size_t>;

struct TwoStreamModel {
  RnnParams semantic;
  RnnParams motion;
  double lambda = 0.5;

  void validate_against(std::span<const ClipFeatures> clips) const {
    if (lambda < 0.0 || lambda > 1.0) throw InvalidInput("two-stream model: lambda must be in [0, 1]");
    semantic.validate();
    motion.validate();
    for (const auto& c : clips) {
      if (static_cast<std::size_t>(c.semantic.size()) != semantic.input_dim())
        throw InvalidInput("semantic stream expects dimension " + std::to_string(semantic.input_dim()) + ", clip '" +
                           c.clip_id + "' has " + std::to_string(c.semantic.size()));
      if (static_cast<std::size_t>(c.motion.size()) != motion.input_dim())
        throw InvalidInput("motion stream expects dimension " + std::to_string(motion.input_dim()) + ", clip '" +
                           c.clip_id + "' has " + std::to_string(c.motion.size()));
    }
  }
};

/// Scores keyed by candidate clip index.
struct ScoreMap {
  std::vector<std::size_t> candidates;
  Vector values;
};

/// Pairwise fused coherence; row j holds the scores of every other clip
/// following the RNN prefix that ends at clip j. Diagonal is 0.
struct CoherenceMatrix {
  Matrix d;

  std::size_t size() const { return static_cast<std::size_t>(d.rows()); }
};

/// Index of the clip with the smallest dynamics score (lowest index on ties).
inline std::size_t select_initial_clip(std::span<const ClipFeatures> clips) {
  if (clips.empty()) throw InvalidInput("select_initial_clip: no clips");
  std::size_t best = 0;
  for (std::size_t i = 1; i < clips.size(); ++i)
    if (clips[i].dynamics < clips[best].dynamics) best = i;
  return best;
}

/// lambda * P_semantic + (1 - lambda) * P_motion per candidate.
inline ScoreMap fused_coherence(const ScoreMap& semantic, const ScoreMap& motion, double lambda) {
  if (semantic.candidates != motion.candidates) throw InvalidInput("fused_coherence: candidate sets differ");
  if (semantic.values.size() != static_cast<Eigen::Index>(semantic.candidates.size()) ||
      motion.values.size() != semantic.values.size())
    throw InvalidInput("fused_coherence: value count does not match candidate count");
  if (lambda < 0.0 || lambda > 1.0) throw InvalidInput("fused_coherence: lambda must be in [0, 1]");
  return {semantic.candidates, lambda * semantic.values + (1.0 - lambda) * motion.values};
}

namespace detail {

enum class Stream { semantic, motion };

inline const Vector& stream_feature(const ClipFeatures& c, Stream s) {
  return s == Stream::semantic ? c.semantic : c.motion;
}

/// Incrementally advanced recurrent state of one stream.
class StreamCursor {
 public:
  StreamCursor(const RnnParams& params, Stream stream)
      : params_(&params), stream_(stream), hidden_(Vector::Zero(static_cast<Eigen::Index>(params.hidden_dim()))) {}

  void consume(const ClipFeatures& clip) {
    auto step = forward_step(*params_, stream_feature(clip, stream_), hidden_);
    hidden_ = std::move(step.hidden);
    output_ = std::move(step.output);
  }

  ScoreMap probs(std::span<const ClipFeatures> clips, const std::vector<std::size_t>& candidates) const {
    Vector logits(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t k = 0; k < candidates.size(); ++k)
      logits[static_cast<Eigen::Index>(k)] = output_.dot(stream_feature(clips[candidates[k]], stream_));
    return {candidates, softmax(logits)};
  }

 private:
  const RnnParams* params_;
  Stream stream_;
  Vector hidden_;
  Vector output_;
};

inline void require_permutation(const Ordering& order, std::size_t n) {
  if (order.size() != n) throw InvalidInput("ordering has " + std::to_string(order.size()) + " entries, expected " + std::to_string(n));
  std::vector<bool> seen(n, false);
  for (auto i : order) {
    if (i >= n || seen[i]) throw InvalidInput("ordering is not a permutation of 0.." + std::to_string(n - 1));
    seen[i] = true;
  }
}

}  // namespace detail

/// Baseline composition: start from the calmest clip and repeatedly append the
/// remaining clip with the highest fused coherence (lowest index on ties).
inline Ordering greedy_compose(const TwoStreamModel& model, std::span<const ClipFeatures> clips) {
  if (clips.empty()) throw InvalidInput("greedy_compose: no clips");
  model.validate_against(clips);
  const std::size_t n = clips.size();

  Ordering order{select_initial_clip(clips)};
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < n; ++i)
    if (i != order.front()) remaining.push_back(i);

  detail::StreamCursor sem(model.semantic, detail::Stream::semantic);
  detail::StreamCursor mot(model.motion, detail::Stream::motion);
  while (!remaining.empty()) {
    sem.consume(clips[order.back()]);
    mot.consume(clips[order.back()]);
    const auto fused = fused_coherence(sem.probs(clips, remaining), mot.probs(clips, remaining), model.lambda);
    std::size_t best = 0;  // remaining is ascending, so the first maximum has the lowest index
    for (std::size_t k = 1; k < remaining.size(); ++k)
      if (fused.values[static_cast<Eigen::Index>(k)] > fused.values[static_cast<Eigen::Index>(best)]) best = k;
    order.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return order;
}

/// Runs both streams along `rnn_order`; after the prefix ending at clip j,
/// row j receives the fused probabilities over all other clips.
inline CoherenceMatrix coherence_matrix(const TwoStreamModel& model, std::span<const ClipFeatures> clips,
                                        const Ordering& rnn_order) {
  const std::size_t n = clips.size();
  if (n == 0) throw InvalidInput("coherence_matrix: no clips");
  detail::require_permutation(rnn_order, n);
  model.validate_against(clips);

  CoherenceMatrix out{Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  if (n == 1) return out;

  detail::StreamCursor sem(model.semantic, detail::Stream::semantic);
  detail::StreamCursor mot(model.motion, detail::Stream::motion);
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (const auto j : rnn_order) {
    sem.consume(clips[j]);
    mot.consume(clips[j]);
    others.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) others.push_back(i);
    const auto fused = fused_coherence(sem.probs(clips, others), mot.probs(clips, others), model.lambda);
    for (std::size_t k = 0; k < others.size(); ++k)
      out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(others[k])) = fused.values[static_cast<Eigen::Index>(k)];
  }
  return out;
}

/// n rows of n comma-separated values, round-trip precision.
inline std::string coherence_to_csv(const CoherenceMatrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.d.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.d.cols(); ++j) {
      if (j > 0) out += ',';
      out += fmt::format("{:.17g}", m.d(i, j));
    }
    out += '\n';
  }
  return out;
}

inline CoherenceMatrix coherence_from_csv(const std::string& text, const std::string& path = "<csv>") {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInput(path + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  CoherenceMatrix m{Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw InvalidInput(path + ": coherence matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) m.d(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace vstory
