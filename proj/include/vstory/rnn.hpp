#pragma once

// Single-stream recurrent network that scores which remaining clip comes next.
//
//   h_t = relu(W_I c_t + W_H h_{t-1}),  h_0 = 0
//   y_t = relu(W_O h_t)
//   P(c | c_{1:t}) = softmax over the remaining clips of y_t . c
//
// Training maximises sum_t log P(c_{t+1} | c_{1:t}) over random windows of
// T consecutive clips, with exact backpropagation through time and
// momentum gradient ascent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vstory/error.hpp"

namespace vstory {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct RnnParams {
  Matrix w_in;   // H x D
  Matrix w_hh;   // H x H
  Matrix w_out;  // D x H

  std::size_t input_dim() const { return static_cast<std::size_t>(w_in.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w_in.rows()); }

  static RnnParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    const auto d = static_cast<Eigen::Index>(input_dim);
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    return {Matrix::Zero(h, d), Matrix::Zero(h, h), Matrix::Zero(d, h)};
  }

  /// Glorot-uniform initialisation, U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
  template <typename Rng>
  static RnnParams glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    auto p = zeros(input_dim, hidden_dim);
    auto fill = [&rng](Matrix& m) {
      const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      std::uniform_real_distribution<double> dist(-a, a);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    };
    fill(p.w_in);
    fill(p.w_hh);
    fill(p.w_out);
    return p;
  }

  /// Throws InvalidInput unless the three matrices agree on (D, H).
  void validate() const {
    const auto h = w_in.rows();
    const auto d = w_in.cols();
    if (h < 1 || d < 1) throw InvalidInput("rnn: empty parameter matrices");
    if (w_hh.rows() != h || w_hh.cols() != h || w_out.rows() != d || w_out.cols() != h)
      throw InvalidInput("rnn: inconsistent parameter shapes");
  }

  bool all_finite() const { return w_in.allFinite() && w_hh.allFinite() && w_out.allFinite(); }
};

struct RnnGradients {
  Matrix w_in;
  Matrix w_hh;
  Matrix w_out;
  double log_likelihood = 0.0;
};

struct StepOutput {
  Vector hidden;
  Vector output;
};

/// Hidden and output states of one pass, with the pre-activations kept for backprop.
struct ForwardTrace {
  std::vector<Vector> hidden_pre;
  std::vector<Vector> hidden;
  std::vector<Vector> output_pre;
  std::vector<Vector> output;

  std::size_t size() const { return hidden.size(); }
};

namespace detail {

inline Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

/// relu'(x), with the subgradient at exactly 0 taken as 0.
inline Vector relu_grad(const Vector& x) { return (x.array() > 0.0).cast<double>().matrix(); }

inline void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("rnn: non-finite ") + what);
}

}  // namespace detail

inline StepOutput forward_step(const RnnParams& params, const Vector& input, const Vector& h_prev) {
  if (static_cast<std::size_t>(input.size()) != params.input_dim())
    throw InvalidInput("forward_step: input has dimension " + std::to_string(input.size()) + ", expected " +
                       std::to_string(params.input_dim()));
  if (static_cast<std::size_t>(h_prev.size()) != params.hidden_dim())
    throw InvalidInput("forward_step: hidden state has dimension " + std::to_string(h_prev.size()) +
                       ", expected " + std::to_string(params.hidden_dim()));
  detail::check_finite(input, "input");
  detail::check_finite(h_prev, "hidden state");
  StepOutput out;
  out.hidden = detail::relu(params.w_in * input + params.w_hh * h_prev);
  out.output = detail::relu(params.w_out * out.hidden);
  detail::check_finite(out.output, "output");
  return out;
}

/// Runs the recurrence over `inputs` starting from h_0 = 0.
inline ForwardTrace forward(const RnnParams& params, std::span<const Vector> inputs) {
  ForwardTrace trace;
  Vector h = Vector::Zero(static_cast<Eigen::Index>(params.hidden_dim()));
  for (const auto& c : inputs) {
    if (static_cast<std::size_t>(c.size()) != params.input_dim())
      throw InvalidInput("forward: input has dimension " + std::to_string(c.size()) + ", expected " +
                         std::to_string(params.input_dim()));
    Vector a_h = params.w_in * c + params.w_hh * h;
    h = detail::relu(a_h);
    Vector a_y = params.w_out * h;
    Vector y = detail::relu(a_y);
    detail::check_finite(y, "output");
    trace.hidden_pre.push_back(std::move(a_h));
    trace.hidden.push_back(h);
    trace.output_pre.push_back(std::move(a_y));
    trace.output.push_back(std::move(y));
  }
  return trace;
}

/// Numerically stable softmax (max-subtracted).
inline Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw InvalidInput("softmax: empty candidate set");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logits");
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// P(c) = exp(y . c) / sum over remaining of exp(y . c').
inline Vector next_clip_probs(const Vector& y, std::span<const Vector> remaining) {
  if (remaining.empty()) throw InvalidInput("next_clip_probs: no remaining clips");
  Vector logits(static_cast<Eigen::Index>(remaining.size()));
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    if (remaining[i].size() != y.size()) throw InvalidInput("next_clip_probs: dimension mismatch");
    logits[static_cast<Eigen::Index>(i)] = y.dot(remaining[i]);
  }
  return softmax(logits);
}

namespace detail {

/// log softmax(logits)[0]; the observed next clip is always the first candidate.
inline double log_prob_first(const Vector& logits) {
  const double mx = logits.maxCoeff();
  return logits[0] - mx - std::log((logits.array() - mx).exp().sum());
}

inline void require_sequence(std::span<const Vector> sequence, const RnnParams& params, const char* who) {
  if (sequence.size() < 2) throw InvalidInput(std::string(who) + ": sequence needs at least 2 clips");
  for (const auto& c : sequence)
    if (static_cast<std::size_t>(c.size()) != params.input_dim())
      throw InvalidInput(std::string(who) + ": clip has dimension " + std::to_string(c.size()) + ", expected " +
                         std::to_string(params.input_dim()));
}

/// Logits of y_t against the candidates c_{t+1..T} (0-based step t).
inline Vector candidate_logits(const Vector& y, std::span<const Vector> sequence, std::size_t t) {
  Vector logits(static_cast<Eigen::Index>(sequence.size() - t - 1));
  for (std::size_t k = t + 1; k < sequence.size(); ++k) logits[static_cast<Eigen::Index>(k - t - 1)] = y.dot(sequence[k]);
  return logits;
}

}  // namespace detail

/// sum_{t=1}^{T-1} log P(c_{t+1} | c_{1:t}), candidates at step t being c_{t+1..T}.
inline double sequence_log_likelihood(const RnnParams& params, std::span<const Vector> sequence) {
  detail::require_sequence(sequence, params, "sequence_log_likelihood");
  const auto trace = forward(params, sequence.first(sequence.size() - 1));
  double ll = 0.0;
  for (std::size_t t = 0; t + 1 < sequence.size(); ++t)
    ll += detail::log_prob_first(detail::candidate_logits(trace.output[t], sequence, t));
  return ll;
}

/// Exact gradient of sequence_log_likelihood with respect to W_I, W_H, W_O.
inline RnnGradients bptt_gradients(const RnnParams& params, std::span<const Vector> sequence) {
  detail::require_sequence(sequence, params, "bptt_gradients");
  const std::size_t steps = sequence.size() - 1;
  const auto trace = forward(params, sequence.first(steps));

  RnnGradients g{Matrix::Zero(params.w_in.rows(), params.w_in.cols()),
                 Matrix::Zero(params.w_hh.rows(), params.w_hh.cols()),
                 Matrix::Zero(params.w_out.rows(), params.w_out.cols()), 0.0};
  Vector dh_next = Vector::Zero(static_cast<Eigen::Index>(params.hidden_dim()));

  for (std::size_t t = steps; t-- > 0;) {
    const Vector logits = detail::candidate_logits(trace.output[t], sequence, t);
    g.log_likelihood += detail::log_prob_first(logits);
    const Vector p = softmax(logits);

    // d log P / d y_t = c_{t+1} - E_p[c]
    Vector dy = sequence[t + 1];
    for (std::size_t k = t + 1; k < sequence.size(); ++k) dy -= p[static_cast<Eigen::Index>(k - t - 1)] * sequence[k];

    const Vector dz_out = dy.cwiseProduct(detail::relu_grad(trace.output_pre[t]));
    g.w_out.noalias() += dz_out * trace.hidden[t].transpose();

    const Vector dh = params.w_out.transpose() * dz_out + dh_next;
    const Vector dz_h = dh.cwiseProduct(detail::relu_grad(trace.hidden_pre[t]));
    g.w_in.noalias() += dz_h * sequence[t].transpose();
    if (t > 0) g.w_hh.noalias() += dz_h * trace.hidden[t - 1].transpose();
    dh_next = params.w_hh.transpose() * dz_h;
  }
  if (!std::isfinite(g.log_likelihood) || !g.w_in.allFinite() || !g.w_hh.allFinite() || !g.w_out.allFinite())
    throw NumericError("bptt_gradients: non-finite gradient");
  return g;
}

struct TrainConfig {
  std::size_t seq_len = 10;
  std::size_t hidden_dim = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-7;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  double lr_decay_factor = 0.5;
  std::size_t patience = 5;
  double min_learning_rate = 1e-6;
  double clip_norm = 5.0;  // rescale gradients whose global L2 norm exceeds this; 0 disables

  void validate() const {
    if (seq_len < 2) throw InvalidInput("train: seq_len must be >= 2");
    if (hidden_dim < 1) throw InvalidInput("train: hidden_dim must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidInput("train: learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidInput("train: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw InvalidInput("train: weight_decay must be non-negative");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) throw InvalidInput("train: lr_decay_factor must be in (0, 1)");
    if (clip_norm < 0.0) throw InvalidInput("train: clip_norm must be non-negative");
  }
};

/// Momentum gradient *ascent* with L2 weight decay:
///   v <- momentum * v + grad - weight_decay * w;  w <- w + lr * v
inline void sgd_momentum_step(Matrix& weight, Matrix& velocity, const Matrix& grad, double learning_rate,
                              double momentum, double weight_decay) {
  if (weight.rows() != grad.rows() || weight.cols() != grad.cols() || velocity.rows() != grad.rows() ||
      velocity.cols() != grad.cols())
    throw InvalidInput("sgd_momentum_step: shape mismatch");
  velocity = momentum * velocity + grad - weight_decay * weight;
  weight += learning_rate * velocity;
}

/// Optimiser state for all three weight matrices.
class MomentumAscent {
 public:
  explicit MomentumAscent(const RnnParams& like)
      : velocity_(RnnParams::zeros(like.input_dim(), like.hidden_dim())) {}

  void step(RnnParams& params, const RnnGradients& grads, double learning_rate, double momentum,
            double weight_decay) {
    sgd_momentum_step(params.w_in, velocity_.w_in, grads.w_in, learning_rate, momentum, weight_decay);
    sgd_momentum_step(params.w_hh, velocity_.w_hh, grads.w_hh, learning_rate, momentum, weight_decay);
    sgd_momentum_step(params.w_out, velocity_.w_out, grads.w_out, learning_rate, momentum, weight_decay);
  }

  const RnnParams& velocity() const { return velocity_; }

 private:
  RnnParams velocity_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_log_likelihood = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  RnnParams params;
  std::vector<EpochLog> log;
  std::vector<std::size_t> skipped_videos;  // shorter than seq_len
};

/// One training video is an ordered list of clip feature vectors.
using Video = std::vector<Vector>;

/// Trains one stream. Each epoch visits the videos in a seeded shuffled order
/// and takes one momentum step on a random window of seq_len consecutive clips
/// per video. The learning rate is multiplied by lr_decay_factor after
/// `patience` epochs without a new best mean log-likelihood; training stops at
/// the epoch budget or once the rate drops below min_learning_rate. Gradients
/// are rescaled to clip_norm when their global norm exceeds it: unclipped
/// relu recurrences at lr 0.05 / momentum 0.9 blow up within a few epochs.
inline TrainResult train(std::span<const Video> corpus, const TrainConfig& config) {
  config.validate();
  TrainResult result;
  std::vector<std::size_t> usable;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].size() < config.seq_len) {
      result.skipped_videos.push_back(i);
      continue;
    }
    for (const auto& c : corpus[i]) {
      if (dim == 0) dim = static_cast<std::size_t>(c.size());
      if (static_cast<std::size_t>(c.size()) != dim || dim == 0)
        throw InvalidInput("train: video " + std::to_string(i) + " has a clip of dimension " +
                           std::to_string(c.size()) + ", expected " + std::to_string(dim));
    }
    usable.push_back(i);
  }
  if (usable.empty())
    throw InvalidInput("train: no training video has at least seq_len=" + std::to_string(config.seq_len) + " clips");

  std::mt19937_64 rng(config.seed);
  result.params = RnnParams::glorot(dim, config.hidden_dim, rng);
  MomentumAscent optimiser(result.params);

  double lr = config.learning_rate;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<std::size_t> order = usable;

  for (std::size_t epoch = 0; epoch < config.epochs && lr >= config.min_learning_rate; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (const auto v : order) {
      const auto& video = corpus[v];
      std::uniform_int_distribution<std::size_t> start_dist(0, video.size() - config.seq_len);
      const std::size_t start = start_dist(rng);
      const auto window = std::span<const Vector>(video).subspan(start, config.seq_len);
      auto grads = bptt_gradients(result.params, window);
      if (config.clip_norm > 0.0) {
        const double norm = std::sqrt(grads.w_in.squaredNorm() + grads.w_hh.squaredNorm() + grads.w_out.squaredNorm());
        if (norm > config.clip_norm) {
          const double s = config.clip_norm / norm;
          grads.w_in *= s;
          grads.w_hh *= s;
          grads.w_out *= s;
        }
      }
      total += grads.log_likelihood;
      optimiser.step(result.params, grads, lr, config.momentum, config.weight_decay);
    }
    if (!result.params.all_finite()) throw NumericError("train: parameters diverged at epoch " + std::to_string(epoch));

    const double mean = total / static_cast<double>(order.size());
    result.log.push_back({epoch, mean, lr});
    if (mean > best) {
      best = mean;
      stale = 0;
    } else if (++stale >= config.patience) {
      lr *= config.lr_decay_factor;
      stale = 0;
    }
  }
  return result;
}

/// Fraction of prediction steps whose argmax over the remaining window clips
/// is the true next clip.
inline double top1_next_accuracy(const RnnParams& params, std::span<const Video> sequences) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    const auto trace = forward(params, std::span<const Vector>(seq).first(seq.size() - 1));
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      const Vector logits = detail::candidate_logits(trace.output[t], seq, t);
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[best]) best = k;
      hits += best == 0 ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace vstory
