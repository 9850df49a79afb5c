#pragma once

// Composition quality measures: pairwise-coherence ROC/AUC, Bradley-Terry
// global scores from pairwise preferences, and dynamics trajectories.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vstory/coherence.hpp"
#include "vstory/error.hpp"

namespace vstory {

/// Unordered clip pair; constructor puts the ids in canonical order.
struct ClipPair {
  std::string a;
  std::string b;

  ClipPair(std::string x, std::string y) : a(std::move(x)), b(std::move(y)) {
    if (b < a) std::swap(a, b);
  }

  auto operator<=>(const ClipPair&) const = default;
};

using AdjacencyLabels = std::map<ClipPair, bool>;
using PairScores = std::map<ClipPair, double>;

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
  double auc = 0.0;
};

struct LabeledScore {
  double score;
  bool positive;
};

namespace detail {

inline double trapezoid(const std::vector<std::pair<double, double>>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  return area;
}

}  // namespace detail

/// ROC by sweeping a threshold between distinct score values; tied scores
/// enter the curve together, so a fully tied set gives the chance diagonal.
inline RocCurve roc_curve(std::vector<LabeledScore> samples) {
  const auto positives = static_cast<double>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.positive; }));
  const auto negatives = static_cast<double>(samples.size()) - positives;
  if (positives == 0 || negatives == 0) throw IllPosed("roc: labels contain a single class, AUC is undefined");

  std::sort(samples.begin(), samples.end(), [](const auto& x, const auto& y) { return x.score > y.score; });
  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i;
    for (; j < samples.size() && samples[j].score == samples[i].score; ++j) (samples[j].positive ? tp : fp) += 1.0;
    curve.points.emplace_back(fp / negatives, tp / positives);
    i = j;
  }
  curve.auc = detail::trapezoid(curve.points);
  return curve;
}

/// ROC over labelled clip pairs; every labelled pair must have a score.
inline RocCurve pairwise_roc(const PairScores& scores, const AdjacencyLabels& labels) {
  std::vector<LabeledScore> samples;
  std::vector<std::string> missing;
  for (const auto& [pair, coherent] : labels) {
    if (pair.a == pair.b) throw InvalidInput("pairwise_roc: self-pair '" + pair.a + "'");
    const auto it = scores.find(pair);
    if (it == scores.end()) {
      missing.push_back(pair.a + "/" + pair.b);
      continue;
    }
    samples.push_back({it->second, coherent});
  }
  if (!missing.empty()) {
    std::string msg = "pairwise_roc: no score for labelled pairs:";
    for (const auto& m : missing) msg += " " + m;
    throw InvalidInput(msg);
  }
  return roc_curve(std::move(samples));
}

/// Score of an unordered pair placed adjacently: the larger of the two
/// directed coherence values.
inline double adjacency_score(const CoherenceMatrix& coherence, std::size_t i, std::size_t j) {
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  return std::max(coherence.d(a, b), coherence.d(b, a));
}

/// Macro average of per-set curves: TPR linearly interpolated on a uniform
/// FPR grid and averaged; auc is the mean of the per-set AUCs.
inline RocCurve average_roc(std::span<const RocCurve> curves, std::size_t grid = 101) {
  if (curves.empty()) throw InvalidInput("average_roc: no curves");
  if (grid < 2) throw InvalidInput("average_roc: grid needs at least 2 points");
  RocCurve out;
  for (std::size_t g = 0; g < grid; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(grid - 1);
    double tpr = 0.0;
    for (const auto& c : curves) {
      // last point with fpr <= x, then interpolate towards the next one
      std::size_t k = 0;
      while (k + 1 < c.points.size() && c.points[k + 1].first <= x) ++k;
      double y = c.points[k].second;
      if (k + 1 < c.points.size() && c.points[k + 1].first > c.points[k].first) {
        const auto& [x0, y0] = c.points[k];
        const auto& [x1, y1] = c.points[k + 1];
        y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
      }
      tpr += y;
    }
    out.points.emplace_back(x, tpr / static_cast<double>(curves.size()));
  }
  double auc = 0.0;
  for (const auto& c : curves) auc += c.auc;
  out.auc = auc / static_cast<double>(curves.size());
  return out;
}

struct PairwisePreferences {
  std::vector<std::string> items;
  std::vector<std::vector<double>> wins;  // wins[a][b]: times a was preferred over b

  void validate() const {
    if (items.empty()) throw InvalidInput("preferences: no items");
    if (wins.size() != items.size()) throw InvalidInput("preferences: wins matrix has wrong row count");
    for (std::size_t a = 0; a < wins.size(); ++a) {
      if (wins[a].size() != items.size()) throw InvalidInput("preferences: wins matrix is not square");
      for (std::size_t b = 0; b < wins.size(); ++b) {
        if (!(wins[a][b] >= 0.0)) throw InvalidInput("preferences: negative win count");
        if (a == b && wins[a][b] != 0.0) throw InvalidInput("preferences: diagonal must be 0");
      }
    }
  }
};

struct BTScores {
  std::vector<double> scores;  // sum to 1
  std::size_t iterations = 0;
  bool converged = false;
  bool smoothed = false;  // 0.01 added to every compared pair because some item never won
};

/// Bradley-Terry maximum likelihood, P(a beats b) = s_a / (s_a + s_b), fit by
/// the minorisation-maximisation update
///   s_a <- W_a / sum_b n_ab / (s_a + s_b)
/// with renormalisation each sweep.
inline BTScores bradley_terry(const PairwisePreferences& prefs, std::size_t max_iterations = 10000, double tol = 1e-8) {
  prefs.validate();
  const std::size_t n = prefs.items.size();
  auto wins = prefs.wins;

  // comparison graph must be connected
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const auto a = stack.back();
    stack.pop_back();
    for (std::size_t b = 0; b < n; ++b)
      if (!seen[b] && wins[a][b] + wins[b][a] > 0.0) {
        seen[b] = true;
        stack.push_back(b);
      }
  }
  for (std::size_t a = 0; a < n; ++a)
    if (!seen[a]) throw IllPosed("bradley_terry: comparison graph is disconnected ('" + prefs.items[a] + "' unreachable)");

  BTScores out;
  for (std::size_t a = 0; a < n; ++a) {
    if (n > 1 && std::accumulate(wins[a].begin(), wins[a].end(), 0.0) == 0.0) out.smoothed = true;
  }
  if (out.smoothed) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a != b && prefs.wins[a][b] + prefs.wins[b][a] > 0.0) wins[a][b] += 0.01;
  }

  std::vector<double> s(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (out.iterations = 0; out.iterations < max_iterations && n > 1;) {
    ++out.iterations;
    for (std::size_t a = 0; a < n; ++a) {
      double won = 0.0;
      double denom = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        won += wins[a][b];
        const double games = wins[a][b] + wins[b][a];
        if (games > 0.0) denom += games / (s[a] + s[b]);
      }
      next[a] = won / denom;
    }
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    double change = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      next[a] /= total;
      change = std::max(change, std::abs(next[a] - s[a]) / s[a]);
    }
    s.swap(next);
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  if (n == 1) out.converged = true;
  out.scores = std::move(s);
  return out;
}

struct DynamicsPoint {
  std::size_t position;  // 1-based place in the story
  std::size_t clip;
  double phi;
};

struct DynamicsReport {
  std::vector<DynamicsPoint> points;
  double spearman = 0.0;  // rank correlation between position and phi
};

namespace detail {

/// Average (fractional) ranks, ties sharing the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && x[idx[j]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0;
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = avg;
    i = j;
  }
  return r;
}

}  // namespace detail

/// Spearman rank correlation; 0 when either side is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = detail::average_ranks(x);
  const auto ry = detail::average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline DynamicsReport dynamics_report(const Ordering& ordering, std::span<const double> phi) {
  detail::require_permutation(ordering, phi.size());
  DynamicsReport report;
  std::vector<double> pos;
  std::vector<double> vals;
  for (std::size_t p = 0; p < ordering.size(); ++p) {
    report.points.push_back({p + 1, ordering[p], phi[ordering[p]]});
    pos.push_back(static_cast<double>(p));
    vals.push_back(phi[ordering[p]]);
  }
  report.spearman = spearman(pos, vals);
  return report;
}

inline DynamicsReport dynamics_report(const Ordering& ordering, std::span<const ClipFeatures> clips) {
  std::vector<double> phi;
  for (const auto& c : clips) phi.push_back(c.dynamics);
  return dynamics_report(ordering, phi);
}

}  // namespace vstory
