#pragma once

// Story ranking by greedy maximisation of
//
//   L(A) = F(A) + gamma * U(A)
//   F(A) = (1/|A|) * sum_{i in A} sum_{j in V} d(v_i, v_j)
//   U(A) = sum_{i in A} exp(-phi_i)
//
// starting from the calmest clip and adding, at every step, the clip with the
// largest gain L(A + a) - L(A) until every clip is placed. The selection order
// is the story order.

#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "vstory/coherence.hpp"
#include "vstory/error.hpp"

namespace vstory {

/// Fully connected clip graph. affinity(i, j) is d(v_i, v_j): how well clip i
/// fits after clip j as context.
struct StoryGraph {
  Matrix affinity;
  Vector dynamics;
  double gamma = 0.3;

  std::size_t size() const { return static_cast<std::size_t>(affinity.rows()); }

  void validate() const {
    if (affinity.rows() != affinity.cols()) throw InvalidInput("story graph: affinity matrix is not square");
    if (dynamics.size() != affinity.rows())
      throw InvalidInput("story graph: " + std::to_string(dynamics.size()) + " dynamics scores for " +
                         std::to_string(affinity.rows()) + " nodes");
    if (!(gamma >= 0.0)) throw InvalidInput("story graph: gamma must be non-negative");
    if (!affinity.allFinite() || !dynamics.allFinite()) throw NumericError("story graph: non-finite weights");
  }

  /// Coherence row j is "candidates after context j", so d(v_i, v_j) = coherence(j, i).
  static StoryGraph from_coherence(const CoherenceMatrix& coherence, Vector dynamics, double gamma) {
    StoryGraph g{coherence.d.transpose(), std::move(dynamics), gamma};
    g.validate();
    return g;
  }
};

namespace detail {

inline void require_selection(std::span<const std::size_t> selected, const StoryGraph& graph, const char* who) {
  for (auto i : selected)
    if (i >= graph.size()) throw InvalidInput(std::string(who) + ": node " + std::to_string(i) + " out of range");
}

/// sum_j d(v_i, v_j) over j != i.
inline double facility_row(const StoryGraph& graph, std::size_t i) {
  const auto ii = static_cast<Eigen::Index>(i);
  return graph.affinity.row(ii).sum() - graph.affinity(ii, ii);
}

}  // namespace detail

inline double facility_location(std::span<const std::size_t> selected, const StoryGraph& graph) {
  if (selected.empty()) throw InvalidInput("facility_location: empty selection");
  detail::require_selection(selected, graph, "facility_location");
  double total = 0.0;
  for (auto i : selected) total += detail::facility_row(graph, i);
  return total / static_cast<double>(selected.size());
}

inline double activity_dynamics(std::span<const std::size_t> selected, const StoryGraph& graph) {
  detail::require_selection(selected, graph, "activity_dynamics");
  double total = 0.0;
  for (auto i : selected) total += std::exp(-graph.dynamics[static_cast<Eigen::Index>(i)]);
  return total;
}

inline double objective(std::span<const std::size_t> selected, const StoryGraph& graph) {
  return facility_location(selected, graph) + graph.gamma * activity_dynamics(selected, graph);
}

struct RankResult {
  Ordering order;
  std::vector<double> gains;                 // gain of each accepted addition (n - 1 entries)
  std::vector<double> objective_trajectory;  // L(A^0) .. L(V) (n entries)
  std::size_t gain_evaluations = 0;
};

namespace detail {

/// Running sums of the selection; both rankers evaluate gains through this.
class SelectionState {
 public:
  explicit SelectionState(const StoryGraph& graph) : graph_(&graph), row_(graph.size()), decay_(graph.size()) {
    for (std::size_t i = 0; i < graph.size(); ++i) {
      row_[i] = facility_row(graph, i);
      decay_[i] = std::exp(-graph.dynamics[static_cast<Eigen::Index>(i)]);
    }
  }

  double value() const { return selected_.empty() ? 0.0 : row_sum_ / static_cast<double>(selected_.size()) + graph_->gamma * decay_sum_; }

  double gain(std::size_t a) const {
    const auto k = static_cast<double>(selected_.size());
    return (row_sum_ + row_[a]) / (k + 1.0) - row_sum_ / k + graph_->gamma * decay_[a];
  }

  /// Candidate-dependent part of gain(a). Non-increasing in |A| when row_[a] >= 0.
  double key(std::size_t a) const {
    return row_[a] / (static_cast<double>(selected_.size()) + 1.0) + graph_->gamma * decay_[a];
  }

  void add(std::size_t a) {
    selected_.push_back(a);
    row_sum_ += row_[a];
    decay_sum_ += decay_[a];
  }

  bool keys_monotone() const {
    for (double r : row_)
      if (r < 0.0) return false;
    return true;
  }

  const Ordering& selected() const { return selected_; }

 private:
  const StoryGraph* graph_;
  std::vector<double> row_;
  std::vector<double> decay_;
  Ordering selected_;
  double row_sum_ = 0.0;
  double decay_sum_ = 0.0;
};

inline std::size_t calmest_node(const StoryGraph& graph) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < graph.dynamics.size(); ++i)
    if (graph.dynamics[i] < graph.dynamics[best]) best = i;
  return static_cast<std::size_t>(best);
}

inline RankResult start_ranking(const StoryGraph& graph, SelectionState& state) {
  graph.validate();
  if (graph.size() == 0) throw InvalidInput("rank: empty graph");
  RankResult result;
  state.add(calmest_node(graph));
  result.order.push_back(state.selected().back());
  result.objective_trajectory.push_back(state.value());
  return result;
}

inline void accept(RankResult& result, SelectionState& state, std::size_t a, double gain) {
  state.add(a);
  result.order.push_back(a);
  result.gains.push_back(gain);
  result.objective_trajectory.push_back(state.value());
}

}  // namespace detail

/// Reference greedy: evaluates every remaining clip at every step.
inline RankResult greedy_rank(const StoryGraph& graph) {
  detail::SelectionState state(graph);
  auto result = detail::start_ranking(graph, state);
  std::vector<bool> taken(graph.size(), false);
  taken[result.order.front()] = true;

  for (std::size_t step = 1; step < graph.size(); ++step) {
    std::size_t best = graph.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < graph.size(); ++a) {
      if (taken[a]) continue;
      const double g = state.gain(a);
      ++result.gain_evaluations;
      if (best == graph.size() || g > best_gain) {
        best = a;
        best_gain = g;
      }
    }
    taken[best] = true;
    detail::accept(result, state, best, best_gain);
  }
  return result;
}

/// Lazy greedy with cached upper bounds. Produces exactly the greedy_rank
/// ordering: every clip whose bound comes within a small slack of the best
/// fresh key is re-evaluated, and the winner among those is chosen with the
/// same gain function and tie-break as greedy_rank. Bounds are only sound
/// when all facility rows are non-negative; otherwise every step falls back
/// to exhaustive evaluation.
inline RankResult lazy_greedy_rank(const StoryGraph& graph) {
  detail::SelectionState state(graph);
  auto result = detail::start_ranking(graph, state);
  const bool certified = state.keys_monotone();

  struct Entry {
    double bound;
    std::size_t node;
    bool operator<(const Entry& o) const {  // max-heap on bound, then lowest index
      return bound < o.bound || (bound == o.bound && node > o.node);
    }
  };
  std::priority_queue<Entry> heap;
  for (std::size_t a = 0; a < graph.size(); ++a)
    if (a != result.order.front()) heap.push({std::numeric_limits<double>::infinity(), a});

  std::vector<std::size_t> fresh;
  std::vector<double> fresh_keys;
  while (!heap.empty()) {
    fresh.clear();
    fresh_keys.clear();
    double best_key = -std::numeric_limits<double>::infinity();
    auto within_reach = [&](double bound) {
      if (!certified || fresh.empty()) return true;
      return bound >= best_key - 1e-9 * std::max(1.0, std::abs(best_key));
    };
    while (!heap.empty() && within_reach(heap.top().bound)) {
      const auto a = heap.top().node;
      heap.pop();
      const double k = state.key(a);
      ++result.gain_evaluations;
      fresh.push_back(a);
      fresh_keys.push_back(k);
      best_key = std::max(best_key, k);
    }

    std::size_t best = fresh.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < fresh.size(); ++f) {
      const double g = state.gain(fresh[f]);
      if (best == fresh.size() || g > best_gain || (g == best_gain && fresh[f] < fresh[best])) {
        best = f;
        best_gain = g;
      }
    }
    for (std::size_t f = 0; f < fresh.size(); ++f)
      if (f != best) heap.push({fresh_keys[f], fresh[f]});
    detail::accept(result, state, fresh[best], best_gain);
  }
  return result;
}

}  // namespace vstory
