#pragma once

// End-to-end workflows behind the `vstory` command line: feature extraction,
// per-stream training, composition, ranking and evaluation. Every artifact
// embeds the resolved configuration and digests of its inputs, and is written
// through a temp file so failures leave nothing behind.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vstory/binary_io.hpp"
#include "vstory/checkpoint.hpp"
#include "vstory/coherence.hpp"
#include "vstory/digest.hpp"
#include "vstory/error.hpp"
#include "vstory/eval.hpp"
#include "vstory/feature_store.hpp"
#include "vstory/features.hpp"
#include "vstory/ranker.hpp"
#include "vstory/rnn.hpp"

namespace vstory {

struct PipelineConfig {
  std::size_t bins = 10;
  std::size_t pyramid = 3;
  std::size_t seq_len = 10;
  std::size_t hidden = 100;
  double lambda = 0.5;
  double gamma = 0.3;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-7;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  double lr_decay_factor = 0.5;
  std::size_t patience = 5;
  double clip_norm = 5.0;

  TrainConfig train_config() const {
    TrainConfig t;
    t.seq_len = seq_len;
    t.hidden_dim = hidden;
    t.learning_rate = lr;
    t.momentum = momentum;
    t.weight_decay = weight_decay;
    t.epochs = epochs;
    t.seed = seed;
    t.lr_decay_factor = lr_decay_factor;
    t.patience = patience;
    t.clip_norm = clip_norm;
    return t;
  }
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"bins", c.bins},         {"pyramid", c.pyramid},
                     {"seq_len", c.seq_len},   {"hidden", c.hidden},
                     {"lambda", c.lambda},     {"gamma", c.gamma},
                     {"lr", c.lr},             {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
                     {"seed", c.seed},         {"lr_decay_factor", c.lr_decay_factor},
                     {"patience", c.patience},      {"clip_norm", c.clip_norm}};
}

enum class StreamKind { semantic, motion };

inline std::string to_string(StreamKind s) { return s == StreamKind::semantic ? "semantic" : "motion"; }

inline StreamKind parse_stream(const std::string& s) {
  if (s == "semantic") return StreamKind::semantic;
  if (s == "motion") return StreamKind::motion;
  throw InvalidInput("unknown stream '" + s + "' (expected semantic or motion)");
}

enum class ComposeMode { baseline, ranked };

inline ComposeMode parse_mode(const std::string& s) {
  if (s == "baseline") return ComposeMode::baseline;
  if (s == "ranked") return ComposeMode::ranked;
  throw InvalidInput("unknown mode '" + s + "' (expected baseline or ranked)");
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(io::read_file(path)); }

/// Reads every clip of the manifest into a feature store held in memory.
inline FeatureStore extract_features(const std::filesystem::path& manifest_path, const PipelineConfig& config) {
  const auto manifest_bytes = io::read_file(manifest_path);
  const auto manifest = parse_manifest(std::string(manifest_bytes.begin(), manifest_bytes.end()),
                                       manifest_path.parent_path(), manifest_path.string());
  // keyed relative to the manifest so a relocated corpus yields the same store
  const auto key = [base = manifest_path.parent_path()](const std::filesystem::path& p) {
    return p.lexically_relative(base).generic_string();
  };
  FeatureStore store;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& mc : manifest.clips) {
    ClipFeatures clip;
    clip.clip_id = mc.id;
    const auto sem_bytes = io::read_file(mc.semantic);
    files[key(mc.semantic)] = sha256_hex(sem_bytes);
    clip.semantic = parse_semantic(sem_bytes, manifest.semantic_dim, mc.semantic.string());

    std::vector<FlowField> frames;
    for (const auto& fp : mc.flows) {
      const auto bytes = io::read_file(fp);
      files[key(fp)] = sha256_hex(bytes);
      frames.push_back(parse_flo(bytes, fp.string()));
      if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height())
        throw InvalidInput(fp.string() + ": frame is " + std::to_string(frames.back().width()) + "x" +
                           std::to_string(frames.back().height()) + " but clip '" + mc.id + "' started at " +
                           std::to_string(frames.front().width()) + "x" + std::to_string(frames.front().height()));
    }
    try {
      clip.motion = clip_motion_feature(frames, config.bins, config.pyramid);
    } catch (const InvalidInput& e) {
      throw InvalidInput(mc.flows.front().string() + ": clip '" + mc.id + "': " + e.what());
    }
    clip.dynamics = dynamics_score(frames);
    store.clips.push_back(std::move(clip));
  }
  store.provenance = {{"config", config},
                      {"inputs", {{"manifest", sha256_hex(manifest_bytes)}, {"files", files}}}};
  return store;
}

inline FeatureStore cmd_features(const std::filesystem::path& manifest_path, const std::filesystem::path& out_path,
                                 const PipelineConfig& config) {
  auto store = extract_features(manifest_path, config);
  save_feature_store(out_path, store);
  return store;
}

struct TrainOutcome {
  TrainResult result;
  Checkpoint checkpoint;
};

inline std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,mean_log_likelihood,learning_rate\n";
  for (const auto& e : log) out += fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.mean_log_likelihood, e.learning_rate);
  return out;
}

/// Trains one stream; each store is one training video with clips in temporal order.
inline TrainOutcome cmd_train(const std::vector<std::filesystem::path>& stores, StreamKind stream,
                              const PipelineConfig& config, const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& log_path = {}) {
  if (stores.empty()) throw InvalidInput("train: no feature stores given");
  std::vector<Video> corpus;
  nlohmann::json digests = nlohmann::json::array();
  for (const auto& p : stores) {
    const auto bytes = io::read_file(p);
    digests.push_back(sha256_hex(bytes));
    const auto store = decode_feature_store(bytes, p.string());
    Video v;
    for (const auto& c : store.clips) v.push_back(stream == StreamKind::semantic ? c.semantic : c.motion);
    corpus.push_back(std::move(v));
  }
  TrainOutcome out;
  out.result = train(corpus, config.train_config());
  for (const auto& e : out.result.log)
    if (!std::isfinite(e.mean_log_likelihood))
      throw NumericError("train: log-likelihood became non-finite at epoch " + std::to_string(e.epoch));
  out.checkpoint.params = out.result.params;
  out.checkpoint.config = config.train_config();
  out.checkpoint.provenance = {{"stream", to_string(stream)}, {"config", config}, {"inputs", digests}};
  if (!log_path.empty()) io::write_file_atomic(log_path, train_log_csv(out.result.log));
  save_checkpoint(checkpoint_path, out.checkpoint);
  return out;
}

struct ComposeOutput {
  nlohmann::json artifact;
  Ordering order;
  Ordering rnn_order;
  std::optional<CoherenceMatrix> coherence;
  std::optional<RankResult> ranking;
};

inline std::string dynamics_csv(const DynamicsReport& report, const std::vector<std::string>& ids) {
  std::string out = "position,clip_id,phi\n";
  for (const auto& p : report.points) out += fmt::format("{},{},{:.17g}\n", p.position, ids[p.clip], p.phi);
  return out;
}

/// Composes a story from a feature store and two trained streams.
/// baseline: two-stream RNN order. ranked: RNN order rearranged by the story ranker.
inline ComposeOutput compose(const FeatureStore& store, const RnnParams& semantic, const RnnParams& motion,
                             const PipelineConfig& config, ComposeMode mode) {
  if (store.clips.empty()) throw InvalidInput("compose: feature store has no clips");
  auto check = [&](const RnnParams& p, const char* name, Eigen::Index dim) {
    if (static_cast<Eigen::Index>(p.input_dim()) != dim)
      throw InvalidInput(fmt::format("compose: {} checkpoint has input dimension {} but the store's {} features have dimension {}",
                                     name, p.input_dim(), name, dim));
  };
  check(semantic, "semantic", store.clips.front().semantic.size());
  check(motion, "motion", store.clips.front().motion.size());

  const TwoStreamModel model{semantic, motion, config.lambda};
  std::vector<std::string> ids;
  for (const auto& c : store.clips) ids.push_back(c.clip_id);
  const auto phi = store.dynamics();

  ComposeOutput out;
  out.rnn_order = greedy_compose(model, store.clips);
  out.order = out.rnn_order;
  if (mode == ComposeMode::ranked) {
    out.coherence = coherence_matrix(model, store.clips, out.rnn_order);
    const auto graph = StoryGraph::from_coherence(*out.coherence, Eigen::Map<const Vector>(phi.data(), static_cast<Eigen::Index>(phi.size())), config.gamma);
    out.ranking = lazy_greedy_rank(graph);
    out.order = out.ranking->order;
  }

  const auto report = dynamics_report(out.order, phi);
  auto names = [&ids](const Ordering& o) {
    std::vector<std::string> r;
    for (auto i : o) r.push_back(ids[i]);
    return r;
  };
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : report.points) curve.push_back({{"position", p.position}, {"clip_id", ids[p.clip]}, {"phi", p.phi}});

  auto& a = out.artifact;
  a["order"] = names(out.order);
  a["source"] = mode == ComposeMode::baseline ? "rnn-baseline" : "story-ranker";
  a["clip_ids"] = ids;
  a["gamma"] = config.gamma;
  a["gains"] = out.ranking ? out.ranking->gains : std::vector<double>{};
  a["objective_trajectory"] = out.ranking ? out.ranking->objective_trajectory : std::vector<double>{};
  if (mode == ComposeMode::ranked) a["rnn_order"] = names(out.rnn_order);
  a["dynamics_curve"] = curve;
  a["dynamics_spearman"] = report.spearman;
  a["config"] = config;
  return out;
}

struct ComposePaths {
  std::filesystem::path out;
  std::filesystem::path coherence_csv;  // optional
  std::filesystem::path dynamics_csv;   // optional
};

inline ComposeOutput cmd_compose(const std::filesystem::path& store_path, const std::filesystem::path& semantic_ckpt,
                                 const std::filesystem::path& motion_ckpt, const PipelineConfig& config,
                                 ComposeMode mode, const ComposePaths& paths) {
  const auto store_bytes = io::read_file(store_path);
  const auto store = decode_feature_store(store_bytes, store_path.string());
  const auto sem_bytes = io::read_file(semantic_ckpt);
  const auto mot_bytes = io::read_file(motion_ckpt);
  const auto sem = decode_checkpoint(sem_bytes, semantic_ckpt.string());
  const auto mot = decode_checkpoint(mot_bytes, motion_ckpt.string());

  auto out = compose(store, sem.params, mot.params, config, mode);
  out.artifact["inputs"] = {{"feature_store", sha256_hex(store_bytes)},
                            {"semantic_checkpoint", sha256_hex(sem_bytes)},
                            {"motion_checkpoint", sha256_hex(mot_bytes)}};

  if (!paths.coherence_csv.empty() && out.coherence) io::write_file_atomic(paths.coherence_csv, coherence_to_csv(*out.coherence));
  if (!paths.dynamics_csv.empty()) {
    std::vector<std::string> ids;
    for (const auto& c : store.clips) ids.push_back(c.clip_id);
    io::write_file_atomic(paths.dynamics_csv, dynamics_csv(dynamics_report(out.order, store.dynamics()), ids));
  }
  io::write_file_atomic(paths.out, out.artifact.dump(2) + "\n");
  return out;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": malformed JSON: " + e.what());
  }
}

inline AdjacencyLabels parse_labels(const nlohmann::json& j, const std::string& path) {
  AdjacencyLabels labels;
  try {
    for (const auto& p : j.at("pairs")) {
      ClipPair pair(p.at("a").get<std::string>(), p.at("b").get<std::string>());
      if (pair.a == pair.b) throw InvalidInput(path + ": self-pair '" + pair.a + "'");
      labels[pair] = p.at("coherent").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": malformed labels: " + e.what());
  }
  return labels;
}

inline PairwisePreferences parse_preferences(const nlohmann::json& j, const std::string& path) {
  PairwisePreferences prefs;
  try {
    prefs.items = j.at("items").get<std::vector<std::string>>();
    prefs.wins = j.at("wins").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": malformed preferences: " + e.what());
  }
  prefs.validate();
  return prefs;
}

inline nlohmann::json bt_json(const PairwisePreferences& prefs, const BTScores& bt) {
  nlohmann::json scores = nlohmann::json::array();
  for (std::size_t i = 0; i < prefs.items.size(); ++i) scores.push_back({{"item", prefs.items[i]}, {"score", bt.scores[i]}});
  return {{"scores", scores}, {"iterations", bt.iterations}, {"converged", bt.converged}, {"smoothed", bt.smoothed}};
}

inline std::string bt_csv(const PairwisePreferences& prefs, const BTScores& bt) {
  std::string out = "item,score\n";
  for (std::size_t i = 0; i < prefs.items.size(); ++i) out += fmt::format("{},{:.17g}\n", prefs.items[i], bt.scores[i]);
  return out;
}

/// Fits Bradley-Terry scores and writes `<out_dir>/bt.json` and `bt.csv`.
inline BTScores cmd_bt_rank(const std::filesystem::path& prefs_path, const std::filesystem::path& out_dir) {
  const auto prefs = parse_preferences(read_json(prefs_path), prefs_path.string());
  const auto bt = bradley_terry(prefs);
  std::filesystem::create_directories(out_dir);
  auto j = bt_json(prefs, bt);
  j["inputs"] = {{"preferences", file_digest(prefs_path)}};
  io::write_file_atomic(out_dir / "bt.csv", bt_csv(prefs, bt));
  io::write_file_atomic(out_dir / "bt.json", j.dump(2) + "\n");
  return bt;
}

struct EvalInputs {
  std::filesystem::path ordering;       // compose artifact
  std::filesystem::path coherence_csv;  // needed with labels
  std::filesystem::path labels;         // optional
  std::filesystem::path preferences;    // optional
};

/// Writes report.json and dynamics.csv, plus roc.csv with labels and bt.csv
/// with preferences, into `out_dir`. Returns the report JSON.
inline nlohmann::json cmd_eval(const EvalInputs& in, const std::filesystem::path& out_dir) {
  const auto artifact = read_json(in.ordering);
  std::vector<std::string> ids;
  std::vector<std::string> order_ids;
  std::vector<double> phi_in_order;
  try {
    ids = artifact.at("clip_ids").get<std::vector<std::string>>();
    order_ids = artifact.at("order").get<std::vector<std::string>>();
    for (const auto& p : artifact.at("dynamics_curve")) phi_in_order.push_back(p.at("phi").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(in.ordering.string() + ": malformed ordering artifact: " + e.what());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  Ordering order;
  std::vector<double> phi(ids.size(), 0.0);
  if (order_ids.size() != ids.size() || phi_in_order.size() != ids.size())
    throw InvalidInput(in.ordering.string() + ": order, clip_ids and dynamics_curve lengths differ");
  for (std::size_t p = 0; p < order_ids.size(); ++p) {
    const auto it = index.find(order_ids[p]);
    if (it == index.end()) throw InvalidInput(in.ordering.string() + ": unknown clip id '" + order_ids[p] + "'");
    order.push_back(it->second);
    phi[it->second] = phi_in_order[p];
  }

  nlohmann::json report;
  report["inputs"] = {{"ordering", file_digest(in.ordering)}};
  const auto dyn = dynamics_report(order, phi);
  report["dynamics"] = {{"spearman", dyn.spearman}, {"rows", dyn.points.size()}};

  std::vector<std::pair<std::filesystem::path, std::string>> outputs;
  outputs.emplace_back(out_dir / "dynamics.csv", dynamics_csv(dyn, ids));

  if (!in.labels.empty()) {
    if (in.coherence_csv.empty()) throw InvalidInput("eval: labels need the coherence matrix (--coherence)");
    const auto labels = parse_labels(read_json(in.labels), in.labels.string());
    const auto csv = io::read_file(in.coherence_csv);
    const auto coherence = coherence_from_csv(std::string(csv.begin(), csv.end()), in.coherence_csv.string());
    if (coherence.size() != ids.size())
      throw InvalidInput(in.coherence_csv.string() + ": coherence matrix is " + std::to_string(coherence.size()) +
                         "x" + std::to_string(coherence.size()) + " but the composition has " + std::to_string(ids.size()) + " clips");
    PairScores scores;
    std::vector<std::string> uncovered;
    for (const auto& [pair, coherent] : labels) {
      const auto ia = index.find(pair.a);
      const auto ib = index.find(pair.b);
      if (ia == index.end() || ib == index.end()) {
        uncovered.push_back(pair.a + "/" + pair.b);
        continue;
      }
      scores[pair] = adjacency_score(coherence, ia->second, ib->second);
    }
    if (!uncovered.empty()) {
      std::string msg = "eval: labelled pairs not covered by the composition:";
      for (const auto& u : uncovered) msg += " " + u;
      throw InvalidInput(msg);
    }
    const auto roc = pairwise_roc(scores, labels);
    std::string roc_text = "fpr,tpr\n";
    for (const auto& [x, y] : roc.points) roc_text += fmt::format("{:.17g},{:.17g}\n", x, y);
    outputs.emplace_back(out_dir / "roc.csv", roc_text);
    report["roc"] = {{"auc", roc.auc}, {"points", roc.points.size()}, {"pairs", labels.size()}};
    report["inputs"]["labels"] = file_digest(in.labels);
    report["inputs"]["coherence"] = sha256_hex(csv);
  }

  if (!in.preferences.empty()) {
    const auto prefs = parse_preferences(read_json(in.preferences), in.preferences.string());
    const auto bt = bradley_terry(prefs);
    outputs.emplace_back(out_dir / "bt.csv", bt_csv(prefs, bt));
    report["bradley_terry"] = bt_json(prefs, bt);
    report["inputs"]["preferences"] = file_digest(in.preferences);
  }
  if (artifact.contains("config")) report["config"] = artifact["config"];

  std::filesystem::create_directories(out_dir);
  for (const auto& [path, text] : outputs) io::write_file_atomic(path, text);
  io::write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace vstory
