#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vstory/vstory.hpp"

using namespace vstory;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "vstory_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> bytes_of(const fs::path& p) { return io::read_file(p); }

PipelineConfig small_config() {
  PipelineConfig c;
  c.hidden = 6;
  c.seq_len = 4;
  c.epochs = 4;
  c.seed = 3;
  return c;
}

/// Feature store for a small synthetic set of `clips` clips.
fs::path make_store(const fs::path& dir, std::size_t clips, std::size_t semantic_dim, const PipelineConfig& cfg,
                    std::uint64_t seed = 1, const std::string& prefix = "clip") {
  const auto manifest = write_synthetic_manifest(dir / "raw", clips, 2, 8, 6, semantic_dim, seed, prefix);
  const auto out = dir / "features.vsfs";
  cmd_features(manifest, out, cfg);
  return out;
}

struct Trained {
  fs::path store, semantic, motion;
};

Trained make_trained(const fs::path& dir, std::size_t clips, const PipelineConfig& cfg) {
  // training video long enough for seq_len; the story set may be shorter
  const auto video = make_store(dir / "train", 8, 5, cfg, 11, "train");
  Trained t{make_store(dir, clips, 5, cfg), dir / "semantic.ckpt", dir / "motion.ckpt"};
  cmd_train({video}, StreamKind::semantic, cfg, t.semantic);
  cmd_train({video}, StreamKind::motion, cfg, t.motion);
  return t;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Features, ExtractsEveryClipWithDefaultMotionDimension) {
  const auto dir = scratch("features");
  const auto store = load_feature_store(make_store(dir, 3, 7, PipelineConfig{}));
  ASSERT_EQ(store.clips.size(), 3u);
  for (const auto& c : store.clips) {
    EXPECT_EQ(c.semantic.size(), 7);
    EXPECT_EQ(c.motion.size(), 100);
    EXPECT_GT(c.dynamics, 0.0);
  }
  EXPECT_EQ(store.clips[0].clip_id, "clip00");
  EXPECT_LT(store.clips[0].dynamics, store.clips[2].dynamics);
  EXPECT_TRUE(store.provenance.contains("config"));
}

TEST(Features, RerunIsByteIdentical) {
  const auto dir = scratch("features_rerun");
  const auto manifest = write_synthetic_manifest(dir / "raw", 3, 2, 8, 6, 4, 9);
  cmd_features(manifest, dir / "a.vsfs", PipelineConfig{});
  cmd_features(manifest, dir / "b.vsfs", PipelineConfig{});
  EXPECT_EQ(bytes_of(dir / "a.vsfs"), bytes_of(dir / "b.vsfs"));
}

TEST(Features, MissingFlowNamesPathAndWritesNothing) {
  const auto dir = scratch("features_missing");
  const auto manifest = write_synthetic_manifest(dir / "raw", 2, 2, 8, 6, 4, 9);
  fs::remove(dir / "raw" / "clip01_01.flo");
  try {
    cmd_features(manifest, dir / "out.vsfs", PipelineConfig{});
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("clip01_01.flo"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "out.vsfs"));
}

TEST(Train, DeterministicCheckpointAndLog) {
  const auto dir = scratch("train");
  const auto cfg = small_config();
  const auto store = make_store(dir, 6, 5, cfg);
  const auto a = cmd_train({store}, StreamKind::motion, cfg, dir / "a.ckpt", dir / "a.csv");
  cmd_train({store}, StreamKind::motion, cfg, dir / "b.ckpt", dir / "b.csv");
  EXPECT_EQ(bytes_of(dir / "a.ckpt"), bytes_of(dir / "b.ckpt"));
  EXPECT_EQ(bytes_of(dir / "a.csv"), bytes_of(dir / "b.csv"));
  const auto log = bytes_of(dir / "a.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(log.begin(), log.end(), '\n')), a.result.log.size() + 1);
  const auto ck = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(ck.params.input_dim(), 100u);
  EXPECT_EQ(ck.params.hidden_dim(), 6u);
  EXPECT_EQ(ck.provenance.at("stream"), "motion");
}

TEST(Train, DefaultShapesForWideSemanticFeatures) {
  const auto dir = scratch("train_wide");
  PipelineConfig cfg;
  cfg.epochs = 1;
  const auto store = make_store(dir, 10, 4096, cfg);
  cmd_train({store}, StreamKind::semantic, cfg, dir / "s.ckpt");
  cmd_train({store}, StreamKind::motion, cfg, dir / "m.ckpt");
  const auto s = load_checkpoint(dir / "s.ckpt");
  const auto m = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(s.params.input_dim(), 4096u);
  EXPECT_EQ(s.params.hidden_dim(), 100u);
  EXPECT_EQ(s.params.w_out.rows(), 4096);
  EXPECT_EQ(m.params.input_dim(), 100u);
}

TEST(Train, RejectsEmptyCorpusAndBadStore) {
  const auto dir = scratch("train_bad");
  EXPECT_THROW(cmd_train({}, StreamKind::motion, small_config(), dir / "x.ckpt"), InvalidInput);
  write_text(dir / "junk.vsfs", "nope");
  EXPECT_THROW(cmd_train({dir / "junk.vsfs"}, StreamKind::motion, small_config(), dir / "x.ckpt"), InvalidInput);
  EXPECT_FALSE(fs::exists(dir / "x.ckpt"));
}

TEST(Compose, RankedStartsCalmAndTrajectoryMatchesCoherence) {
  const auto dir = scratch("compose");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 7, cfg);
  const ComposePaths paths{dir / "story.json", dir / "coherence.csv", dir / "dynamics.csv"};
  const auto out = cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::ranked, paths);
  const auto store = load_feature_store(t.store);
  const auto phi = store.dynamics();
  EXPECT_EQ(out.order.front(), static_cast<std::size_t>(std::min_element(phi.begin(), phi.end()) - phi.begin()));

  const auto artifact = read_json(paths.out);
  EXPECT_EQ(artifact.at("source"), "story-ranker");
  EXPECT_EQ(artifact.at("order").size(), 7u);
  const auto traj = artifact.at("objective_trajectory").get<std::vector<double>>();
  ASSERT_EQ(traj.size(), 7u);
  EXPECT_EQ(artifact.at("gains").size(), 6u);

  // recompute L over every prefix from the written coherence matrix
  const auto csv = bytes_of(paths.coherence_csv);
  const auto c = coherence_from_csv(std::string(csv.begin(), csv.end()));
  for (std::size_t k = 0; k < 7; ++k) {
    double f = 0.0, u = 0.0;
    for (std::size_t p = 0; p <= k; ++p) {
      const auto i = static_cast<Eigen::Index>(out.order[p]);
      for (Eigen::Index j = 0; j < 7; ++j)
        if (j != i) f += c.d(j, i);
      u += std::exp(-phi[out.order[p]]);
    }
    EXPECT_NEAR(traj[k], f / static_cast<double>(k + 1) + cfg.gamma * u, 1e-9);
  }
  const auto dyn = bytes_of(paths.dynamics_csv);
  EXPECT_EQ(std::count(dyn.begin(), dyn.end(), '\n'), 8);
}

TEST(Compose, BaselineStartsCalmAndIsDeterministic) {
  const auto dir = scratch("compose_baseline");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 5, cfg);
  const auto a = cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::baseline, {dir / "a.json", {}, {}});
  cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::baseline, {dir / "b.json", {}, {}});
  EXPECT_EQ(bytes_of(dir / "a.json"), bytes_of(dir / "b.json"));
  const auto phi = load_feature_store(t.store).dynamics();
  EXPECT_EQ(a.order.front(), static_cast<std::size_t>(std::min_element(phi.begin(), phi.end()) - phi.begin()));
  const auto artifact = read_json(dir / "a.json");
  EXPECT_EQ(artifact.at("source"), "rnn-baseline");
  EXPECT_TRUE(artifact.at("gains").empty());
  EXPECT_FALSE(artifact.contains("rnn_order"));
}

TEST(Compose, TwoClipsAgreeAcrossModes) {
  const auto dir = scratch("compose_two");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 2, cfg);
  const auto base = cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::baseline, {dir / "a.json", {}, {}});
  const auto ranked = cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::ranked, {dir / "b.json", {}, {}});
  EXPECT_EQ(base.order, ranked.order);
  EXPECT_EQ(base.order, (Ordering{0, 1}));
}

TEST(Compose, DimensionMismatchNamesStream) {
  const auto dir = scratch("compose_mismatch");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 3, cfg);
  const auto other = make_store(dir / "other", 3, 9, cfg);
  try {
    cmd_compose(other, t.semantic, t.motion, cfg, ComposeMode::ranked, {dir / "x.json", {}, {}});
    FAIL() << "expected an error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("semantic"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "x.json"));
}

TEST(Eval, PerfectLabelsAndDominatingMethod) {
  const auto dir = scratch("eval");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 4, cfg);
  const ComposePaths paths{dir / "story.json", dir / "coherence.csv", {}};
  cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::ranked, paths);

  // label exactly the pairs whose adjacency score is above the median
  const auto csv = bytes_of(paths.coherence_csv);
  const auto c = coherence_from_csv(std::string(csv.begin(), csv.end()));
  const auto ids = read_json(paths.out).at("clip_ids").get<std::vector<std::string>>();
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) pairs.emplace_back(adjacency_score(c, i, j), i, j);
  std::sort(pairs.begin(), pairs.end());
  nlohmann::json labels{{"pairs", nlohmann::json::array()}};
  for (std::size_t k = 0; k < pairs.size(); ++k)
    labels["pairs"].push_back({{"a", ids[std::get<1>(pairs[k])]}, {"b", ids[std::get<2>(pairs[k])]}, {"coherent", k >= 3}});
  write_text(dir / "labels.json", labels.dump());
  write_text(dir / "prefs.json", R"({"items": ["ours", "rnn", "random"], "wins": [[0, 8, 9], [2, 0, 6], [1, 4, 0]]})");

  const auto report = cmd_eval({paths.out, paths.coherence_csv, dir / "labels.json", dir / "prefs.json"}, dir / "report");
  EXPECT_DOUBLE_EQ(report.at("roc").at("auc").get<double>(), 1.0);
  const auto scores = report.at("bradley_terry").at("scores");
  EXPECT_EQ(scores.at(0).at("item"), "ours");
  EXPECT_GT(scores.at(0).at("score").get<double>(), scores.at(1).at("score").get<double>());
  EXPECT_GT(scores.at(0).at("score").get<double>(), scores.at(2).at("score").get<double>());
  for (const auto* f : {"report.json", "dynamics.csv", "roc.csv", "bt.csv"}) EXPECT_TRUE(fs::exists(dir / "report" / f)) << f;
  const auto dyn = bytes_of(dir / "report" / "dynamics.csv");
  EXPECT_EQ(std::count(dyn.begin(), dyn.end(), '\n'), 5);
}

TEST(Eval, UncoveredLabelledPairIsReported) {
  const auto dir = scratch("eval_gap");
  const auto cfg = small_config();
  const auto t = make_trained(dir, 3, cfg);
  const ComposePaths paths{dir / "story.json", dir / "coherence.csv", {}};
  cmd_compose(t.store, t.semantic, t.motion, cfg, ComposeMode::ranked, paths);
  write_text(dir / "labels.json", R"({"pairs": [{"a": "clip00", "b": "clip01", "coherent": true},
                                                {"a": "clip00", "b": "ghost", "coherent": false}]})");
  try {
    cmd_eval({paths.out, paths.coherence_csv, dir / "labels.json", {}}, dir / "report");
    FAIL() << "expected an error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "report" / "report.json"));
}

TEST(BtRank, WritesScores) {
  const auto dir = scratch("bt");
  write_text(dir / "prefs.json", R"({"items": ["a", "b"], "wins": [[0, 3], [1, 0]]})");
  const auto bt = cmd_bt_rank(dir / "prefs.json", dir / "out");
  EXPECT_NEAR(bt.scores[0], 0.75, 1e-6);
  EXPECT_TRUE(fs::exists(dir / "out" / "bt.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "bt.csv"));
  write_text(dir / "bad.json", R"({"items": ["a"]})");
  EXPECT_THROW(cmd_bt_rank(dir / "bad.json", dir / "out2"), InvalidInput);
}

TEST(Cli, EndToEndAndFailureExitCode) {
  const auto dir = scratch("cli");
  const std::string cli = VSTORY_CLI;
  auto run = [&](const std::string& args) { return std::system((cli + " " + args + " >/dev/null 2>&1").c_str()); };
  const auto d = dir.string();
  ASSERT_EQ(run("synth --dir " + d + "/raw --clips 4 --frames 2 --semantic-dim 6 --width 8 --height 6 --seed 2"), 0);
  ASSERT_EQ(run("features --manifest " + d + "/raw/manifest.json --out " + d + "/f.vsfs"), 0);
  ASSERT_EQ(run("train --store " + d + "/f.vsfs --stream semantic --out " + d + "/s.ckpt --hidden 5 --seq-len 3 --epochs 2"), 0);
  ASSERT_EQ(run("train --store " + d + "/f.vsfs --stream motion --out " + d + "/m.ckpt --hidden 5 --seq-len 3 --epochs 2"), 0);
  ASSERT_EQ(run("compose --store " + d + "/f.vsfs --semantic " + d + "/s.ckpt --motion " + d + "/m.ckpt --mode ranked --out " +
                d + "/story.json --coherence-out " + d + "/c.csv"),
            0);
  ASSERT_EQ(run("eval --ordering " + d + "/story.json --out-dir " + d + "/report"), 0);
  EXPECT_TRUE(fs::exists(dir / "report" / "report.json"));

  EXPECT_NE(run("features --manifest " + d + "/missing.json --out " + d + "/g.vsfs"), 0);
  EXPECT_NE(run("compose --store " + d + "/f.vsfs --semantic " + d + "/m.ckpt --motion " + d + "/m.ckpt --out " + d + "/x.json"), 0);
  EXPECT_NE(run("bogus"), 0);
  EXPECT_FALSE(fs::exists(dir / "g.vsfs"));
  EXPECT_FALSE(fs::exists(dir / "x.json"));
}
