// vstory: compose video stories from clip features.
//
//   vstory features --manifest m.json --out clips.vsfs
//   vstory train    --store a.vsfs [--store b.vsfs ...] --stream semantic --out sem.vsrn [--log sem.csv]
//   vstory compose  --store clips.vsfs --semantic sem.vsrn --motion mot.vsrn --mode ranked --out story.json
//   vstory eval     --ordering story.json [--coherence c.csv --labels l.json] [--preferences p.json] --out-dir report/
//   vstory bt-rank  --preferences p.json --out-dir bt/
//
// VS_LOG=trace|debug|info|warn|error|off sets log verbosity (default info).

#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "vstory/vstory.hpp"

namespace {

void add_config_flags(CLI::App* cmd, vstory::PipelineConfig& c) {
  cmd->add_option("--bins", c.bins, "HOOF orientation bins")->capture_default_str();
  cmd->add_option("--pyramid", c.pyramid, "spatial pyramid grid size M (M x M cells)")->capture_default_str();
  cmd->add_option("--seq-len", c.seq_len, "training window length T")->capture_default_str();
  cmd->add_option("--hidden", c.hidden, "recurrent hidden size")->capture_default_str();
  cmd->add_option("--lambda", c.lambda, "semantic/motion fusion weight")->capture_default_str();
  cmd->add_option("--gamma", c.gamma, "activity-dynamics weight in the ranking objective")->capture_default_str();
  cmd->add_option("--lr", c.lr, "initial learning rate")->capture_default_str();
  cmd->add_option("--momentum", c.momentum, "gradient-ascent momentum")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "L2 weight decay")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "epoch budget")->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed for every random choice")->capture_default_str();
  cmd->add_option("--lr-decay", c.lr_decay_factor, "learning-rate decay factor on plateau")->capture_default_str();
  cmd->add_option("--patience", c.patience, "epochs without improvement before decaying")->capture_default_str();
  cmd->add_option("--clip-norm", c.clip_norm, "gradient norm clipping threshold (0 disables)")->capture_default_str();
}

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("VS_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"vstory: two-stream RNN video-story composition and ranking"};
  app.require_subcommand(1);

  vstory::PipelineConfig config;

  std::string manifest, store_out;
  auto* features = app.add_subcommand("features", "extract motion features and dynamics scores from a manifest");
  features->add_option("--manifest", manifest, "corpus manifest JSON")->required()->check(CLI::ExistingFile);
  features->add_option("--out", store_out, "feature store to write")->required();
  add_config_flags(features, config);

  std::vector<std::string> train_stores;
  std::string stream = "semantic", ckpt_out, log_out;
  auto* train = app.add_subcommand("train", "train one stream of the two-stream RNN");
  train->add_option("--store", train_stores, "feature store; one per training video")->required();
  train->add_option("--stream", stream, "semantic or motion")->check(CLI::IsMember({"semantic", "motion"}))->capture_default_str();
  train->add_option("--out", ckpt_out, "checkpoint to write")->required();
  train->add_option("--log", log_out, "per-epoch log-likelihood CSV");
  add_config_flags(train, config);

  std::string compose_store, sem_ckpt, mot_ckpt, mode = "ranked", compose_out, coherence_out, dynamics_out;
  auto* compose = app.add_subcommand("compose", "compose a story from a feature store");
  compose->add_option("--store", compose_store, "feature store")->required()->check(CLI::ExistingFile);
  compose->add_option("--semantic", sem_ckpt, "semantic stream checkpoint")->required()->check(CLI::ExistingFile);
  compose->add_option("--motion", mot_ckpt, "motion stream checkpoint")->required()->check(CLI::ExistingFile);
  compose->add_option("--mode", mode, "baseline or ranked")->check(CLI::IsMember({"baseline", "ranked"}))->capture_default_str();
  compose->add_option("--out", compose_out, "ordering JSON to write")->required();
  compose->add_option("--coherence-out", coherence_out, "coherence matrix CSV (ranked mode)");
  compose->add_option("--dynamics-out", dynamics_out, "dynamics curve CSV");
  add_config_flags(compose, config);

  vstory::EvalInputs eval_in;
  std::string eval_ordering, eval_coherence, eval_labels, eval_prefs, eval_out;
  auto* eval = app.add_subcommand("eval", "ROC/AUC, Bradley-Terry and dynamics reports");
  eval->add_option("--ordering", eval_ordering, "ordering JSON from compose")->required()->check(CLI::ExistingFile);
  eval->add_option("--coherence", eval_coherence, "coherence CSV from compose")->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_labels, "adjacency labels JSON")->check(CLI::ExistingFile);
  eval->add_option("--preferences", eval_prefs, "pairwise preference JSON")->check(CLI::ExistingFile);
  eval->add_option("--out-dir", eval_out, "report directory")->required();

  std::string bt_prefs, bt_out;
  auto* bt = app.add_subcommand("bt-rank", "Bradley-Terry global ranking from pairwise preferences");
  bt->add_option("--preferences", bt_prefs, "pairwise preference JSON")->required()->check(CLI::ExistingFile);
  bt->add_option("--out-dir", bt_out, "output directory")->required();

  std::string synth_dir;
  std::size_t synth_clips = 12, synth_frames = 16, synth_dim = 16;
  int synth_w = 24, synth_h = 18;
  auto* synth = app.add_subcommand("synth", "write a synthetic manifest corpus (flows + semantic files)");
  synth->add_option("--dir", synth_dir, "output directory")->required();
  synth->add_option("--clips", synth_clips, "clip count")->capture_default_str();
  synth->add_option("--frames", synth_frames, "flow frames per clip")->capture_default_str();
  synth->add_option("--semantic-dim", synth_dim, "semantic feature dimension")->capture_default_str();
  synth->add_option("--width", synth_w, "flow width")->capture_default_str();
  synth->add_option("--height", synth_h, "flow height")->capture_default_str();
  synth->add_option("--seed", config.seed, "seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*features) {
      const auto store = vstory::cmd_features(manifest, store_out, config);
      spdlog::info("wrote {} clips (motion dim {}) to {}", store.clips.size(),
                   store.clips.empty() ? 0 : store.clips.front().motion.size(), store_out);
    } else if (*train) {
      std::vector<std::filesystem::path> paths(train_stores.begin(), train_stores.end());
      const auto out = vstory::cmd_train(paths, vstory::parse_stream(stream), config, ckpt_out, log_out);
      for (auto v : out.result.skipped_videos)
        spdlog::warn("skipped {}: fewer than {} clips", train_stores[v], config.seq_len);
      for (const auto& e : out.result.log)
        spdlog::debug("epoch {} mean log-likelihood {:.6f} lr {:.3g}", e.epoch, e.mean_log_likelihood, e.learning_rate);
      spdlog::info("trained {} stream (D={}, H={}) for {} epochs, wrote {}", stream, out.checkpoint.params.input_dim(),
                   out.checkpoint.params.hidden_dim(), out.result.log.size(), ckpt_out);
    } else if (*compose) {
      const auto out = vstory::cmd_compose(compose_store, sem_ckpt, mot_ckpt, config, vstory::parse_mode(mode),
                                           {compose_out, coherence_out, dynamics_out});
      spdlog::info("composed {} clips ({}), wrote {}", out.order.size(), mode, compose_out);
    } else if (*eval) {
      const auto report = vstory::cmd_eval({eval_ordering, eval_coherence, eval_labels, eval_prefs}, eval_out);
      if (report.contains("roc")) spdlog::info("AUC {:.4f}", report["roc"]["auc"].get<double>());
      spdlog::info("dynamics spearman {:.4f}; report in {}", report["dynamics"]["spearman"].get<double>(), eval_out);
    } else if (*bt) {
      const auto scores = vstory::cmd_bt_rank(bt_prefs, bt_out);
      if (scores.smoothed) spdlog::warn("an item had no wins; scores use add-0.01 smoothing");
      spdlog::info("fit in {} iterations, wrote {}", scores.iterations, bt_out);
    } else if (*synth) {
      const auto path = vstory::write_synthetic_manifest(synth_dir, synth_clips, synth_frames, synth_w, synth_h,
                                                         synth_dim, config.seed);
      spdlog::info("wrote {}", path.string());
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
