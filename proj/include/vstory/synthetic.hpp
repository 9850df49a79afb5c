#pragma once

// Synthetic corpora with a planted clip order, used for demos and for
// checking that training recovers known structure.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vstory/binary_io.hpp"
#include "vstory/feature_store.hpp"
#include "vstory/features.hpp"
#include "vstory/flow.hpp"
#include "vstory/rnn.hpp"

namespace vstory {

struct PlantedCorpus {
  std::vector<ClipFeatures> clips;                    // planted successor of clip i is (i + 1) % n
  std::vector<std::vector<std::size_t>> videos;       // training videos as clip index sequences
  std::vector<std::vector<std::size_t>> held_out;     // windows not used for training

  std::vector<Video> stream(bool semantic, const std::vector<std::vector<std::size_t>>& seqs) const {
    std::vector<Video> out;
    for (const auto& s : seqs) {
      Video v;
      for (auto i : s) v.push_back(semantic ? clips[i].semantic : clips[i].motion);
      out.push_back(std::move(v));
    }
    return out;
  }
};

struct PlantedOptions {
  std::size_t clips = 12;
  std::size_t semantic_dim = 12;
  std::size_t bins = 10;
  std::size_t pyramid = 3;
  std::size_t videos = 8;
  std::size_t video_len = 24;
  std::size_t held_out = 4;
  std::size_t held_out_len = 10;
  double noise = 0.05;
  std::uint64_t seed = 7;
};

/// Cyclic corpus: clip i is followed by clip (i+1) mod n.
///  - semantic: one-hot(i mod D) plus U[0, noise) per entry
///  - motion: SPP-HOOF-shaped vector; histogram g of clip i peaks at bin
///    (i + g * (1 + i / bins)) mod bins, plus noise, each histogram renormalised
///  - dynamics: 0.5 + 0.1 i plus U[0, 0.01), so clip 0 is the calmest
///  - videos: rotations of the cycle of length video_len starting at seeded offsets
inline PlantedCorpus make_planted_corpus(const PlantedOptions& opts = {}) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> noise(0.0, opts.noise);
  std::uniform_real_distribution<double> jitter(0.0, 0.01);
  std::uniform_int_distribution<std::size_t> offset(0, opts.clips - 1);

  PlantedCorpus corpus;
  const std::size_t hists = opts.pyramid * opts.pyramid + 1;
  for (std::size_t i = 0; i < opts.clips; ++i) {
    ClipFeatures c;
    c.clip_id = fmt::format("clip{:02}", i);
    c.semantic = Vector::Zero(static_cast<Eigen::Index>(opts.semantic_dim));
    c.semantic[static_cast<Eigen::Index>(i % opts.semantic_dim)] = 1.0;
    for (Eigen::Index k = 0; k < c.semantic.size(); ++k) c.semantic[k] += noise(rng);

    c.motion = Vector::Zero(static_cast<Eigen::Index>(spp_dimension(opts.bins, opts.pyramid)));
    for (std::size_t g = 0; g < hists; ++g) {
      auto h = c.motion.segment(static_cast<Eigen::Index>(g * opts.bins), static_cast<Eigen::Index>(opts.bins));
      h[static_cast<Eigen::Index>((i + g * (1 + i / opts.bins)) % opts.bins)] = 1.0;
      for (Eigen::Index k = 0; k < h.size(); ++k) h[k] += noise(rng);
      h /= h.sum();
    }
    c.dynamics = 0.5 + 0.1 * static_cast<double>(i) + jitter(rng);
    corpus.clips.push_back(std::move(c));
  }
  auto rotation = [&](std::size_t start, std::size_t len) {
    std::vector<std::size_t> seq;
    for (std::size_t k = 0; k < len; ++k) seq.push_back((start + k) % opts.clips);
    return seq;
  };
  for (std::size_t v = 0; v < opts.videos; ++v) corpus.videos.push_back(rotation(offset(rng), opts.video_len));
  for (std::size_t v = 0; v < opts.held_out; ++v) corpus.held_out.push_back(rotation(offset(rng), opts.held_out_len));
  return corpus;
}

/// Writes a manifest corpus of `clips` clips, each with `frames` .flo files
/// of size width x height and a raw float32 semantic file. Clip i moves in
/// direction 2*pi*i/clips with speed growing along the clip index; its
/// semantic vector is one-hot(i mod semantic_dim) plus seeded noise.
/// Returns the manifest path.
inline std::filesystem::path write_synthetic_manifest(const std::filesystem::path& dir, std::size_t clips,
                                                      std::size_t frames, int width, int height,
                                                      std::size_t semantic_dim, std::uint64_t seed,
                                                      const std::string& prefix = "clip") {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.05);
  std::normal_distribution<double> wobble(0.0, 0.1);

  nlohmann::json manifest{{"semantic_dim", semantic_dim}, {"clips", nlohmann::json::array()}};
  for (std::size_t i = 0; i < clips; ++i) {
    const std::string id = fmt::format("{}{:02}", prefix, i);
    Vector sem = Vector::Zero(static_cast<Eigen::Index>(semantic_dim));
    sem[static_cast<Eigen::Index>(i % semantic_dim)] = 1.0;
    for (Eigen::Index k = 0; k < sem.size(); ++k) sem[k] += noise(rng);
    const auto sem_name = id + ".f32";
    io::write_file_atomic(dir / sem_name, encode_semantic(sem));

    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(clips);
    const double speed = 0.5 + 0.25 * static_cast<double>(i);
    nlohmann::json flows = nlohmann::json::array();
    for (std::size_t f = 0; f < frames; ++f) {
      std::vector<FlowVector> vecs(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
      for (auto& v : vecs) {
        v.u = static_cast<float>(speed * std::cos(angle) + wobble(rng));
        v.v = static_cast<float>(speed * std::sin(angle) + wobble(rng));
      }
      const auto flo_name = fmt::format("{}_{:02}.flo", id, f);
      write_flo(dir / flo_name, FlowField(width, height, std::move(vecs)));
      flows.push_back(flo_name);
    }
    manifest["clips"].push_back({{"id", id}, {"semantic", sem_name}, {"flows", flows}});
  }
  const auto path = dir / "manifest.json";
  io::write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace vstory
