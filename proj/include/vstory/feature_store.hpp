#pragma once

// Corpus manifest ingestion and the binary feature store.
//
// Manifest (JSON):
//   {"semantic_dim": 4096,
//    "clips": [{"id": "c0", "semantic": "c0.f32", "flows": ["c0_00.flo", ...]}, ...]}
// Relative paths resolve against the manifest's directory.
//
// Feature store (little endian):
//   "VSFS" | u32 version | u32 clip count
//   per clip: u32 id length | id bytes | u32 D_f | D_f x f32 | u32 motion dim | f32s | f64 phi
//   u32 length | JSON provenance

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vstory/binary_io.hpp"
#include "vstory/error.hpp"
#include "vstory/features.hpp"
#include "vstory/flow.hpp"

namespace vstory {

inline constexpr std::uint32_t kFeatureStoreVersion = 1;

struct ManifestClip {
  std::string id;
  std::filesystem::path semantic;
  std::vector<std::filesystem::path> flows;
};

struct Manifest {
  std::size_t semantic_dim = 0;
  std::vector<ManifestClip> clips;
};

inline Manifest parse_manifest(const std::string& text, const std::filesystem::path& base, const std::string& path) {
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.semantic_dim = j.at("semantic_dim").get<std::size_t>();
    for (const auto& c : j.at("clips")) {
      ManifestClip clip;
      clip.id = c.at("id").get<std::string>();
      clip.semantic = base / c.at("semantic").get<std::string>();
      for (const auto& f : c.at("flows")) clip.flows.push_back(base / f.get<std::string>());
      m.clips.push_back(std::move(clip));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": malformed manifest: " + e.what());
  }
  if (m.semantic_dim == 0) throw InvalidInput(path + ": semantic_dim must be positive");
  if (m.clips.empty()) throw InvalidInput(path + ": manifest lists no clips");
  for (const auto& c : m.clips)
    if (c.flows.empty()) throw InvalidInput(path + ": clip '" + c.id + "' lists no flow files");
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path(), path.string());
}

/// Raw little-endian float32 vector of exactly `dim` entries, no header.
inline Vector parse_semantic(std::span<const unsigned char> bytes, std::size_t dim, const std::string& path) {
  if (bytes.size() != dim * 4)
    throw InvalidInput(path + ": semantic file has " + std::to_string(bytes.size()) + " bytes, expected " +
                       std::to_string(dim * 4) + " (" + std::to_string(dim) + " floats)");
  io::ByteReader in(bytes, path);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = in.get_f32();
  if (!v.allFinite()) throw InvalidInput(path + ": semantic feature has non-finite values");
  return v;
}

inline std::vector<unsigned char> encode_semantic(const Vector& v) {
  io::ByteWriter out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out.put_f32(static_cast<float>(v[i]));
  return out.bytes();
}

struct FeatureStore {
  std::vector<ClipFeatures> clips;
  nlohmann::json provenance = nlohmann::json::object();

  std::vector<double> dynamics() const {
    std::vector<double> phi;
    for (const auto& c : clips) phi.push_back(c.dynamics);
    return phi;
  }
};

inline std::vector<unsigned char> encode_feature_store(const FeatureStore& store) {
  io::ByteWriter out;
  out.put_raw("VSFS");
  out.put_u32(kFeatureStoreVersion);
  out.put_u32(static_cast<std::uint32_t>(store.clips.size()));
  for (const auto& c : store.clips) {
    out.put_string(c.clip_id);
    out.put_u32(static_cast<std::uint32_t>(c.semantic.size()));
    for (Eigen::Index i = 0; i < c.semantic.size(); ++i) out.put_f32(static_cast<float>(c.semantic[i]));
    out.put_u32(static_cast<std::uint32_t>(c.motion.size()));
    for (Eigen::Index i = 0; i < c.motion.size(); ++i) out.put_f32(static_cast<float>(c.motion[i]));
    out.put_f64(c.dynamics);
  }
  out.put_string(store.provenance.dump());
  return out.bytes();
}

inline FeatureStore decode_feature_store(std::span<const unsigned char> bytes, const std::string& path) {
  io::ByteReader in(bytes, path);
  if (in.remaining() < 4 || in.get_raw(4) != "VSFS") throw InvalidInput(path + ": not a feature store (bad magic)");
  const auto version = in.get_u32();
  if (version != kFeatureStoreVersion)
    throw InvalidInput(path + ": unsupported feature store version " + std::to_string(version));
  FeatureStore store;
  const auto count = in.get_u32();
  auto read_vec = [&in](std::uint32_t n) {
    if (in.remaining() < static_cast<std::size_t>(n) * 4) throw InvalidInput(in.path() + ": file is truncated");
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = in.get_f32();
    return v;
  };
  for (std::uint32_t k = 0; k < count; ++k) {
    ClipFeatures c;
    c.clip_id = in.get_string();
    c.semantic = read_vec(in.get_u32());
    c.motion = read_vec(in.get_u32());
    c.dynamics = in.get_f64();
    if (!store.clips.empty() && c.semantic.size() != store.clips.front().semantic.size())
      throw InvalidInput(path + ": clip '" + c.clip_id + "' semantic dimension differs from the first clip");
    if (!store.clips.empty() && c.motion.size() != store.clips.front().motion.size())
      throw InvalidInput(path + ": clip '" + c.clip_id + "' motion dimension differs from the first clip");
    store.clips.push_back(std::move(c));
  }
  try {
    store.provenance = nlohmann::json::parse(in.get_string());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": bad provenance blob: " + e.what());
  }
  if (in.remaining() != 0) throw InvalidInput(path + ": trailing bytes after feature store");
  return store;
}

inline FeatureStore load_feature_store(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_feature_store(bytes, path.string());
}

inline void save_feature_store(const std::filesystem::path& path, const FeatureStore& store) {
  io::write_file_atomic(path, encode_feature_store(store));
}

}  // namespace vstory
