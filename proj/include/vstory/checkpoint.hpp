#pragma once

// Binary checkpoint for one trained stream.
//
//   "VSRN" | u32 version | u32 D | u32 H
//   | W_I (H x D) | W_H (H x H) | W_O (D x H)   row-major float32
//   | u32 length | JSON {"train_config": {...}, "provenance": {...}}
//
// All integers and floats little endian.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "vstory/binary_io.hpp"
#include "vstory/error.hpp"
#include "vstory/rnn.hpp"

namespace vstory {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"seq_len", c.seq_len},
                     {"hidden_dim", c.hidden_dim},
                     {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"lr_decay_factor", c.lr_decay_factor},
                     {"patience", c.patience},
                     {"min_learning_rate", c.min_learning_rate},
                     {"clip_norm", c.clip_norm}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.seq_len = j.value("seq_len", d.seq_len);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.lr_decay_factor = j.value("lr_decay_factor", d.lr_decay_factor);
  c.patience = j.value("patience", d.patience);
  c.min_learning_rate = j.value("min_learning_rate", d.min_learning_rate);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
}

struct Checkpoint {
  RnnParams params;
  TrainConfig config;
  nlohmann::json provenance = nlohmann::json::object();
};

namespace detail {

inline void put_matrix(io::ByteWriter& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.put_f32(static_cast<float>(m(i, j)));
}

inline Matrix get_matrix(io::ByteReader& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = in.get_f32();
  return m;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.params.validate();
  io::ByteWriter out;
  out.put_raw("VSRN");
  out.put_u32(kCheckpointVersion);
  out.put_u32(static_cast<std::uint32_t>(ckpt.params.input_dim()));
  out.put_u32(static_cast<std::uint32_t>(ckpt.params.hidden_dim()));
  detail::put_matrix(out, ckpt.params.w_in);
  detail::put_matrix(out, ckpt.params.w_hh);
  detail::put_matrix(out, ckpt.params.w_out);
  const nlohmann::json blob{{"train_config", ckpt.config}, {"provenance", ckpt.provenance}};
  out.put_string(blob.dump());
  return out.bytes();
}

inline Checkpoint decode_checkpoint(std::span<const unsigned char> bytes, const std::string& path) {
  io::ByteReader in(bytes, path);
  if (in.remaining() < 4 || in.get_raw(4) != "VSRN") throw InvalidInput(path + ": not a checkpoint (bad magic)");
  const auto version = in.get_u32();
  if (version != kCheckpointVersion)
    throw InvalidInput(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto d = static_cast<Eigen::Index>(in.get_u32());
  const auto h = static_cast<Eigen::Index>(in.get_u32());
  if (d < 1 || h < 1) throw InvalidInput(path + ": checkpoint has zero dimension");
  if (in.remaining() < static_cast<std::size_t>(2 * h * d + h * h) * 4)
    throw InvalidInput(path + ": file is truncated");
  Checkpoint ckpt;
  ckpt.params.w_in = detail::get_matrix(in, h, d);
  ckpt.params.w_hh = detail::get_matrix(in, h, h);
  ckpt.params.w_out = detail::get_matrix(in, d, h);
  try {
    const auto blob = nlohmann::json::parse(in.get_string());
    ckpt.config = blob.at("train_config").get<TrainConfig>();
    ckpt.provenance = blob.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": bad checkpoint config blob: " + e.what());
  }
  if (in.remaining() != 0) throw InvalidInput(path + ": trailing bytes after checkpoint");
  if (!ckpt.params.all_finite()) throw NumericError(path + ": checkpoint holds non-finite weights");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_checkpoint(bytes, path.string());
}

}  // namespace vstory
