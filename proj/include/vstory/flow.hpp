#pragma once

// Dense optical-flow fields and the Middlebury .flo container.
//
//  bytes  contents
//  0-3    tag: float 202021.25 ("PIEH" in ASCII)
//  4-7    width  (int32, little endian)
//  8-11   height (int32, little endian)
//  12-    width*height interleaved (u, v) float32 pairs, row-major

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vstory/binary_io.hpp"
#include "vstory/error.hpp"

namespace vstory {

struct FlowVector {
  double u = 0.0;
  double v = 0.0;

  double magnitude() const { return std::hypot(u, v); }
};

/// Per-pixel displacement in pixels/frame, row-major. Held in double; .flo stores float32.
class FlowField {
 public:
  FlowField() = default;

  FlowField(int width, int height, std::vector<FlowVector> vectors)
      : width_(width), height_(height), vectors_(std::move(vectors)) {
    if (width < 1 || height < 1) throw InvalidInput("flow field must be at least 1x1");
    if (vectors_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw InvalidInput("flow field has " + std::to_string(vectors_.size()) + " vectors, expected " +
                         std::to_string(width) + "x" + std::to_string(height));
  }

  /// Field where every pixel carries the same vector.
  static FlowField uniform(int width, int height, FlowVector v) {
    return {width, height, std::vector<FlowVector>(static_cast<std::size_t>(width) * height, v)};
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return vectors_.empty(); }

  const FlowVector& at(int x, int y) const { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
  FlowVector& at(int x, int y) { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }

  const std::vector<FlowVector>& vectors() const { return vectors_; }

  /// Same field with every vector multiplied by `alpha`.
  FlowField scaled(double alpha) const {
    FlowField out = *this;
    for (auto& fv : out.vectors_) {
      fv.u *= alpha;
      fv.v *= alpha;
    }
    return out;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<FlowVector> vectors_;
};

inline constexpr float kFloTag = 202021.25f;

inline FlowField parse_flo(std::span<const unsigned char> bytes, const std::string& path) {
  io::ByteReader in(bytes, path);
  if (in.remaining() < 12) throw InvalidInput(path + ": not a .flo file (too short)");
  if (in.get_f32() != kFloTag) throw InvalidInput(path + ": wrong .flo tag (expected 202021.25)");
  const auto width = in.get<std::int32_t>();
  const auto height = in.get<std::int32_t>();
  if (width < 1 || width > 99999) throw InvalidInput(path + ": illegal .flo width " + std::to_string(width));
  if (height < 1 || height > 99999) throw InvalidInput(path + ": illegal .flo height " + std::to_string(height));

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (in.remaining() != count * 8)
    throw InvalidInput(path + ": .flo payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                       std::to_string(count * 8));
  std::vector<FlowVector> vectors(count);
  for (auto& fv : vectors) {
    fv.u = in.get_f32();
    fv.v = in.get_f32();
  }
  return {width, height, std::move(vectors)};
}

inline FlowField read_flo(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_flo(bytes, path.string());
}

inline std::vector<unsigned char> encode_flo(const FlowField& flow) {
  io::ByteWriter out;
  out.put_f32(kFloTag);
  out.put<std::int32_t>(flow.width());
  out.put<std::int32_t>(flow.height());
  for (const auto& fv : flow.vectors()) {
    out.put_f32(static_cast<float>(fv.u));
    out.put_f32(static_cast<float>(fv.v));
  }
  return out.bytes();
}

inline void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  io::write_file_atomic(path, encode_flo(flow));
}

}  // namespace vstory
