#pragma once

// Motion descriptors computed from optical flow: magnitude-weighted
// orientation histograms (HOOF), their spatial-pyramid concatenation
// (SPP-HOOF), clip-level averaging and the dynamics score.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vstory/error.hpp"
#include "vstory/flow.hpp"

namespace vstory {

/// Orientation histogram. Sums to 1, or is all zeros when the flow had no motion.
using Histogram = std::vector<double>;

/// SPP-HOOF vector: M*M cell histograms (row-major) followed by the global one.
using MotionFeature = Eigen::VectorXd;

struct ClipFeatures {
  std::string clip_id;
  Eigen::VectorXd semantic;
  MotionFeature motion;
  double dynamics = 0.0;  // mean flow magnitude, pixels/frame
};

inline constexpr std::size_t spp_dimension(std::size_t bins, std::size_t pyramid_m) {
  return bins * (pyramid_m * pyramid_m + 1);
}

namespace detail {

/// Bin index for a direction; bins are half-open [k*w, (k+1)*w) over [0, 2pi).
inline std::size_t orientation_bin(double u, double v, std::size_t bins) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double angle = std::atan2(v, u);
  if (angle < 0.0) angle += two_pi;
  auto bin = static_cast<std::size_t>(std::floor(angle * static_cast<double>(bins) / two_pi));
  return bin >= bins ? 0 : bin;  // angle rounding up to 2pi wraps to bin 0
}

/// Accumulates the HOOF of the pixel block [x0,x1) x [y0,y1) into `out`.
inline void hoof_block(const FlowField& flow, int x0, int x1, int y0, int y1, std::size_t bins,
                       std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  double total = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const auto& fv = flow.at(x, y);
      const double m = fv.magnitude();
      if (m > 0.0) {
        out[orientation_bin(fv.u, fv.v, bins)] += m;
        total += m;
      }
    }
  }
  if (total > 0.0)
    for (auto& w : out) w /= total;
}

}  // namespace detail

/// Magnitude-weighted histogram of flow orientations over the whole field.
inline Histogram hoof(const FlowField& flow, std::size_t bins) {
  if (bins < 1) throw InvalidInput("hoof: bin count must be >= 1");
  if (flow.empty()) throw InvalidInput("hoof: empty flow field");
  Histogram h(bins, 0.0);
  detail::hoof_block(flow, 0, flow.width(), 0, flow.height(), bins, h);
  return h;
}

/// Per-frame SPP-HOOF. Cell boundaries sit at floor(i*width/M) and
/// floor(j*height/M), so every pixel lands in exactly one cell.
inline MotionFeature spp_hoof_frame(const FlowField& flow, std::size_t bins, std::size_t pyramid_m) {
  if (bins < 1) throw InvalidInput("spp_hoof_frame: bin count must be >= 1");
  if (pyramid_m < 1) throw InvalidInput("spp_hoof_frame: pyramid level must be >= 1");
  if (flow.empty()) throw InvalidInput("spp_hoof_frame: empty flow field");
  const auto m = static_cast<long>(pyramid_m);
  if (flow.width() < m || flow.height() < m)
    throw InvalidInput("spp_hoof_frame: " + std::to_string(flow.width()) + "x" + std::to_string(flow.height()) +
                       " flow is smaller than the " + std::to_string(m) + "x" + std::to_string(m) + " grid");

  MotionFeature out(static_cast<Eigen::Index>(spp_dimension(bins, pyramid_m)));
  auto edge = [m](int extent, long i) { return static_cast<int>(i * extent / m); };
  std::size_t offset = 0;
  for (long row = 0; row < m; ++row) {
    for (long col = 0; col < m; ++col) {
      detail::hoof_block(flow, edge(flow.width(), col), edge(flow.width(), col + 1), edge(flow.height(), row),
                         edge(flow.height(), row + 1), bins, std::span(out.data() + offset, bins));
      offset += bins;
    }
  }
  detail::hoof_block(flow, 0, flow.width(), 0, flow.height(), bins, std::span(out.data() + offset, bins));
  return out;
}

/// Mean of the per-frame SPP-HOOF vectors of a clip.
inline MotionFeature clip_motion_feature(std::span<const FlowField> frames, std::size_t bins, std::size_t pyramid_m) {
  if (frames.empty()) throw InvalidInput("clip_motion_feature: no frames");
  const int w = frames.front().width();
  const int h = frames.front().height();
  MotionFeature sum = MotionFeature::Zero(static_cast<Eigen::Index>(spp_dimension(bins, pyramid_m)));
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].width() != w || frames[k].height() != h)
      throw InvalidInput("clip_motion_feature: frame " + std::to_string(k) + " is " +
                         std::to_string(frames[k].width()) + "x" + std::to_string(frames[k].height()) +
                         ", expected " + std::to_string(w) + "x" + std::to_string(h));
    sum += spp_hoof_frame(frames[k], bins, pyramid_m);
  }
  return sum / static_cast<double>(frames.size());
}

/// Mean optical-flow magnitude over every pixel of every frame.
inline double dynamics_score(std::span<const FlowField> frames) {
  if (frames.empty()) throw InvalidInput("dynamics_score: no frames");
  double total = 0.0;
  std::size_t pixels = 0;
  for (const auto& f : frames) {
    for (const auto& fv : f.vectors()) total += fv.magnitude();
    pixels += f.vectors().size();
  }
  if (pixels == 0) throw InvalidInput("dynamics_score: empty flow field");
  return total / static_cast<double>(pixels);
}

}  // namespace vstory
