#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "isomer/blocks/feature_map.hpp"
#include "isomer/pipeline/config.hpp"

// Procedural moving-shape clips standing in for backbone features and
// optical flow.
//
// Each frame is a grayscale image: a low-contrast textured background with
// one disc and one axis-aligned rectangle moving at constant velocity. A
// pixel belongs to a shape when its center lies inside it.
//
// Stage l pools s x s patches (s = 4 * 2^(l-1)) into raw statistics:
//   appearance: mean, std, mean |dI/dx|, mean |dI/dy|, max, min
//   motion:     mean vx, mean vy, mean |v|, mean dI/dt, mean |dI/dt|
// where v is the per-pixel displacement of the shape covering it (zero on
// the background) and dI/dt the forward frame difference (backward on the
// last frame, zero for single-frame clips). Raw statistics are mapped to the
// stage's channel count by fixed seeded matrices without bias, so a static
// scene has identically zero motion features.

namespace isomer::pipeline {

using blocks::FeatureMap;

struct StageStack {
  std::array<FeatureMap, kStages> stages;
  friend bool operator==(const StageStack&, const StageStack&) = default;
};

struct Shape2d {
  enum class Kind { kDisc, kRect } kind = Kind::kDisc;
  double cx = 0.0, cy = 0.0;  // position at frame 0, pixels
  double rx = 0.0, ry = 0.0;  // radius (disc uses rx) or half extents
  double vx = 0.0, vy = 0.0;  // pixels per frame
  double intensity = 0.8;

  bool covers(double x, double y, std::size_t frame) const;
  double area() const;
};

struct Scene {
  std::size_t resolution = 64;
  double background = 0.2;
  double texture = 0.04;
  double fx = 1.0, fy = 1.0, phase_x = 0.0, phase_y = 0.0;
  std::vector<Shape2d> shapes;
};

struct Frame {
  DenseArray image;   // R x R
  DenseArray mask;    // R x R, 0/1
  DenseArray target;  // H1 x W1, 1 where mask coverage of the stage-1 patch >= 0.5
  StageStack appearance;
  StageStack motion;
};

struct Clip {
  std::vector<Frame> frames;
};

inline constexpr std::size_t kAppearanceStats = 6;
inline constexpr std::size_t kMotionStats = 5;

/// Random scene whose shapes stay inside the frame for `frames` frames.
/// `still` forces zero velocities.
Scene random_scene(std::uint64_t seed, std::size_t resolution, std::size_t frames,
                   bool still = false);

Clip render_clip(const Scene& scene, std::size_t frames,
                 const std::array<std::size_t, kStages>& channels, std::uint64_t feature_seed);

Clip synth_clip(std::uint64_t seed, std::size_t resolution, std::size_t frames,
                const std::array<std::size_t, kStages>& channels, bool still = false);
/// Clip for cfg.data_seed at cfg.resolution with cfg.frames frames.
Clip synth_clip(const IsomerConfig& cfg);

}  // namespace isomer::pipeline
