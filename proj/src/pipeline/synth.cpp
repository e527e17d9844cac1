#include "isomer/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isomer/numerics/rng.hpp"

namespace isomer::pipeline {

namespace {

DenseArray render_image(const Scene& s, std::size_t frame, DenseArray* mask,
                        DenseArray* vx, DenseArray* vy) {
  const std::size_t r = s.resolution;
  DenseArray img({r, r});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t y = 0; y < r; ++y) {
    for (std::size_t x = 0; x < r; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      double v = s.background + s.texture * std::sin(two_pi * s.fx * px / r + s.phase_x) *
                                    std::cos(two_pi * s.fy * py / r + s.phase_y);
      double fx = 0.0, fy = 0.0, m = 0.0;
      for (const auto& shape : s.shapes) {
        if (shape.covers(px, py, frame)) {
          v = shape.intensity;
          fx = shape.vx;
          fy = shape.vy;
          m = 1.0;
        }
      }
      img(y, x) = v;
      if (mask) (*mask)(y, x) = m;
      if (vx) (*vx)(y, x) = fx;
      if (vy) (*vy)(y, x) = fy;
    }
  }
  return img;
}

// Per-patch raw statistics at stride `s`: rows are patches (row-major),
// columns are statistics.
DenseArray appearance_stats(const DenseArray& img, std::size_t s) {
  const std::size_t r = img.rows();
  const std::size_t side = r / s;
  DenseArray out({side * side, kAppearanceStats});
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      double sum = 0.0, sq = 0.0, gx = 0.0, gy = 0.0;
      double hi = -INFINITY, lo = INFINITY;
      for (std::size_t y = py * s; y < (py + 1) * s; ++y) {
        for (std::size_t x = px * s; x < (px + 1) * s; ++x) {
          const double v = img(y, x);
          sum += v;
          sq += v * v;
          hi = std::max(hi, v);
          lo = std::min(lo, v);
          if (x + 1 < r) gx += std::abs(img(y, x + 1) - v);
          if (y + 1 < r) gy += std::abs(img(y + 1, x) - v);
        }
      }
      const double count = static_cast<double>(s * s);
      const double mean = sum / count;
      const std::size_t row = py * side + px;
      out(row, 0) = mean;
      out(row, 1) = std::sqrt(std::max(0.0, sq / count - mean * mean));
      out(row, 2) = gx / count;
      out(row, 3) = gy / count;
      out(row, 4) = hi;
      out(row, 5) = lo;
    }
  }
  return out;
}

DenseArray motion_stats(const DenseArray& vx, const DenseArray& vy, const DenseArray& dt,
                        std::size_t s) {
  const std::size_t side = vx.rows() / s;
  DenseArray out({side * side, kMotionStats});
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      double acc[kMotionStats] = {};
      for (std::size_t y = py * s; y < (py + 1) * s; ++y) {
        for (std::size_t x = px * s; x < (px + 1) * s; ++x) {
          acc[0] += vx(y, x);
          acc[1] += vy(y, x);
          acc[2] += std::hypot(vx(y, x), vy(y, x));
          acc[3] += dt(y, x);
          acc[4] += std::abs(dt(y, x));
        }
      }
      const double count = static_cast<double>(s * s);
      for (std::size_t k = 0; k < kMotionStats; ++k) out(py * side + px, k) = acc[k] / count;
    }
  }
  return out;
}

// Raw stats (N x d) times a fixed d x C matrix, as a C x H x W map.
FeatureMap project(const DenseArray& stats, const DenseArray& proj, std::size_t side) {
  const std::size_t n = stats.rows(), d = stats.cols(), c = proj.cols();
  DenseArray tokens({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += stats(i, k) * proj(k, j);
      tokens(i, j) = acc;
    }
  return FeatureMap::from_tokens(tokens, side, side);
}

}  // namespace

bool Shape2d::covers(double x, double y, std::size_t frame) const {
  const double t = static_cast<double>(frame);
  const double dx = x - (cx + vx * t);
  const double dy = y - (cy + vy * t);
  if (kind == Kind::kDisc) return dx * dx + dy * dy <= rx * rx;
  return std::abs(dx) <= rx && std::abs(dy) <= ry;
}

double Shape2d::area() const {
  return kind == Kind::kDisc ? std::numbers::pi * rx * rx : 4.0 * rx * ry;
}

Scene random_scene(std::uint64_t seed, std::size_t resolution, std::size_t frames, bool still) {
  Rng rng(seed);
  Scene s;
  s.resolution = resolution;
  const double r = static_cast<double>(resolution);
  s.background = rng.uniform(0.15, 0.25);
  s.texture = rng.uniform(0.02, 0.05);
  s.fx = 1.0 + static_cast<double>(rng.below(3));
  s.fy = 1.0 + static_cast<double>(rng.below(3));
  s.phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double travel = static_cast<double>(frames > 0 ? frames - 1 : 0);

  auto place = [&](Shape2d shape) {
    const double max_speed = still ? 0.0 : 0.03 * r;
    shape.vx = rng.uniform(-max_speed, max_speed);
    shape.vy = rng.uniform(-max_speed, max_speed);
    // Keep the whole trajectory inside the frame.
    auto center = [&](double extent, double v) {
      const double lo = extent + std::max(0.0, -v * travel);
      const double hi = r - extent - std::max(0.0, v * travel);
      return rng.uniform(lo, std::max(lo, hi));
    };
    shape.cx = center(shape.rx, shape.vx);
    shape.cy = center(shape.ry, shape.vy);
    s.shapes.push_back(shape);
  };

  Shape2d disc;
  disc.kind = Shape2d::Kind::kDisc;
  disc.rx = disc.ry = rng.uniform(0.16, 0.22) * r;
  disc.intensity = rng.uniform(0.75, 0.85);
  place(disc);

  Shape2d rect;
  rect.kind = Shape2d::Kind::kRect;
  rect.rx = rng.uniform(0.08, 0.14) * r;
  rect.ry = rng.uniform(0.08, 0.14) * r;
  rect.intensity = rng.uniform(0.6, 0.7);
  place(rect);
  return s;
}

Clip render_clip(const Scene& scene, std::size_t frames,
                 const std::array<std::size_t, kStages>& channels, std::uint64_t feature_seed) {
  const std::size_t r = scene.resolution;
  if (r == 0 || r % 32 != 0) throw ConfigError("clip resolution must be a multiple of 32");
  if (frames == 0) throw ConfigError("clip needs at least one frame");

  Rng rng(feature_seed);
  std::array<DenseArray, kStages> proj_a, proj_m;
  for (std::size_t l = 0; l < kStages; ++l) {
    proj_a[l] = rng.normal_array({kAppearanceStats, channels[l]},
                                 2.0 / std::sqrt(static_cast<double>(kAppearanceStats)));
    proj_m[l] = rng.normal_array({kMotionStats, channels[l]},
                                 1.0 / std::sqrt(static_cast<double>(kMotionStats)));
  }

  std::vector<DenseArray> images, masks, vxs, vys;
  for (std::size_t t = 0; t < frames; ++t) {
    DenseArray mask({r, r}), vx({r, r}), vy({r, r});
    images.push_back(render_image(scene, t, &mask, &vx, &vy));
    masks.push_back(std::move(mask));
    vxs.push_back(std::move(vx));
    vys.push_back(std::move(vy));
  }

  Clip clip;
  for (std::size_t t = 0; t < frames; ++t) {
    DenseArray dt({r, r});
    if (frames > 1) {
      const std::size_t a = t + 1 < frames ? t : t - 1;
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] = images[a + 1][i] - images[a][i];
    }
    Frame f;
    f.image = images[t];
    f.mask = masks[t];
    const std::size_t s1 = 4, side1 = r / s1;
    f.target = DenseArray({side1, side1});
    for (std::size_t py = 0; py < side1; ++py)
      for (std::size_t px = 0; px < side1; ++px) {
        double cover = 0.0;
        for (std::size_t y = py * s1; y < (py + 1) * s1; ++y)
          for (std::size_t x = px * s1; x < (px + 1) * s1; ++x) cover += masks[t](y, x);
        f.target(py, px) = cover * 2.0 >= static_cast<double>(s1 * s1) ? 1.0 : 0.0;
      }
    for (std::size_t l = 0; l < kStages; ++l) {
      const std::size_t s = std::size_t{4} << l;
      f.appearance.stages[l] = project(appearance_stats(images[t], s), proj_a[l], r / s);
      f.motion.stages[l] = project(motion_stats(vxs[t], vys[t], dt, s), proj_m[l], r / s);
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

Clip synth_clip(std::uint64_t seed, std::size_t resolution, std::size_t frames,
                const std::array<std::size_t, kStages>& channels, bool still) {
  if (resolution == 0 || resolution % 32 != 0) {
    throw ConfigError("clip resolution must be a multiple of 32, got " + std::to_string(resolution));
  }
  const Scene scene = random_scene(seed, resolution, frames, still);
  return render_clip(scene, frames, channels, seed ^ 0x9e3779b97f4a7c15ULL);
}

Clip synth_clip(const IsomerConfig& cfg) {
  return synth_clip(cfg.data_seed, cfg.resolution, cfg.frames, cfg.channels);
}

}  // namespace isomer::pipeline
