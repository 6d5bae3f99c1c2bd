#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "stomakit/error.hpp"
#include "stomakit/gray_image.hpp"
#include "stomakit/random.hpp"
#include "stomakit/rotated_box.hpp"

namespace stomakit::synth {

struct SceneParams {
  int image_w = 640;
  int image_h = 640;
  int n_stomata = 8;
  double len_min_um = 22.0;
  double len_max_um = 30.0;
  double wid_min_um = 14.0;
  double wid_max_um = 22.0;
  double aperture_scale_min = 0.5;
  double aperture_scale_max = 0.8;
  double min_separation_px = 80.0;
  double background_noise_sigma = 0.02;
  double pixels_per_100um = 224.0;
  std::uint64_t seed = 0;
};

// A rendered stomatal scene with exact ground truth. Each stoma is a filled
// rotated ellipse (dark rim, lighter pore); its tight rotated bounding box
// is the truth box, so recovered phenotypes match the generator exactly.
struct Scene {
  GrayImage image;
  LabeledImage truth;
};

namespace detail {

struct Placement {
  double cx, cy, len_px, wid_px, angle, aperture_scale, rim, pore;
};

inline void validate(const SceneParams& p) {
  const bool ranges_ok =
      p.len_min_um > 0 && p.len_max_um >= p.len_min_um && p.wid_min_um > 0 &&
      p.wid_max_um >= p.wid_min_um && p.aperture_scale_min > 0 &&
      p.aperture_scale_max >= p.aperture_scale_min && p.aperture_scale_max < 1;
  if (!ranges_ok || p.image_w < 1 || p.image_h < 1 || p.n_stomata < 0 ||
      p.min_separation_px < 0 || p.background_noise_sigma < 0 ||
      !(p.pixels_per_100um > 0)) {
    throw Error(ErrorCode::BadParams, "invalid scene parameters");
  }
}

}  // namespace detail

inline Scene generate_scene(const SceneParams& p) {
  detail::validate(p);
  Rng rng(p.seed);

  Scene scene;
  scene.image = make_image(p.image_w, p.image_h);
  scene.truth.image_id = "scene";
  scene.truth.width = p.image_w;
  scene.truth.height = p.image_h;

  const double px_per_um = p.pixels_per_100um / 100.0;
  const double max_half_diag =
      0.5 * std::hypot(p.len_max_um, p.wid_max_um) * px_per_um;
  const double margin = max_half_diag + 2.0;

  // Rejection-sampled placement with a minimum center separation; bounded
  // attempt budget across the whole scene.
  std::vector<detail::Placement> placements;
  int attempts = 0;
  while (static_cast<int>(placements.size()) < p.n_stomata) {
    if (++attempts > 10000) {
      throw Error(ErrorCode::PackingInfeasible,
                  "could not place all stomata within the attempt budget");
    }
    if (p.image_w <= 2 * margin || p.image_h <= 2 * margin) {
      throw Error(ErrorCode::PackingInfeasible, "image too small for the boxes");
    }
    detail::Placement c;
    c.cx = rng.uniform(margin, p.image_w - margin);
    c.cy = rng.uniform(margin, p.image_h - margin);
    bool ok = true;
    for (const detail::Placement& q : placements) {
      if (std::hypot(c.cx - q.cx, c.cy - q.cy) < p.min_separation_px) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    double len_um = rng.uniform(p.len_min_um, p.len_max_um);
    double wid_um = rng.uniform(p.wid_min_um, p.wid_max_um);
    if (wid_um > len_um) std::swap(len_um, wid_um);
    c.len_px = len_um * px_per_um;
    c.wid_px = wid_um * px_per_um;
    c.angle = rng.uniform(0.0, std::numbers::pi);
    c.aperture_scale = rng.uniform(p.aperture_scale_min, p.aperture_scale_max);
    c.rim = rng.uniform(0.25, 0.35);
    c.pore = rng.uniform(0.50, 0.60);
    placements.push_back(c);
  }

  // Background: flat field plus seeded Gaussian noise.
  for (double& v : scene.image.data) {
    v = std::clamp(0.78 + rng.normal(0.0, p.background_noise_sigma), 0.0, 1.0);
  }

  for (const detail::Placement& c : placements) {
    const double a = 0.5 * c.len_px;
    const double b = 0.5 * c.wid_px;
    const double cos_t = std::cos(c.angle);
    const double sin_t = std::sin(c.angle);
    const double r = std::hypot(a, b);
    const int y0 = std::max(0, static_cast<int>(std::floor(c.cy - r)));
    const int y1 = std::min(p.image_h - 1, static_cast<int>(std::ceil(c.cy + r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(c.cx - r)));
    const int x1 = std::min(p.image_w - 1, static_cast<int>(std::ceil(c.cx + r)));
    const double s = c.aperture_scale;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - c.cx;
        const double dy = y - c.cy;
        const double u = (dx * cos_t + dy * sin_t) / a;
        const double v = (-dx * sin_t + dy * cos_t) / b;
        const double rho = u * u + v * v;
        if (rho > 1.0) continue;
        scene.image.at(y, x) = rho <= s * s ? c.pore : c.rim;
      }
    }

    LabeledBox stoma;
    stoma.label = Label::Stoma;
    stoma.box = RotatedBox{c.cx, c.cy, c.len_px, c.wid_px, c.angle}.canonical();
    scene.truth.boxes.push_back(stoma);
    LabeledBox aperture;
    aperture.label = Label::Aperture;
    aperture.box =
        RotatedBox{c.cx, c.cy, s * c.len_px, s * c.wid_px, c.angle}.canonical();
    scene.truth.boxes.push_back(aperture);
  }
  return scene;
}

// Turns ground truth into scored pseudo-detections: each kept box is
// jittered in center and angle and scored U(0.7, 1.0); boxes drop with
// probability fn_rate; round(fp_rate * n) background boxes with scores
// U(0.1, 0.6) are appended. Deterministic per seed.
inline LabeledImage perturb(const LabeledImage& truth, double jitter_px,
                            double angle_jitter_rad, double fp_rate,
                            double fn_rate, std::uint64_t seed) {
  if (fp_rate < 0.0 || fp_rate >= 1.0 || fn_rate < 0.0 || fn_rate >= 1.0) {
    throw Error(ErrorCode::BadParams, "rates must lie in [0,1)");
  }
  Rng rng(seed);
  LabeledImage out;
  out.image_id = truth.image_id;
  out.width = truth.width;
  out.height = truth.height;

  double len_lo = 20.0, len_hi = 60.0;
  if (!truth.boxes.empty()) {
    len_lo = len_hi = truth.boxes.front().box.long_axis();
    for (const LabeledBox& lb : truth.boxes) {
      len_lo = std::min(len_lo, lb.box.short_axis());
      len_hi = std::max(len_hi, lb.box.long_axis());
    }
  }

  for (const LabeledBox& lb : truth.boxes) {
    if (rng.u01() < fn_rate) continue;
    LabeledBox det = lb;
    det.box.cx = std::clamp(det.box.cx + rng.uniform(-jitter_px, jitter_px),
                            0.0, truth.width);
    det.box.cy = std::clamp(det.box.cy + rng.uniform(-jitter_px, jitter_px),
                            0.0, truth.height);
    det.box.angle += rng.uniform(-angle_jitter_rad, angle_jitter_rad);
    det.box = det.box.canonical();
    det.score = rng.uniform(0.7, 1.0);
    out.boxes.push_back(det);
  }

  const std::size_t n_fp = static_cast<std::size_t>(
      std::lround(fp_rate * static_cast<double>(truth.boxes.size())));
  for (std::size_t i = 0; i < n_fp; ++i) {
    LabeledBox fp;
    fp.label = rng.u01() < 0.5 ? Label::Stoma : Label::Aperture;
    const double len = rng.uniform(len_lo, len_hi);
    const double wid = rng.uniform(0.5 * len, len);
    fp.box = RotatedBox{rng.uniform(0.0, truth.width),
                        rng.uniform(0.0, truth.height), len, wid,
                        rng.uniform(0.0, std::numbers::pi)}
                 .canonical();
    fp.score = rng.uniform(0.1, 0.6);
    out.boxes.push_back(fp);
  }
  return out;
}

}  // namespace stomakit::synth
