#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "stomakit/error.hpp"

namespace stomakit {

// Oriented rectangle: center (cx, cy), side lengths (w, h) and the rotation
// of the w-axis, counter-clockwise from the image x-axis, in radians.
//
// A rectangle has rotational period pi, and (cx, cy, w, h, t) describes the
// same rectangle as (cx, cy, h, w, t + pi/2). The canonical form fixes
// w >= h and angle in [0, pi); squares additionally use angle in [0, pi/2).
struct RotatedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double angle = 0.0;

  double long_axis() const { return std::max(w, h); }
  double short_axis() const { return std::min(w, h); }

  RotatedBox canonical() const {
    RotatedBox b = *this;
    b.angle = wrap_half_turn(b.angle);
    if (b.w < b.h) {
      std::swap(b.w, b.h);
      b.angle = wrap_half_turn(b.angle + std::numbers::pi / 2.0);
    }
    if (b.w == b.h) {
      b.angle = std::fmod(b.angle, std::numbers::pi / 2.0);
    }
    return b;
  }

  // Reduce an angle to [0, pi).
  static double wrap_half_turn(double a) {
    double r = std::fmod(a, std::numbers::pi);
    if (r < 0.0) r += std::numbers::pi;
    if (r >= std::numbers::pi) r = 0.0;
    return r;
  }
};

enum class Label { Stoma, Aperture };

inline const char* label_name(Label label) {
  return label == Label::Stoma ? "stoma" : "aperture";
}

inline Label parse_label(const std::string& name) {
  if (name == "stoma") return Label::Stoma;
  if (name == "aperture") return Label::Aperture;
  throw Error(ErrorCode::UnknownLabel, "unknown label \"" + name + "\"");
}

// A classified box; `score` is present for detections, absent for ground
// truth.
struct LabeledBox {
  RotatedBox box;
  Label label = Label::Stoma;
  std::optional<double> score;
};

struct LabeledImage {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<LabeledBox> boxes;
};

// Shared validation for both annotation ingest paths. Boxes may overhang the
// image edges but their centers may not leave it.
inline void validate_box_in_image(const RotatedBox& box, double image_w,
                                  double image_h) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw Error(ErrorCode::NonPositiveExtent,
                "box side lengths must be positive");
  }
  if (box.cx < 0.0 || box.cx > image_w || box.cy < 0.0 || box.cy > image_h) {
    throw Error(ErrorCode::CenterOutOfBounds,
                "box center lies outside the image");
  }
}

}  // namespace stomakit
