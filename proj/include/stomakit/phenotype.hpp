#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "stomakit/error.hpp"
#include "stomakit/rotgeom.hpp"
#include "stomakit/rotated_box.hpp"

namespace stomakit::pheno {

// Pixel scale: how many pixels span 100 um. Default matches the handheld
// microscope setup this toolkit was built around.
struct Calibration {
  double pixels_per_100um = 224.0;

  double um_per_px() const { return 100.0 / pixels_per_100um; }
};

inline void validate(const Calibration& cal) {
  if (!(cal.pixels_per_100um > 0.0) || !std::isfinite(cal.pixels_per_100um)) {
    throw Error(ErrorCode::NonPositiveInput,
                "pixels_per_100um must be positive and finite");
  }
}

// Which measured length feeds the maximum-pore-area term of the conductance
// formula. The pore (aperture) long axis is the default; the stoma long axis
// is kept selectable because the two readings cannot be distinguished from
// the reported tables alone.
enum class GammaLengthSource { ApertureLongAxis, StomaLongAxis };

// Guard-cell width is not directly annotated. The derived rule takes half of
// the short-axis difference between stoma and aperture; a constant override
// is available for instruments where the guard width is known.
enum class GuardWidthRule { DerivedHalfDiff, Constant };

struct ConductanceParams {
  double f_diff_m2_s = 2.49e-5;    // diffusion coefficient of water in air
  double v_molar_m3_mol = 0.0224;  // molar volume of air
  GammaLengthSource gamma_source = GammaLengthSource::ApertureLongAxis;
  GuardWidthRule guard_rule = GuardWidthRule::DerivedHalfDiff;
  double guard_width_const_um = 0.0;
};

// One report row. "length" is always the long box axis, "width" the short
// one; aspect ratios are short/long in (0, 1]. Aperture traits and the
// conductance are NaN when an image has no aperture boxes.
struct PhenotypeRecord {
  double stoma_len_um = 0.0;
  double stoma_wid_um = 0.0;
  double stoma_aspect = 0.0;
  double aperture_len_um = 0.0;
  double aperture_wid_um = 0.0;
  double aperture_aspect = 0.0;
  double density_per_mm2 = 0.0;
  double gsmax_mol_m2_s = 0.0;
  double osn_tsn_ratio = 0.0;
};

struct BoxTraits {
  double length_um = 0.0;
  double width_um = 0.0;
  double aspect = 0.0;
  double area_um2 = 0.0;
};

// Physical traits of one box: long/short axis in um, short/long aspect
// ratio and the rectangle area width*length.
inline BoxTraits box_to_traits(const RotatedBox& box, const Calibration& cal) {
  validate(cal);
  const double scale = cal.um_per_px();
  BoxTraits t;
  t.length_um = box.long_axis() * scale;
  t.width_um = box.short_axis() * scale;
  t.aspect = t.width_um / t.length_um;
  t.area_um2 = t.width_um * t.length_um;
  return t;
}

// Stomata per square millimeter of imaged leaf area.
inline double density_per_mm2(std::size_t n_stomata, double image_w_px,
                              double image_h_px, const Calibration& cal) {
  validate(cal);
  if (!(image_w_px > 0.0) || !(image_h_px > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput, "image dimensions must be positive");
  }
  const double mm_per_px = cal.um_per_px() / 1000.0;
  const double area_mm2 = (image_w_px * mm_per_px) * (image_h_px * mm_per_px);
  return static_cast<double>(n_stomata) / area_mm2;
}

// Mean maximal pore opening area, pi*l^2/4, in m^2 for l in um.
inline double gamma_max_m2(double pore_length_um) {
  if (!(pore_length_um > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput, "pore length must be positive");
  }
  const double l_m = pore_length_um * 1e-6;
  return std::numbers::pi * l_m * l_m / 4.0;
}

// Anatomical maximum stomatal conductance, mol m^-2 s^-1:
//
//   G = f * D * gamma / (1.6 * v * (w + (pi/2) * sqrt(gamma / pi)))
//
// with D converted from mm^-2 to m^-2 and the guard width from um to m.
inline double gsmax(double density_per_mm2, double pore_length_um,
                    double guard_width_um, const ConductanceParams& params) {
  if (!(density_per_mm2 > 0.0) || !(pore_length_um > 0.0) ||
      !(guard_width_um > 0.0) || !(params.f_diff_m2_s > 0.0) ||
      !(params.v_molar_m3_mol > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput,
                "conductance inputs must all be positive");
  }
  const double density_m2 = density_per_mm2 * 1e6;
  const double gamma = gamma_max_m2(pore_length_um);
  const double guard_m = guard_width_um * 1e-6;
  const double depth = guard_m + (std::numbers::pi / 2.0) *
                                     std::sqrt(gamma / std::numbers::pi);
  return params.f_diff_m2_s * density_m2 * gamma /
         (1.6 * params.v_molar_m3_mol * depth);
}

// Fraction of stomata that are open: a stoma counts as open iff at least one
// aperture center lies strictly inside its rectangle.
inline double opening_ratio(const std::vector<RotatedBox>& stomata,
                            const std::vector<RotatedBox>& apertures) {
  if (stomata.empty()) {
    throw Error(ErrorCode::NoStomata, "opening ratio needs at least one stoma");
  }
  std::size_t open = 0;
  for (const RotatedBox& s : stomata) {
    for (const RotatedBox& a : apertures) {
      if (geom::contains_point(s, a.cx, a.cy, /*strict=*/true)) {
        ++open;
        break;
      }
    }
  }
  return static_cast<double>(open) / static_cast<double>(stomata.size());
}

// Per-image phenotype summary. Trait columns are per-class means; the aspect
// column is the mean of per-box short/long ratios (not the ratio of the mean
// axes). Conductance uses the configured pore-length source and guard-width
// rule; it is NaN when its inputs are unavailable or nonpositive.
inline PhenotypeRecord summarize(const LabeledImage& image,
                                 const Calibration& cal,
                                 const ConductanceParams& params = {}) {
  validate(cal);
  std::vector<RotatedBox> stomata, apertures;
  for (const LabeledBox& lb : image.boxes) {
    (lb.label == Label::Stoma ? stomata : apertures).push_back(lb.box);
  }
  if (stomata.empty()) {
    throw Error(ErrorCode::NoStomata, "image has no stoma boxes");
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto mean_traits = [&](const std::vector<RotatedBox>& boxes, double& len,
                         double& wid, double& aspect) {
    if (boxes.empty()) {
      len = wid = aspect = nan;
      return;
    }
    len = wid = aspect = 0.0;
    for (const RotatedBox& b : boxes) {
      const BoxTraits t = box_to_traits(b, cal);
      len += t.length_um;
      wid += t.width_um;
      aspect += t.aspect;
    }
    const double n = static_cast<double>(boxes.size());
    len /= n;
    wid /= n;
    aspect /= n;
  };

  PhenotypeRecord rec;
  mean_traits(stomata, rec.stoma_len_um, rec.stoma_wid_um, rec.stoma_aspect);
  mean_traits(apertures, rec.aperture_len_um, rec.aperture_wid_um,
              rec.aperture_aspect);
  rec.density_per_mm2 =
      density_per_mm2(stomata.size(), image.width, image.height, cal);
  rec.osn_tsn_ratio = opening_ratio(stomata, apertures);

  const double pore_len = params.gamma_source == GammaLengthSource::StomaLongAxis
                              ? rec.stoma_len_um
                              : rec.aperture_len_um;
  double guard_um = params.guard_width_const_um;
  if (params.guard_rule == GuardWidthRule::DerivedHalfDiff) {
    guard_um = (rec.stoma_wid_um - rec.aperture_wid_um) / 2.0;
  }
  if (std::isfinite(pore_len) && pore_len > 0.0 && std::isfinite(guard_um) &&
      guard_um > 0.0 && rec.density_per_mm2 > 0.0) {
    rec.gsmax_mol_m2_s = gsmax(rec.density_per_mm2, pore_len, guard_um, params);
  } else {
    rec.gsmax_mol_m2_s = nan;
  }
  return rec;
}

}  // namespace stomakit::pheno
