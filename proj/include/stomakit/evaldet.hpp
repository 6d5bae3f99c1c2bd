#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stomakit/error.hpp"
#include "stomakit/rotgeom.hpp"
#include "stomakit/rotated_box.hpp"

namespace stomakit::eval {

struct MatchCounts {
  std::size_t n_tp = 0;
  std::size_t n_fp = 0;
  std::size_t n_fn = 0;
};

// One scored detection, flagged after matching. Entries are ordered by
// descending score; ties keep input order.
struct DetectionFlag {
  std::size_t det_index = 0;
  double score = 0.0;
  bool is_tp = false;
};

struct MatchResult {
  MatchCounts counts;
  std::vector<DetectionFlag> flags;
};

// Greedy per-image matching for one class. Detections are taken in
// descending score order (stable on ties); each is assigned to the unmatched
// ground-truth box of the same class with the highest rotated IoU at or
// above the threshold. IoU ties go to the lowest ground-truth index.
inline MatchResult match(const std::vector<LabeledBox>& gt,
                         const std::vector<LabeledBox>& det, Label cls,
                         double iou_threshold) {
  std::vector<const RotatedBox*> gt_boxes;
  for (const LabeledBox& g : gt) {
    if (g.label == cls) gt_boxes.push_back(&g.box);
  }

  std::vector<DetectionFlag> flags;
  for (std::size_t i = 0; i < det.size(); ++i) {
    if (det[i].label != cls) continue;
    if (!det[i].score) {
      throw Error(ErrorCode::MissingField, "detection without score");
    }
    flags.push_back({i, *det[i].score, false});
  }
  std::stable_sort(flags.begin(), flags.end(),
                   [](const DetectionFlag& a, const DetectionFlag& b) {
                     return a.score > b.score;
                   });

  std::vector<bool> taken(gt_boxes.size(), false);
  for (DetectionFlag& f : flags) {
    const RotatedBox& box = det[f.det_index].box;
    double best_iou = 0.0;
    std::size_t best = gt_boxes.size();
    for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
      if (taken[j]) continue;
      const double iou = geom::rotated_iou(box, *gt_boxes[j]);
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best = j;
      }
    }
    if (best < gt_boxes.size()) {
      taken[best] = true;
      f.is_tp = true;
    }
  }

  MatchResult result;
  result.flags = std::move(flags);
  for (const DetectionFlag& f : result.flags) {
    f.is_tp ? ++result.counts.n_tp : ++result.counts.n_fp;
  }
  result.counts.n_fn = gt_boxes.size() - result.counts.n_tp;
  return result;
}

struct Pr {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 ratios are defined as 0.
inline Pr precision_recall_f1(const MatchCounts& c) {
  Pr pr;
  const double tp = static_cast<double>(c.n_tp);
  if (c.n_tp + c.n_fp > 0) pr.precision = tp / static_cast<double>(c.n_tp + c.n_fp);
  if (c.n_tp + c.n_fn > 0) pr.recall = tp / static_cast<double>(c.n_tp + c.n_fn);
  if (pr.precision + pr.recall > 0.0) {
    pr.f1 = 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall);
  }
  return pr;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// Points ordered by descending score threshold; recall is non-decreasing
// along the list.
struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t total_gt = 0;
};

namespace detail {

// Pools per-image match flags for one class across the dataset, ordered by
// descending score (stable across image order, then input order).
inline std::vector<DetectionFlag> pooled_flags(
    const std::vector<std::vector<LabeledBox>>& gt_images,
    const std::vector<std::vector<LabeledBox>>& det_images, Label cls,
    double iou_threshold, std::size_t& total_gt) {
  if (gt_images.size() != det_images.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "ground truth and detection image counts differ");
  }
  total_gt = 0;
  std::vector<DetectionFlag> pooled;
  for (std::size_t i = 0; i < gt_images.size(); ++i) {
    MatchResult r = match(gt_images[i], det_images[i], cls, iou_threshold);
    total_gt += r.counts.n_tp + r.counts.n_fn;
    pooled.insert(pooled.end(), r.flags.begin(), r.flags.end());
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const DetectionFlag& a, const DetectionFlag& b) {
                     return a.score > b.score;
                   });
  return pooled;
}

}  // namespace detail

inline PrCurve pr_curve(const std::vector<std::vector<LabeledBox>>& gt_images,
                        const std::vector<std::vector<LabeledBox>>& det_images,
                        Label cls, double iou_threshold) {
  PrCurve curve;
  const auto pooled = detail::pooled_flags(gt_images, det_images, cls,
                                           iou_threshold, curve.total_gt);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    if (pooled[k].is_tp) ++tp;
    PrPoint p;
    p.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    p.recall = curve.total_gt == 0
                   ? 0.0
                   : static_cast<double>(tp) / static_cast<double>(curve.total_gt);
    curve.points.push_back(p);
  }
  return curve;
}

// All-point (continuous) interpolation: the precision envelope is made
// non-increasing in recall and integrated as sum((R_k - R_{k-1}) * P_env_k).
inline double ap_from_curve(const PrCurve& curve) {
  double ap = 0.0;
  double env = 0.0;
  for (std::size_t k = curve.points.size(); k-- > 0;) {
    const PrPoint& p = curve.points[k];
    env = std::max(env, p.precision);
    const double prev_recall = k == 0 ? 0.0 : curve.points[k - 1].recall;
    ap += (p.recall - prev_recall) * env;
  }
  return ap;
}

// Pooled average precision for one class. Throws NoGroundTruth when the
// class never appears in the ground truth (AP undefined).
inline double average_precision(
    const std::vector<std::vector<LabeledBox>>& gt_images,
    const std::vector<std::vector<LabeledBox>>& det_images, Label cls,
    double iou_threshold) {
  const PrCurve curve = pr_curve(gt_images, det_images, cls, iou_threshold);
  if (curve.total_gt == 0) {
    throw Error(ErrorCode::NoGroundTruth,
                std::string("no ground truth for class ") + label_name(cls));
  }
  return ap_from_curve(curve);
}

inline double mean_ap(const std::vector<double>& aps) {
  if (aps.empty()) {
    throw Error(ErrorCode::AllClassesSkipped,
                "no class has a defined average precision");
  }
  double sum = 0.0;
  for (double ap : aps) sum += ap;
  return sum / static_cast<double>(aps.size());
}

// Operating point and AP for one class, as reported by the evaluate command.
// Precision/recall/F1 are taken at the score cut that maximizes F1 (the
// first such cut when tied, i.e. the highest threshold).
struct ClassSummary {
  Label label = Label::Stoma;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f1_threshold = 1.0;
  double ap = 0.0;
  bool ap_defined = false;
};

struct DatasetSummary {
  std::vector<ClassSummary> classes;
  double map = 0.0;
};

inline DatasetSummary evaluate_dataset(
    const std::vector<std::vector<LabeledBox>>& gt_images,
    const std::vector<std::vector<LabeledBox>>& det_images,
    double iou_threshold) {
  DatasetSummary summary;
  std::vector<double> aps;
  for (Label cls : {Label::Stoma, Label::Aperture}) {
    ClassSummary cs;
    cs.label = cls;
    std::size_t total_gt = 0;
    const auto pooled =
        detail::pooled_flags(gt_images, det_images, cls, iou_threshold, total_gt);

    std::size_t tp = 0;
    double best_f1 = 0.0;
    for (std::size_t k = 0; k < pooled.size(); ++k) {
      if (pooled[k].is_tp) ++tp;
      MatchCounts c;
      c.n_tp = tp;
      c.n_fp = k + 1 - tp;
      c.n_fn = total_gt - tp;
      const Pr pr = precision_recall_f1(c);
      if (pr.f1 > best_f1) {
        best_f1 = pr.f1;
        cs.precision = pr.precision;
        cs.recall = pr.recall;
        cs.f1 = pr.f1;
        cs.f1_threshold = pooled[k].score;
      }
    }
    if (total_gt > 0) {
      PrCurve curve;
      curve.total_gt = total_gt;
      std::size_t ctp = 0;
      for (std::size_t k = 0; k < pooled.size(); ++k) {
        if (pooled[k].is_tp) ++ctp;
        curve.points.push_back(
            {static_cast<double>(ctp) / static_cast<double>(total_gt),
             static_cast<double>(ctp) / static_cast<double>(k + 1)});
      }
      cs.ap = ap_from_curve(curve);
      cs.ap_defined = true;
      aps.push_back(cs.ap);
    }
    summary.classes.push_back(cs);
  }
  summary.map = mean_ap(aps);
  return summary;
}

}  // namespace stomakit::eval
