#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "stomakit/error.hpp"

namespace stomakit::netops {

// Dense C x H x W tensor, channel-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  static FeatureMap zeros(int c, int h, int w) {
    if (c < 1 || h < 1 || w < 1) {
      throw Error(ErrorCode::ShapeMismatch, "feature map dims must be >= 1");
    }
    FeatureMap f;
    f.channels = c;
    f.height = h;
    f.width = w;
    f.values.assign(static_cast<std::size_t>(c) * h * w, 0.0);
    return f;
  }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double& at(int c, int y, int x) { return values[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values[index(c, y, x)]; }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Per-target-cell sampling offsets in source pixel units.
struct OffsetField {
  int height = 0;
  int width = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  static OffsetField zeros(int h, int w) {
    OffsetField f;
    f.height = h;
    f.width = w;
    f.dx.assign(static_cast<std::size_t>(h) * w, 0.0);
    f.dy.assign(static_cast<std::size_t>(h) * w, 0.0);
    return f;
  }

  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

struct FilterParams {
  int groups = 1;
  std::vector<double> alpha;  // per-channel scale
  std::vector<double> beta;   // per-channel shift
  double threshold = 0.5;     // nominal domain (0,1)
  double epsilon = 1e-5;
};

enum class ReverseMode {
  ChannelReverse,  // reverse the channel order of the gated map
  Complement,      // weight by (1 - w2) instead
};

namespace detail {

inline void require_shape(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace detail

// Offset-guided resampling. Each target cell (y, x) samples the source at
// (y * H/out_h + dy, x * W/out_w + dx) with bilinear interpolation; sample
// coordinates are clamped to the source borders. With zero offsets and
// matching dims this is the identity.
inline FeatureMap resample_with_offsets(const FeatureMap& src,
                                        const OffsetField& offsets, int out_h,
                                        int out_w) {
  detail::require_shape(offsets.height == out_h && offsets.width == out_w,
                        "offset field must match the output grid");
  FeatureMap out = FeatureMap::zeros(src.channels, out_h, out_w);
  const double sy_scale = static_cast<double>(src.height) / out_h;
  const double sx_scale = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const std::size_t oi = offsets.index(y, x);
      double sy = y * sy_scale + offsets.dy[oi];
      double sx = x * sx_scale + offsets.dx[oi];
      sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
      sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, src.height - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fy = sy - y0;
      const double fx = sx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top =
            src.at(c, y0, x0) * (1.0 - fx) + src.at(c, y0, x1) * fx;
        const double bottom =
            src.at(c, y1, x0) * (1.0 - fx) + src.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

// Spatially weighted sum of aligned maps: out = sum_i w_i ⊙ f_i, with each
// weight map shared across channels and valued in [0,1]. `normalize` divides
// by the per-pixel weight sum; pixels whose weights sum to zero stay zero.
inline FeatureMap weighted_fusion(const std::vector<FeatureMap>& maps,
                                  const std::vector<FeatureMap>& weights,
                                  bool normalize = false) {
  detail::require_shape(!maps.empty() && maps.size() == weights.size(),
                        "need one weight map per feature map");
  for (const FeatureMap& f : maps) {
    detail::require_shape(f.same_shape(maps.front()),
                          "feature maps must share a shape");
  }
  for (const FeatureMap& w : weights) {
    detail::require_shape(w.channels == 1 && w.height == maps.front().height &&
                              w.width == maps.front().width,
                          "weight maps must be 1 x H x W");
    for (double v : w.values) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::WeightOutOfRange,
                    "fusion weights must lie in [0,1]");
      }
    }
  }

  const FeatureMap& ref = maps.front();
  FeatureMap out = FeatureMap::zeros(ref.channels, ref.height, ref.width);
  const std::size_t plane = static_cast<std::size_t>(ref.height) * ref.width;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (int c = 0; c < ref.channels; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        out.values[base + p] += weights[i].values[p] * maps[i].values[base + p];
      }
    }
  }
  if (normalize) {
    for (std::size_t p = 0; p < plane; ++p) {
      double sum = 0.0;
      for (const FeatureMap& w : weights) sum += w.values[p];
      for (int c = 0; c < ref.channels; ++c) {
        double& v = out.values[static_cast<std::size_t>(c) * plane + p];
        v = sum > 0.0 ? v / sum : 0.0;
      }
    }
  }
  return out;
}

namespace detail {

inline void validate_filter(const FeatureMap& f, const FilterParams& p) {
  require_shape(p.groups >= 1 && f.channels % p.groups == 0,
                "channel count must be divisible by groups");
  require_shape(p.alpha.size() == static_cast<std::size_t>(f.channels) &&
                    p.beta.size() == static_cast<std::size_t>(f.channels),
                "alpha/beta must have one entry per channel");
}

}  // namespace detail

// Group normalization: per group, subtract the mean and divide by
// sqrt(var + eps) (population variance), then scale by alpha_c and shift by
// beta_c.
inline FeatureMap group_normalize(const FeatureMap& f, const FilterParams& p) {
  detail::validate_filter(f, p);
  const int per_group = f.channels / p.groups;
  const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
  const std::size_t group_n = per_group * plane;
  FeatureMap out = f;
  for (int g = 0; g < p.groups; ++g) {
    const std::size_t base = static_cast<std::size_t>(g) * group_n;
    double mean = 0.0;
    for (std::size_t i = 0; i < group_n; ++i) mean += f.values[base + i];
    mean /= static_cast<double>(group_n);
    double var = 0.0;
    for (std::size_t i = 0; i < group_n; ++i) {
      const double d = f.values[base + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(group_n);
    const double inv_std = 1.0 / std::sqrt(var + p.epsilon);
    for (int cc = 0; cc < per_group; ++cc) {
      const int c = g * per_group + cc;
      const std::size_t cbase = base + static_cast<std::size_t>(cc) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out.values[cbase + i] =
            p.alpha[c] * (f.values[cbase + i] - mean) * inv_std + p.beta[c];
      }
    }
  }
  return out;
}

// Channel importance weights w_c = alpha_c / sum_j alpha_j.
inline std::vector<double> information_weights(const std::vector<double>& alpha) {
  double sum = 0.0;
  for (double a : alpha) sum += a;
  if (sum == 0.0) {
    throw Error(ErrorCode::DegenerateAlpha, "alpha sums to zero");
  }
  std::vector<double> w(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) w[i] = alpha[i] / sum;
  return w;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SplitWeights {
  FeatureMap w1;  // informative gate
  FeatureMap w2;  // non-informative gate
};

// Elementwise gate split: s = sigmoid(w_c * normalized). Values at most the
// threshold pass through into w1, values above it saturate w1 to 1; w2 keeps
// values at or above the threshold and zeroes the rest. At s == threshold
// both gates carry s. For all elements 0 <= w2 <= w1 <= 1.
inline SplitWeights split_weights(const std::vector<double>& channel_weights,
                                  const FeatureMap& normalized,
                                  double threshold) {
  detail::require_shape(
      channel_weights.size() == static_cast<std::size_t>(normalized.channels),
      "need one channel weight per channel");
  SplitWeights out{normalized, normalized};
  const std::size_t plane =
      static_cast<std::size_t>(normalized.height) * normalized.width;
  for (int c = 0; c < normalized.channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double s = sigmoid(channel_weights[c] * normalized.values[base + i]);
      out.w1.values[base + i] = s <= threshold ? s : 1.0;
      out.w2.values[base + i] = s >= threshold ? s : 0.0;
    }
  }
  return out;
}

// Recombination of the gated maps: w1 ⊙ f plus the "reversed" w2 ⊙ f, where
// reversal flips the channel order (default) or complements the gate.
inline FeatureMap reconstruct(const FeatureMap& f, const FeatureMap& w1,
                              const FeatureMap& w2,
                              ReverseMode mode = ReverseMode::ChannelReverse) {
  detail::require_shape(f.same_shape(w1) && f.same_shape(w2),
                        "gates must match the feature map shape");
  FeatureMap out = FeatureMap::zeros(f.channels, f.height, f.width);
  const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
  for (int c = 0; c < f.channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * plane;
    if (mode == ReverseMode::ChannelReverse) {
      const std::size_t rbase =
          static_cast<std::size_t>(f.channels - 1 - c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out.values[base + i] = w1.values[base + i] * f.values[base + i] +
                               w2.values[rbase + i] * f.values[rbase + i];
      }
    } else {
      for (std::size_t i = 0; i < plane; ++i) {
        out.values[base + i] = w1.values[base + i] * f.values[base + i] +
                               (1.0 - w2.values[base + i]) * f.values[base + i];
      }
    }
  }
  return out;
}

// Full filter pass: group_normalize -> information_weights -> split_weights
// -> reconstruct, in that order. The gates derive from the normalized map;
// the reconstruction applies them to the original input.
inline FeatureMap filter_forward(const FeatureMap& f, const FilterParams& p,
                                 ReverseMode mode = ReverseMode::ChannelReverse) {
  const FeatureMap normalized = group_normalize(f, p);
  const std::vector<double> w = information_weights(p.alpha);
  const SplitWeights gates = split_weights(w, normalized, p.threshold);
  return reconstruct(f, gates.w1, gates.w2, mode);
}

// ---------------------------------------------------------------------------
// Analytic gradients (verified against central finite differences in the
// test suite)
// ---------------------------------------------------------------------------

struct GroupNormGrad {
  FeatureMap d_input;
  std::vector<double> d_alpha;
  std::vector<double> d_beta;
};

inline GroupNormGrad group_normalize_backward(const FeatureMap& input,
                                              const FilterParams& p,
                                              const FeatureMap& upstream) {
  detail::validate_filter(input, p);
  detail::require_shape(input.same_shape(upstream),
                        "upstream gradient must match the input shape");
  const int per_group = input.channels / p.groups;
  const std::size_t plane = static_cast<std::size_t>(input.height) * input.width;
  const std::size_t group_n = per_group * plane;

  GroupNormGrad grad;
  grad.d_input = FeatureMap::zeros(input.channels, input.height, input.width);
  grad.d_alpha.assign(input.channels, 0.0);
  grad.d_beta.assign(input.channels, 0.0);

  std::vector<double> xhat(group_n);
  std::vector<double> gscaled(group_n);
  for (int g = 0; g < p.groups; ++g) {
    const std::size_t base = static_cast<std::size_t>(g) * group_n;
    double mean = 0.0;
    for (std::size_t i = 0; i < group_n; ++i) mean += input.values[base + i];
    mean /= static_cast<double>(group_n);
    double var = 0.0;
    for (std::size_t i = 0; i < group_n; ++i) {
      const double d = input.values[base + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(group_n);
    const double inv_std = 1.0 / std::sqrt(var + p.epsilon);

    double mean_g = 0.0;
    double mean_gx = 0.0;
    for (int cc = 0; cc < per_group; ++cc) {
      const int c = g * per_group + cc;
      const std::size_t cbase = static_cast<std::size_t>(cc) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = cbase + i;
        xhat[k] = (input.values[base + k] - mean) * inv_std;
        const double up = upstream.values[base + k];
        gscaled[k] = up * p.alpha[c];
        grad.d_alpha[c] += up * xhat[k];
        grad.d_beta[c] += up;
        mean_g += gscaled[k];
        mean_gx += gscaled[k] * xhat[k];
      }
    }
    mean_g /= static_cast<double>(group_n);
    mean_gx /= static_cast<double>(group_n);
    for (std::size_t k = 0; k < group_n; ++k) {
      grad.d_input.values[base + k] =
          inv_std * (gscaled[k] - mean_g - xhat[k] * mean_gx);
    }
  }
  return grad;
}

struct SplitGrad {
  FeatureMap d_normalized;
  std::vector<double> d_channel_weights;
};

// Gradient of the gate split. The clamped branches (w1 == 1, w2 == 0) have
// zero slope; elements exactly at the threshold follow the sigmoid branch of
// both gates.
inline SplitGrad split_weights_backward(const std::vector<double>& channel_weights,
                                        const FeatureMap& normalized,
                                        double threshold,
                                        const FeatureMap& upstream_w1,
                                        const FeatureMap& upstream_w2) {
  detail::require_shape(
      channel_weights.size() == static_cast<std::size_t>(normalized.channels),
      "need one channel weight per channel");
  detail::require_shape(normalized.same_shape(upstream_w1) &&
                            normalized.same_shape(upstream_w2),
                        "upstream gradients must match the gate shape");
  SplitGrad grad;
  grad.d_normalized =
      FeatureMap::zeros(normalized.channels, normalized.height, normalized.width);
  grad.d_channel_weights.assign(channel_weights.size(), 0.0);
  const std::size_t plane =
      static_cast<std::size_t>(normalized.height) * normalized.width;
  for (int c = 0; c < normalized.channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = normalized.values[base + i];
      const double s = sigmoid(channel_weights[c] * v);
      const double slope = s * (1.0 - s);
      double up = 0.0;
      if (s <= threshold) up += upstream_w1.values[base + i];
      if (s >= threshold) up += upstream_w2.values[base + i];
      grad.d_normalized.values[base + i] = up * slope * channel_weights[c];
      grad.d_channel_weights[c] += up * slope * v;
    }
  }
  return grad;
}

struct FusionGrad {
  std::vector<FeatureMap> d_maps;
  std::vector<FeatureMap> d_weights;
};

// Gradient of the (non-normalized) weighted fusion.
inline FusionGrad weighted_fusion_backward(const std::vector<FeatureMap>& maps,
                                           const std::vector<FeatureMap>& weights,
                                           const FeatureMap& upstream) {
  detail::require_shape(!maps.empty() && maps.size() == weights.size(),
                        "need one weight map per feature map");
  detail::require_shape(upstream.same_shape(maps.front()),
                        "upstream gradient must match the map shape");
  FusionGrad grad;
  const FeatureMap& ref = maps.front();
  const std::size_t plane = static_cast<std::size_t>(ref.height) * ref.width;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    FeatureMap dm = FeatureMap::zeros(ref.channels, ref.height, ref.width);
    FeatureMap dw = FeatureMap::zeros(1, ref.height, ref.width);
    for (int c = 0; c < ref.channels; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        dm.values[base + p] = weights[i].values[p] * upstream.values[base + p];
        dw.values[p] += maps[i].values[base + p] * upstream.values[base + p];
      }
    }
    grad.d_maps.push_back(std::move(dm));
    grad.d_weights.push_back(std::move(dw));
  }
  return grad;
}

}  // namespace stomakit::netops
