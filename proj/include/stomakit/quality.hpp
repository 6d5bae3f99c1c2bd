#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "stomakit/error.hpp"
#include "stomakit/gray_image.hpp"
#include "stomakit/random.hpp"

namespace stomakit::quality {

struct TailStats {
  double f_mean = 0.0;
  double f_std = 0.0;
};

namespace detail {

// FFTW plan creation/destruction is not thread-safe; execution is.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Power spectrum |F|^2 on the r2c half grid, row-major H x (W/2 + 1),
// unnormalized forward transform.
inline std::vector<double> power_spectrum_half(const GrayImage& img) {
  const int h = img.height, w = img.width;
  const int wh = w / 2 + 1;
  std::vector<double> in(img.data);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * wh);
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_dft_r2c_2d(h, w, in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  // FFTW_ESTIMATE leaves the input untouched, but re-copy in case the
  // planner clobbered it.
  std::copy(img.data.begin(), img.data.end(), in.begin());
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> power(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) power[i] = std::norm(out[i]);
  return power;
}

}  // namespace detail

// Tail statistics of the radially averaged spatial-frequency power spectrum.
//
// The 2-D power spectrum is averaged into floor(min(W,H)/2) radial bins over
// normalized frequency radius r = hypot(fx/W, fy/H), r <= 0.5 (the inscribed
// Nyquist disk; corner frequencies beyond it are discarded). f_mean / f_std
// are the mean and population standard deviation of the per-bin averages
// over the highest `tail_fraction` of bins. Low values mean blur: blurring
// drains power from exactly these bins. DC lands in bin 0 and never reaches
// the tail for tail_fraction < 1.
inline TailStats frequency_tail_stats(const GrayImage& img,
                                      double tail_fraction = 0.4) {
  if (img.width < 16 || img.height < 16) {
    throw Error(ErrorCode::ImageTooSmall,
                "frequency statistics need at least 16 px per side");
  }
  if (!(tail_fraction > 0.0) || !(tail_fraction < 1.0)) {
    throw Error(ErrorCode::BadParams, "tail_fraction must be in (0,1)");
  }
  const int h = img.height, w = img.width;
  const int nbins = std::min(w, h) / 2;
  const std::vector<double> power = detail::power_spectrum_half(img);

  std::vector<double> bin_sum(nbins, 0.0);
  std::vector<double> bin_weight(nbins, 0.0);
  const int wh = w / 2 + 1;
  for (int ky = 0; ky < h; ++ky) {
    const double fy = (ky <= h / 2 ? ky : ky - h) / static_cast<double>(h);
    for (int kx = 0; kx < wh; ++kx) {
      const double fx = kx / static_cast<double>(w);
      const double r = std::hypot(fx, fy);
      if (r > 0.5) continue;
      int bin = static_cast<int>(std::floor(r / 0.5 * nbins));
      if (bin >= nbins) bin = nbins - 1;
      // Columns 0 and W/2 (even W) are self-conjugate; the rest stand in
      // for their mirrored twin as well.
      const double mult =
          (kx == 0 || (w % 2 == 0 && kx == w / 2)) ? 1.0 : 2.0;
      bin_sum[bin] += mult * power[static_cast<std::size_t>(ky) * wh + kx];
      bin_weight[bin] += mult;
    }
  }

  int tail_count = static_cast<int>(std::lround(tail_fraction * nbins));
  tail_count = std::clamp(tail_count, 1, nbins - 1);
  double sum = 0.0, sum_sq = 0.0;
  int used = 0;
  for (int b = nbins - tail_count; b < nbins; ++b) {
    if (bin_weight[b] <= 0.0) continue;
    const double p = bin_sum[b] / bin_weight[b];
    sum += p;
    sum_sq += p * p;
    ++used;
  }
  TailStats stats;
  if (used > 0) {
    stats.f_mean = sum / used;
    const double var = sum_sq / used - stats.f_mean * stats.f_mean;
    stats.f_std = std::sqrt(std::max(0.0, var));
  }
  return stats;
}

// Shannon entropy (bits) of the intensity histogram over [0,1].
inline double histogram_entropy(const GrayImage& img, int bins = 256) {
  if (bins < 2) throw Error(ErrorCode::BadParams, "need at least 2 bins");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : img.data) {
    int b = static_cast<int>(std::clamp(v, 0.0, 1.0) * bins);
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  const double n = static_cast<double>(img.data.size());
  double entropy = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

// Per-instrument decision thresholds; both default to 0 so uncalibrated runs
// never flag an image as blurry.
struct Thresholds {
  double f_mean_min = 0.0;
  double f_std_min = 0.0;
};

enum class Verdict { Clear, Blurry };

struct QualityReport {
  double f_mean = 0.0;
  double f_std = 0.0;
  double t_entropy = 0.0;
  Verdict verdict = Verdict::Clear;
};

// Blurry iff f_mean < threshold OR f_std < threshold.
inline QualityReport classify(const GrayImage& img, const Thresholds& thr,
                              double tail_fraction = 0.4, int bins = 256) {
  QualityReport report;
  const TailStats stats = frequency_tail_stats(img, tail_fraction);
  report.f_mean = stats.f_mean;
  report.f_std = stats.f_std;
  report.t_entropy = histogram_entropy(img, bins);
  report.verdict = (report.f_mean < thr.f_mean_min || report.f_std < thr.f_std_min)
                       ? Verdict::Blurry
                       : Verdict::Clear;
  return report;
}

// ---------------------------------------------------------------------------
// Degradations
// ---------------------------------------------------------------------------

enum class DegradeKind { Pixelation, Noise, MotionBlur, GaussBlur };

struct DegradeParams {
  int block = 1;                 // Pixelation
  double noise_sigma = 0.0;      // Noise
  int kernel_len = 1;            // MotionBlur
  double kernel_angle_rad = 0.0; // MotionBlur
  double gauss_sigma = 0.0;      // GaussBlur
};

namespace detail {

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

inline GrayImage pixelate(const GrayImage& img, int block) {
  if (block < 1) throw Error(ErrorCode::BadParams, "block size must be >= 1");
  if (block == 1) return img;
  GrayImage out = img;
  for (int by = 0; by < img.height; by += block) {
    for (int bx = 0; bx < img.width; bx += block) {
      const int y1 = std::min(by + block, img.height);
      const int x1 = std::min(bx + block, img.width);
      double sum = 0.0;
      for (int y = by; y < y1; ++y)
        for (int x = bx; x < x1; ++x) sum += img.at(y, x);
      const double avg = sum / ((y1 - by) * (x1 - bx));
      for (int y = by; y < y1; ++y)
        for (int x = bx; x < x1; ++x) out.at(y, x) = avg;
    }
  }
  return out;
}

inline GrayImage add_noise(const GrayImage& img, double sigma,
                           std::uint64_t seed) {
  if (sigma < 0.0) throw Error(ErrorCode::BadParams, "noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  GrayImage out = img;
  Rng rng(seed);
  for (double& v : out.data) {
    v = std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0);
  }
  return out;
}

inline GrayImage motion_blur(const GrayImage& img, int len, double angle) {
  if (len < 1) throw Error(ErrorCode::BadParams, "kernel length must be >= 1");
  if (len == 1) return img;
  // Rasterize a centered line segment onto integer taps; duplicate taps
  // merge, total weight 1.
  struct Tap {
    int dx, dy;
    double w;
  };
  std::vector<Tap> taps;
  const double c = std::cos(angle), s = std::sin(angle);
  for (int i = 0; i < len; ++i) {
    const double t = i - (len - 1) / 2.0;
    const int dx = static_cast<int>(std::lround(t * c));
    const int dy = static_cast<int>(std::lround(t * s));
    bool merged = false;
    for (Tap& tap : taps) {
      if (tap.dx == dx && tap.dy == dy) {
        tap.w += 1.0;
        merged = true;
        break;
      }
    }
    if (!merged) taps.push_back({dx, dy, 1.0});
  }
  for (Tap& tap : taps) tap.w /= len;

  GrayImage out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (const Tap& tap : taps) {
        acc += tap.w * img.at(reflect_index(y + tap.dy, img.height),
                              reflect_index(x + tap.dx, img.width));
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

inline GrayImage gauss_blur(const GrayImage& img, double sigma) {
  if (sigma < 0.0) throw Error(ErrorCode::BadParams, "gauss sigma must be >= 0");
  if (sigma == 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  GrayImage tmp = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * img.at(y, reflect_index(x + i, img.width));
      }
      tmp.at(y, x) = acc;
    }
  }
  GrayImage out = make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp.at(reflect_index(y + i, img.height), x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

}  // namespace detail

// Synthetic degradations matching the blur/noise taxonomy the quality
// metrics are calibrated against. Identity parameters return the input
// bitwise; the noise path is deterministic per seed.
inline GrayImage degrade(const GrayImage& img, DegradeKind kind,
                         const DegradeParams& params, std::uint64_t seed = 0) {
  switch (kind) {
    case DegradeKind::Pixelation:
      return detail::pixelate(img, params.block);
    case DegradeKind::Noise:
      return detail::add_noise(img, params.noise_sigma, seed);
    case DegradeKind::MotionBlur:
      return detail::motion_blur(img, params.kernel_len, params.kernel_angle_rad);
    case DegradeKind::GaussBlur:
      return detail::gauss_blur(img, params.gauss_sigma);
  }
  throw Error(ErrorCode::BadParams, "unknown degradation kind");
}

// Mean squared pixel difference.
inline double pixel_l2(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "image dimensions differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

}  // namespace stomakit::quality
