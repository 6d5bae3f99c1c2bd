#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "stomakit/error.hpp"

namespace stomakit::agree {

// Paired manual/predicted measurements of one trait, same unit.
struct PairedSeries {
  std::vector<double> manual;
  std::vector<double> predicted;
};

namespace detail {

inline void validate(const PairedSeries& s, std::size_t min_len) {
  if (s.manual.size() != s.predicted.size() || s.manual.empty()) {
    throw Error(ErrorCode::DimensionMismatch,
                "paired series must have equal nonzero length");
  }
  if (s.manual.size() < min_len) {
    throw Error(ErrorCode::SampleTooSmall, "series too short");
  }
  for (std::size_t i = 0; i < s.manual.size(); ++i) {
    if (!std::isfinite(s.manual[i]) || !std::isfinite(s.predicted[i])) {
      throw Error(ErrorCode::DimensionMismatch, "series values must be finite");
    }
  }
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

// Concordance correlation coefficient,
//   CCC = 2*cov(g, d) / ((mean_g - mean_d)^2 + var_g + var_d),
// with population (1/n) moments by default; `sample_moments` switches to the
// 1/(n-1) variant.
inline double ccc(const PairedSeries& s, bool sample_moments = false) {
  detail::validate(s, 2);
  const std::size_t n = s.manual.size();
  const double mg = detail::mean(s.manual);
  const double md = detail::mean(s.predicted);
  double vg = 0.0, vd = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s.manual[i] - mg;
    const double b = s.predicted[i] - md;
    vg += a * a;
    vd += b * b;
    cov += a * b;
  }
  const double denom_n = sample_moments ? static_cast<double>(n - 1)
                                        : static_cast<double>(n);
  vg /= denom_n;
  vd /= denom_n;
  cov /= denom_n;
  if (vg == 0.0 && vd == 0.0) {
    throw Error(ErrorCode::DegenerateSeries, "both series are constant");
  }
  const double shift = mg - md;
  return 2.0 * cov / (shift * shift + vg + vd);
}

struct DimensionAccuracy {
  std::vector<double> per_item;  // signed: 1 - (g_i - d_i)/g_i
  double average = 0.0;          // 1 - mean(|g_i - d_i| / g_i)
};

inline DimensionAccuracy dimension_accuracy(const PairedSeries& s) {
  detail::validate(s, 1);
  DimensionAccuracy acc;
  double abs_rel = 0.0;
  for (std::size_t i = 0; i < s.manual.size(); ++i) {
    const double g = s.manual[i];
    if (!(g > 0.0)) {
      throw Error(ErrorCode::NonPositiveReference,
                  "manual reference values must be positive");
    }
    const double d = s.predicted[i];
    acc.per_item.push_back(1.0 - (g - d) / g);
    abs_rel += std::abs(g - d) / g;
  }
  acc.average = 1.0 - abs_rel / static_cast<double>(s.manual.size());
  return acc;
}

inline double mse(const PairedSeries& s) {
  detail::validate(s, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.manual.size(); ++i) {
    const double d = s.manual[i] - s.predicted[i];
    sum += d * d;
  }
  return sum / static_cast<double>(s.manual.size());
}

inline double rmse(const PairedSeries& s) { return std::sqrt(mse(s)); }

// ---------------------------------------------------------------------------
// Shapiro-Wilk normality test (Royston's AS R94 approximation, n in [3,5000])
// ---------------------------------------------------------------------------

struct ShapiroWilkResult {
  double w = 0.0;
  double p_value = 0.0;
};

namespace detail {

inline double poly(const double* c, int order, double x) {
  double v = c[0];
  double p = 1.0;
  for (int i = 1; i < order; ++i) {
    p *= x;
    v += c[i] * p;
  }
  return v;
}

}  // namespace detail

inline ShapiroWilkResult shapiro_wilk(std::vector<double> x) {
  const int n = static_cast<int>(x.size());
  if (n < 3) {
    throw Error(ErrorCode::SampleTooSmall, "Shapiro-Wilk needs n >= 3");
  }
  if (n > 5000) {
    throw Error(ErrorCode::BadParams, "Shapiro-Wilk supports n <= 5000");
  }
  std::sort(x.begin(), x.end());
  if (!(x.back() > x.front())) {
    throw Error(ErrorCode::DegenerateSeries, "all sample values are identical");
  }

  const boost::math::normal_distribution<double> norm01;
  const int half = n / 2;

  // Expected normal order statistics (Blom scores) for the upper half,
  // largest first; the lower half is the mirror image.
  std::vector<double> m(half);
  double ssq_m = 0.0;
  for (int i = 0; i < half; ++i) {
    m[i] = boost::math::quantile(
        norm01, (static_cast<double>(n - i) - 0.375) / (n + 0.25));
    ssq_m += 2.0 * m[i] * m[i];
  }

  // Royston's corrected coefficients.
  static constexpr double kC1[6] = {0.0,       0.221157,  -0.147981,
                                    -2.071190, 4.434685,  -2.706056};
  static constexpr double kC2[6] = {0.0,       0.042981,  -0.293762,
                                    -1.752461, 5.682633,  -3.582633};
  std::vector<double> a(half);
  const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
  } else {
    const double a_n = m[0] / std::sqrt(ssq_m) + detail::poly(kC1, 6, rsn);
    if (n <= 5) {
      const double phi =
          (ssq_m - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a_n * a_n);
      a[0] = a_n;
      for (int i = 1; i < half; ++i) a[i] = m[i] / std::sqrt(phi);
    } else {
      const double a_n1 = m[1] / std::sqrt(ssq_m) + detail::poly(kC2, 6, rsn);
      const double phi =
          (ssq_m - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
          (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
      a[0] = a_n;
      a[1] = a_n1;
      for (int i = 2; i < half; ++i) a[i] = m[i] / std::sqrt(phi);
    }
  }

  // W = (sum_i a_i (x_(n-i) - x_(i)))^2 / sum (x - mean)^2.
  double num = 0.0;
  for (int i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double mean_x = detail::mean(x);
  double ssx = 0.0;
  for (double v : x) {
    const double d = v - mean_x;
    ssx += d * d;
  }
  ShapiroWilkResult res;
  res.w = std::min(1.0, num * num / ssx);

  if (n == 3) {
    const double p = 6.0 / std::numbers::pi *
                     (std::asin(std::sqrt(res.w)) - std::asin(std::sqrt(0.75)));
    res.p_value = std::clamp(p, 0.0, 1.0);
    return res;
  }

  double z = 0.0;
  if (n <= 11) {
    const double nd = static_cast<double>(n);
    const double gamma = -2.273 + 0.459 * nd;
    const double arg = gamma - std::log1p(-res.w);
    if (arg <= 0.0) {
      res.p_value = 0.0;  // W far below the attainable normal range
      return res;
    }
    const double y = -std::log(arg);
    const double mu = 0.5440 - 0.39978 * nd + 0.025054 * nd * nd -
                      0.0006714 * nd * nd * nd;
    const double sigma = std::exp(1.3822 - 0.77857 * nd + 0.062767 * nd * nd -
                                  0.0020322 * nd * nd * nd);
    z = (y - mu) / sigma;
  } else {
    const double ln_n = std::log(static_cast<double>(n));
    const double y = std::log1p(-res.w);
    const double mu =
        -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n +
        0.0038915 * ln_n * ln_n * ln_n;
    const double sigma =
        std::exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n);
    z = (y - mu) / sigma;
  }
  res.p_value = boost::math::cdf(boost::math::complement(norm01, z));
  return res;
}

// ---------------------------------------------------------------------------
// Two-sample tests
// ---------------------------------------------------------------------------

struct RankSumResult {
  double rank_sum = 0.0;  // sum of (mid)ranks of the first sample
  double p_value = 0.0;
  bool exact = false;
};

namespace detail {

// Midranks of the pooled sample, in pooled-sorted order.
inline std::vector<double> midranks(const std::vector<double>& sorted) {
  std::vector<double> ranks(sorted.size());
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[k] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Two-sided Wilcoxon rank-sum test. Exact enumeration of all C(N, n1)
// labelings when N = n1 + n2 <= 12; otherwise the normal approximation with
// tie-corrected variance (no continuity correction).
inline RankSumResult wilcoxon_rank_sum(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  if (n1 == 0 || n2 == 0) {
    throw Error(ErrorCode::SampleTooSmall, "both samples must be nonempty");
  }

  struct Tagged {
    double value;
    bool first;
  };
  std::vector<Tagged> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.push_back({v, true});
  for (double v : b) pooled.push_back({v, false});
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Tagged& x, const Tagged& y) { return x.value < y.value; });

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = pooled[i].value;
  const std::vector<double> ranks = detail::midranks(values);

  RankSumResult res;
  for (std::size_t i = 0; i < n; ++i) {
    if (pooled[i].first) res.rank_sum += ranks[i];
  }

  if (n <= 12) {
    res.exact = true;
    std::size_t total = 0, n_le = 0, n_ge = 0;
    const double tol = 1e-9;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
      double w = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) w += ranks[i];
      }
      ++total;
      if (w <= res.rank_sum + tol) ++n_le;
      if (w >= res.rank_sum - tol) ++n_ge;
    }
    const double lo = static_cast<double>(std::min(n_le, n_ge)) /
                      static_cast<double>(total);
    res.p_value = std::min(1.0, 2.0 * lo);
    return res;
  }

  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double dn = static_cast<double>(n);
  const double mean_w = dn1 * (dn + 1.0) / 2.0;
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[j + 1] == values[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_sum += t * t * t - t;
    i = j + 1;
  }
  const double var_w =
      dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_sum / (dn * (dn - 1.0)));
  if (var_w <= 0.0) {
    res.p_value = 1.0;  // every pooled value identical
    return res;
  }
  const double z = (res.rank_sum - mean_w) / std::sqrt(var_w);
  const boost::math::normal_distribution<double> norm01;
  res.p_value =
      std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(
                              norm01, std::abs(z))));
  return res;
}

struct TTestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 0.0;
};

// Welch's unequal-variance two-sample t-test, two-sided.
inline TTestResult welch_t_test(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::SampleTooSmall, "t-test needs n >= 2 per sample");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = detail::mean(a);
  const double mb = detail::mean(b);
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= na - 1.0;
  vb /= nb - 1.0;

  TTestResult res;
  const double sea = va / na;
  const double seb = vb / nb;
  const double se2 = sea + seb;
  if (se2 <= 0.0) {
    res.df = na + nb - 2.0;
    res.p_value = ma == mb ? 1.0 : 0.0;
    return res;
  }
  res.statistic = (ma - mb) / std::sqrt(se2);
  res.df = se2 * se2 /
           (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
  const boost::math::students_t_distribution<double> dist(res.df);
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(
                          dist, std::abs(res.statistic)));
  return res;
}

enum class TestKind { TTest, Wilcoxon };

struct ComparisonResult {
  TestKind test = TestKind::Wilcoxon;
  double p_value = 0.0;
  bool significant = false;
};

namespace detail {

// A constant sample defeats the normality test (its W statistic is
// undefined), so it routes to the rank test.
inline bool looks_normal(const std::vector<double>& x, double alpha) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo)) return false;
  return shapiro_wilk(x).p_value > alpha;
}

}  // namespace detail

// Distribution comparison: Shapiro-Wilk at `alpha` decides normality per
// sample; two normal samples get Welch's t-test, anything else the Wilcoxon
// rank-sum test. Two-sided p-value in both branches.
inline ComparisonResult compare_distributions(const std::vector<double>& a,
                                              const std::vector<double>& b,
                                              double alpha = 0.05) {
  if (a.size() < 3 || b.size() < 3) {
    throw Error(ErrorCode::SampleTooSmall,
                "distribution comparison needs n >= 3 per sample");
  }
  ComparisonResult res;
  if (detail::looks_normal(a, alpha) && detail::looks_normal(b, alpha)) {
    res.test = TestKind::TTest;
    res.p_value = welch_t_test(a, b).p_value;
  } else {
    res.test = TestKind::Wilcoxon;
    res.p_value = wilcoxon_rank_sum(a, b).p_value;
  }
  res.significant = res.p_value < alpha;
  return res;
}

}  // namespace stomakit::agree
