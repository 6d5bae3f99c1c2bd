#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stomakit/netops.hpp"
#include "stomakit/random.hpp"

using namespace stomakit;
using netops::FeatureMap;
using netops::OffsetField;
using Catch::Approx;

namespace {

FeatureMap random_map(int c, int h, int w, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  FeatureMap f = FeatureMap::zeros(c, h, w);
  for (double& v : f.values) v = rng.uniform(lo, hi);
  return f;
}

// Relative error between gradient vectors, norm-based.
double grad_rel_error(const std::vector<double>& analytic,
                      const std::vector<double>& fd) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    ref += fd[i] * fd[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

}  // namespace

TEST_CASE("resample_with_offsets") {
  SECTION("zero offsets with matching dims is the identity") {
    Rng rng(1);
    const FeatureMap src = random_map(3, 5, 7, rng);
    const OffsetField zero = OffsetField::zeros(5, 7);
    const FeatureMap out = netops::resample_with_offsets(src, zero, 5, 7);
    CHECK(out.values == src.values);
  }
  SECTION("constant offset shifts a ramp, clamped at the border") {
    FeatureMap src = FeatureMap::zeros(1, 4, 8);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 8; ++x) src.at(0, y, x) = x;
    OffsetField off = OffsetField::zeros(4, 8);
    for (double& v : off.dx) v = 1.0;
    const FeatureMap out = netops::resample_with_offsets(src, off, 4, 8);
    for (int x = 0; x < 7; ++x) CHECK(out.at(0, 2, x) == Approx(x + 1.0));
    CHECK(out.at(0, 2, 7) == Approx(7.0));  // clamped
  }
  SECTION("offsets far outside the grid clamp without error") {
    Rng rng(2);
    const FeatureMap src = random_map(2, 4, 4, rng);
    OffsetField off = OffsetField::zeros(4, 4);
    for (double& v : off.dx) v = 100.0;
    for (double& v : off.dy) v = -100.0;
    const FeatureMap out = netops::resample_with_offsets(src, off, 4, 4);
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
          CHECK(out.at(c, y, x) == src.at(c, 0, 3));
  }
  SECTION("exact on affine maps at interior points") {
    FeatureMap src = FeatureMap::zeros(1, 8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) src.at(0, y, x) = 0.3 * x - 0.7 * y + 2.0;
    Rng rng(3);
    OffsetField off = OffsetField::zeros(8, 8);
    for (double& v : off.dx) v = rng.uniform(-1.5, 1.5);
    for (double& v : off.dy) v = rng.uniform(-1.5, 1.5);
    const FeatureMap out = netops::resample_with_offsets(src, off, 8, 8);
    for (int y = 2; y < 6; ++y) {
      for (int x = 2; x < 6; ++x) {
        const std::size_t i = off.index(y, x);
        const double sx = x + off.dx[i];
        const double sy = y + off.dy[i];
        CHECK(out.at(0, y, x) == Approx(0.3 * sx - 0.7 * sy + 2.0).margin(1e-12));
      }
    }
  }
  SECTION("downsampling maps the target grid into source coordinates") {
    FeatureMap src = FeatureMap::zeros(1, 8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) src.at(0, y, x) = x;
    const OffsetField off = OffsetField::zeros(4, 4);
    const FeatureMap out = netops::resample_with_offsets(src, off, 4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(out.at(0, y, x) == Approx(2.0 * x));
  }
  SECTION("shape mismatch rejected") {
    Rng rng(4);
    const FeatureMap src = random_map(1, 4, 4, rng);
    const OffsetField off = OffsetField::zeros(3, 3);
    CHECK_THROWS_MATCHES(netops::resample_with_offsets(src, off, 4, 4), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::ShapeMismatch;
                         }));
  }
}

TEST_CASE("weighted_fusion") {
  Rng rng(5);
  SECTION("single layer with unit weight is the identity") {
    const FeatureMap f = random_map(3, 4, 4, rng);
    FeatureMap w = FeatureMap::zeros(1, 4, 4);
    for (double& v : w.values) v = 1.0;
    CHECK(netops::weighted_fusion({f}, {w}).values == f.values);
  }
  SECTION("two constant maps blend by their weights") {
    FeatureMap a = FeatureMap::zeros(2, 3, 3);
    FeatureMap b = FeatureMap::zeros(2, 3, 3);
    for (double& v : a.values) v = 2.0;
    for (double& v : b.values) v = 6.0;
    FeatureMap w1 = FeatureMap::zeros(1, 3, 3);
    FeatureMap w2 = FeatureMap::zeros(1, 3, 3);
    for (double& v : w1.values) v = 0.25;
    for (double& v : w2.values) v = 0.75;
    const FeatureMap out = netops::weighted_fusion({a, b}, {w1, w2});
    for (double v : out.values) CHECK(v == Approx(0.25 * 2.0 + 0.75 * 6.0));
  }
  SECTION("zero-weight layers contribute nothing") {
    const FeatureMap a = random_map(2, 4, 4, rng);
    const FeatureMap b1 = random_map(2, 4, 4, rng);
    const FeatureMap b2 = random_map(2, 4, 4, rng);
    FeatureMap wa = FeatureMap::zeros(1, 4, 4);
    for (double& v : wa.values) v = 0.5;
    const FeatureMap w0 = FeatureMap::zeros(1, 4, 4);
    CHECK(netops::weighted_fusion({a, b1}, {wa, w0}).values ==
          netops::weighted_fusion({a, b2}, {wa, w0}).values);
  }
  SECTION("linear in each input and permutation-invariant") {
    const FeatureMap a = random_map(2, 3, 5, rng);
    const FeatureMap b = random_map(2, 3, 5, rng);
    const FeatureMap wa = random_map(1, 3, 5, rng, 0.0, 1.0);
    const FeatureMap wb = random_map(1, 3, 5, rng, 0.0, 1.0);
    const FeatureMap ab = netops::weighted_fusion({a, b}, {wa, wb});
    const FeatureMap ba = netops::weighted_fusion({b, a}, {wb, wa});
    for (std::size_t i = 0; i < ab.values.size(); ++i) {
      CHECK(ab.values[i] == Approx(ba.values[i]).margin(1e-15));
    }
    FeatureMap a2 = a;
    for (double& v : a2.values) v *= 3.0;
    const FeatureMap out2 = netops::weighted_fusion({a2, b}, {wa, wb});
    for (std::size_t i = 0; i < ab.values.size(); ++i) {
      const std::size_t plane = 15;
      const std::size_t p = i % plane;
      const double expected =
          3.0 * wa.values[p] * a.values[i] + wb.values[p] * b.values[i];
      CHECK(out2.values[i] == Approx(expected).margin(1e-12));
    }
  }
  SECTION("weights outside [0,1] rejected") {
    const FeatureMap f = random_map(1, 2, 2, rng);
    FeatureMap w = FeatureMap::zeros(1, 2, 2);
    w.values[0] = 1.5;
    CHECK_THROWS_MATCHES(netops::weighted_fusion({f}, {w}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::WeightOutOfRange;
                         }));
  }
  SECTION("normalization divides by the weight sum, zero-sum guarded") {
    FeatureMap a = FeatureMap::zeros(1, 1, 2);
    a.values = {4.0, 4.0};
    FeatureMap w = FeatureMap::zeros(1, 1, 2);
    w.values = {0.5, 0.0};
    const FeatureMap out = netops::weighted_fusion({a}, {w}, true);
    CHECK(out.values[0] == Approx(4.0));
    CHECK(out.values[1] == 0.0);
  }
}

TEST_CASE("group_normalize") {
  Rng rng(6);
  SECTION("standardized input with unit alpha passes through") {
    // build a map that is exactly zero-mean unit-variance per group
    FeatureMap f = FeatureMap::zeros(2, 2, 2);
    f.values = {1, -1, 1, -1, 1, 1, -1, -1};
    netops::FilterParams p;
    p.groups = 2;
    p.alpha = {1, 1};
    p.beta = {0, 0};
    p.epsilon = 1e-12;
    const FeatureMap out = netops::group_normalize(f, p);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      CHECK(out.values[i] == Approx(f.values[i]).margin(1e-6));
    }
  }
  SECTION("constant input maps to beta") {
    const FeatureMap f = FeatureMap::zeros(4, 3, 3);
    netops::FilterParams p;
    p.groups = 2;
    p.alpha = {1, 2, 3, 4};
    p.beta = {0.5, -0.5, 0.25, 0.0};
    FeatureMap cf = f;
    for (double& v : cf.values) v = 7.0;
    const FeatureMap out = netops::group_normalize(cf, p);
    for (int c = 0; c < 4; ++c)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
          CHECK(out.at(c, y, x) == Approx(p.beta[c]).margin(1e-12));
  }
  SECTION("per-group statistics land on beta and |alpha|") {
    netops::FilterParams p;
    p.groups = 2;
    p.alpha = {1.5, 1.5, -0.75, -0.75};
    p.beta = {0.25, 0.25, 1.0, 1.0};
    const FeatureMap f = random_map(4, 6, 6, rng);
    const FeatureMap out = netops::group_normalize(f, p);
    const std::size_t group_n = 2 * 36;
    for (int g = 0; g < 2; ++g) {
      double mean = 0.0;
      for (std::size_t i = 0; i < group_n; ++i) {
        mean += out.values[g * group_n + i];
      }
      mean /= group_n;
      double var = 0.0;
      for (std::size_t i = 0; i < group_n; ++i) {
        const double d = out.values[g * group_n + i] - mean;
        var += d * d;
      }
      var /= group_n;
      CHECK(mean == Approx(p.beta[2 * g]).margin(1e-9));
      CHECK(std::sqrt(var) == Approx(std::abs(p.alpha[2 * g])).epsilon(1e-3));
    }
  }
  SECTION("invalid group count rejected") {
    const FeatureMap f = random_map(3, 2, 2, rng);
    netops::FilterParams p;
    p.groups = 2;
    p.alpha = {1, 1, 1};
    p.beta = {0, 0, 0};
    CHECK_THROWS_MATCHES(netops::group_normalize(f, p), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::ShapeMismatch;
                         }));
  }
}

TEST_CASE("information_weights") {
  CHECK(netops::information_weights({1, 1, 1, 1}) ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(netops::information_weights({3, 1}) == std::vector<double>{0.75, 0.25});
  SECTION("sums to one for random positive alpha") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> alpha;
      for (int i = 0; i < 8; ++i) alpha.push_back(rng.uniform(0.05, 3.0));
      const auto w = netops::information_weights(alpha);
      double sum = 0.0;
      for (double v : w) sum += v;
      CHECK(sum == Approx(1.0).margin(1e-12));
    }
  }
  SECTION("zero-sum alpha rejected") {
    CHECK_THROWS_MATCHES(netops::information_weights({1.0, -1.0}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::DegenerateAlpha;
                         }));
  }
}

TEST_CASE("split_weights") {
  Rng rng(8);
  SECTION("boundary: s exactly at the threshold populates both gates") {
    FeatureMap f = FeatureMap::zeros(1, 1, 1);
    f.values[0] = 0.0;  // sigmoid(0) = 0.5
    const auto gates = netops::split_weights({1.0}, f, 0.5);
    CHECK(gates.w1.values[0] == 0.5);
    CHECK(gates.w2.values[0] == 0.5);
  }
  SECTION("sigmoid asymptotes") {
    FeatureMap f = FeatureMap::zeros(1, 1, 2);
    f.values = {40.0, -40.0};
    const auto gates = netops::split_weights({1.0}, f, 0.5);
    CHECK(gates.w1.values[0] == 1.0);             // saturated high
    CHECK(gates.w2.values[0] == Approx(1.0));     // s itself
    CHECK(gates.w1.values[1] == Approx(0.0).margin(1e-12));
    CHECK(gates.w2.values[1] == 0.0);
  }
  SECTION("0 <= w2 <= w1 <= 1 across random draws and thresholds") {
    for (int trial = 0; trial < 50; ++trial) {
      const double thr = rng.uniform(0.05, 0.95);
      const FeatureMap f = random_map(4, 5, 5, rng, -6.0, 6.0);
      std::vector<double> cw;
      for (int c = 0; c < 4; ++c) cw.push_back(rng.uniform(-2.0, 2.0));
      const auto gates = netops::split_weights(cw, f, thr);
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        CHECK(gates.w2.values[i] >= 0.0);
        CHECK(gates.w2.values[i] <= gates.w1.values[i]);
        CHECK(gates.w1.values[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("reconstruct") {
  Rng rng(9);
  const FeatureMap f = random_map(2, 3, 3, rng);
  FeatureMap ones = FeatureMap::zeros(2, 3, 3);
  for (double& v : ones.values) v = 1.0;
  const FeatureMap zeros = FeatureMap::zeros(2, 3, 3);

  SECTION("pass-through and annihilation") {
    CHECK(netops::reconstruct(f, ones, zeros).values == f.values);
    const FeatureMap out = netops::reconstruct(f, zeros, zeros);
    for (double v : out.values) CHECK(v == 0.0);
  }
  SECTION("channel reversal swaps a two-channel map") {
    const FeatureMap out = netops::reconstruct(f, zeros, ones);
    const std::size_t plane = 9;
    for (std::size_t i = 0; i < plane; ++i) {
      CHECK(out.values[i] == f.values[plane + i]);
      CHECK(out.values[plane + i] == f.values[i]);
    }
  }
  SECTION("complement mode weighs by 1 - w2") {
    FeatureMap w2 = FeatureMap::zeros(2, 3, 3);
    for (double& v : w2.values) v = 0.25;
    const FeatureMap out =
        netops::reconstruct(f, zeros, w2, netops::ReverseMode::Complement);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      CHECK(out.values[i] == Approx(0.75 * f.values[i]));
    }
  }
}

TEST_CASE("filter_forward") {
  Rng rng(10);
  SECTION("composition equals the manual pipeline bitwise") {
    const FeatureMap f = random_map(4, 6, 6, rng);
    netops::FilterParams p;
    p.groups = 2;
    p.alpha = {0.9, 1.1, 0.7, 1.3};
    p.beta = {0.0, 0.1, -0.1, 0.2};
    const FeatureMap normalized = netops::group_normalize(f, p);
    const auto w = netops::information_weights(p.alpha);
    const auto gates = netops::split_weights(w, normalized, p.threshold);
    const FeatureMap manual = netops::reconstruct(f, gates.w1, gates.w2);
    CHECK(netops::filter_forward(f, p).values == manual.values);
  }
  SECTION("shape preservation for random shapes") {
    for (int trial = 0; trial < 50; ++trial) {
      const int groups = 1 + static_cast<int>(rng.below(3));
      const int c = groups * (1 + static_cast<int>(rng.below(4)));
      const int h = 1 + static_cast<int>(rng.below(9));
      const int w = 1 + static_cast<int>(rng.below(9));
      const FeatureMap f = random_map(c, h, w, rng);
      netops::FilterParams p;
      p.groups = groups;
      for (int i = 0; i < c; ++i) {
        p.alpha.push_back(rng.uniform(0.2, 2.0));
        p.beta.push_back(rng.uniform(-0.5, 0.5));
      }
      const FeatureMap out = netops::filter_forward(f, p);
      CHECK(out.channels == c);
      CHECK(out.height == h);
      CHECK(out.width == w);
    }
  }
  SECTION("threshold 0 runs the degenerate regime without error") {
    const FeatureMap f = random_map(2, 4, 4, rng);
    netops::FilterParams p;
    p.alpha = {1.0, 1.0};
    p.beta = {0.0, 0.0};
    p.threshold = 0.0;
    const FeatureMap normalized = netops::group_normalize(f, p);
    const auto gates =
        netops::split_weights(netops::information_weights(p.alpha), normalized, 0.0);
    for (std::size_t i = 0; i < gates.w2.values.size(); ++i) {
      CHECK(gates.w2.values[i] > 0.0);   // w2 = s everywhere
      CHECK(gates.w1.values[i] == 1.0);  // s > 0 everywhere
    }
    CHECK_NOTHROW(netops::filter_forward(f, p));
  }
}

TEST_CASE("gradient checks against central finite differences") {
  const double step = 1e-5;
  SECTION("group_normalize") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
      Rng rng(seed);
      const FeatureMap x = random_map(4, 6, 6, rng);
      netops::FilterParams p;
      p.groups = 2;
      p.alpha = {rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5),
                 rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
      p.beta = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
      const FeatureMap upstream = random_map(4, 6, 6, rng);

      const auto grad = netops::group_normalize_backward(x, p, upstream);

      auto loss = [&](const FeatureMap& input) {
        const FeatureMap y = netops::group_normalize(input, p);
        double l = 0.0;
        for (std::size_t i = 0; i < y.values.size(); ++i) {
          l += y.values[i] * upstream.values[i];
        }
        return l;
      };
      std::vector<double> fd(x.values.size());
      for (std::size_t i = 0; i < x.values.size(); ++i) {
        FeatureMap xp = x, xm = x;
        xp.values[i] += step;
        xm.values[i] -= step;
        fd[i] = (loss(xp) - loss(xm)) / (2.0 * step);
      }
      CHECK(grad_rel_error(grad.d_input.values, fd) <= 1e-5);
    }
  }
  SECTION("sigmoid split") {
    for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
      Rng rng(seed);
      const FeatureMap f = random_map(4, 6, 6, rng, -3.0, 3.0);
      std::vector<double> cw;
      for (int c = 0; c < 4; ++c) cw.push_back(rng.uniform(-1.5, 1.5));
      const double thr = 0.5;
      const FeatureMap up1 = random_map(4, 6, 6, rng);
      const FeatureMap up2 = random_map(4, 6, 6, rng);

      const auto grad = netops::split_weights_backward(cw, f, thr, up1, up2);

      auto loss = [&](const FeatureMap& input) {
        const auto gates = netops::split_weights(cw, input, thr);
        double l = 0.0;
        for (std::size_t i = 0; i < input.values.size(); ++i) {
          l += gates.w1.values[i] * up1.values[i] +
               gates.w2.values[i] * up2.values[i];
        }
        return l;
      };
      std::vector<double> fd(f.values.size());
      std::vector<double> analytic(f.values.size());
      std::size_t used = 0;
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        const int c = static_cast<int>(i / 36);
        const double s = netops::sigmoid(cw[c] * f.values[i]);
        // skip elements whose finite-difference stencil straddles the
        // threshold kink
        if (std::abs(s - thr) < 1e-3) continue;
        FeatureMap fp = f, fm = f;
        fp.values[i] += step;
        fm.values[i] -= step;
        fd[used] = (loss(fp) - loss(fm)) / (2.0 * step);
        analytic[used] = grad.d_normalized.values[i];
        ++used;
      }
      fd.resize(used);
      analytic.resize(used);
      REQUIRE(used > 100);
      CHECK(grad_rel_error(analytic, fd) <= 1e-5);
    }
  }
  SECTION("weighted_fusion") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      Rng rng(seed);
      const FeatureMap a = random_map(3, 4, 5, rng);
      const FeatureMap b = random_map(3, 4, 5, rng);
      const FeatureMap wa = random_map(1, 4, 5, rng, 0.05, 0.95);
      const FeatureMap wb = random_map(1, 4, 5, rng, 0.05, 0.95);
      const FeatureMap upstream = random_map(3, 4, 5, rng);

      const auto grad = netops::weighted_fusion_backward({a, b}, {wa, wb}, upstream);

      auto loss = [&](const std::vector<FeatureMap>& maps,
                      const std::vector<FeatureMap>& weights) {
        const FeatureMap y = netops::weighted_fusion(maps, weights);
        double l = 0.0;
        for (std::size_t i = 0; i < y.values.size(); ++i) {
          l += y.values[i] * upstream.values[i];
        }
        return l;
      };
      std::vector<double> fd_a(a.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        FeatureMap ap = a, am = a;
        ap.values[i] += step;
        am.values[i] -= step;
        fd_a[i] = (loss({ap, b}, {wa, wb}) - loss({am, b}, {wa, wb})) / (2 * step);
      }
      CHECK(grad_rel_error(grad.d_maps[0].values, fd_a) <= 1e-5);

      std::vector<double> fd_w(wa.values.size());
      for (std::size_t i = 0; i < wa.values.size(); ++i) {
        FeatureMap wp = wa, wm = wa;
        wp.values[i] += step;
        wm.values[i] -= step;
        fd_w[i] = (loss({a, b}, {wp, wb}) - loss({a, b}, {wm, wb})) / (2 * step);
      }
      CHECK(grad_rel_error(grad.d_weights[0].values, fd_w) <= 1e-5);
    }
  }
}
