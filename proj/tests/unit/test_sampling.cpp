#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fovrec/errors.hpp"
#include "fovrec/sampling.hpp"
#include "spectrum.hpp"
#include "test_util.hpp"

using namespace fovrec;

TEST_SUITE("sampling") {
  TEST_CASE("sample counts") {
    CHECK(void_and_cluster_mask(256, 256, 0.12, 1).popcount() == 7864);
    const SamplingMask full = void_and_cluster_mask(32, 32, 1.0, 1);
    CHECK(full.popcount() == 1024);
    CHECK(uniform_random_mask(256, 256, 0.0909, 3).popcount() == 5957);
    CHECK_THROWS_AS(void_and_cluster_mask(32, 32, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(void_and_cluster_mask(32, 32, 1.5, 1), ValidationError);
  }

  TEST_CASE("ranks form a permutation") {
    const RankMatrix r = void_and_cluster_ranks(24, 40, 5);
    std::vector<int> seen(r.rank.size(), 0);
    for (auto v : r.rank) {
      REQUIRE(v < r.rank.size());
      ++seen[v];
    }
    for (int s : seen) CHECK(s == 1);
  }

  TEST_CASE("masks are deterministic per seed and nested across rates") {
    const SamplingMask a = void_and_cluster_mask(64, 64, 0.12, 9);
    const SamplingMask b = void_and_cluster_mask(64, 64, 0.12, 9);
    const SamplingMask c = void_and_cluster_mask(64, 64, 0.12, 10);
    CHECK(a.bits == b.bits);
    CHECK(a.bits != c.bits);
    const RankMatrix r = void_and_cluster_ranks(64, 64, 9);
    const SamplingMask lo = threshold_ranks(r, 0.05);
    const SamplingMask hi = threshold_ranks(r, 0.2);
    for (std::size_t i = 0; i < lo.bits.size(); ++i) {
      if (lo.bits[i]) CHECK(hi.bits[i]);
    }
  }

  TEST_CASE("sparse masks are more evenly spaced than random ones") {
    double vac = 0.0, rnd = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      vac += test::min_sample_distance(void_and_cluster_mask(128, 128, 0.007, seed));
      rnd += test::min_sample_distance(uniform_random_mask(128, 128, 0.007, seed));
    }
    CHECK(vac > rnd);
  }

  TEST_CASE("blue-noise spectrum at 12 percent") {
    double vac = 0.0, rnd = 0.0;
    for (int seed = 0; seed < 4; ++seed) {
      vac += test::low_frequency_power(void_and_cluster_mask(64, 64, 0.12, seed));
      rnd += test::low_frequency_power(uniform_random_mask(64, 64, 0.12, seed));
    }
    CHECK(vac < 0.5 * rnd);
  }

  TEST_CASE("subsample keeps exactly the sampled pixels") {
    const ImagePatch img = test::random_patch(32, 32, 4);
    const SamplingMask m = uniform_random_mask(32, 32, 0.2, 4);
    const SparseImage s = subsample(img, m);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(s.values(y, x, c) == (m.at(y, x) ? img(y, x, c) : 0.0));
      }
    }
    CHECK_THROWS_AS(subsample(img, uniform_random_mask(32, 31, 0.2, 4)), ValidationError);
    const SamplingMask one = uniform_random_mask(32, 32, 1.0 / 1024.0, 2);
    CHECK(one.popcount() == 1);
  }

  TEST_CASE("densify with a full mask is the identity") {
    const ImagePatch img = test::random_patch(32, 32, 6);
    const SamplingMask m = void_and_cluster_mask(32, 32, 1.0, 1);
    CHECK(max_abs_diff(densify(subsample(img, m)).pixels(), img.pixels()) == 0.0);
  }

  TEST_CASE("densify keeps samples, constants and the value range") {
    const ImagePatch img = test::random_patch(48, 40, 7);
    for (int seed = 0; seed < 5; ++seed) {
      const SamplingMask m = void_and_cluster_mask(48, 40, 0.05 + 0.05 * seed, seed);
      const ImagePatch d = densify(subsample(img, m));
      double lo = 1.0, hi = 0.0;
      for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 40; ++x) {
          for (int c = 0; c < 3; ++c) {
            if (m.at(y, x)) {
              CHECK(d(y, x, c) == img(y, x, c));
              lo = std::min(lo, img(y, x, c));
              hi = std::max(hi, img(y, x, c));
            }
          }
        }
      }
      CHECK(d.pixels().min() >= lo);
      CHECK(d.pixels().max() <= hi);
    }
    const ImagePatch flat(Image(32, 32, 3, 0.37));
    const ImagePatch d = densify(subsample(flat, void_and_cluster_mask(32, 32, 0.01, 3)));
    CHECK(d.pixels().min() == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(d.pixels().max() == doctest::Approx(0.37).epsilon(1e-12));
  }

  TEST_CASE("densify reproduces a planar ramp away from borders") {
    const int n = 128;
    Image ramp(n, n, 3);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        for (int c = 0; c < 3; ++c) ramp(y, x, c) = (0.6 * x + 0.4 * y) / (n - 1);
      }
    }
    const ImagePatch img(ramp);
    const ImagePatch d = densify(subsample(img, void_and_cluster_mask(n, n, 0.12, 21)));
    double worst = 0.0;
    for (int y = 8; y < n - 8; ++y) {
      for (int x = 8; x < n - 8; ++x) worst = std::max(worst, std::abs(d(y, x, 0) - ramp(y, x, 0)));
    }
    CHECK(worst < 2.0 / 255.0);
  }

  TEST_CASE("densify needs three samples") {
    SamplingMask m;
    m.height = m.width = 16;
    m.bits.assign(256, 0);
    m.bits[3] = m.bits[100] = 1;
    const ImagePatch img = test::random_patch(16, 16, 1);
    CHECK_THROWS_AS(densify(subsample(img, m)), ValidationError);
  }

  TEST_CASE("mask png round trip") {
    const auto path = std::filesystem::temp_directory_path() / "fovrec_test_mask" / "m.png";
    const SamplingMask m = void_and_cluster_mask(40, 24, 0.1, 2);
    write_mask_png(m, path);
    const SamplingMask r = read_mask_png(path);
    CHECK(r.bits == m.bits);
    CHECK(r.rate == doctest::Approx(m.popcount() / 960.0));
  }
}
