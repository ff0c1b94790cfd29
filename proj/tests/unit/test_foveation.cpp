#include <doctest.h>

#include <cmath>

#include "fovrec/errors.hpp"
#include "fovrec/foveation.hpp"
#include "fovrec/rng.hpp"
#include "test_util.hpp"

using namespace fovrec;

TEST_SUITE("foveation") {
  TEST_CASE("27 inch 4k display at 70 cm") {
    const FieldGeometry g = FieldGeometry::from_diagonal(27.0, 3840, 2160, 0.70);
    CHECK(g.physical_width_m == doctest::Approx(0.5977).epsilon(1e-3));
    CHECK(g.degrees_per_pixel() == doctest::Approx(0.012).epsilon(0.1));
    const PixelPoint gaze{1920, 1080};
    CHECK(pixel_eccentricity(g, gaze, gaze) == 0.0);
    const double e100 = pixel_eccentricity(g, gaze, {2020, 1080});
    CHECK(e100 == doctest::Approx(1.2).epsilon(0.1));
    const double e200 = pixel_eccentricity(g, gaze, {2120, 1080});
    CHECK(e200 / e100 == doctest::Approx(2.0).epsilon(0.01));
  }

  TEST_CASE("eccentricity is exact arctangent and rotation symmetric") {
    const FieldGeometry g;
    const PixelPoint gaze{100, 50};
    const double r = 500.0;
    const double expected = std::atan(r * g.pixel_pitch_m() / g.viewing_distance_m) * 180.0 / M_PI;
    for (int k = 0; k < 16; ++k) {
      const double a = 2.0 * M_PI * k / 16.0;
      const double e = pixel_eccentricity(g, gaze, {gaze.x + r * std::cos(a), gaze.y + r * std::sin(a)});
      CHECK(std::abs(e - expected) < 1e-9);
    }
    double prev = -1.0;
    for (int d = 0; d < 3000; d += 37) {
      const double e = pixel_eccentricity(g, gaze, {gaze.x + d, gaze.y});
      CHECK(e > prev);
      prev = e;
    }
  }

  TEST_CASE("region blend values") {
    RegionPartition part;
    const RegionBlend at_gaze = region_blend(part, 0.0);
    CHECK(at_gaze.fovea == 1.0);
    CHECK(at_gaze.near == 0.0);
    CHECK(at_gaze.far == 0.0);
    const RegionBlend at_near = region_blend(part, 8.0);
    CHECK(at_near.fovea == doctest::Approx(0.5));
    CHECK(at_near.near == doctest::Approx(0.5));
    CHECK(at_near.far == doctest::Approx(0.0));
    const RegionBlend inside = region_blend(part, 7.49);
    CHECK(inside.fovea == 1.0);
    const RegionBlend at_far = region_blend(part, 14.0);
    CHECK(at_far.near == doctest::Approx(0.5));
    CHECK(at_far.far == doctest::Approx(0.5));
    CHECK(region_blend(part, 30.0).far == 1.0);
  }

  TEST_CASE("partition validation") {
    RegionPartition part;
    part.near_boundary_deg = 14.0;
    part.far_boundary_deg = 8.0;
    CHECK_THROWS_AS(part.validate(), ValidationError);
    part = RegionPartition{};
    part.blend_band_deg = 7.0;
    CHECK_THROWS_AS(part.validate(), ValidationError);
    part.blend_band_deg = 0.0;
    CHECK_NOTHROW(part.validate());
  }

  TEST_CASE("weights are a partition of unity and radially monotone") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
      FieldGeometry g;
      g.width_px = 96;
      g.height_px = 64;
      g.physical_width_m = rng.uniform(0.5, 3.0);
      g.viewing_distance_m = rng.uniform(0.3, 1.0);
      RegionPartition part;
      part.gaze = {rng.uniform(0, 96), rng.uniform(0, 64)};
      part.near_boundary_deg = rng.uniform(3.0, 10.0);
      part.far_boundary_deg = part.near_boundary_deg + rng.uniform(2.0, 8.0);
      part.blend_band_deg = rng.uniform(0.0, 2.0);
      const RegionWeights w = partition_weights(g, part);
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 96; ++x) {
          CHECK(w.fovea(y, x) >= 0.0);
          CHECK(w.near(y, x) >= 0.0);
          CHECK(w.far(y, x) >= 0.0);
          CHECK(std::abs(w.fovea(y, x) + w.near(y, x) + w.far(y, x) - 1.0) < 1e-12);
        }
      }
      double prev_fovea = 2.0;
      for (double e = 0.0; e < 40.0; e += 0.1) {
        const RegionBlend b = region_blend(part, e);
        CHECK(b.fovea <= prev_fovea);
        prev_fovea = b.fovea;
      }
    }
  }

  TEST_CASE("composite matches a pixel loop") {
    FieldGeometry g;
    g.width_px = 48;
    g.height_px = 32;
    g.physical_width_m = 1.5;
    RegionPartition part;
    part.gaze = {10, 12};
    const RegionWeights w = partition_weights(g, part);
    const ImagePatch a = test::random_patch(32, 48, 1);
    const ImagePatch b = test::random_patch(32, 48, 2);
    const ImagePatch c = test::random_patch(32, 48, 3);
    const ImagePatch out = composite_foveated(a, b, c, w);
    double worst = 0.0;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 48; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          const double expected =
              w.fovea(y, x) * a(y, x, ch) + w.near(y, x) * b(y, x, ch) + w.far(y, x) * c(y, x, ch);
          worst = std::max(worst, std::abs(out(y, x, ch) - expected));
        }
      }
    }
    CHECK(worst < 1e-7);
    CHECK(max_abs_diff(composite_foveated(a, a, a, w).pixels(), a.pixels()) < 1e-12);
  }

  TEST_CASE("composite with all-near weights returns near") {
    const ImagePatch a = test::random_patch(16, 16, 1);
    const ImagePatch b = test::random_patch(16, 16, 2);
    RegionWeights w{Image(16, 16, 1, 0.0), Image(16, 16, 1, 1.0), Image(16, 16, 1, 0.0)};
    CHECK(max_abs_diff(composite_foveated(a, b, a, w).pixels(), b.pixels()) == 0.0);
    CHECK_THROWS_AS(composite_foveated(a, test::random_patch(16, 17, 2), a, w), ValidationError);
  }
}
