#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fovrec/errors.hpp"
#include "fovrec/filter.hpp"
#include "fovrec/image.hpp"
#include "test_util.hpp"

using namespace fovrec;

TEST_SUITE("image") {
  TEST_CASE("patch range contract") {
    CHECK_THROWS_AS(ImagePatch(Image(16, 16, 3, 1.5)), ValidationError);
    CHECK_THROWS_AS(ImagePatch(Image(15, 16, 3, 0.5)), ValidationError);
    CHECK_THROWS_AS(ImagePatch(Image(16, 16, 1, 0.5)), ValidationError);
    CHECK_NOTHROW(ImagePatch(Image(16, 16, 3, -0.5), RangeTag::kSigned));
    CHECK_THROWS_AS(ImagePatch(Image(16, 16, 3, -0.5), RangeTag::kUnit), ValidationError);
  }

  TEST_CASE("unit and signed conversions invert") {
    const ImagePatch p = test::random_patch(16, 20, 3);
    const ImagePatch s = p.to_signed();
    CHECK(s.range() == RangeTag::kSigned);
    CHECK(max_abs_diff(s.to_unit().pixels(), p.pixels()) < 1e-15);
    CHECK(s(3, 4, 1) == doctest::Approx(2.0 * p(3, 4, 1) - 1.0));
  }

  TEST_CASE("png round trip quantizes to 8 bits") {
    const auto dir = std::filesystem::temp_directory_path() / "fovrec_test_image";
    const ImagePatch p = test::random_patch(16, 24, 11);
    write_png(p, dir / "a.png");
    const ImagePatch q = read_image(dir / "a.png");
    CHECK(q.height() == 16);
    CHECK(q.width() == 24);
    CHECK(max_abs_diff(p.pixels(), q.pixels()) <= 0.5 / 255.0 + 1e-12);
    CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
  }

  TEST_CASE("bundled images load") {
    const ImagePatch img = read_image(std::filesystem::path(FOVREC_DATA_DIR) / "images/brick.png");
    CHECK(img.height() == 256);
    CHECK(img.width() == 256);
  }

  TEST_CASE("blur identity at zero sigma") {
    const ImagePatch p = test::random_patch(16, 16, 5);
    CHECK(max_abs_diff(gaussian_blur(p, 0.0).pixels(), p.pixels()) == 0.0);
    CHECK_THROWS_AS(gaussian_blur(p, -1.0), ValidationError);
  }

  TEST_CASE("blur keeps constants") {
    const Image c(24, 24, 3, 0.3);
    CHECK(max_abs_diff(gaussian_blur(c, 2.0), c) < 1e-12);
  }

  TEST_CASE("blur of an impulse is the sampled gaussian") {
    Image img(21, 21, 1);
    img(10, 10) = 1.0;
    const Image out = gaussian_blur(img, 1.0);
    double norm = 0.0;
    for (int i = -3; i <= 3; ++i) norm += std::exp(-0.5 * i * i);
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) {
        const double expected = std::exp(-0.5 * (dx * dx + dy * dy)) / (norm * norm);
        CHECK(out(10 + dy, 10 + dx) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
    CHECK(out(10, 14) == 0.0);
  }

  TEST_CASE("blur is linear and preserves the mean") {
    for (int trial = 0; trial < 5; ++trial) {
      const Image x = test::random_image(32, 32, 3, 100 + trial);
      const Image y = test::random_image(32, 32, 3, 200 + trial);
      const double a = 0.7, b = -1.3;
      const Image lhs = gaussian_blur(a * x + b * y, 1.5);
      const Image rhs = a * gaussian_blur(x, 1.5) + b * gaussian_blur(y, 1.5);
      CHECK(max_abs_diff(lhs, rhs) < 1e-6);
    }
    // Kernel mass is conserved away from the borders: random content
    // surrounded by a zero margin wider than the kernel keeps its mean.
    Image framed(40, 40, 3);
    const Image inner = test::random_image(20, 20, 3, 9);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) {
        for (int c = 0; c < 3; ++c) framed(10 + y, 10 + x, c) = inner(y, x, c);
      }
    }
    const Image blurred = gaussian_blur(framed, 1.5);
    double m0 = 0.0, m1 = 0.0;
    for (double v : framed.data()) m0 += v;
    for (double v : blurred.data()) m1 += v;
    CHECK(std::abs(m0 - m1) / static_cast<double>(framed.size()) < 1e-6);
  }

  TEST_CASE("blur lowers nyquist energy") {
    Image checker(16, 16, 1);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) checker(y, x) = ((x + y) % 2) ? 1.0 : -1.0;
    }
    const Image out = gaussian_blur(checker, 0.5);
    double e0 = 0.0, e1 = 0.0;
    for (double v : checker.data()) e0 += v * v;
    for (double v : out.data()) e1 += v * v;
    CHECK(e1 < e0);
  }
}
