#include "fovrec/foveation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fovrec/errors.hpp"

namespace fovrec {

namespace {
constexpr double kDegPerRad = 180.0 / M_PI;
constexpr double kMetersPerInch = 0.0254;
}  // namespace

FieldGeometry FieldGeometry::from_diagonal(double diagonal_inches, int width_px, int height_px,
                                           double viewing_distance_m) {
  const double diag_px = std::hypot(width_px, height_px);
  FieldGeometry g;
  g.width_px = width_px;
  g.height_px = height_px;
  g.physical_width_m = diagonal_inches * kMetersPerInch * width_px / diag_px;
  g.viewing_distance_m = viewing_distance_m;
  g.validate();
  return g;
}

double FieldGeometry::pixel_pitch_m() const { return physical_width_m / width_px; }

double FieldGeometry::degrees_per_pixel() const {
  return std::atan(pixel_pitch_m() / viewing_distance_m) * kDegPerRad;
}

void FieldGeometry::validate() const {
  if (width_px <= 0 || height_px <= 0 || !(physical_width_m > 0.0) ||
      !(viewing_distance_m > 0.0)) {
    throw ValidationError("field geometry requires positive resolution, width and distance");
  }
}

double pixel_eccentricity(const FieldGeometry& geom, PixelPoint gaze, PixelPoint pixel) {
  const double offset_m = std::hypot(pixel.x - gaze.x, pixel.y - gaze.y) * geom.pixel_pitch_m();
  return std::atan(offset_m / geom.viewing_distance_m) * kDegPerRad;
}

void RegionPartition::validate() const {
  if (!(near_boundary_deg > 0.0) || !(far_boundary_deg > near_boundary_deg)) {
    throw ValidationError("region partition requires 0 < near boundary < far boundary");
  }
  if (!(blend_band_deg >= 0.0)) throw ValidationError("blend band must be >= 0");
  if (blend_band_deg > near_boundary_deg ||
      blend_band_deg > far_boundary_deg - near_boundary_deg) {
    throw ValidationError("blend band of " + std::to_string(blend_band_deg) +
                          " deg is wider than a region");
  }
}

namespace {

// 1 below the ramp, 0 above it, linear in between.
double falling_ramp(double e, double boundary, double band) {
  if (band == 0.0) return e < boundary ? 1.0 : 0.0;
  return std::clamp((boundary + 0.5 * band - e) / band, 0.0, 1.0);
}

}  // namespace

RegionBlend region_blend(const RegionPartition& part, double eccentricity_deg) {
  const double inside_near = falling_ramp(eccentricity_deg, part.near_boundary_deg,
                                          part.blend_band_deg);
  const double inside_far = falling_ramp(eccentricity_deg, part.far_boundary_deg,
                                         part.blend_band_deg);
  // inside_near <= inside_far because the ramps cannot overlap (validated).
  return {inside_near, inside_far - inside_near, 1.0 - inside_far};
}

RegionWeights partition_weights(const FieldGeometry& geom, const RegionPartition& part) {
  geom.validate();
  part.validate();
  RegionWeights w{Image(geom.height_px, geom.width_px, 1), Image(geom.height_px, geom.width_px, 1),
                  Image(geom.height_px, geom.width_px, 1)};
  for (int y = 0; y < geom.height_px; ++y) {
    for (int x = 0; x < geom.width_px; ++x) {
      const double e = pixel_eccentricity(geom, part.gaze, {double(x), double(y)});
      const RegionBlend b = region_blend(part, e);
      w.fovea(y, x) = b.fovea;
      w.near(y, x) = b.near;
      w.far(y, x) = b.far;
    }
  }
  return w;
}

ImagePatch composite_foveated(const ImagePatch& full, const ImagePatch& near,
                              const ImagePatch& far, const RegionWeights& weights) {
  const Image& a = full.pixels();
  if (!a.same_shape(near.pixels()) || !a.same_shape(far.pixels())) {
    throw ValidationError("composite_foveated: image dimensions differ");
  }
  for (const Image* w : {&weights.fovea, &weights.near, &weights.far}) {
    if (w->height() != a.height() || w->width() != a.width() || w->channels() != 1) {
      throw ValidationError("composite_foveated: weight map dimensions differ from images");
    }
  }
  const ImagePatch un = near.to_unit();
  const ImagePatch uf = far.to_unit();
  const ImagePatch ua = full.to_unit();
  Image out(a.height(), a.width(), 3);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const double wf = weights.fovea(y, x), wn = weights.near(y, x), wr = weights.far(y, x);
      for (int c = 0; c < 3; ++c) {
        const double va = ua(y, x, c), vn = un(y, x, c), vr = uf(y, x, c);
        // Equal inputs pass through exactly; the weights need not sum to one in floating point.
        out(y, x, c) = (va == vn && va == vr) ? va : wf * va + wn * vn + wr * vr;
      }
    }
  }
  return ImagePatch(std::move(out));
}

}  // namespace fovrec
