#pragma once

#include "fovrec/image.hpp"

namespace fovrec {

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

// Display geometry. The eye sits on the display normal through the gaze
// point at viewing_distance_m.
struct FieldGeometry {
  int width_px = 3840;
  int height_px = 2160;
  double physical_width_m = 0.5977;
  double viewing_distance_m = 0.70;

  // Width from the diagonal and the pixel aspect ratio (square pixels).
  static FieldGeometry from_diagonal(double diagonal_inches, int width_px, int height_px,
                                     double viewing_distance_m);

  double pixel_pitch_m() const;
  // Angle subtended by one pixel next to the gaze point.
  double degrees_per_pixel() const;
  void validate() const;
};

// Visual angle in degrees between gaze and pixel: atan(offset / distance).
double pixel_eccentricity(const FieldGeometry& geom, PixelPoint gaze, PixelPoint pixel);

struct RegionPartition {
  PixelPoint gaze;
  double near_boundary_deg = 8.0;
  double far_boundary_deg = 14.0;
  // Width of the linear ramp centred on each boundary.
  double blend_band_deg = 1.0;

  void validate() const;
};

struct RegionWeights {
  Image fovea;
  Image near;
  Image far;
};

// Per-pixel convex weights for the fovea, near and far periphery over the
// geometry's full resolution.
RegionWeights partition_weights(const FieldGeometry& geom, const RegionPartition& part);

// Weights as a function of eccentricity alone: {fovea, near, far}.
struct RegionBlend {
  double fovea;
  double near;
  double far;
};
RegionBlend region_blend(const RegionPartition& part, double eccentricity_deg);

// out = w_fovea * full + w_near * near + w_far * far, per pixel.
ImagePatch composite_foveated(const ImagePatch& full, const ImagePatch& near,
                              const ImagePatch& far, const RegionWeights& weights);

}  // namespace fovrec
