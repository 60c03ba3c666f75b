#pragma once

#include <optional>

#include "distlift/geometry.hpp"

namespace distlift::camera {

struct Intrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 500.0;
  int width = 1000;
  int height = 1000;
};

// Radial (k1,k2,k3) and tangential (p1,p2) coefficients.  All zeros is the
// identity mapping.
struct DistortionParams {
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double p1 = 0.0, p2 = 0.0;
};

struct PixelPoint {
  double x = 0.0, y = 0.0;
};

struct NormalizedPoint {
  double x = 0.0, y = 0.0;
};

NormalizedPoint normalize(const Intrinsics& K, PixelPoint q);
PixelPoint unnormalize(const Intrinsics& K, NormalizedPoint n);

// Applies the distortion model in normalized coordinates.  Note the model
// multiplies *both* axes by the combined radial+tangential factor and then
// adds p*r^2 per axis; this is intentionally not the Brown-Conrady
// arrangement and must not be "corrected" to it.
NormalizedPoint distort_normalized(NormalizedPoint n, const DistortionParams& d);

// normalize -> distort_normalized -> unnormalize, composed exactly.
PixelPoint distort_pixel(const Intrinsics& K, const DistortionParams& d, PixelPoint q);

// Pinhole projection of a camera-space point, no distortion.  Depths at or
// below z_min (mm) are treated as degenerate.
PixelPoint project(const Intrinsics& K, const Vec3& p, double z_min = 1.0);

// Numerically inverts distort_normalized via damped Newton iteration,
// starting from the distorted point itself.  Returns nullopt when the
// residual does not fall below tol within max_iter iterations (expected for
// points far outside a heavy model's invertible region).  Test/diagnostic
// utility; no production path depends on it.
std::optional<NormalizedPoint> invert_distortion(NormalizedPoint distorted,
                                                 const DistortionParams& d,
                                                 int max_iter = 100,
                                                 double tol = 1e-12);

}  // namespace distlift::camera
