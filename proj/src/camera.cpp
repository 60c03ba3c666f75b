#include "distlift/camera.hpp"

#include <cmath>

#include "distlift/errors.hpp"

namespace distlift::camera {
namespace {

bool finite_pair(double a, double b) {
  return std::isfinite(a) && std::isfinite(b);
}

void check_intrinsics(const Intrinsics& K) {
  if (!finite_pair(K.fx, K.fy) || !finite_pair(K.cx, K.cy) || K.fx <= 0.0 ||
      K.fy <= 0.0)
    throw InvalidInputError("camera: invalid intrinsics");
}

}  // namespace

NormalizedPoint normalize(const Intrinsics& K, PixelPoint q) {
  check_intrinsics(K);
  if (!finite_pair(q.x, q.y))
    throw InvalidInputError("normalize: non-finite pixel");
  return {(q.x - K.cx) / K.fx, (q.y - K.cy) / K.fy};
}

PixelPoint unnormalize(const Intrinsics& K, NormalizedPoint n) {
  check_intrinsics(K);
  if (!finite_pair(n.x, n.y))
    throw InvalidInputError("unnormalize: non-finite point");
  return {n.x * K.fx + K.cx, n.y * K.fy + K.cy};
}

NormalizedPoint distort_normalized(NormalizedPoint n, const DistortionParams& d) {
  if (!finite_pair(n.x, n.y))
    throw InvalidInputError("distort_normalized: non-finite point");
  const double r2 = n.x * n.x + n.y * n.y;
  const double r4 = r2 * r2;
  const double r6 = r4 * r2;
  const double dr = 1.0 + d.k1 * r2 + d.k2 * r4 + d.k3 * r6;
  const double dt = 2.0 * d.p1 * n.x + 2.0 * d.p2 * n.y;
  return {n.x * (dr + dt) + d.p1 * r2, n.y * (dr + dt) + d.p2 * r2};
}

PixelPoint distort_pixel(const Intrinsics& K, const DistortionParams& d, PixelPoint q) {
  return unnormalize(K, distort_normalized(normalize(K, q), d));
}

PixelPoint project(const Intrinsics& K, const Vec3& p, double z_min) {
  if (!(p.z > z_min))
    throw DegenerateGeometryError("project: depth at or below minimum");
  return {K.fx * (p.x / p.z) + K.cx, K.fy * (p.y / p.z) + K.cy};
}

std::optional<NormalizedPoint> invert_distortion(NormalizedPoint distorted,
                                                 const DistortionParams& d,
                                                 int max_iter, double tol) {
  double ax = distorted.x;
  double ay = distorted.y;

  auto residual = [&](double x, double y, double& rx, double& ry) {
    const NormalizedPoint f = distort_normalized({x, y}, d);
    rx = f.x - distorted.x;
    ry = f.y - distorted.y;
    return std::sqrt(rx * rx + ry * ry);
  };

  double rx = 0.0, ry = 0.0;
  double rnorm = residual(ax, ay, rx, ry);
  double damping = 1.0;

  for (int it = 0; it < max_iter; ++it) {
    if (rnorm <= tol) return NormalizedPoint{ax, ay};

    const double r2 = ax * ax + ay * ay;
    const double r4 = r2 * r2;
    const double dr = 1.0 + d.k1 * r2 + d.k2 * r4 + d.k3 * r4 * r2;
    const double dt = 2.0 * d.p1 * ax + 2.0 * d.p2 * ay;
    const double ddr = 2.0 * (d.k1 + 2.0 * d.k2 * r2 + 3.0 * d.k3 * r4);

    // Jacobian of distort_normalized at (ax, ay).
    const double j00 = (dr + dt) + ax * (ddr * ax + 2.0 * d.p1) + 2.0 * d.p1 * ax;
    const double j01 = ax * (ddr * ay + 2.0 * d.p2) + 2.0 * d.p1 * ay;
    const double j10 = ay * (ddr * ax + 2.0 * d.p1) + 2.0 * d.p2 * ax;
    const double j11 = (dr + dt) + ay * (ddr * ay + 2.0 * d.p2) + 2.0 * d.p2 * ay;

    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;

    const double sx = (j11 * rx - j01 * ry) / det;
    const double sy = (j00 * ry - j10 * rx) / det;

    const double nx = ax - damping * sx;
    const double ny = ay - damping * sy;
    double nrx = 0.0, nry = 0.0;
    const double nnorm = residual(nx, ny, nrx, nry);
    if (nnorm < rnorm) {
      ax = nx;
      ay = ny;
      rx = nrx;
      ry = nry;
      rnorm = nnorm;
      damping = std::min(1.0, damping * 2.0);
    } else {
      damping *= 0.5;
      if (damping < 1e-12) return std::nullopt;
    }
  }
  return rnorm <= tol ? std::optional<NormalizedPoint>({ax, ay}) : std::nullopt;
}

}  // namespace distlift::camera
