#pragma once

#include <cmath>

#include "ncb/base.hpp"
#include "ncb/numerics.hpp"

namespace ncb {

// Lift of a velocity onto the paraboloid in R^4: v -> (v, |v|^2/2).
inline Vec4 lift(const Vec3& v) {
  return {v.x, v.y, v.z, 0.5 * norm2(v)};
}

// Tangent map tau_v: R^3 -> R^3. Sends the horizontal hyperplane to the
// hyperplane tangent to the paraboloid at lift(v). At v = 0 the correction
// term has limit 0, so tau_0 is the identity.
inline Vec3 tangent_tau(const Vec3& v, const Vec3& u) {
  const double v2 = norm2(v);
  if (v2 == 0) return u;
  const double beta = 1.0 - 1.0 / bracket(v);
  return u - (beta * dot(v, u) / v2) * v;
}

// Lifted tangent map tau_hat_v: R^3 -> R^4, an isometry onto the tangent
// hyperplane: |tau_hat_v u| = |u|.
inline Vec4 tangent_tau_hat(const Vec3& v, const Vec3& u) {
  const Vec3 t = tangent_tau(v, u);
  return {t.x, t.y, t.z, dot(v, u) / bracket(v)};
}

// det(tau_v) = <v>^{-1}; Jacobian of the substituted projection integrals.
inline double tangent_jacobian(const Vec3& v) { return 1.0 / bracket(v); }

struct PostCollision {
  Vec3 v_prime;
  Vec3 v_star_prime;
};

// Elastic collision output velocities for scattering direction sigma.
inline PostCollision post_collision(const Vec3& v, const Vec3& v_star, const Vec3& sigma) {
  if (std::abs(norm(sigma) - 1.0) > 1e-10)
    throw InvalidInput("post_collision: sigma must be a unit vector");
  const Vec3 mid = 0.5 * (v + v_star);
  const Vec3 half = (0.5 * norm(v - v_star)) * sigma;
  return {mid + half, mid - half};
}

struct DeviationRelation {
  double cos_theta;          // <k, sigma>
  double displacement_norm;  // |v - v'|
  double identity_residual;  // |v-v'|^2 - (|v-v_*|^2/2)(1 - cos theta)
};

inline DeviationRelation deviation_relation(const Vec3& v, const Vec3& v_star,
                                            const Vec3& sigma) {
  const Vec3 rel = v - v_star;
  const double r = norm(rel);
  if (r == 0) throw InvalidInput("deviation_relation: v == v_star, k undefined");
  const double cos_theta = dot(rel / r, sigma);
  const Vec3 vp = post_collision(v, v_star, sigma).v_prime;
  const double disp = norm(v - vp);
  const double residual = disp * disp - 0.5 * r * r * (1.0 - cos_theta);
  return {cos_theta, disp, residual};
}

// Two-dimensional plane through base_point, normal along base_point - other,
// with a polar sampler p(rho, alpha) = base + rho (cos a e1 + sin a e2).
struct CarlemanPlane {
  Vec3 base_point;
  Vec3 normal;
  Vec3 axis1, axis2;

  Vec3 point(double rho, double alpha) const {
    return base_point + rho * (std::cos(alpha) * axis1 + std::sin(alpha) * axis2);
  }
};

inline CarlemanPlane carleman_plane(const Vec3& base, const Vec3& other) {
  const Vec3 d = base - other;
  const double dn = norm(d);
  if (dn == 0) throw InvalidInput("carleman_plane: coincident base and other");
  CarlemanPlane plane;
  plane.base_point = base;
  plane.normal = d / dn;
  orthonormal_frame(plane.normal, plane.axis1, plane.axis2);
  return plane;
}

// Jacobian of the interpolated-point change of variables
// u = theta v' + (1-theta) v along the collision segment.
inline double interp_jacobian(double theta, double cos_dev) {
  if (theta < 0 || theta > 1) throw InvalidInput("interp_jacobian: theta outside [0,1]");
  if (cos_dev < -1 || cos_dev > 1) throw InvalidInput("interp_jacobian: cos_dev outside [-1,1]");
  const double a = 1.0 - 0.5 * theta;
  return a * a * (a + 0.5 * theta * cos_dev);
}

}  // namespace ncb
