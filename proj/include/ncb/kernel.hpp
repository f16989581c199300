#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ncb/base.hpp"
#include "ncb/geometry.hpp"
#include "ncb/numerics.hpp"

namespace ncb {

enum class KineticMode { power, regularized };

// Collision kernel description B = Phi(|v-v_*|) b(cos theta).
//
// The angular profile is pinned to the canonical choice
//   sin(theta) b(cos theta) = theta^{-1-2s} on (0, pi/2],  b = 0 beyond,
// which sits exactly in the middle of the admissible two-sided envelope
// (c_b = 1), so audits have a deterministic reference.
struct KernelParams {
  double gamma = 0;
  double s = 0.25;
  double c_b = 1;
  double c_phi = 1;
  double p = std::numeric_limits<double>::quiet_NaN();  // inverse-power exponent, if any
  KineticMode kinetic_mode = KineticMode::power;

  void validate() const {
    if (!(s > 0 && s < 1)) throw InvalidInput("KernelParams: s must lie in (0,1)");
    if (!(gamma > -std::min(2 * s, 1.5)))
      throw InvalidInput("KernelParams: gamma must exceed -min(2s, 3/2)");
    if (gamma + 2 * s < 0)
      throw InvalidInput("KernelParams: gamma + 2s >= 0 ensures a spectral gap");
    if (!(c_b > 0) || !(c_phi > 0)) throw InvalidInput("KernelParams: c_b, c_phi must be positive");
  }

  double gamma_2s() const { return gamma + 2 * s; }
};

// Inverse-power potential r^{-(p-1)}: gamma = (p-5)/(p-1), s = 1/(p-1).
inline KernelParams from_inverse_power(double p) {
  if (!(p > 3))
    throw InvalidInput("from_inverse_power: requires p > 3 (gamma + 2s >= 0 ensures a spectral gap)");
  KernelParams k;
  k.gamma = (p - 5) / (p - 1);
  k.s = 1.0 / (p - 1);
  k.p = p;
  k.kinetic_mode = KineticMode::power;
  k.validate();
  return k;
}

// sin(theta) * b(cos theta) for the canonical profile; this is the combination
// every spherical quadrature actually integrates.
inline double sin_b(const KernelParams& k, double theta) {
  if (theta <= 0) return std::numeric_limits<double>::infinity();
  if (theta > 0.5 * pi) return 0;
  return std::pow(theta, -1.0 - 2.0 * k.s);
}

// b(cos theta) itself. theta -> 0 yields an +inf sentinel; integrators must
// use the cutoff/substitution quadrature rather than sampling the pole.
inline double b_angular(const KernelParams& k, double cos_theta) {
  if (cos_theta < -1 || cos_theta > 1) throw InvalidInput("b_angular: cos_theta outside [-1,1]");
  if (cos_theta <= 0) return 0;  // supported on <k,sigma> >= 0
  const double theta = std::acos(std::min(1.0, cos_theta));
  if (theta == 0) return std::numeric_limits<double>::infinity();
  return sin_b(k, theta) / std::sin(theta);
}

// Symmetrization [b(t) + b(-t)] 1_{t>=0} of an arbitrary angular profile.
inline double symmetrized_b(const std::function<double(double)>& profile, double cos_theta) {
  if (cos_theta < 0) return 0;
  return profile(cos_theta) + profile(-cos_theta);
}

// Kinetic factor Phi(r).
inline double phi_kinetic(const KernelParams& k, double r) {
  if (r < 0) throw InvalidInput("phi_kinetic: negative separation");
  if (k.kinetic_mode == KineticMode::regularized)
    return k.c_phi * std::pow(bracket(r), k.gamma);
  if (r == 0) {
    if (k.gamma < 0) return std::numeric_limits<double>::infinity();
    if (k.gamma == 0) return k.c_phi;
    return 0;
  }
  return k.c_phi * std::pow(r, k.gamma);
}

// ---------------------------------------------------------------------------
// Dyadic decomposition of the |v - v'| singularity.
//
// chi_j is the indicator of (2^{-j-1}, 2^{-j}]. The half-open bands tile
// (0, oo) exactly, so partition completeness and the telescoping identities
// hold to rounding. |chi_j|_inf = 1 and supp chi_j = [2^{-j-1}, 2^{-j}].
// ---------------------------------------------------------------------------

struct DyadicIndex {
  int j = 0;
  double band_lo() const { return std::ldexp(1.0, -j - 1); }
  double band_hi() const { return std::ldexp(1.0, -j); }
};

inline double chi_dyadic(int j, double r) {
  if (r <= 0) return 0;
  const DyadicIndex d{j};
  return (r > d.band_lo() && r <= d.band_hi()) ? 1.0 : 0.0;
}

// Dyadic index whose band contains the separation r: r in (2^{-j-1}, 2^{-j}].
inline int dyadic_index_of(double r) {
  return static_cast<int>(std::floor(-std::log2(r)));
}

// B_j evaluated at a collision configuration.
inline double dyadic_kernel(const KernelParams& k, int j, const Vec3& v, const Vec3& v_star,
                            const Vec3& sigma) {
  const Vec3 rel = v - v_star;
  const double r = norm(rel);
  if (r == 0) throw InvalidInput("dyadic_kernel: v == v_star");
  const double cos_theta = dot(rel / r, sigma);
  const Vec3 vp = post_collision(v, v_star, sigma).v_prime;
  const double chi = chi_dyadic(j, norm(v - vp));
  if (chi == 0) return 0;
  return phi_kinetic(k, r) * b_angular(k, cos_theta) * chi;
}

// Deviation-angle window of band j at relative speed r:
// |v - v'| = r sin(theta/2) in (2^{-j-1}, 2^{-j}], intersected with (0, pi/2].
// Returns false when the band is empty.
inline bool dyadic_theta_window(int j, double rel_speed, double& theta_lo, double& theta_hi) {
  const DyadicIndex d{j};
  const double s_lo = d.band_lo() / rel_speed;
  const double s_hi = d.band_hi() / rel_speed;
  const double s_max = std::sin(0.25 * pi);  // theta = pi/2
  if (s_lo >= s_max) return false;
  theta_lo = 2.0 * std::asin(s_lo);
  theta_hi = 2.0 * std::asin(std::min(s_hi, s_max));
  return theta_hi > theta_lo;
}

struct SphereIntegralAudit {
  double value;        // integral of B_j over the sphere
  double bound_ratio;  // value / (2^{2sj} <rel_speed>^{gamma+2s})
};

// Integrates B_j over S^2 with the theta-substituted quadrature and reports
// the ratio against the dyadic envelope 2^{2sj} <r>^{gamma+2s}.
inline SphereIntegralAudit sphere_integral_bound_audit(const KernelParams& k, int j,
                                                       double rel_speed, int nodes = 48) {
  if (!(rel_speed > 0)) throw InvalidInput("sphere_integral_bound_audit: rel_speed must be positive");
  double lo, hi;
  const double envelope =
      std::pow(2.0, 2.0 * k.s * j) * std::pow(bracket(rel_speed), k.gamma_2s());
  if (!dyadic_theta_window(j, rel_speed, lo, hi)) return {0.0, 0.0};

  // In tau = log theta the integrand Phi * theta^{-2s} is smooth on the band.
  auto value_with = [&](int n) {
    Quad1D q = gauss_legendre(n, std::log(lo), std::log(hi));
    double acc = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double theta = std::exp(q.x[i]);
      acc += q.w[i] * std::pow(theta, -2.0 * k.s);
    }
    return 2.0 * pi * phi_kinetic(k, rel_speed) * acc;
  };
  const double coarse = value_with(nodes / 2);
  const double fine = value_with(nodes);
  if (std::abs(fine - coarse) > 1e-8 * std::abs(fine) + 1e-300)
    throw NumericalFailure("sphere_integral_bound_audit: quadrature did not converge");
  return {fine, fine / envelope};
}

}  // namespace ncb
