#pragma once

#include <cmath>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/grid.hpp"
#include "ncb/kernel.hpp"
#include "ncb/numerics.hpp"
#include "ncb/parallel.hpp"

namespace ncb {

// Collision frequency machinery.
//
// nu_tilde(v) = int dv_* dsigma B (M_* - M'_*) M_* depends only on |v|.
// The azimuthal integral of M'_* around k reduces to a Bessel factor:
//   int_0^{2pi} e^{-|v'_*|^2/4} dphi = 2 pi e^{-C/4} I0(r sin(theta) |m_perp| / 4),
// with m = (v+v_*)/2 and C = |m|^2 - r cos(theta) <m,k> + r^2/4, which leaves
// three nested smooth 1-D quadratures (r, psi, theta).

namespace nu_detail {

inline double nu_tilde_radial(const KernelParams& k, double speed, int n_rho = 40,
                              int n_ang = 48, int n_theta = 64) {
  // v_* integrated in spherical coordinates around the origin, where M_* is
  // radial; the integrand is then smooth in both rho = |v_*| and the angle
  // between v and v_* at every speed.
  const Vec3 v{0, 0, speed};
  const Quad1D qrho = gauss_legendre(n_rho, 0.0, 7.5);
  const Quad1D qca = gauss_legendre(n_ang, -1.0, 1.0);
  const double eps = 1e-4;
  const Quad1D qt = log_panels(eps, 0.5 * pi, 10, (n_theta + 9) / 10);
  const double m34 = std::pow(2.0 * pi, -0.75);

  double total = 0;
  for (std::size_t irho = 0; irho < qrho.x.size(); ++irho) {
    const double rho = qrho.x[irho];
    const double mstar = m34 * std::exp(-0.25 * rho * rho);
    double ang_acc = 0;
    for (std::size_t ia = 0; ia < qca.x.size(); ++ia) {
      const double ca = qca.x[ia];
      const double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
      const Vec3 vs{rho * sa, 0.0, rho * ca};
      const Vec3 rel = v - vs;
      const double r = norm(rel);
      if (r < 1e-12) continue;
      const double phik = phi_kinetic(k, r);
      if (phik == 0 || !std::isfinite(phik)) continue;
      const Vec3 kdir = rel / r;
      const Vec3 m = 0.5 * (v + vs);
      const double mk = dot(m, kdir);
      const double mperp = std::sqrt(std::max(0.0, norm2(m) - mk * mk));
      double th_acc = 0;
      for (std::size_t it = 0; it < qt.x.size(); ++it) {
        const double th = qt.x[it];
        const double c = norm2(m) - r * std::cos(th) * mk + 0.25 * r * r;
        const double logbes = log_bessel_i0(0.25 * r * std::sin(th) * mperp);
        const double avg_mprime = m34 * std::exp(-0.25 * c + logbes);
        th_acc += qt.w[it] * std::pow(th, -1.0 - 2.0 * k.s) * (mstar - avg_mprime);
      }
      ang_acc += qca.w[ia] * phik * th_acc;
    }
    // 2 pi from the azimuth of v_*, 2 pi from the sigma azimuth
    total += qrho.w[irho] * rho * rho * 4.0 * pi * pi * mstar * ang_acc;
  }
  return total;
}

}  // namespace nu_detail

// Radial table of nu_tilde with the leading-power split nu = c <v>^{gamma+2s}
// fitted on the tail, nu_K = nu_tilde - nu.
class CollisionFrequency {
 public:
  CollisionFrequency(const KernelParams& k, double speed_max = 16.0, int samples = 64)
      : k_(k), smax_(speed_max) {
    speeds_.resize(samples);
    table_.resize(samples);
    for (int i = 0; i < samples; ++i) speeds_[i] = speed_max * i / (samples - 1.0);
    std::vector<double> tmp(samples);
    parallel_for(static_cast<std::size_t>(samples),
                 [&](std::size_t i) { tmp[i] = nu_detail::nu_tilde_radial(k_, speeds_[i]); });
    table_ = tmp;
    // fit c on the far tail [0.75 smax, 0.95 smax], above the audit window
    double num = 0, den = 0;
    for (int i = 0; i < samples; ++i) {
      const double sp = speeds_[i];
      if (sp < 0.75 * speed_max || sp > 0.95 * speed_max) continue;
      const double w = std::pow(bracket(sp), k_.gamma_2s());
      num += table_[i] * w;
      den += w * w;
    }
    c_ = num / den;
    if (!(c_ > 0)) throw NumericalFailure("CollisionFrequency: nonpositive leading coefficient");
  }

  double nu_tilde(double speed) const { return interp(speed); }
  double nu(double speed) const { return c_ * std::pow(bracket(speed), k_.gamma_2s()); }
  double nu_k(double speed) const { return nu_tilde(speed) - nu(speed); }

  double nu_tilde(const Vec3& v) const { return nu_tilde(norm(v)); }
  double nu(const Vec3& v) const { return nu(norm(v)); }
  double nu_k(const Vec3& v) const { return nu_k(norm(v)); }

  double leading_coefficient() const { return c_; }
  const KernelParams& params() const { return k_; }

 private:
  double interp(double speed) const {
    if (speed >= smax_) {
      // beyond the table, extend with the fitted power plus the last
      // tabulated deviation damped to zero
      return nu(speed) + (table_.back() - nu(speeds_.back())) * std::exp(smax_ - speed);
    }
    const double x = speed / smax_ * (speeds_.size() - 1);
    const std::size_t i0 = std::min<std::size_t>(speeds_.size() - 2, static_cast<std::size_t>(x));
    const double t = x - i0;
    // monotone-friendly cubic on uniform radial samples
    const std::size_t im = i0 > 0 ? i0 - 1 : 0;
    const std::size_t ip = std::min(speeds_.size() - 1, i0 + 1);
    const std::size_t ipp = std::min(speeds_.size() - 1, i0 + 2);
    const double y0 = table_[im], y1 = table_[i0], y2 = table_[ip], y3 = table_[ipp];
    const double a = -0.5 * y0 + 1.5 * y1 - 1.5 * y2 + 0.5 * y3;
    const double b = y0 - 2.5 * y1 + 2.0 * y2 - 0.5 * y3;
    const double c = -0.5 * y0 + 0.5 * y2;
    return ((a * t + b) * t + c) * t + y1;
  }

  KernelParams k_;
  double smax_;
  double c_ = 0;
  std::vector<double> speeds_, table_;
};

// Brute-force oracle for nu_tilde at a single velocity: direct product
// quadrature over (v_*, sigma) without the Bessel reduction. Test-only
// companion; intentionally independent of the radial-table path.
inline double nu_tilde_bruteforce(const KernelParams& k, const Vec3& v, double star_radius = 7.0,
                                  double star_spacing = 0.5, int n_theta = 48, int n_phi = 24) {
  const double eps = 1e-4;
  const Quad1D qt = log_panels(eps, 0.5 * pi, 8, (n_theta + 7) / 8);
  const double wphi = 2.0 * pi / n_phi;
  const int m = static_cast<int>(std::ceil(star_radius / star_spacing) + 1);
  double total = 0;
  for (int ix = -m; ix <= m; ++ix)
    for (int iy = -m; iy <= m; ++iy)
      for (int iz = -m; iz <= m; ++iz) {
        const Vec3 vs{(ix + 0.5) * star_spacing, (iy + 0.5) * star_spacing,
                      (iz + 0.5) * star_spacing};
        if (norm2(vs) > star_radius * star_radius) continue;
        const Vec3 rel = v - vs;
        const double r = norm(rel);
        if (r < 1e-12) continue;
        const Vec3 kdir = rel / r;
        Vec3 e1, e2;
        orthonormal_frame(kdir, e1, e2);
        const double mstar = sqrt_maxwellian_value(vs);
        const double phik = phi_kinetic(k, r);
        const Vec3 mid = 0.5 * (v + vs);
        double acc = 0;
        for (std::size_t it = 0; it < qt.x.size(); ++it) {
          const double th = qt.x[it];
          const double ct = std::cos(th), st = std::sin(th);
          double inner = 0;
          for (int ip = 0; ip < n_phi; ++ip) {
            const double a = wphi * (ip + 0.5);
            const Vec3 sigma = ct * kdir + st * (std::cos(a) * e1 + std::sin(a) * e2);
            const Vec3 vsp = mid - (0.5 * r) * sigma;
            inner += mstar - sqrt_maxwellian_value(vsp);
          }
          acc += qt.w[it] * std::pow(th, -1.0 - 2.0 * k.s) * inner * wphi;
        }
        total += std::pow(star_spacing, 3) * mstar * phik * acc;
      }
  return total;
}

}  // namespace ncb
