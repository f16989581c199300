#pragma once

#include <cmath>
#include <vector>

#include "ncb/base.hpp"
#include "ncb/geometry.hpp"
#include "ncb/grid.hpp"
#include "ncb/numerics.hpp"
#include "ncb/parallel.hpp"

namespace ncb {

// Radial C_c^infty bump on the unit ball of R^4,
//   phi(x) = c * exp(-1 / (1 - |scale x|^2)),
// normalized so that the tangent-plane integral of phi(tau_hat_v u) over
// R^3 equals 1 (the constant is v-independent because tau_hat_v is an
// isometry). An optional rescale phi(c x) shrinks the support.
struct ScalingProfile {
  double scale = 1.0;
  double norm_const = 1.0;

  static ScalingProfile make(double scale = 1.0) {
    ScalingProfile p;
    p.scale = scale;
    const double radial = adaptive_simpson(
        [](double t) { return t * t * std::exp(-1.0 / (1.0 - t * t)); }, 0.0, 1.0 - 1e-14,
        1e-15);
    p.norm_const = scale * scale * scale / (4.0 * pi * radial);
    return p;
  }

  double support_radius() const { return 1.0 / scale; }

  double value(const Vec4& x) const {
    const double t = norm2(x) * scale * scale;
    if (t >= 1.0) return 0.0;
    return norm_const * std::exp(-1.0 / (1.0 - t));
  }

  // gradient and Hessian of the bump (guarded against the support edge,
  // where all derivatives vanish faster than the rational factors grow)
  Vec4 gradient(const Vec4& x) const {
    const double s2 = scale * scale;
    const double t = norm2(x) * s2;
    if (t >= 1.0 - 1e-12) return {0, 0, 0, 0};
    const double om = 1.0 - t;
    const double g1 = -1.0 / (om * om);
    const double f = norm_const * std::exp(-1.0 / om);
    return x * (2.0 * s2 * g1 * f);
  }

  void hessian(const Vec4& x, double h[4][4]) const {
    const double s2 = scale * scale;
    const double t = norm2(x) * s2;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) h[a][b] = 0;
    if (t >= 1.0 - 1e-12) return;
    const double om = 1.0 - t;
    const double g1 = -1.0 / (om * om);
    const double g2 = -2.0 / (om * om * om);
    const double f = norm_const * std::exp(-1.0 / om);
    const double diag = 2.0 * s2 * g1 * f;
    const double quad = 4.0 * s2 * s2 * (g1 * g1 + g2) * f;
    for (int a = 0; a < 4; ++a) {
      h[a][a] = diag;
      for (int b = 0; b < 4; ++b) h[a][b] += quad * x[a] * x[b];
    }
  }
};

// Polar product quadrature in the tangent parameter u: Gauss-Legendre in the
// radius (which resolves the bump's boundary layer) times a Gauss x uniform
// tensor rule on the sphere.
struct LpQuad {
  int n_r = 48;  // the radial boundary layer of the bump dominates the error
  int n_polar = 8;
  int n_azimuth = 12;

  template <class Body>
  void for_each(const ScalingProfile& prof, Body&& body) const {
    // The support in u extends slightly past the bump radius at coarse levels
    // (the lifted fourth coordinate can pull |z| below |u|, up to |u| ~ 1.12
    // at j = 0); 1.2x covers it with margin.
    const double L = 1.2 * prof.support_radius();
    const Quad1D& qr = gauss_legendre(n_r);
    const Quad1D& qc = gauss_legendre(n_polar);
    const double wphi = 2.0 * pi / n_azimuth;
    for (int ir = 0; ir < n_r; ++ir) {
      const double r = 0.5 * L * (qr.x[ir] + 1.0);
      const double wr = 0.5 * L * qr.w[ir] * r * r;
      for (int ic = 0; ic < n_polar; ++ic) {
        const double ct = qc.x[ic];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        const double w = wr * qc.w[ic] * wphi;
        for (int ip = 0; ip < n_azimuth; ++ip) {
          const double phi = wphi * (ip + 0.5);
          body(Vec3{r * st * std::cos(phi), r * st * std::sin(phi), r * ct}, w);
        }
      }
    }
  }
};

// Values of the level-j projection and of its R^4 extension derivatives at a
// single velocity. grad/hess are filled only when requested.
struct LpPointValues {
  double p = 0;
  Vec4 grad{0, 0, 0, 0};
  double hess[4][4] = {};
};

// Evaluates P_j f (and optionally the 4-gradient / 4-Hessian of the natural
// R^4 extension) at v, through the tangent substitution v' = v + 2^{-j} tau_v u.
template <class F>
LpPointValues lp_point(int j, const F& f, const ScalingProfile& prof, const Vec3& v,
                       const LpQuad& quad, bool want_derivatives = false) {
  if (j < 0) throw InvalidInput("lp_point: level must be nonnegative");
  LpPointValues out;
  const double scale_j = std::ldexp(1.0, -j);  // 2^{-j}
  const double two_j = std::ldexp(1.0, j);
  const double jac = tangent_jacobian(v);
  quad.for_each(prof, [&](const Vec3& u, double w) {
    const Vec3 vp = v + scale_j * tangent_tau(v, u);
    const Vec4 delta = lift(v) - lift(vp);
    const Vec4 z = delta * two_j;  // argument of the kernel, 2^j (v_hat - v_hat')
    const double phi = prof.value(z);
    if (phi == 0 && !want_derivatives) return;
    const double common = w * jac * bracket(vp) * f(vp);
    out.p += phi * common;
    if (want_derivatives) {
      const Vec4 g = prof.gradient(z);
      out.grad = out.grad + g * (two_j * common);
      double h[4][4];
      prof.hessian(z, h);
      const double hw = two_j * two_j * common;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) out.hess[a][b] += h[a][b] * hw;
    }
  });
  return out;
}

// Q_j = P_j - P_{j-1} (Q_0 = P_0) with the same derivative payloads.
template <class F>
LpPointValues lp_point_q(int j, const F& f, const ScalingProfile& prof, const Vec3& v,
                         const LpQuad& quad, bool want_derivatives = false) {
  LpPointValues hi = lp_point(j, f, prof, v, quad, want_derivatives);
  if (j == 0) return hi;
  const LpPointValues lo = lp_point(j - 1, f, prof, v, quad, want_derivatives);
  hi.p -= lo.p;
  hi.grad = hi.grad - lo.grad;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) hi.hess[a][b] -= lo.hess[a][b];
  return hi;
}

// |grad_4|^k of the Q_j extension from the point values: k = 0 -> |Q_j f|,
// k = 1 -> Euclidean norm of the 4-gradient, k = 2 -> spectral norm of the
// 4x4 Hessian (the sup over |xi| <= 1 of |(xi . grad)^k| is attained there).
inline double lp_deriv_norm(const LpPointValues& q, int k) {
  switch (k) {
    case 0:
      return std::abs(q.p);
    case 1:
      return norm(q.grad);
    case 2: {
      double m[4][4];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) m[a][b] = q.hess[a][b];
      return spectral_norm_sym4(m);
    }
    default:
      throw InvalidInput("lp_deriv_norm: k must be 0, 1 or 2");
  }
}

// ---------------------------------------------------------------------------
// Grid-backed operations
// ---------------------------------------------------------------------------

inline void check_lp_resolution(int j, const VelocityGrid& g) {
  if (std::ldexp(1.0, -j) < 2.0 * g.spacing())
    throw InvalidInput("project_p: level under-resolved (2^-j below two grid spacings)");
}

template <class F>
GridFunction project_p(int j, const F& f, const ScalingProfile& prof,
                       std::shared_ptr<const VelocityGrid> grid, const LpQuad& quad = {}) {
  GridFunction out(grid);
  const VelocityGrid& g = *grid;
  parallel_for(g.size(), [&](std::size_t i) {
    out[i] = lp_point(j, f, prof, g.node(i), quad).p;
  });
  return out;
}

inline GridFunction project_p(int j, const GridFunction& f, const ScalingProfile& prof,
                              const LpQuad& quad = {}) {
  check_lp_resolution(j, f.grid());
  return project_p(j, [&f](const Vec3& v) { return f(v); }, prof, f.grid_ptr(), quad);
}

template <class F>
GridFunction project_q(int j, const F& f, const ScalingProfile& prof,
                       std::shared_ptr<const VelocityGrid> grid, const LpQuad& quad = {}) {
  GridFunction out(grid);
  const VelocityGrid& g = *grid;
  parallel_for(g.size(), [&](std::size_t i) {
    out[i] = lp_point_q(j, f, prof, g.node(i), quad).p;
  });
  return out;
}

inline GridFunction project_q(int j, const GridFunction& f, const ScalingProfile& prof,
                              const LpQuad& quad = {}) {
  check_lp_resolution(j, f.grid());
  return project_q(j, [&f](const Vec3& v) { return f(v); }, prof, f.grid_ptr(), quad);
}

// Restriction of |grad_4|^k Q_j f to the paraboloid, sampled on the grid.
template <class F>
GridFunction extended_derivative(int j, const F& f, const ScalingProfile& prof, int k,
                                 std::shared_ptr<const VelocityGrid> grid,
                                 const LpQuad& quad = {}) {
  if (k < 1 || k > 2) throw InvalidInput("extended_derivative: k must be 1 or 2");
  GridFunction out(grid);
  const VelocityGrid& g = *grid;
  parallel_for(g.size(), [&](std::size_t i) {
    out[i] = lp_deriv_norm(lp_point_q(j, f, prof, g.node(i), quad, true), k);
  });
  return out;
}

// Square-function table: e[j][k] = 2^{2(s-k)j} || |grad_4|^k Q_j f ||^2_{L2_{gamma+2s}}
// integrated over the nodes of `grid` inside |v| <= ball_radius.
struct SquareFunctionReport {
  std::vector<std::array<double, 3>> levels;  // [j][k]
  std::array<double, 3> totals{0, 0, 0};
};

template <class F>
SquareFunctionReport square_function(const F& f, const ScalingProfile& prof, int J, double s,
                                     double gamma, const VelocityGrid& grid,
                                     double ball_radius, const LpQuad& quad = {}) {
  SquareFunctionReport rep;
  rep.levels.assign(J + 1, {0, 0, 0});
  const auto nodes = ball_nodes(grid, ball_radius);
  const double beta = gamma + 2 * s;
  for (int j = 0; j <= J; ++j) {
    std::vector<std::array<double, 3>> parts(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t ni) {
      const std::size_t i = nodes[ni];
      const Vec3 v = grid.node(i);
      const LpPointValues q = lp_point_q(j, f, prof, v, quad, true);
      const double wt = grid.weight(i) * std::pow(1.0 + norm2(v), 0.5 * beta);
      for (int k = 0; k < 3; ++k) {
        const double d = lp_deriv_norm(q, k);
        parts[ni][k] = wt * d * d;
      }
    });
    for (int k = 0; k < 3; ++k) {
      double acc = 0;
      for (const auto& p : parts) acc += p[k];
      rep.levels[j][k] = std::pow(2.0, 2.0 * (s - k) * j) * acc;
      rep.totals[k] += rep.levels[j][k];
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Expansion audits
// ---------------------------------------------------------------------------

// Residual of the second-order tangent expansion of the rescaled bump:
//   phi(2^j(lift(v + 2^-j tau_v u) - lift(v)))
//     = phi(tau_hat_v u) + 2^{-j-1} |tau_v u|^2 phi_4(tau_hat_v u) + O(2^{-2j}).
// The exact first-order Taylor coefficient is |tau_v u|^2 (the lifted step
// along e4); it is still odd in u through phi_4, which is what the moment
// cancellation below exploits.
inline double lp_expansion_residual(const ScalingProfile& prof, int j, const Vec3& v,
                                    const Vec3& u) {
  const double scale_j = std::ldexp(1.0, -j);
  const Vec3 vp = v + scale_j * tangent_tau(v, u);
  const Vec4 z = (lift(vp) - lift(v)) * std::ldexp(1.0, j);
  const Vec4 t = tangent_tau_hat(v, u);
  const double phi4 = prof.gradient(t).w;
  return prof.value(z) - prof.value(t) - 0.5 * scale_j * norm2(tangent_tau(v, u)) * phi4;
}

// Residual of the kernel moment identity:
//   | int 2^{3j} phi(2^j(v_hat - v_hat')) <v'>^beta dv'  -  <v>^{beta-1} | <~ 2^{-2j} <v>^{beta-1}
inline double lp_moment_residual(const ScalingProfile& prof, int j, const Vec3& v, double beta,
                                 const LpQuad& quad = {}) {
  auto weight_only = [beta](const Vec3& vp) {
    return std::pow(1.0 + norm2(vp), 0.5 * (beta - 1.0));
  };
  // fold <v'>^beta = <v'> * <v'>^{beta-1} into the P_j normalization
  const double val = lp_point(j, weight_only, prof, v, quad).p;
  return val - std::pow(1.0 + norm2(v), 0.5 * (beta - 1.0));
}

}  // namespace ncb
